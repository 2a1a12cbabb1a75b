#pragma once

#include <cstddef>
#include <vector>

#include "watermap/errors.hpp"

namespace watermap {

// Dense row-major matrix of doubles.
class Matrix {
  public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* row(std::size_t r) { return data_.data() + r * cols_; }
    const double* row(std::size_t r) const { return data_.data() + r * cols_; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    bool operator==(const Matrix& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
    }

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Two-dimensional point set stored as parallel coordinate arrays.
struct Embedding {
    std::vector<double> x;
    std::vector<double> y;

    Embedding() = default;
    explicit Embedding(std::size_t n) : x(n, 0.0), y(n, 0.0) {}

    std::size_t size() const { return x.size(); }
};

} // namespace watermap
