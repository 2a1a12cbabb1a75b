#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "watermap/matrix.hpp"

namespace watermap {

enum class SourceKind { Coordinates, PrecomputedDistances };
enum class FileFormat { Csv, RawBin };

// Immutable input point set: either n observations in m dimensions, or an
// n x n matrix of precomputed distances (stored as given, squared at access).
struct DataSource {
    SourceKind kind = SourceKind::Coordinates;
    Matrix values;

    std::size_t n() const { return values.rows(); }
    std::size_t dims() const {
        return kind == SourceKind::Coordinates ? values.cols() : 0;
    }
};

struct GmmSpec {
    std::size_t dims = 2;
    std::size_t components = 1;
    std::size_t n = 0;
    std::uint64_t seed = 1;
    double separation = 6.0;
};

DataSource make_coordinates(Matrix values);
DataSource make_distances(Matrix values);

DataSource load_matrix(const std::string& path, FileFormat format,
                       bool as_distances, bool header);

double pairwise_distance2(const DataSource& src, std::size_t i, std::size_t j);

// PCA whitening: center, project onto the top keep_dims principal components,
// scale each to unit variance.
DataSource whiten(const DataSource& src, std::size_t keep_dims);

// Equally weighted isotropic unit-variance Gaussians; means drawn uniformly
// in a hypercube of side separation * components^(1/dims).
std::pair<DataSource, std::vector<int>> generate_gmm(const GmmSpec& spec);

} // namespace watermap
