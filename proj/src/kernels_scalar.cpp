#include "watermap/kernels.hpp"

#include <cmath>
#include <cstring>

namespace watermap::kern {

namespace {

void sqdist_row_scalar(const double* point, const double* feat, std::size_t n,
                       std::size_t m, double* out) {
    std::memset(out, 0, n * sizeof(double));
    for (std::size_t k = 0; k < m; ++k) {
        const double pk = point[k];
        const double* fk = feat + k * n;
        for (std::size_t j = 0; j < n; ++j) {
            double d = fk[j] - pk;
            out[j] += d * d;
        }
    }
}

GaussianStats gaussian_stats_scalar(const double* d2, std::size_t n, double beta,
                                    double shift, double* weights) {
    double wsum = 0.0;
    double wd2sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double e = std::exp(-beta * (d2[j] - shift));
        wsum += e;
        wd2sum += d2[j] * e;
        if (weights) weights[j] = e;
    }
    return {wsum, wd2sum};
}

double cauchy_row_scalar(double xi, double yi, const double* x, const double* y,
                         std::size_t n, double* w) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double dx = x[j] - xi;
        double dy = y[j] - yi;
        double v = 1.0 / (1.0 + dx * dx + dy * dy);
        w[j] = v;
        sum += v;
    }
    return sum;
}

void grad_row_scalar(double xi, double yi, const double* x, const double* y,
                     const double* p, const double* w, double q_scale,
                     std::size_t n, double* gx, double* gy) {
    double ax = 0.0;
    double ay = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double m = (p[j] - w[j] * q_scale) * w[j];
        ax += m * (xi - x[j]);
        ay += m * (yi - y[j]);
    }
    *gx = ax;
    *gy = ay;
}

double kde_cell_scalar(double cx, double cy, const double* x, const double* y,
                       const double* beta, std::size_t n) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double dx = cx - x[j];
        double dy = cy - y[j];
        sum += beta[j] * std::exp(-beta[j] * (dx * dx + dy * dy));
    }
    return sum;
}

void vexp_scalar(const double* a, std::size_t n, double* out) {
    for (std::size_t j = 0; j < n; ++j) out[j] = std::exp(a[j]);
}

const Ops scalar_table = {
    "scalar",
    sqdist_row_scalar,
    gaussian_stats_scalar,
    cauchy_row_scalar,
    grad_row_scalar,
    kde_cell_scalar,
    vexp_scalar,
};

} // namespace

const Ops& scalar_ops() { return scalar_table; }

} // namespace watermap::kern
