#pragma once

#include <cstddef>

namespace watermap::kern {

enum class Backend { Auto, Scalar, Avx2 };

struct GaussianStats {
    double wsum;   // sum_j exp(-beta * (d2[j] - shift))
    double wd2sum; // sum_j d2[j] * exp(-beta * (d2[j] - shift))
};

// Hot inner loops behind a function table so that a vectorized variant can be
// substituted at runtime. Every entry is a pure function of its arguments and
// accumulates in a fixed order, so results do not depend on scheduling.
struct Ops {
    const char* name;

    // out[j] = sum_k (point[k] - feat[k*n + j])^2 for j in [0, n).
    // feat is feature-major: row k holds coordinate k of all n points.
    void (*sqdist_row)(const double* point, const double* feat, std::size_t n,
                       std::size_t m, double* out);

    // Shifted Gaussian row reductions. When weights != nullptr also stores
    // weights[j] = exp(-beta * (d2[j] - shift)).
    GaussianStats (*gaussian_stats)(const double* d2, std::size_t n, double beta,
                                    double shift, double* weights);

    // w[j] = 1 / (1 + (x[j]-xi)^2 + (y[j]-yi)^2), returns sum_j w[j].
    // Includes j == self (weight 1 there); the caller zeroes it out.
    double (*cauchy_row)(double xi, double yi, const double* x, const double* y,
                         std::size_t n, double* w);

    // gx = sum_j (p[j] - w[j]*q_scale) * w[j] * (xi - x[j]), gy likewise.
    void (*grad_row)(double xi, double yi, const double* x, const double* y,
                     const double* p, const double* w, double q_scale,
                     std::size_t n, double* gx, double* gy);

    // sum_j beta[j] * exp(-beta[j] * ((cx-x[j])^2 + (cy-y[j])^2)).
    double (*kde_cell)(double cx, double cy, const double* x, const double* y,
                       const double* beta, std::size_t n);

    // out[j] = exp(a[j]).
    void (*vexp)(const double* a, std::size_t n, double* out);
};

const Ops& scalar_ops();

// Table compiled with AVX2+FMA, or nullptr when the build lacks it.
const Ops* avx2_ops();

// True when an AVX2 table exists and the host CPU supports AVX2 and FMA.
bool avx2_available();

// Select the active backend. Auto picks AVX2 when available, else scalar.
// Forcing an unavailable backend throws ConfigError.
void select(Backend b);

Backend selected();
const Ops& active();

} // namespace watermap::kern
