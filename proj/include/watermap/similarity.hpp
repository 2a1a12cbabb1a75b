#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "watermap/matrix.hpp"

namespace watermap {

struct PerplexityTarget {
    double ppx = 30.0;
    double tol = 1e-5; // on ln-perplexity
    int max_iters = 100;
};

struct AffinityRow {
    double beta = 0.0;
    std::vector<double> probs; // over the candidate set, self excluded
    double achieved_ppx = 0.0;
};

// Symmetric joint distribution over ordered pairs, p_ii = 0, sums to 1.
struct JointAffinity {
    std::size_t n = 0;
    std::vector<double> p; // n*n row-major

    double operator()(std::size_t i, std::size_t j) const { return p[i * n + j]; }
    const double* row(std::size_t i) const { return p.data() + i * n; }
};

// Shannon entropy in bits; 0*log(0) := 0.
double entropy_bits(std::span<const double> probs);

// p_j = exp(-beta*d2_j) / sum_k exp(-beta*d2_k), stabilized by the minimum.
std::vector<double> conditional_row(std::span<const double> d2, double beta);

// ln(perplexity) via the simplification
// ln(v) = ln(C) + (beta/C) * sum_j d2_j exp(-beta*d2_j).
double s1_log_perplexity(std::span<const double> d2, double beta);

// Monotone bisection for the beta meeting target.ppx; bracket starts at
// [2^-30, 2^30] and is doubled/halved outward when the target lies outside.
AffinityRow beta_search(std::span<const double> d2, const PerplexityTarget& target);

// rows[i]: conditional distribution of point i over all n points, rows[i][i]==0.
// p_ij = (p_{j|i} + p_{i|j}) / (2n).
JointAffinity symmetrize(const std::vector<std::vector<double>>& rows);

enum class DegenerateRowPolicy { Throw, Uniform };

struct AffinityField {
    JointAffinity joint;
    std::vector<double> betas;
    std::size_t degenerate_rows = 0;
};

// Full-set affinities from an n x n squared-distance matrix (diagonal ignored).
AffinityField affinity_field(const Matrix& d2, const PerplexityTarget& target,
                             DegenerateRowPolicy policy);

// Mean normalized neighborhood entropy (H / log2(size)) of a Gaussian kernel
// with beta = 1 at the center of a 2-D standard normal sample of size-1
// neighbors, averaged over the requested number of samples per size.
std::vector<std::pair<std::size_t, double>> normalized_entropy_experiment(
    const std::vector<std::size_t>& sizes, std::size_t samples,
    std::uint64_t seed);

} // namespace watermap
