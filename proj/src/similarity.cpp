#include "watermap/similarity.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <string>

#include "watermap/errors.hpp"
#include "watermap/io.hpp"
#include "watermap/kernels.hpp"
#include "watermap/rng.hpp"

namespace watermap {

namespace {

double min_of(std::span<const double> v) {
    double m = v[0];
    for (double x : v) m = std::min(m, x);
    return m;
}

bool all_equal(std::span<const double> v) {
    for (double x : v)
        if (x != v[0]) return false;
    return true;
}

} // namespace

double entropy_bits(std::span<const double> probs) {
    double sum = 0.0;
    for (double p : probs) {
        if (p < 0.0) throw NormalizationError("negative probability entry");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6)
        throw NormalizationError("probabilities sum to " + io::format_double(sum));
    double h = 0.0;
    for (double p : probs)
        if (p > 0.0) h -= p * std::log2(p);
    return h;
}

std::vector<double> conditional_row(std::span<const double> d2, double beta) {
    if (d2.empty()) throw ShapeError("empty distance row");
    if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
    const std::size_t k = d2.size();
    std::vector<double> probs(k);
    double shift = min_of(d2);
    auto stats =
        kern::active().gaussian_stats(d2.data(), k, beta, shift, probs.data());
    assert(stats.wsum > 0.0); // the shifted minimum always contributes 1
    double inv = 1.0 / stats.wsum;
    for (double& p : probs) p *= inv;
    return probs;
}

double s1_log_perplexity(std::span<const double> d2, double beta) {
    const std::size_t k = d2.size();
    double shift = min_of(d2);
    auto stats =
        kern::active().gaussian_stats(d2.data(), k, beta, shift, nullptr);
    // ln C = ln(sum_j e^{-beta d2_j}) = ln(wsum) - beta*shift,
    // (beta/C) sum_j d2_j e^{-beta d2_j} = beta * wd2sum / wsum.
    return std::log(stats.wsum) - beta * shift + beta * stats.wd2sum / stats.wsum;
}

AffinityRow beta_search(std::span<const double> d2,
                        const PerplexityTarget& target) {
    const std::size_t k = d2.size();
    if (k < 2) throw ShapeError("beta search needs at least 2 candidates");
    for (double v : d2)
        if (!(v >= 0.0) || !std::isfinite(v))
            throw ShapeError("squared distances must be finite and >= 0");
    if (!(target.ppx > 1.0) || target.ppx > static_cast<double>(k))
        throw ConfigError("target perplexity " + io::format_double(target.ppx) +
                          " outside (1, " + std::to_string(k) + "]");
    if (!(target.tol > 0.0)) throw ConfigError("tol must be > 0");

    if (all_equal(d2)) {
        // Realized perplexity is k for every beta.
        if (std::abs(std::log(target.ppx) - std::log(static_cast<double>(k))) <=
            target.tol) {
            AffinityRow row;
            row.beta = 1.0;
            row.probs.assign(k, 1.0 / static_cast<double>(k));
            row.achieved_ppx = static_cast<double>(k);
            return row;
        }
        throw DegenerateRowError(
            "all distances equal; realized perplexity is fixed at " +
            std::to_string(k));
    }

    const double want = std::log(target.ppx);
    double lo = std::ldexp(1.0, -30);
    double hi = std::ldexp(1.0, 30);
    double f_lo = s1_log_perplexity(d2, lo);
    double f_hi = s1_log_perplexity(d2, hi);

    // ln-perplexity is strictly decreasing in beta; expand the bracket until
    // it straddles the target.
    int expand = 0;
    while (f_lo < want) {
        if (std::abs(f_lo - want) <= target.tol) break;
        lo *= 0.5;
        f_lo = s1_log_perplexity(d2, lo);
        if (++expand > 200)
            throw NoConvergenceError("bracket expansion failed toward beta=0");
    }
    expand = 0;
    while (f_hi > want) {
        if (std::abs(f_hi - want) <= target.tol) break;
        hi *= 2.0;
        f_hi = s1_log_perplexity(d2, hi);
        if (++expand > 200)
            throw NoConvergenceError("bracket expansion failed toward beta=inf");
    }

    double beta = lo;
    double f = f_lo;
    bool converged = false;
    for (int it = 0; it < target.max_iters; ++it) {
        beta = std::sqrt(lo * hi);
        f = s1_log_perplexity(d2, beta);
        if (f > want)
            lo = beta;
        else
            hi = beta;
        // Keep tightening past the functional tolerance so the returned beta
        // itself is pinned, not just the realized perplexity.
        if (std::abs(f - want) <= target.tol && (hi - lo) <= 1e-6 * beta) {
            converged = true;
            break;
        }
    }
    if (!converged && std::abs(f - want) > target.tol)
        throw NoConvergenceError("beta search: |ln ppx - ln target| = " +
                                 io::format_double(std::abs(f - want)) +
                                 " after " + std::to_string(target.max_iters) +
                                 " iterations");

    AffinityRow row;
    row.beta = beta;
    row.probs = conditional_row(d2, beta);
    row.achieved_ppx = std::exp(f);
    return row;
}

JointAffinity symmetrize(const std::vector<std::vector<double>>& rows) {
    const std::size_t n = rows.size();
    if (n < 2) throw ShapeError("symmetrize needs at least 2 points");
    for (std::size_t i = 0; i < n; ++i) {
        if (rows[i].size() != n)
            throw ShapeError("row " + std::to_string(i) + " has " +
                             std::to_string(rows[i].size()) + " entries, want " +
                             std::to_string(n));
        if (rows[i][i] != 0.0)
            throw ShapeError("row " + std::to_string(i) + " has nonzero self entry");
    }
    JointAffinity joint;
    joint.n = n;
    joint.p.assign(n * n, 0.0);
    const double scale = 1.0 / (2.0 * static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double v = (rows[i][j] + rows[j][i]) * scale;
            joint.p[i * n + j] = v;
            joint.p[j * n + i] = v;
        }
    }
    return joint;
}

AffinityField affinity_field(const Matrix& d2, const PerplexityTarget& target,
                             DegenerateRowPolicy policy) {
    const std::size_t n = d2.rows();
    if (d2.cols() != n) throw ShapeError("squared-distance matrix must be square");
    AffinityField field;
    field.betas.resize(n);
    std::vector<std::vector<double>> rows(n);
    std::vector<double> cand(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        const double* di = d2.row(i);
        for (std::size_t j = 0, c = 0; j < n; ++j)
            if (j != i) cand[c++] = di[j];
        std::vector<double> full(n, 0.0);
        try {
            AffinityRow row = beta_search(cand, target);
            field.betas[i] = row.beta;
            for (std::size_t j = 0, c = 0; j < n; ++j)
                if (j != i) full[j] = row.probs[c++];
        } catch (const DegenerateRowError&) {
            if (policy == DegenerateRowPolicy::Throw) throw;
            ++field.degenerate_rows;
            field.betas[i] = 0.0;
            double u = 1.0 / static_cast<double>(n - 1);
            for (std::size_t j = 0; j < n; ++j)
                if (j != i) full[j] = u;
        }
        rows[i] = std::move(full);
    }
    field.joint = symmetrize(rows);
    return field;
}

std::vector<std::pair<std::size_t, double>> normalized_entropy_experiment(
    const std::vector<std::size_t>& sizes, std::size_t samples,
    std::uint64_t seed) {
    if (samples < 1) throw ConfigError("samples must be >= 1");
    for (std::size_t s = 1; s < sizes.size(); ++s)
        if (sizes[s] <= sizes[s - 1])
            throw ConfigError("sizes must be strictly ascending");
    Rng rng(seed);
    std::vector<std::pair<std::size_t, double>> table;
    table.reserve(sizes.size());
    for (std::size_t size : sizes) {
        if (size < 2) throw ConfigError("sizes must be >= 2");
        double acc = 0.0;
        std::vector<double> d2(size - 1);
        for (std::size_t s = 0; s < samples; ++s) {
            for (std::size_t j = 0; j + 1 < size; ++j) {
                double x = rng.normal();
                double y = rng.normal();
                d2[j] = x * x + y * y;
            }
            if (size == 2) {
                acc += 1.0; // single-neighbor distribution, by convention
                continue;
            }
            double h = entropy_bits(conditional_row(d2, 1.0));
            acc += h / std::log2(static_cast<double>(size));
        }
        table.emplace_back(size, acc / static_cast<double>(samples));
    }
    return table;
}

} // namespace watermap
