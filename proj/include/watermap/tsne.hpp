#pragma once

#include <optional>

#include "watermap/matrix.hpp"
#include "watermap/similarity.hpp"

namespace watermap {

// Unnormalized Cauchy weights and their total; q_ij = w(i,j) / wsum.
struct QAffinity {
    std::size_t n = 0;
    std::vector<double> w; // n*n row-major, w_ii = 0
    double wsum = 0.0;

    double w_at(std::size_t i, std::size_t j) const { return w[i * n + j]; }
    double q(std::size_t i, std::size_t j) const { return w[i * n + j] / wsum; }
};

struct CostReport {
    double kl = 0.0;
    double pseudo_norm = 0.0;
    double size = 0.0; // bounding-box diagonal
};

QAffinity q_affinities(const Embedding& emb);

double kl_cost(const JointAffinity& P, const Embedding& emb);

// -sum p_ij ln q_ij / (ln z + ln(z-1)).
double pseudo_norm_cost(const JointAffinity& P, const Embedding& emb);
double pseudo_norm_cost_q(const JointAffinity& P, const QAffinity& Q);

CostReport cost_report(const JointAffinity& P, const Embedding& emb);

double bbox_diagonal(const Embedding& emb);

// g_i = 4 sum_j (p_ij - q_ij) (y_i - y_j) w_ij.
void gradient(const JointAffinity& P, const Embedding& emb, std::vector<double>& gx,
              std::vector<double>& gy);

// eta = ln(n_points - 1) * (Ymax - Ymin) / 2 over all coordinates.
// Throws DegenerateSpanError when all positions coincide.
double learning_rate(const Embedding& emb, std::size_t n_points);

// One plain descent step (no momentum, no exaggeration). A zero span falls
// back to eta = 1e-3. eta_override bypasses the adaptive rate (tests only).
Embedding step(const JointAffinity& P, const Embedding& emb, std::size_t n_points,
               std::optional<double> eta_override = std::nullopt);

} // namespace watermap
