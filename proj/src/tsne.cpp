#include "watermap/tsne.hpp"

#include <algorithm>
#include <cmath>

#include "watermap/errors.hpp"
#include "watermap/kernels.hpp"

namespace watermap {

namespace {

void check_pair(const JointAffinity& P, const Embedding& emb) {
    if (P.n != emb.size())
        throw ShapeError("affinity/embedding size mismatch: " +
                         std::to_string(P.n) + " vs " + std::to_string(emb.size()));
    if (P.n < 2) throw ShapeError("need at least 2 points");
}

// Accumulates sum_ij p ln w (over p > 0) and sum_ij p, fixed row order.
void plogw_sums(const JointAffinity& P, const QAffinity& Q, double& plogw,
                double& psum) {
    const std::size_t n = P.n;
    plogw = 0.0;
    psum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* pr = P.row(i);
        const double* wr = Q.w.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            if (pr[j] > 0.0) {
                plogw += pr[j] * std::log(wr[j]);
                psum += pr[j];
            }
        }
    }
}

} // namespace

QAffinity q_affinities(const Embedding& emb) {
    const std::size_t n = emb.size();
    if (n < 2) throw ShapeError("need at least 2 points");
    QAffinity Q;
    Q.n = n;
    Q.w.assign(n * n, 0.0);
    const auto& ops = kern::active();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double* wr = Q.w.data() + i * n;
        double rs = ops.cauchy_row(emb.x[i], emb.y[i], emb.x.data(), emb.y.data(),
                                   n, wr);
        rs -= wr[i]; // drop the self term (weight exactly 1)
        wr[i] = 0.0;
        total += rs;
    }
    Q.wsum = total;
    return Q;
}

double kl_cost(const JointAffinity& P, const Embedding& emb) {
    check_pair(P, emb);
    QAffinity Q = q_affinities(emb);
    double plogw = 0.0;
    double psum = 0.0;
    plogw_sums(P, Q, plogw, psum);
    double plogp = 0.0;
    for (double v : P.p)
        if (v > 0.0) plogp += v * std::log(v);
    // sum p ln(p/q) = sum p ln p - sum p ln w + ln(wsum) * sum p
    return plogp - plogw + std::log(Q.wsum) * psum;
}

double pseudo_norm_cost_q(const JointAffinity& P, const QAffinity& Q) {
    if (P.n != Q.n) throw ShapeError("affinity size mismatch");
    const double z = static_cast<double>(P.n);
    double plogw = 0.0;
    double psum = 0.0;
    plogw_sums(P, Q, plogw, psum);
    double cross = -(plogw - std::log(Q.wsum) * psum);
    return cross / (std::log(z) + std::log(z - 1.0));
}

double pseudo_norm_cost(const JointAffinity& P, const Embedding& emb) {
    check_pair(P, emb);
    QAffinity Q = q_affinities(emb);
    return pseudo_norm_cost_q(P, Q);
}

double bbox_diagonal(const Embedding& emb) {
    if (emb.size() == 0) return 0.0;
    auto [xmin, xmax] = std::minmax_element(emb.x.begin(), emb.x.end());
    auto [ymin, ymax] = std::minmax_element(emb.y.begin(), emb.y.end());
    double dx = *xmax - *xmin;
    double dy = *ymax - *ymin;
    return std::sqrt(dx * dx + dy * dy);
}

CostReport cost_report(const JointAffinity& P, const Embedding& emb) {
    check_pair(P, emb);
    QAffinity Q = q_affinities(emb);
    double plogw = 0.0;
    double psum = 0.0;
    plogw_sums(P, Q, plogw, psum);
    double plogp = 0.0;
    for (double v : P.p)
        if (v > 0.0) plogp += v * std::log(v);
    double cross = -(plogw - std::log(Q.wsum) * psum);
    const double z = static_cast<double>(P.n);
    CostReport r;
    r.kl = plogp + cross;
    r.pseudo_norm = cross / (std::log(z) + std::log(z - 1.0));
    r.size = bbox_diagonal(emb);
    return r;
}

void gradient(const JointAffinity& P, const Embedding& emb,
              std::vector<double>& gx, std::vector<double>& gy) {
    check_pair(P, emb);
    const std::size_t n = emb.size();
    QAffinity Q = q_affinities(emb);
    gx.assign(n, 0.0);
    gy.assign(n, 0.0);
    const double q_scale = 1.0 / Q.wsum;
    const auto& ops = kern::active();
    for (std::size_t i = 0; i < n; ++i) {
        double ax = 0.0;
        double ay = 0.0;
        ops.grad_row(emb.x[i], emb.y[i], emb.x.data(), emb.y.data(), P.row(i),
                     Q.w.data() + i * n, q_scale, n, &ax, &ay);
        gx[i] = 4.0 * ax;
        gy[i] = 4.0 * ay;
    }
}

double learning_rate(const Embedding& emb, std::size_t n_points) {
    if (n_points < 2) throw ConfigError("learning rate needs n_points >= 2");
    if (n_points == 2)
        throw DegenerateSpanError("ln(n-1) = 0 at n_points = 2");
    double lo = emb.x[0];
    double hi = emb.x[0];
    for (double v : emb.x) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    for (double v : emb.y) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    double span = hi - lo;
    if (span <= 0.0)
        throw DegenerateSpanError("all embedding positions coincide");
    return std::log(static_cast<double>(n_points - 1)) * span * 0.5;
}

Embedding step(const JointAffinity& P, const Embedding& emb, std::size_t n_points,
               std::optional<double> eta_override) {
    check_pair(P, emb);
    double eta;
    if (eta_override) {
        eta = *eta_override;
    } else {
        try {
            eta = learning_rate(emb, n_points);
        } catch (const DegenerateSpanError&) {
            eta = 1e-3;
        }
    }
    std::vector<double> gx;
    std::vector<double> gy;
    gradient(P, emb, gx, gy);
    const std::size_t n = emb.size();
    Embedding out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.x[i] = emb.x[i] - eta * gx[i];
        out.y[i] = emb.y[i] - eta * gy[i];
        if (!std::isfinite(out.x[i]) || !std::isfinite(out.y[i]))
            throw NumericError("non-finite position after update at index " +
                               std::to_string(i));
    }
    return out;
}

} // namespace watermap
