#include "watermap/parallel_tsne.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <memory>
#include <semaphore>
#include <string>
#include <thread>

#include "watermap/errors.hpp"
#include "watermap/kernels.hpp"
#include "watermap/tsne.hpp"

namespace watermap {

namespace {

std::size_t ceil_sqrt(std::size_t n) {
    std::size_t r = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
    while (r > 0 && (r - 1) * (r - 1) >= n) --r;
    while (r * r < n) ++r;
    return r;
}

std::size_t chunk_offset(std::size_t i, std::size_t n, std::size_t t) {
    return (i * n + t - 1) / t; // ceil(i*n/t)
}

struct WorkerResult {
    std::vector<double> x;
    std::vector<double> y;
    double cost_start = 0.0;
    double cost_end = 0.0;
    std::size_t degenerate = 0;
};

WorkerResult run_worker(const DataSource& source,
                        const std::vector<std::size_t>& idx,
                        const Embedding& start, const PtsneConfig& config,
                        std::size_t iters, std::size_t n_global) {
    Matrix d2 = chunk_sqdist(source, idx);
    PerplexityTarget target{config.ppx, config.ppx_tol, config.ppx_max_iters};
    AffinityField field =
        affinity_field(d2, target, DegenerateRowPolicy::Uniform);
    Embedding emb = start;
    std::size_t rate_n = config.learning_rate_global_n ? n_global : idx.size();
    WorkerResult out;
    out.cost_start = pseudo_norm_cost(field.joint, emb);
    for (std::size_t it = 0; it < iters; ++it)
        emb = step(field.joint, emb, rate_n);
    out.cost_end = pseudo_norm_cost(field.joint, emb);
    out.x = std::move(emb.x);
    out.y = std::move(emb.y);
    out.degenerate = field.degenerate_rows;
    return out;
}

[[noreturn]] void rethrow_tagged(std::exception_ptr ep, std::size_t thread_id) {
    std::string tag = "thread " + std::to_string(thread_id + 1) + ": ";
    try {
        std::rethrow_exception(ep);
    } catch (const ConfigError& e) {
        throw ConfigError(tag + e.what());
    } catch (const NoConvergenceError& e) {
        throw NoConvergenceError(tag + e.what());
    } catch (const DegenerateRowError& e) {
        throw DegenerateRowError(tag + e.what());
    } catch (const NumericError& e) {
        throw NumericError(tag + e.what());
    } catch (const DataError& e) {
        throw DataError(tag + e.what());
    } catch (const std::exception& e) {
        throw std::runtime_error(tag + e.what());
    }
}

} // namespace

Embedding GlobalState::mean_positions() const {
    Embedding mean(n);
    const double inv = 1.0 / static_cast<double>(layers.size());
    for (std::size_t i = 0; i < n; ++i) {
        double sx = 0.0;
        double sy = 0.0;
        for (const Embedding& layer : layers) {
            sx += layer.x[i];
            sy += layer.y[i];
        }
        mean.x[i] = sx * inv;
        mean.y[i] = sy * inv;
    }
    return mean;
}

std::size_t thread_size(std::size_t n, const PtsneConfig& config) {
    return (n * config.layers + config.threads - 1) / config.threads;
}

std::size_t min_workload(std::size_t n, const PtsneConfig& config) {
    const std::size_t t = config.threads;
    std::size_t wmin = n;
    for (std::size_t i = 0; i < t; ++i) {
        std::size_t w = 0;
        for (std::size_t l = 0; l < config.layers; ++l) {
            std::size_t c = (i + l) % t;
            w += chunk_offset(c + 1, n, t) - chunk_offset(c, n, t);
        }
        wmin = std::min(wmin, w);
    }
    return wmin;
}

void validate_config(std::size_t n, const PtsneConfig& config) {
    if (config.threads < 1) throw ConfigError("threads must be >= 1");
    if (config.layers < 1 || config.layers > config.threads)
        throw ConfigError("layers must satisfy 1 <= layers <= threads");
    if (config.rounds < 1) throw ConfigError("rounds must be >= 1");
    if (n < 4) throw ConfigError("need at least 4 data points");
    if (config.threads > n)
        throw ConfigError("threads must not exceed the point count");
    if (thread_size(n, config) > n)
        throw ConfigError("thread size exceeds the point count");
    if (!(config.ppx_tol > 0.0)) throw ConfigError("ppx tolerance must be > 0");
    if (config.ppx_max_iters < 1) throw ConfigError("ppx max iters must be >= 1");
    if (config.epochs_override && *config.epochs_override < 1)
        throw ConfigError("epochs override must be >= 1");
    if (config.iters_override && *config.iters_override < 1)
        throw ConfigError("iters override must be >= 1");
    std::size_t wmin = min_workload(n, config);
    double max_ppx = static_cast<double>(wmin - 1);
    if (!(config.ppx > 1.0) || config.ppx > max_ppx)
        throw ConfigError("perplexity must lie in (1, " +
                          std::to_string(wmin - 1) +
                          "] for the smallest thread workload of " +
                          std::to_string(wmin));
}

ChunkPlan make_plan(std::size_t n, const PtsneConfig& config, Rng& rng) {
    if (config.layers > config.threads)
        throw ConfigError("layers must not exceed threads");
    const std::size_t t = config.threads;
    ChunkPlan plan;
    plan.permutation = rng.permutation(n);
    plan.chunk_bounds.resize(t);
    for (std::size_t i = 0; i < t; ++i)
        plan.chunk_bounds[i] = {chunk_offset(i, n, t), chunk_offset(i + 1, n, t)};
    plan.assignment.resize(t);
    for (std::size_t i = 0; i < t; ++i) {
        plan.assignment[i].resize(config.layers);
        for (std::size_t l = 0; l < config.layers; ++l)
            plan.assignment[i][l] = (i + l) % t;
    }
    return plan;
}

std::pair<std::size_t, std::size_t> default_schedule(
    std::size_t n, std::size_t z, std::optional<std::size_t> epochs_override,
    std::optional<std::size_t> iters_override) {
    std::size_t epochs = epochs_override ? *epochs_override : ceil_sqrt(n);
    std::size_t iters = iters_override ? *iters_override : ceil_sqrt(z);
    return {epochs, iters};
}

Embedding random_disk(std::size_t n, Rng& rng) {
    Embedding emb(n);
    for (std::size_t i = 0; i < n; ++i) rng.disk_point(emb.x[i], emb.y[i]);
    return emb;
}

GlobalState init_state(std::size_t n, const PtsneConfig& config) {
    GlobalState state;
    state.n = n;
    state.rng = Rng(config.seed);
    Embedding init = random_disk(n, state.rng);
    state.layers.assign(config.layers, init);
    return state;
}

Matrix chunk_sqdist(const DataSource& source, const std::vector<std::size_t>& idx) {
    const std::size_t w = idx.size();
    Matrix d2(w, w);
    if (source.kind == SourceKind::Coordinates) {
        const std::size_t m = source.values.cols();
        std::vector<double> feat(m * w);
        for (std::size_t k = 0; k < m; ++k)
            for (std::size_t j = 0; j < w; ++j)
                feat[k * w + j] = source.values(idx[j], k);
        std::vector<double> point(m);
        const auto& ops = kern::active();
        for (std::size_t i = 0; i < w; ++i) {
            for (std::size_t k = 0; k < m; ++k) point[k] = source.values(idx[i], k);
            ops.sqdist_row(point.data(), feat.data(), w, m, d2.row(i));
            d2(i, i) = 0.0;
        }
    } else {
        for (std::size_t i = 0; i < w; ++i) {
            for (std::size_t j = 0; j < w; ++j) {
                double d = source.values(idx[i], idx[j]);
                d2(i, j) = d * d;
            }
            d2(i, i) = 0.0;
        }
    }
    return d2;
}

void run_epoch(GlobalState& state, const ChunkPlan& plan, const DataSource& source,
               const PtsneConfig& config, std::size_t epoch, std::size_t round) {
    const std::size_t t_count = config.threads;
    const std::size_t n = state.n;
    auto [epochs, iters] = default_schedule(n, thread_size(n, config),
                                            config.epochs_override,
                                            config.iters_override);
    (void)epochs;

    Embedding means = state.mean_positions();

    std::vector<std::vector<std::size_t>> thread_idx(t_count);
    for (std::size_t t = 0; t < t_count; ++t) {
        auto& idx = thread_idx[t];
        for (std::size_t c : plan.assignment[t]) {
            auto [b, e] = plan.chunk_bounds[c];
            for (std::size_t r = b; r < e; ++r) idx.push_back(plan.permutation[r]);
        }
    }

    std::vector<WorkerResult> results(t_count);
    std::vector<std::exception_ptr> failures(t_count);
    std::unique_ptr<std::counting_semaphore<>> gate;
    if (config.cores > 0)
        gate = std::make_unique<std::counting_semaphore<>>(
            static_cast<std::ptrdiff_t>(config.cores));

    {
        std::vector<std::thread> workers;
        workers.reserve(t_count);
        for (std::size_t t = 0; t < t_count; ++t) {
            workers.emplace_back([&, t] {
                if (gate) gate->acquire();
                try {
                    const auto& idx = thread_idx[t];
                    Embedding start(idx.size());
                    for (std::size_t j = 0; j < idx.size(); ++j) {
                        start.x[j] = means.x[idx[j]];
                        start.y[j] = means.y[idx[j]];
                    }
                    results[t] =
                        run_worker(source, idx, start, config, iters, n);
                } catch (...) {
                    failures[t] = std::current_exception();
                }
                if (gate) gate->release();
            });
        }
        for (auto& w : workers) w.join();
    }

    for (std::size_t t = 0; t < t_count; ++t)
        if (failures[t]) rethrow_tagged(failures[t], t);

    // Pool partial solutions: the chunk at ordinal l of thread t's assignment
    // lands in layer l.
    for (std::size_t t = 0; t < t_count; ++t) {
        std::size_t off = 0;
        for (std::size_t l = 0; l < plan.assignment[t].size(); ++l) {
            std::size_t c = plan.assignment[t][l];
            auto [b, e] = plan.chunk_bounds[c];
            for (std::size_t r = b; r < e; ++r, ++off) {
                std::size_t point = plan.permutation[r];
                state.layers[l].x[point] = results[t].x[off];
                state.layers[l].y[point] = results[t].y[off];
            }
        }
    }

    double cost_sum = 0.0;
    double start_sum = 0.0;
    for (const auto& r : results) {
        cost_sum += r.cost_end;
        start_sum += r.cost_start;
        state.degenerate_rows += r.degenerate;
    }
    double size_sum = 0.0;
    for (const Embedding& layer : state.layers) size_sum += bbox_diagonal(layer);

    TraceRecord rec;
    rec.epoch = epoch;
    rec.round = round;
    rec.avg_cost = cost_sum / static_cast<double>(t_count);
    rec.avg_size = size_sum / static_cast<double>(state.layers.size());
    rec.avg_cost_start = start_sum / static_cast<double>(t_count);
    state.trace.push_back(rec);
}

GlobalState run_ptsne(const DataSource& source, const PtsneConfig& config,
                      const ProgressSink& sink) {
    const std::size_t n = source.n();
    validate_config(n, config);
    GlobalState state = init_state(n, config);
    auto [epochs, iters] = default_schedule(n, thread_size(n, config),
                                            config.epochs_override,
                                            config.iters_override);
    (void)iters;
    std::size_t global_epoch = 0;
    for (std::size_t round = 1; round <= config.rounds; ++round) {
        for (std::size_t e = 0; e < epochs; ++e) {
            ++global_epoch;
            ChunkPlan plan = make_plan(n, config, state.rng);
            run_epoch(state, plan, source, config, global_epoch, round);
            if (sink) sink(state.trace.back(), state);
        }
    }
    return state;
}

GlobalCostEvaluator::GlobalCostEvaluator(const DataSource& source,
                                         const PtsneConfig& config)
    : source_(source), n_(source.n()) {
    if (n_ > config.global_cost_cap)
        throw SizeCapError("global cost needs an O(n^2) pass; n = " +
                           std::to_string(n_) + " exceeds the cap of " +
                           std::to_string(config.global_cost_cap));
    if (n_ < 2) throw ShapeError("global cost needs n >= 2");

    if (source_.kind == SourceKind::Coordinates) {
        const std::size_t m = source_.values.cols();
        feat_.resize(m * n_);
        for (std::size_t k = 0; k < m; ++k)
            for (std::size_t j = 0; j < n_; ++j)
                feat_[k * n_ + j] = source_.values(j, k);
    }

    betas_.resize(n_);
    shifts_.resize(n_);
    norms_.resize(n_);
    PerplexityTarget target{config.ppx, config.ppx_tol, config.ppx_max_iters};
    const auto& ops = kern::active();
    std::vector<double> d2(n_);
    std::vector<double> cand(n_ - 1);
    for (std::size_t i = 0; i < n_; ++i) {
        row_d2(i, d2);
        for (std::size_t j = 0, c = 0; j < n_; ++j)
            if (j != i) cand[c++] = d2[j];
        double beta = 0.0; // uniform fallback for degenerate rows
        try {
            beta = beta_search(cand, target).beta;
        } catch (const DegenerateRowError&) {
        }
        double shift = cand[0];
        for (double v : cand) shift = std::min(shift, v);
        auto stats =
            ops.gaussian_stats(cand.data(), n_ - 1, beta, shift, nullptr);
        betas_[i] = beta;
        shifts_[i] = shift;
        norms_[i] = stats.wsum;
    }
}

void GlobalCostEvaluator::row_d2(std::size_t i, std::vector<double>& d2) const {
    if (source_.kind == SourceKind::Coordinates) {
        const std::size_t m = source_.values.cols();
        std::vector<double> point(m);
        for (std::size_t k = 0; k < m; ++k) point[k] = source_.values(i, k);
        kern::active().sqdist_row(point.data(), feat_.data(), n_, m, d2.data());
        d2[i] = 0.0;
    } else {
        for (std::size_t j = 0; j < n_; ++j) {
            double d = source_.values(i, j);
            d2[j] = d * d;
        }
        d2[i] = 0.0;
    }
}

double GlobalCostEvaluator::cost(const Embedding& emb) const {
    if (emb.size() != n_)
        throw ShapeError("embedding size mismatch in global cost");
    const auto& ops = kern::active();

    std::vector<double> w(n_);
    double wsum = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
        double rs = ops.cauchy_row(emb.x[i], emb.y[i], emb.x.data(),
                                   emb.y.data(), n_, w.data());
        wsum += rs - w[i];
    }
    const double ln_wsum = std::log(wsum);

    std::vector<double> d2(n_);
    std::vector<double> e_row(n_);
    std::vector<double> arg(n_);
    std::vector<double> e_col(n_);
    const double pair_scale = 1.0 / (2.0 * static_cast<double>(n_));
    double cross = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
        row_d2(i, d2);
        d2[i] = shifts_[i]; // self exponent pinned to 1, skipped below
        ops.gaussian_stats(d2.data(), n_, betas_[i], shifts_[i], e_row.data());
        for (std::size_t j = 0; j < n_; ++j)
            arg[j] = -betas_[j] * (d2[j] - shifts_[j]);
        ops.vexp(arg.data(), n_, e_col.data());
        ops.cauchy_row(emb.x[i], emb.y[i], emb.x.data(), emb.y.data(), n_,
                       w.data());
        const double inv_ci = 1.0 / norms_[i];
        for (std::size_t j = 0; j < n_; ++j) {
            if (j == i) continue;
            double pij =
                (e_row[j] * inv_ci + e_col[j] / norms_[j]) * pair_scale;
            if (pij > 0.0) cross -= pij * (std::log(w[j]) - ln_wsum);
        }
    }
    const double z = static_cast<double>(n_);
    return cross / (std::log(z) + std::log(z - 1.0));
}

double global_cost(const GlobalState& state, const DataSource& source,
                   const PtsneConfig& config) {
    GlobalCostEvaluator eval(source, config);
    return eval.cost(state.layers.at(0));
}

} // namespace watermap
