#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "watermap/dataset.hpp"
#include "watermap/matrix.hpp"
#include "watermap/rng.hpp"
#include "watermap/similarity.hpp"

namespace watermap {

struct PtsneConfig {
    std::size_t threads = 4;
    std::size_t layers = 1;
    std::size_t rounds = 1;
    double ppx = 30.0;
    std::uint64_t seed = 1;
    std::optional<std::size_t> epochs_override;
    std::optional<std::size_t> iters_override;
    double ppx_tol = 1e-5;
    int ppx_max_iters = 100;
    // Learning-rate n: thread-local point count by default, the full dataset
    // size when set.
    bool learning_rate_global_n = false;
    std::size_t cores = 0; // cap on simultaneously executing workers; 0 = off
    std::size_t global_cost_cap = 20000;
};

struct TraceRecord {
    std::size_t epoch = 0; // 1-based, global across rounds
    std::size_t round = 0; // 1-based
    double avg_cost = 0.0;
    double avg_size = 0.0;
    // Mean thread cost at the epoch's start, before any iteration. Epoch 1
    // starts from the random initialization, so this is the "initial cost".
    double avg_cost_start = 0.0;
};

struct ChunkPlan {
    std::vector<std::size_t> permutation;
    // T half-open ranges into the permutation.
    std::vector<std::pair<std::size_t, std::size_t>> chunk_bounds;
    // Thread t optimizes chunks {t, t+1, ..., t+L-1 mod T}, in that order;
    // the ordinal of a chunk within this list is its target layer.
    std::vector<std::vector<std::size_t>> assignment;
};

struct GlobalState {
    std::size_t n = 0;
    std::vector<Embedding> layers;
    std::vector<TraceRecord> trace;
    Rng rng{1};
    std::size_t degenerate_rows = 0;

    // Per-point arithmetic mean over layers (the mixing rule and the final
    // reported embedding).
    Embedding mean_positions() const;
};

using ProgressSink = std::function<void(const TraceRecord&, const GlobalState&)>;

// z = ceil(n * layers / threads).
std::size_t thread_size(std::size_t n, const PtsneConfig& config);

// Smallest thread workload under the fixed chunk bounds (plan-independent).
std::size_t min_workload(std::size_t n, const PtsneConfig& config);

void validate_config(std::size_t n, const PtsneConfig& config);

ChunkPlan make_plan(std::size_t n, const PtsneConfig& config, Rng& rng);

std::pair<std::size_t, std::size_t> default_schedule(
    std::size_t n, std::size_t z,
    std::optional<std::size_t> epochs_override = std::nullopt,
    std::optional<std::size_t> iters_override = std::nullopt);

Embedding random_disk(std::size_t n, Rng& rng);

GlobalState init_state(std::size_t n, const PtsneConfig& config);

// Gathered squared-distance matrix over the given data indices.
Matrix chunk_sqdist(const DataSource& source, const std::vector<std::size_t>& idx);

void run_epoch(GlobalState& state, const ChunkPlan& plan, const DataSource& source,
               const PtsneConfig& config, std::size_t epoch, std::size_t round);

GlobalState run_ptsne(const DataSource& source, const PtsneConfig& config,
                      const ProgressSink& sink = {});

// Streaming full-dataset pseudo-normalized cost. The input-space pass (beta
// per point) is done once at construction; cost() is O(n^2) per call with O(n)
// memory.
class GlobalCostEvaluator {
  public:
    GlobalCostEvaluator(const DataSource& source, const PtsneConfig& config);
    double cost(const Embedding& emb) const;
    std::size_t n() const { return n_; }

  private:
    void row_d2(std::size_t i, std::vector<double>& d2) const;

    const DataSource& source_;
    std::size_t n_ = 0;
    std::vector<double> feat_; // feature-major coordinates (Coordinates only)
    std::vector<double> betas_;
    std::vector<double> shifts_;
    std::vector<double> norms_; // C_i = sum_{j != i} exp(-beta_i (d2_ij - shift_i))
};

// Pseudo-normalized cost of the full dataset against the first layer.
double global_cost(const GlobalState& state, const DataSource& source,
                   const PtsneConfig& config);

} // namespace watermap
