#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <vector>

#include "p3s/interactions.hpp"
#include "p3s/latent_model.hpp"
#include "p3s/metrics.hpp"
#include "p3s/objectives.hpp"

namespace p3s {

enum class SamplingMode { kStochastic, kFullBatch };

inline constexpr std::size_t kAutoSampleCap = 1'000'000;
inline constexpr std::size_t kDefaultFullBatchCap = 10'000'000;

struct TrainConfig {
  HyperParams hyper;
  // nullopt means one pass worth of pairs, capped at kAutoSampleCap.
  std::optional<std::size_t> samples_per_epoch;
  SamplingMode mode = SamplingMode::kStochastic;
  std::size_t eval_every = 0;  // 0 disables progress lines
  std::size_t full_batch_pair_cap = kDefaultFullBatchCap;
  // More than one thread switches stochastic training to lock-free
  // concurrent updates. Results are then no longer reproducible.
  std::size_t threads = 1;
  std::ostream* progress = nullptr;
};

// Draws training pairs: a user uniformly among users with an active
// relation, a relation uniformly among that user's active relations, then
// winner and loser uniformly from their sets.
class PairSampler {
 public:
  PairSampler(const Dataset& dataset, Method method);

  PairSample operator()(std::mt19937_64& rng) const;

  std::size_t trainable_users() const { return users_.size(); }
  std::size_t total_pairs() const { return total_pairs_; }

 private:
  ItemIndex draw(const TriPartition& part, ItemSet set,
                 std::mt19937_64& rng) const;

  struct UserRelations {
    UserIndex user;
    std::vector<Relation> relations;
  };

  const Dataset* dataset_;
  std::vector<UserRelations> users_;
  std::size_t total_pairs_ = 0;
};

// One stochastic ascent step: theta += eta * pairwise_gradient(theta).
// Returns ln sigma(x_uw - x_ul) before the update.
double ascent_step(ModelParams& params, const PairSample& s, double lambda,
                   double eta);

PairSample sample_pair(const Dataset& dataset, Method method,
                       std::mt19937_64& rng);

// Popularity model: zero factors (K = 1) and item bias = purchase count.
ModelParams mostpop_model(const Dataset& dataset);

ModelParams train(const Dataset& dataset, const TrainConfig& config);

struct GridSpec {
  std::vector<std::size_t> k_values;
  std::vector<double> eta_values;
  std::vector<double> lambda_values;
  std::size_t n_seeds = 5;
};

GridSpec default_grid();

struct GridRow {
  std::size_t k = 0;
  double eta = 0.0;
  double lambda = 0.0;
  std::vector<MetricMeans> per_seed;
  std::array<double, kNumMetrics> mean{};
  std::array<double, kNumMetrics> stddev{};  // sample std, 0 for one seed
};

struct GridResult {
  HyperParams best;
  std::vector<GridRow> rows;  // sorted by (K, eta, lambda)
};

// Trains n_seeds models per cell with seeds base.hyper.seed + s, evaluates
// each on `holdout` at `cutoff`, and picks the cell with the highest mean
// AUC (ties: smaller K, then eta, then lambda).
GridResult grid_search(const Dataset& dataset, const Dataset& holdout,
                       const GridSpec& grid, Method method,
                       const TrainConfig& base, std::size_t cutoff = kDefaultCutoff,
                       std::size_t jobs = 1);

void write_grid_tsv(std::ostream& out, const GridResult& result,
                    std::size_t cutoff);

}  // namespace p3s
