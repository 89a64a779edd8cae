#include "p3s/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>
#include <tuple>

#include <fmt/core.h>

#include "p3s/error.hpp"

namespace p3s {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Plain or relaxed-atomic access to a parameter slot; the atomic flavour lets
// concurrent samplers race on shared parameters without undefined behaviour.
template <bool kAtomic>
struct Slot {
  static double load(double& x) {
    if constexpr (kAtomic) {
      return std::atomic_ref<double>(x).load(std::memory_order_relaxed);
    } else {
      return x;
    }
  }
  static void store(double& x, double v) {
    if constexpr (kAtomic) {
      std::atomic_ref<double>(x).store(v, std::memory_order_relaxed);
    } else {
      x = v;
    }
  }
};

// theta += eta * pairwise_gradient(theta), all five blocks computed from the
// pre-step values. Returns ln sigma(d) before the step.
template <bool kAtomic>
double ascent_step_impl(ModelParams& params, const PairSample& s,
                        double lambda, double eta) {
  using S = Slot<kAtomic>;
  auto alpha = params.user(s.u);
  auto beta_w = params.item(s.winner);
  auto beta_l = params.item(s.loser);
  double& gamma_w = params.bias(s.winner);
  double& gamma_l = params.bias(s.loser);
  const double gw = S::load(gamma_w);
  const double gl = S::load(gamma_l);
  double d = gw - gl;
  for (std::size_t f = 0; f < alpha.size(); ++f) {
    d += S::load(alpha[f]) * (S::load(beta_w[f]) - S::load(beta_l[f]));
  }
  const double g = 1.0 - sigmoid(d);
  for (std::size_t f = 0; f < alpha.size(); ++f) {
    const double a = S::load(alpha[f]);
    const double bw = S::load(beta_w[f]);
    const double bl = S::load(beta_l[f]);
    S::store(alpha[f], a + eta * (g * (bw - bl) - lambda * a));
    S::store(beta_w[f], bw + eta * (g * a - lambda * bw));
    S::store(beta_l[f], bl + eta * (-g * a - lambda * bl));
  }
  S::store(gamma_w, gw + eta * (g - lambda * gw));
  S::store(gamma_l, gl + eta * (-g - lambda * gl));
  return log_sigmoid(d);
}

void check_finite(const ModelParams& params, std::size_t epoch) {
  if (!params.all_finite()) {
    throw Error(ErrorCode::kDivergence,
                fmt::format("non-finite parameters after epoch {}; lower eta",
                            epoch));
  }
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32), 0x5eedu};
  return std::mt19937_64(seq);
}

bool report_epoch(const TrainConfig& config, std::size_t epoch) {
  return config.progress != nullptr && config.eval_every > 0 &&
         epoch % config.eval_every == 0;
}

ModelParams train_stochastic(const Dataset& dataset, const TrainConfig& config) {
  const HyperParams& hyper = config.hyper;
  const PairSampler sampler(dataset, hyper.method);
  std::size_t samples = std::min(sampler.total_pairs(), kAutoSampleCap);
  if (config.samples_per_epoch) {
    if (*config.samples_per_epoch < 1) {
      throw Error(ErrorCode::kConfig, "samples_per_epoch must be >= 1");
    }
    samples = *config.samples_per_epoch;
  }
  ModelParams params =
      init_params(dataset.num_users(), dataset.num_items(), hyper);
  const std::size_t threads = std::max<std::size_t>(config.threads, 1);
  const auto start = Clock::now();
  std::mt19937_64 rng = make_rng(hyper.seed, 0);

  for (std::size_t epoch = 1; epoch <= hyper.epochs; ++epoch) {
    double ll_sum = 0.0;
    if (threads == 1) {
      for (std::size_t s = 0; s < samples; ++s) {
        ll_sum += ascent_step_impl<false>(params, sampler(rng), hyper.lambda,
                                          hyper.eta);
      }
    } else {
      std::vector<std::thread> pool;
      std::vector<double> partial(threads, 0.0);
      for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
          auto local = make_rng(hyper.seed, epoch * threads + t + 1);
          const std::size_t share =
              samples / threads + (t < samples % threads ? 1 : 0);
          for (std::size_t s = 0; s < share; ++s) {
            partial[t] += ascent_step_impl<true>(params, sampler(local),
                                                 hyper.lambda, hyper.eta);
          }
        });
      }
      for (auto& th : pool) th.join();
      for (double p : partial) ll_sum += p;
    }
    check_finite(params, epoch);
    if (report_epoch(config, epoch)) {
      *config.progress << fmt::format(
          "epoch {}\tmean_ln_sigma {:.6f}\t{:.3f}s\n", epoch,
          ll_sum / static_cast<double>(samples), seconds_since(start));
    }
  }
  return params;
}

ModelParams train_full_batch(const Dataset& dataset, const TrainConfig& config) {
  const HyperParams& hyper = config.hyper;
  const std::size_t pairs = total_pair_count(dataset, hyper.method);
  if (pairs == 0) {
    throw Error(ErrorCode::kUntrainable,
                fmt::format("no user has an active {} relation",
                            to_string(hyper.method)));
  }
  if (pairs > config.full_batch_pair_cap) {
    throw Error(ErrorCode::kConfig,
                fmt::format("full-batch training needs {} pairs, above the cap "
                            "of {}",
                            pairs, config.full_batch_pair_cap));
  }
  ModelParams params =
      init_params(dataset.num_users(), dataset.num_items(), hyper);
  const auto start = Clock::now();
  auto step = [&](std::span<double> theta, std::span<const double> grad) {
    for (std::size_t j = 0; j < theta.size(); ++j) theta[j] += hyper.eta * grad[j];
  };
  for (std::size_t epoch = 1; epoch <= hyper.epochs; ++epoch) {
    const ModelParams grad =
        full_gradient(params, dataset, hyper.method, hyper.lambda);
    step(params.user_factors(), grad.user_factors());
    step(params.item_factors(), grad.item_factors());
    step(params.item_bias(), grad.item_bias());
    check_finite(params, epoch);
    if (report_epoch(config, epoch)) {
      const auto obj = full_objective(params, dataset, hyper.method, hyper.lambda);
      *config.progress << fmt::format("epoch {}\tobjective {:.6f}\t{:.3f}s\n",
                                      epoch, obj.total, seconds_since(start));
    }
  }
  return params;
}

ModelParams train_wmf(const Dataset& dataset, const TrainConfig& config) {
  const HyperParams& hyper = config.hyper;
  ModelParams params =
      init_params(dataset.num_users(), dataset.num_items(), hyper);
  const auto start = Clock::now();
  for (std::size_t epoch = 1; epoch <= hyper.epochs; ++epoch) {
    params = wmf_als_sweep(params, dataset, hyper.wmf_alpha, hyper.lambda);
    check_finite(params, epoch);
    if (report_epoch(config, epoch)) {
      *config.progress << fmt::format(
          "epoch {}\twmf_loss {:.6f}\t{:.3f}s\n", epoch,
          wmf_loss(params, dataset, hyper.wmf_alpha, hyper.lambda),
          seconds_since(start));
    }
  }
  return params;
}

}  // namespace

PairSampler::PairSampler(const Dataset& dataset, Method method)
    : dataset_(&dataset) {
  for (std::size_t u = 0; u < dataset.num_users(); ++u) {
    const auto uid = static_cast<UserIndex>(u);
    UserRelations entry{uid, {}};
    for (const RelationDef& def : pair_schema(method, dataset.partition(uid))) {
      total_pairs_ += def.pair_count;
      if (def.active) entry.relations.push_back(def.relation);
    }
    if (!entry.relations.empty()) users_.push_back(std::move(entry));
  }
  if (users_.empty()) {
    throw Error(ErrorCode::kUntrainable,
                fmt::format("no user has an active {} relation",
                            to_string(method)));
  }
}

ItemIndex PairSampler::draw(const TriPartition& part, ItemSet set,
                            std::mt19937_64& rng) const {
  auto pick = [&rng](std::span<const ItemIndex> items) {
    std::uniform_int_distribution<std::size_t> dist(0, items.size() - 1);
    return items[dist(rng)];
  };
  switch (set) {
    case ItemSet::kPurchased: return pick(part.purchased());
    case ItemSet::kClickedOnly: return pick(part.clicked_only());
    default: break;
  }
  std::uniform_int_distribution<ItemIndex> dist(
      0, static_cast<ItemIndex>(part.universe_size() - 1));
  for (;;) {
    const ItemIndex item = dist(rng);
    if (in_set(part, set, item)) return item;
  }
}

PairSample PairSampler::operator()(std::mt19937_64& rng) const {
  std::uniform_int_distribution<std::size_t> pick_user(0, users_.size() - 1);
  const UserRelations& entry = users_[pick_user(rng)];
  Relation relation = entry.relations.front();
  if (entry.relations.size() > 1) {
    std::uniform_int_distribution<std::size_t> pick_rel(
        0, entry.relations.size() - 1);
    relation = entry.relations[pick_rel(rng)];
  }
  const TriPartition& part = dataset_->partition(entry.user);
  PairSample s;
  s.u = entry.user;
  s.relation = relation;
  s.winner = draw(part, winner_set(relation), rng);
  s.loser = draw(part, loser_set(relation), rng);
  return s;
}

double ascent_step(ModelParams& params, const PairSample& s, double lambda,
                   double eta) {
  if (s.winner == s.loser) {
    throw Error(ErrorCode::kInvalidSample,
                fmt::format("winner and loser are both item {}", s.winner));
  }
  return ascent_step_impl<false>(params, s, lambda, eta);
}

PairSample sample_pair(const Dataset& dataset, Method method,
                       std::mt19937_64& rng) {
  return PairSampler(dataset, method)(rng);
}

ModelParams mostpop_model(const Dataset& dataset) {
  ModelParams params(dataset.num_users(), dataset.num_items(), 1);
  const auto counts = mostpop_scores(dataset);
  std::copy(counts.begin(), counts.end(), params.item_bias().begin());
  return params;
}

ModelParams train(const Dataset& dataset, const TrainConfig& config) {
  if (dataset.num_users() == 0 || dataset.num_items() == 0) {
    throw Error(ErrorCode::kUntrainable, "dataset is empty");
  }
  switch (config.hyper.method) {
    case Method::kMostPop:
      return mostpop_model(dataset);
    case Method::kWmf:
      config.hyper.validate();
      return train_wmf(dataset, config);
    default:
      break;
  }
  config.hyper.validate();
  if (config.mode == SamplingMode::kFullBatch) {
    return train_full_batch(dataset, config);
  }
  return train_stochastic(dataset, config);
}

GridSpec default_grid() {
  GridSpec grid;
  for (std::size_t k = 10; k <= 200; k += 10) grid.k_values.push_back(k);
  grid.eta_values = {0.01, 0.05, 0.1};
  grid.lambda_values = {0.01, 0.05, 0.1};
  grid.n_seeds = 5;
  return grid;
}

GridResult grid_search(const Dataset& dataset, const Dataset& holdout,
                       const GridSpec& grid, Method method,
                       const TrainConfig& base, std::size_t cutoff,
                       std::size_t jobs) {
  if (grid.k_values.empty() || grid.eta_values.empty() ||
      grid.lambda_values.empty()) {
    throw Error(ErrorCode::kConfig, "grid has an empty axis");
  }
  if (grid.n_seeds < 1) throw Error(ErrorCode::kConfig, "need at least one seed");
  if (holdout.num_users() != dataset.num_users() ||
      holdout.num_items() != dataset.num_items()) {
    throw Error(ErrorCode::kContract,
                "holdout must share the training dataset's user and item ids");
  }

  std::vector<GridRow> rows;
  for (std::size_t k : grid.k_values) {
    for (double eta : grid.eta_values) {
      for (double lambda : grid.lambda_values) {
        GridRow row;
        row.k = k;
        row.eta = eta;
        row.lambda = lambda;
        rows.push_back(std::move(row));
      }
    }
  }
  auto cell_key = [](const GridRow& r) {
    return std::tuple(r.k, r.eta, r.lambda);
  };
  std::sort(rows.begin(), rows.end(), [&](const GridRow& a, const GridRow& b) {
    return cell_key(a) < cell_key(b);
  });
  rows.erase(std::unique(rows.begin(), rows.end(),
                         [&](const GridRow& a, const GridRow& b) {
                           return cell_key(a) == cell_key(b);
                         }),
             rows.end());

  auto run_cell = [&](GridRow& row) {
    for (std::size_t s = 0; s < grid.n_seeds; ++s) {
      TrainConfig config = base;
      config.progress = nullptr;
      config.hyper.k = row.k;
      config.hyper.eta = row.eta;
      config.hyper.lambda = row.lambda;
      config.hyper.method = method;
      config.hyper.seed = base.hyper.seed + s;
      const ModelParams params = train(dataset, config);
      row.per_seed.push_back(evaluate(holdout, params, cutoff).means);
    }
    const auto n = static_cast<double>(grid.n_seeds);
    for (std::size_t c = 0; c < kNumMetrics; ++c) {
      double sum = 0.0;
      for (const auto& m : row.per_seed) sum += as_array(m)[c];
      row.mean[c] = sum / n;
      double sq = 0.0;
      for (const auto& m : row.per_seed) {
        const double dev = as_array(m)[c] - row.mean[c];
        sq += dev * dev;
      }
      row.stddev[c] = grid.n_seeds > 1 ? std::sqrt(sq / (n - 1.0)) : 0.0;
    }
  };

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= rows.size()) return;
      try {
        run_cell(rows[idx]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(rows.size());
        return;
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(jobs, 1, rows.size());
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  constexpr std::size_t kAuc = kNumMetrics - 1;
  const GridRow* best = &rows.front();
  for (const GridRow& row : rows) {
    // Rows are sorted by (K, eta, lambda), so strict improvement keeps the
    // smallest cell among ties.
    if (row.mean[kAuc] > best->mean[kAuc]) best = &row;
  }
  GridResult result;
  result.best = base.hyper;
  result.best.k = best->k;
  result.best.eta = best->eta;
  result.best.lambda = best->lambda;
  result.best.method = method;
  result.rows = std::move(rows);
  return result;
}

void write_grid_tsv(std::ostream& out, const GridResult& result,
                    std::size_t cutoff) {
  const auto names = metric_names(cutoff);
  out << "K\teta\tlambda\tseeds";
  for (const auto& name : names) out << '\t' << name << "_mean\t" << name << "_std";
  out << '\n';
  for (const GridRow& row : result.rows) {
    out << fmt::format("{}\t{}\t{}\t{}", row.k, row.eta, row.lambda,
                       row.per_seed.size());
    for (std::size_t c = 0; c < kNumMetrics; ++c) {
      out << fmt::format("\t{:.6f}\t{:.6f}", row.mean[c], row.stddev[c]);
    }
    out << '\n';
  }
}

}  // namespace p3s
