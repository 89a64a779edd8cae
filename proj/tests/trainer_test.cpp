#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "p3s/metrics.hpp"
#include "p3s/pipeline.hpp"
#include "p3s/trainer.hpp"
#include "test_util.hpp"

namespace p3s {
namespace {

using testing::code_of;
using testing::make_dataset;
using testing::random_dataset;
using testing::random_params;

TrainConfig config_for(Method method, std::size_t k, double eta, double lambda,
                       std::size_t epochs, std::uint64_t seed = 0) {
  TrainConfig config;
  config.hyper.method = method;
  config.hyper.k = k;
  config.hyper.eta = eta;
  config.hyper.lambda = lambda;
  config.hyper.epochs = epochs;
  config.hyper.seed = seed;
  return config;
}

// User 0: P = {0}, C = {1}, N = {2, 3}. User 1: P = {0}, C = {}, N = {1, 2, 3}.
Dataset sampler_dataset() {
  return make_dataset(4, {{{0}, {1}, {}}, {{0}, {}, {}}});
}

TEST(PairSampler, FrequenciesMatchTwoStageScheme) {
  const auto ds = sampler_dataset();
  const PairSampler sampler(ds, Method::kP3s2);
  ASSERT_EQ(sampler.trainable_users(), 1u);
  std::mt19937_64 rng(1);
  std::map<std::pair<ItemIndex, ItemIndex>, int> counts;
  constexpr int kDraws = 30000;
  for (int d = 0; d < kDraws; ++d) {
    const auto s = sampler(rng);
    ++counts[{s.winner, s.loser}];
  }
  // One relation in two is P>C (a single pair); C>N splits over two losers.
  const std::map<std::pair<ItemIndex, ItemIndex>, double> expected = {
      {{0, 1}, 0.5}, {{1, 2}, 0.25}, {{1, 3}, 0.25}};
  ASSERT_EQ(counts.size(), expected.size());
  for (const auto& [pair, p] : expected) {
    const double sigma = std::sqrt(p * (1 - p) / kDraws);
    EXPECT_NEAR(counts[pair] / static_cast<double>(kDraws), p, 5 * sigma);
  }
}

TEST(PairSampler, UserWithoutClickedOnlyItemsNeverDrawn) {
  const auto ds = sampler_dataset();
  std::mt19937_64 rng(2);
  for (int d = 0; d < 5000; ++d) {
    EXPECT_EQ(sample_pair(ds, Method::kP3s2, rng).u, 0u);
  }
}

TEST(PairSampler, UsersAreDrawnUniformly) {
  const auto ds = sampler_dataset();
  const PairSampler sampler(ds, Method::kBpr);
  ASSERT_EQ(sampler.trainable_users(), 2u);
  EXPECT_EQ(sampler.total_pairs(), 6u);
  std::mt19937_64 rng(3);
  int user0 = 0;
  constexpr int kDraws = 20000;
  for (int d = 0; d < kDraws; ++d) user0 += sampler(rng).u == 0;
  EXPECT_NEAR(user0 / static_cast<double>(kDraws), 0.5, 5 * std::sqrt(0.25 / kDraws));
}

TEST(PairSampler, SamplesAlwaysBelongToTheSchema) {
  std::mt19937_64 rng(4);
  const auto ds = random_dataset(8, 12, rng);
  const auto sets = oracle::user_sets(ds);
  for (Method m : {Method::kBpr, Method::kP3s1, Method::kP3s2, Method::kP3s3}) {
    const PairSampler sampler(ds, m);
    for (int d = 0; d < 25000; ++d) {
      const auto s = sampler(rng);
      ASSERT_TRUE(oracle::prefers(m, sets[s.u], s.winner, s.loser))
          << to_string(m) << " u=" << s.u << " w=" << s.winner << " l=" << s.loser;
      const auto& part = ds.partition(s.u);
      ASSERT_TRUE(in_set(part, winner_set(s.relation), s.winner));
      ASSERT_TRUE(in_set(part, loser_set(s.relation), s.loser));
    }
  }
}

TEST(PairSampler, NoActiveRelationIsUntrainable) {
  const auto ds = make_dataset(3, {{{0}, {}, {}}, {{1}, {}, {}}});
  EXPECT_EQ(code_of([&] { PairSampler(ds, Method::kP3s2); }), ErrorCode::kUntrainable);
  EXPECT_EQ(code_of([&] { train(ds, config_for(Method::kP3s3, 2, 0.05, 0.01, 1)); }),
            ErrorCode::kUntrainable);
  auto full = config_for(Method::kP3s2, 2, 0.05, 0.01, 1);
  full.mode = SamplingMode::kFullBatch;
  EXPECT_EQ(code_of([&] { train(ds, full); }), ErrorCode::kUntrainable);
}

TEST(AscentStep, AddsScaledGradient) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = random_params(2, 5, 3, rng);
    const PairSample s{1, 4, 2, Relation::kPvsN};
    const auto g = pairwise_gradient(p, s, 0.02);
    auto expected = p;
    for (std::size_t f = 0; f < 3; ++f) {
      expected.user(1)[f] += 0.1 * g.user[f];
      expected.item(4)[f] += 0.1 * g.winner_factors[f];
      expected.item(2)[f] += 0.1 * g.loser_factors[f];
    }
    expected.bias(4) += 0.1 * g.winner_bias;
    expected.bias(2) += 0.1 * g.loser_bias;
    EXPECT_DOUBLE_EQ(ascent_step(p, s, 0.02, 0.1), g.log_likelihood);
    for (std::size_t j = 0; j < p.user_factors().size(); ++j) {
      EXPECT_NEAR(p.user_factors()[j], expected.user_factors()[j], 1e-15);
    }
    for (std::size_t j = 0; j < p.item_factors().size(); ++j) {
      EXPECT_NEAR(p.item_factors()[j], expected.item_factors()[j], 1e-15);
    }
    for (std::size_t j = 0; j < p.item_bias().size(); ++j) {
      EXPECT_NEAR(p.item_bias()[j], expected.item_bias()[j], 1e-15);
    }
  }
}

TEST(Train, FullBatchObjectiveNeverDrops) {
  // 3 users x 6 items with all three tiers present.
  const auto ds = make_dataset(6, {{{0}, {1, 2}, {}}, {{2, 3}, {4}, {}}, {{5}, {0}, {}}});
  for (Method m : {Method::kBpr, Method::kP3s1, Method::kP3s2, Method::kP3s3}) {
    double prev = -INFINITY;
    for (std::size_t epochs = 1; epochs <= 100; ++epochs) {
      auto config = config_for(m, 2, 0.01, 0.01, epochs);
      config.mode = SamplingMode::kFullBatch;
      const double value = oracle::objective(train(ds, config), ds, m, 0.01);
      EXPECT_GE(value, prev - 1e-9) << to_string(m) << " epoch " << epochs;
      prev = value;
    }
  }
}

TEST(Train, FullBatchPairCap) {
  const auto ds = sampler_dataset();
  auto config = config_for(Method::kBpr, 2, 0.01, 0.01, 1);
  config.mode = SamplingMode::kFullBatch;
  config.full_batch_pair_cap = 5;
  EXPECT_EQ(code_of([&] { train(ds, config); }), ErrorCode::kConfig);
}

TEST(Train, DeterministicPerSeed) {
  std::mt19937_64 rng(6);
  const auto ds = random_dataset(10, 20, rng);
  for (Method m : {Method::kBpr, Method::kP3s2, Method::kWmf}) {
    const auto a = train(ds, config_for(m, 3, 0.05, 0.01, 5, 7));
    const auto b = train(ds, config_for(m, 3, 0.05, 0.01, 5, 7));
    const auto c = train(ds, config_for(m, 3, 0.05, 0.01, 5, 8));
    EXPECT_EQ(a, b) << to_string(m);
    EXPECT_NE(a, c) << to_string(m);
  }
}

TEST(Train, MostPopIgnoresHyperParameters) {
  std::mt19937_64 rng(7);
  const auto ds = random_dataset(10, 20, rng);
  const auto a = train(ds, config_for(Method::kMostPop, 3, 0.05, 0.01, 5));
  const auto b = train(ds, config_for(Method::kMostPop, 50, 0.5, 0.9, 1, 3));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, mostpop_model(ds));
  const auto counts = mostpop_scores(ds);
  for (ItemIndex i = 0; i < ds.num_items(); ++i) EXPECT_EQ(a.bias(i), counts[i]);
}

TEST(Train, DivergenceIsReported) {
  std::mt19937_64 rng(8);
  const auto ds = random_dataset(5, 10, rng);
  auto config = config_for(Method::kP3s1, 2, 1e10, 1.0, 100);
  config.mode = SamplingMode::kFullBatch;
  EXPECT_EQ(code_of([&] { train(ds, config); }), ErrorCode::kDivergence);
  EXPECT_EQ(code_of([&] { train(ds, config_for(Method::kP3s1, 2, 1e10, 1.0, 100)); }),
            ErrorCode::kDivergence);
}

TEST(Train, InvalidHyperParameters) {
  const auto ds = sampler_dataset();
  EXPECT_EQ(code_of([&] { train(ds, config_for(Method::kBpr, 0, 0.05, 0.01, 1)); }),
            ErrorCode::kConfig);
  EXPECT_EQ(code_of([&] { train(ds, config_for(Method::kBpr, 2, 0.0, 0.01, 1)); }),
            ErrorCode::kConfig);
  EXPECT_EQ(code_of([&] { train(ds, config_for(Method::kBpr, 2, 0.05, -1.0, 1)); }),
            ErrorCode::kConfig);
}

TEST(Train, ProgressLinesPerEpoch) {
  const auto ds = sampler_dataset();
  std::ostringstream log;
  auto config = config_for(Method::kBpr, 2, 0.05, 0.01, 4);
  config.eval_every = 2;
  config.progress = &log;
  train(ds, config);
  const std::string text = log.str();
  EXPECT_EQ(text.rfind("epoch 2\t", 0), 0u) << text;
  EXPECT_NE(text.find("\nepoch 4\t"), std::string::npos) << text;
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
}

TEST(Train, PlantedStructureIsLearned) {
  SynthConfig synth;
  synth.n = 100;
  synth.m = 150;
  int good = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    synth.seed = seed;
    const auto split = chronological_split(generate_synthetic(synth).log);
    const auto params =
        train(split.dataset, config_for(Method::kP3s2, 10, 0.05, 0.01, 30, seed));
    good += evaluate(split.dataset, params).means.auc > 0.6;
  }
  EXPECT_GE(good, 4);
}

GridSpec small_grid() {
  GridSpec grid;
  grid.k_values = {4, 2};
  grid.eta_values = {0.1, 0.05};
  grid.lambda_values = {0.01};
  grid.n_seeds = 3;
  return grid;
}

TEST(GridSearch, RowsAggregateIndependentRuns) {
  std::mt19937_64 rng(9);
  const auto ds = random_dataset(12, 20, rng, 0.2, 0.3, 0.3);
  auto base = config_for(Method::kBpr, 1, 1, 0, 3, 100);
  const auto result = grid_search(ds, ds, small_grid(), Method::kBpr, base, 5);
  ASSERT_EQ(result.rows.size(), 4u);
  EXPECT_EQ(result.rows[0].k, 2u);
  EXPECT_EQ(result.rows[0].eta, 0.05);
  EXPECT_EQ(result.rows[3].k, 4u);
  EXPECT_EQ(result.rows[3].eta, 0.1);

  const GridRow* best = nullptr;
  for (const auto& row : result.rows) {
    ASSERT_EQ(row.per_seed.size(), 3u);
    for (std::size_t s = 0; s < 3; ++s) {
      auto config = config_for(Method::kBpr, row.k, row.eta, row.lambda, 3, 100 + s);
      const auto expected = as_array(evaluate(ds, train(ds, config), 5).means);
      EXPECT_EQ(as_array(row.per_seed[s]), expected);
    }
    for (std::size_t c = 0; c < kNumMetrics; ++c) {
      double values[3];
      for (std::size_t s = 0; s < 3; ++s) values[s] = as_array(row.per_seed[s])[c];
      const double mean = (values[0] + values[1] + values[2]) / 3.0;
      double sq = 0.0;
      for (double v : values) sq += (v - mean) * (v - mean);
      EXPECT_NEAR(row.mean[c], mean, 1e-12);
      EXPECT_NEAR(row.stddev[c], std::sqrt(sq / 2.0), 1e-12);
    }
    if (best == nullptr || row.mean[kNumMetrics - 1] > best->mean[kNumMetrics - 1]) {
      best = &row;
    }
  }
  EXPECT_EQ(result.best.k, best->k);
  EXPECT_EQ(result.best.eta, best->eta);
  EXPECT_EQ(result.best.lambda, best->lambda);
  EXPECT_EQ(result.best.method, Method::kBpr);
}

TEST(GridSearch, AxisOrderAndJobsDoNotMatter) {
  std::mt19937_64 rng(10);
  const auto ds = random_dataset(10, 15, rng, 0.2, 0.3, 0.3);
  auto base = config_for(Method::kP3s1, 1, 1, 0, 2);
  auto grid = small_grid();
  const auto a = grid_search(ds, ds, grid, Method::kP3s1, base);
  std::reverse(grid.k_values.begin(), grid.k_values.end());
  std::reverse(grid.eta_values.begin(), grid.eta_values.end());
  const auto b = grid_search(ds, ds, grid, Method::kP3s1, base, 5, 3);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t r = 0; r < a.rows.size(); ++r) {
    EXPECT_EQ(a.rows[r].k, b.rows[r].k);
    EXPECT_EQ(a.rows[r].eta, b.rows[r].eta);
    EXPECT_EQ(a.rows[r].mean, b.rows[r].mean);
    EXPECT_EQ(a.rows[r].stddev, b.rows[r].stddev);
  }
  EXPECT_EQ(a.best.k, b.best.k);
  EXPECT_EQ(a.best.eta, b.best.eta);
}

TEST(GridSearch, EmptyAxisRejected) {
  const auto ds = sampler_dataset();
  auto grid = small_grid();
  grid.lambda_values.clear();
  EXPECT_EQ(code_of([&] { grid_search(ds, ds, grid, Method::kBpr, TrainConfig{}); }),
            ErrorCode::kConfig);
}

TEST(GridSearch, TsvHasOneLinePerCell) {
  std::mt19937_64 rng(11);
  const auto ds = random_dataset(8, 12, rng, 0.2, 0.3, 0.3);
  const auto result =
      grid_search(ds, ds, small_grid(), Method::kBpr, config_for(Method::kBpr, 1, 1, 0, 1));
  std::ostringstream out;
  write_grid_tsv(out, result, 5);
  const std::string text = out.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 5);
  EXPECT_EQ(text.rfind("K\teta\tlambda\tseeds\tprec@5_mean\tprec@5_std", 0), 0u) << text;
}

TEST(DefaultGrid, CoversTheUsualRanges) {
  const auto grid = default_grid();
  EXPECT_EQ(grid.k_values.size(), 20u);
  EXPECT_EQ(grid.k_values.front(), 10u);
  EXPECT_EQ(grid.k_values.back(), 200u);
  EXPECT_EQ(grid.eta_values, (std::vector<double>{0.01, 0.05, 0.1}));
  EXPECT_EQ(grid.lambda_values, (std::vector<double>{0.01, 0.05, 0.1}));
  EXPECT_EQ(grid.n_seeds, 5u);
}

}  // namespace
}  // namespace p3s
