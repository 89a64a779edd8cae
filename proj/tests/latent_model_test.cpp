#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "p3s/latent_model.hpp"
#include "test_util.hpp"

namespace p3s {
namespace {

using testing::code_of;
using testing::random_params;

HyperParams hyper_with(std::size_t k, std::uint64_t seed) {
  HyperParams h;
  h.k = k;
  h.seed = seed;
  return h;
}

std::vector<std::size_t> argsort_desc(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
  return order;
}

TEST(InitParams, SameSeedSameParams) {
  EXPECT_EQ(init_params(7, 9, hyper_with(4, 42)), init_params(7, 9, hyper_with(4, 42)));
}

TEST(InitParams, DifferentSeedsDiffer) {
  EXPECT_NE(init_params(7, 9, hyper_with(4, 1)), init_params(7, 9, hyper_with(4, 2)));
}

TEST(InitParams, MomentsMatchInitDistribution) {
  const auto params = init_params(1000, 1000, hyper_with(10, 3));
  for (auto values : {params.user_factors(), params.item_factors()}) {
    ASSERT_EQ(values.size(), 10000u);
    double sum = 0.0;
    double sq = 0.0;
    for (double v : values) {
      sum += v;
      sq += v * v;
    }
    const double mean = sum / static_cast<double>(values.size());
    const double stddev = std::sqrt(sq / static_cast<double>(values.size()) - mean * mean);
    EXPECT_NEAR(mean, 0.0, 0.005);
    EXPECT_NEAR(stddev, kInitStddev, 0.005);
  }
  for (double b : params.item_bias()) EXPECT_EQ(b, 0.0);
}

TEST(InitParams, EmptyShapeRejected) {
  EXPECT_EQ(code_of([] { init_params(0, 3, hyper_with(2, 0)); }), ErrorCode::kConfig);
  EXPECT_EQ(code_of([] { init_params(3, 0, hyper_with(2, 0)); }), ErrorCode::kConfig);
}

TEST(Score, WorkedExample) {
  ModelParams p(1, 1, 2);
  p.user(0)[0] = 1.0;
  p.user(0)[1] = 2.0;
  p.item(0)[0] = 3.0;
  p.item(0)[1] = -1.0;
  p.bias(0) = 0.5;
  EXPECT_DOUBLE_EQ(score(p, 0, 0), 1.5);
}

TEST(Score, MatchesLoopOracleAndScoreAll) {
  std::mt19937_64 rng(8);
  const auto p = random_params(5, 11, 6, rng);
  for (UserIndex u = 0; u < 5; ++u) {
    const auto all = score_all(p, u);
    ASSERT_EQ(all.size(), 11u);
    for (ItemIndex i = 0; i < 11; ++i) {
      double expected = p.bias(i);
      for (std::size_t f = 0; f < 6; ++f) expected += p.user(u)[f] * p.item(i)[f];
      EXPECT_NEAR(score(p, u, i), expected, 1e-12);
      EXPECT_EQ(all[i], score(p, u, i));
    }
  }
}

TEST(Score, ZeroUserFactorGivesBias) {
  std::mt19937_64 rng(2);
  auto p = random_params(2, 5, 3, rng);
  for (double& v : p.user(1)) v = 0.0;
  for (ItemIndex i = 0; i < 5; ++i) EXPECT_EQ(score(p, 1, i), p.bias(i));
}

TEST(Score, SingleItemCatalog) {
  std::mt19937_64 rng(2);
  const auto p = random_params(3, 1, 2, rng);
  EXPECT_EQ(score_all(p, 2).size(), 1u);
}

TEST(Score, ConstantBiasShiftKeepsRanking) {
  std::mt19937_64 rng(12);
  auto p = random_params(1, 30, 4, rng);
  const auto before = score_all(p, 0);
  for (double& b : p.item_bias()) b += 3.25;
  const auto after = score_all(p, 0);
  EXPECT_EQ(argsort_desc(before), argsort_desc(after));
  for (std::size_t i = 0; i < before.size(); ++i) {
    EXPECT_NEAR(after[i] - before[i], 3.25, 1e-12);
  }
}

TEST(Score, LinearInUserFactors) {
  std::mt19937_64 rng(13);
  auto a = random_params(1, 8, 3, rng);
  auto b = a;
  auto sum = a;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t f = 0; f < 3; ++f) {
    b.user(0)[f] = normal(rng);
    sum.user(0)[f] = a.user(0)[f] + b.user(0)[f];
  }
  for (ItemIndex i = 0; i < 8; ++i) {
    // Factor part of the score is additive; the bias enters once.
    EXPECT_NEAR(score(sum, 0, i), score(a, 0, i) + score(b, 0, i) - a.bias(i), 1e-12);
  }
}

TEST(Sigmoid, KnownValues) {
  EXPECT_EQ(sigmoid(0.0), 0.5);
  EXPECT_NEAR(log_sigmoid(0.0), -std::log(2.0), 1e-15);
  EXPECT_TRUE(std::isfinite(log_sigmoid(-700.0)));
  EXPECT_NEAR(log_sigmoid(-700.0), -700.0, 1e-9);
  EXPECT_NEAR(sigmoid(700.0), 1.0, 1e-15);
  EXPECT_GE(sigmoid(-700.0), 0.0);
  EXPECT_LE(log_sigmoid(700.0), 0.0);
  EXPECT_GT(log_sigmoid(700.0), -1e-300);
}

TEST(Sigmoid, SymmetryAndOracle) {
  for (double x = -30.0; x <= 30.0; x += 0.37) {
    EXPECT_NEAR(sigmoid(x) + sigmoid(-x), 1.0, 1e-15);
    EXPECT_NEAR(sigmoid(x), 1.0 / (1.0 + std::exp(-x)), 1e-15);
    EXPECT_NEAR(log_sigmoid(x), -std::log1p(std::exp(-x)), 1e-12);
  }
}

TEST(ModelParams, IndexChecks) {
  ModelParams p(2, 3, 1);
  EXPECT_EQ(code_of([&] { p.user(2); }), ErrorCode::kIndex);
  EXPECT_EQ(code_of([&] { p.item(3); }), ErrorCode::kIndex);
  EXPECT_EQ(code_of([&] { p.bias(3); }), ErrorCode::kIndex);
}

TEST(ModelParams, FiniteCheck) {
  ModelParams p(1, 1, 1);
  EXPECT_TRUE(p.all_finite());
  p.bias(0) = std::nan("");
  EXPECT_FALSE(p.all_finite());
}

TEST(Method, NamesRoundTrip) {
  for (Method m : {Method::kMostPop, Method::kWmf, Method::kBpr, Method::kP3s1,
                   Method::kP3s2, Method::kP3s3}) {
    EXPECT_EQ(parse_method(to_string(m)), m);
  }
  EXPECT_FALSE(parse_method("p3s4").has_value());
  EXPECT_FALSE(is_pairwise(Method::kWmf));
  EXPECT_TRUE(is_pairwise(Method::kBpr));
}

}  // namespace
}  // namespace p3s
