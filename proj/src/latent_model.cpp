#include "p3s/latent_model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/core.h>

#include "p3s/error.hpp"

namespace p3s {

std::string_view to_string(Method method) {
  switch (method) {
    case Method::kMostPop: return "mostpop";
    case Method::kWmf: return "wmf";
    case Method::kBpr: return "bpr";
    case Method::kP3s1: return "p3s1";
    case Method::kP3s2: return "p3s2";
    case Method::kP3s3: return "p3s3";
  }
  return "unknown";
}

std::optional<Method> parse_method(std::string_view text) {
  for (Method m : {Method::kMostPop, Method::kWmf, Method::kBpr, Method::kP3s1,
                   Method::kP3s2, Method::kP3s3}) {
    if (text == to_string(m)) return m;
  }
  return std::nullopt;
}

bool is_pairwise(Method method) {
  return method != Method::kMostPop && method != Method::kWmf;
}

void HyperParams::validate() const {
  if (k < 1) throw Error(ErrorCode::kConfig, "K must be >= 1");
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    throw Error(ErrorCode::kConfig, "eta must be > 0");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorCode::kConfig, "lambda must be >= 0");
  }
  if (epochs < 1) throw Error(ErrorCode::kConfig, "epochs must be >= 1");
  if (!(wmf_alpha >= 0.0)) {
    throw Error(ErrorCode::kConfig, "wmf_alpha must be >= 0");
  }
}

ModelParams::ModelParams(std::size_t num_users, std::size_t num_items,
                         std::size_t k)
    : num_users_(num_users),
      num_items_(num_items),
      k_(k),
      user_factors_(num_users * k, 0.0),
      item_factors_(num_items * k, 0.0),
      item_bias_(num_items, 0.0) {}

std::span<const double> ModelParams::user(UserIndex u) const {
  if (u >= num_users_) {
    throw Error(ErrorCode::kIndex, fmt::format("user {} out of range", u));
  }
  return std::span<const double>(user_factors_).subspan(u * k_, k_);
}

std::span<double> ModelParams::user(UserIndex u) {
  if (u >= num_users_) {
    throw Error(ErrorCode::kIndex, fmt::format("user {} out of range", u));
  }
  return std::span<double>(user_factors_).subspan(u * k_, k_);
}

std::span<const double> ModelParams::item(ItemIndex i) const {
  if (i >= num_items_) {
    throw Error(ErrorCode::kIndex, fmt::format("item {} out of range", i));
  }
  return std::span<const double>(item_factors_).subspan(i * k_, k_);
}

std::span<double> ModelParams::item(ItemIndex i) {
  if (i >= num_items_) {
    throw Error(ErrorCode::kIndex, fmt::format("item {} out of range", i));
  }
  return std::span<double>(item_factors_).subspan(i * k_, k_);
}

double ModelParams::bias(ItemIndex i) const {
  if (i >= num_items_) {
    throw Error(ErrorCode::kIndex, fmt::format("item {} out of range", i));
  }
  return item_bias_[i];
}

double& ModelParams::bias(ItemIndex i) {
  if (i >= num_items_) {
    throw Error(ErrorCode::kIndex, fmt::format("item {} out of range", i));
  }
  return item_bias_[i];
}

bool ModelParams::all_finite() const {
  auto finite = [](double v) { return std::isfinite(v); };
  return std::all_of(user_factors_.begin(), user_factors_.end(), finite) &&
         std::all_of(item_factors_.begin(), item_factors_.end(), finite) &&
         std::all_of(item_bias_.begin(), item_bias_.end(), finite);
}

ModelParams init_params(std::size_t num_users, std::size_t num_items,
                        const HyperParams& hyper) {
  if (num_users < 1 || num_items < 1) {
    throw Error(ErrorCode::kConfig, "model needs at least one user and item");
  }
  if (hyper.k < 1) throw Error(ErrorCode::kConfig, "K must be >= 1");
  ModelParams params(num_users, num_items, hyper.k);
  std::mt19937_64 rng(hyper.seed);
  std::normal_distribution<double> normal(0.0, kInitStddev);
  for (double& v : params.user_factors()) v = normal(rng);
  for (double& v : params.item_factors()) v = normal(rng);
  return params;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t f = 0; f < a.size(); ++f) sum += a[f] * b[f];
  return sum;
}

double score(const ModelParams& params, UserIndex u, ItemIndex i) {
  return dot(params.user(u), params.item(i)) + params.bias(i);
}

std::vector<double> score_all(const ModelParams& params, UserIndex u) {
  auto alpha = params.user(u);
  auto beta = params.item_factors();
  auto gamma = params.item_bias();
  const std::size_t k = params.k();
  std::vector<double> scores(params.num_items());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    scores[i] = dot(alpha, beta.subspan(i * k, k)) + gamma[i];
  }
  return scores;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

}  // namespace p3s
