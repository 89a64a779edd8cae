#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "p3s/interactions.hpp"

namespace p3s {

enum class Method { kMostPop, kWmf, kBpr, kP3s1, kP3s2, kP3s3 };

std::string_view to_string(Method method);
std::optional<Method> parse_method(std::string_view text);
bool is_pairwise(Method method);

struct HyperParams {
  std::size_t k = 10;
  double eta = 0.05;
  double lambda = 0.01;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;
  Method method = Method::kP3s2;
  double wmf_alpha = 40.0;

  // Throws kConfig when K, eta, lambda or epochs are out of range.
  void validate() const;
};

// Factor model x_ui = <user_factors[u], item_factors[i]> + item_bias[i].
// Both factor matrices are stored row-major.
class ModelParams {
 public:
  ModelParams() = default;
  ModelParams(std::size_t num_users, std::size_t num_items, std::size_t k);

  std::size_t num_users() const { return num_users_; }
  std::size_t num_items() const { return num_items_; }
  std::size_t k() const { return k_; }

  std::span<const double> user(UserIndex u) const;
  std::span<double> user(UserIndex u);
  std::span<const double> item(ItemIndex i) const;
  std::span<double> item(ItemIndex i);
  double bias(ItemIndex i) const;
  double& bias(ItemIndex i);

  std::span<const double> user_factors() const { return user_factors_; }
  std::span<double> user_factors() { return user_factors_; }
  std::span<const double> item_factors() const { return item_factors_; }
  std::span<double> item_factors() { return item_factors_; }
  std::span<const double> item_bias() const { return item_bias_; }
  std::span<double> item_bias() { return item_bias_; }

  bool all_finite() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

 private:
  std::size_t num_users_ = 0;
  std::size_t num_items_ = 0;
  std::size_t k_ = 0;
  std::vector<double> user_factors_;
  std::vector<double> item_factors_;
  std::vector<double> item_bias_;
};

inline constexpr double kInitStddev = 0.1;

// Factors ~ N(0, 0.1^2) from a generator seeded with hyper.seed; biases 0.
ModelParams init_params(std::size_t num_users, std::size_t num_items,
                        const HyperParams& hyper);

double dot(std::span<const double> a, std::span<const double> b);

double score(const ModelParams& params, UserIndex u, ItemIndex i);
std::vector<double> score_all(const ModelParams& params, UserIndex u);

double sigmoid(double x);
// ln(sigmoid(x)) without cancellation for large |x|.
double log_sigmoid(double x);

}  // namespace p3s
