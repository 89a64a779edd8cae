#pragma once

// Small dataset and parameter builders shared by tests and acceptance.

#include <random>
#include <string>
#include <vector>

#include "p3s/interactions.hpp"
#include "p3s/latent_model.hpp"

namespace p3s::testing {

struct UserSpec {
  std::vector<ItemIndex> purchased;
  std::vector<ItemIndex> clicked;  // purchases are clicked implicitly
  std::vector<ItemIndex> test;
};

// Builds a dataset with users "u<j>" and items "i<j>" registered in index
// order, so indices in `users` are the dataset's indices.
inline Dataset make_dataset(std::size_t m, const std::vector<UserSpec>& users) {
  IdMap user_ids;
  IdMap item_ids;
  for (std::size_t u = 0; u < users.size(); ++u) user_ids.add("u" + std::to_string(u));
  for (std::size_t i = 0; i < m; ++i) item_ids.add("i" + std::to_string(i));
  std::vector<Event> events;
  std::vector<std::vector<ItemIndex>> test(users.size());
  std::int64_t t = 0;
  for (std::size_t u = 0; u < users.size(); ++u) {
    const auto uid = static_cast<UserIndex>(u);
    for (ItemIndex i : users[u].clicked) events.push_back({uid, i, ++t, EventKind::kClick});
    for (ItemIndex i : users[u].purchased) {
      events.push_back({uid, i, ++t, EventKind::kPurchase});
    }
    test[u] = users[u].test;
  }
  return Dataset(InteractionLog(std::move(events), std::move(user_ids),
                                std::move(item_ids)),
                 std::move(test));
}

// Random users over m items: each item is purchased with probability
// p_buy, otherwise clicked with probability p_click, otherwise held out as
// a test purchase with probability p_test.
inline Dataset random_dataset(std::size_t n, std::size_t m, std::mt19937_64& rng,
                              double p_buy = 0.2, double p_click = 0.3,
                              double p_test = 0.2) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<UserSpec> users(n);
  for (auto& spec : users) {
    for (std::size_t i = 0; i < m; ++i) {
      const auto item = static_cast<ItemIndex>(i);
      const double r = unit(rng);
      if (r < p_buy) {
        spec.purchased.push_back(item);
      } else if (r < p_buy + p_click) {
        spec.clicked.push_back(item);
      } else if (unit(rng) < p_test) {
        spec.test.push_back(item);
      }
    }
  }
  return make_dataset(m, users);
}

inline ModelParams random_params(std::size_t n, std::size_t m, std::size_t k,
                                 std::mt19937_64& rng, double scale = 1.0) {
  ModelParams params(n, m, k);
  std::normal_distribution<double> normal(0.0, scale);
  for (double& v : params.user_factors()) v = normal(rng);
  for (double& v : params.item_factors()) v = normal(rng);
  for (double& v : params.item_bias()) v = normal(rng);
  return params;
}

}  // namespace p3s::testing
