#include "p3s/objectives.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <fmt/core.h>

#include "p3s/error.hpp"

namespace p3s {

namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::vector<ItemIndex> members(const TriPartition& part, ItemSet set) {
  switch (set) {
    case ItemSet::kPurchased:
      return {part.purchased().begin(), part.purchased().end()};
    case ItemSet::kClickedOnly:
      return {part.clicked_only().begin(), part.clicked_only().end()};
    default:
      break;
  }
  std::vector<ItemIndex> out;
  out.reserve(set_size(part, set));
  for (std::size_t i = 0; i < part.universe_size(); ++i) {
    if (in_set(part, set, static_cast<ItemIndex>(i))) {
      out.push_back(static_cast<ItemIndex>(i));
    }
  }
  return out;
}

// Calls fn(winner, loser) for every pair of every active relation.
template <typename Fn>
void for_each_pair(Method method, const TriPartition& part, Fn&& fn) {
  for (const RelationDef& def : pair_schema(method, part)) {
    if (!def.active) continue;
    const auto winners = members(part, def.winners);
    const auto losers = members(part, def.losers);
    for (ItemIndex w : winners) {
      for (ItemIndex l : losers) fn(w, l);
    }
  }
}

void check_shape(const ModelParams& params, const Dataset& dataset) {
  if (params.num_users() != dataset.num_users() ||
      params.num_items() != dataset.num_items()) {
    throw Error(ErrorCode::kContract,
                fmt::format("model is {}x{} but dataset is {}x{}",
                            params.num_users(), params.num_items(),
                            dataset.num_users(), dataset.num_items()));
  }
}

double squared_norm(std::span<const double> v) { return dot(v, v); }

}  // namespace

std::string_view to_string(Relation relation) {
  switch (relation) {
    case Relation::kPvsN: return "P>N";
    case Relation::kPvsC: return "P>C";
    case Relation::kCvsN: return "C>N";
    case Relation::kNvsC: return "N>C";
    case Relation::kPvsRest: return "P>C+N";
  }
  return "?";
}

ItemSet winner_set(Relation relation) {
  switch (relation) {
    case Relation::kCvsN: return ItemSet::kClickedOnly;
    case Relation::kNvsC: return ItemSet::kNonClicked;
    default: return ItemSet::kPurchased;
  }
}

ItemSet loser_set(Relation relation) {
  switch (relation) {
    case Relation::kPvsN:
    case Relation::kCvsN: return ItemSet::kNonClicked;
    case Relation::kPvsC:
    case Relation::kNvsC: return ItemSet::kClickedOnly;
    case Relation::kPvsRest: return ItemSet::kNonPurchased;
  }
  return ItemSet::kNonClicked;
}

std::size_t set_size(const TriPartition& part, ItemSet set) {
  switch (set) {
    case ItemSet::kPurchased: return part.purchased().size();
    case ItemSet::kClickedOnly: return part.clicked_only().size();
    case ItemSet::kNonClicked: return part.non_clicked_size();
    case ItemSet::kNonPurchased:
      return part.universe_size() - part.purchased().size();
  }
  return 0;
}

bool in_set(const TriPartition& part, ItemSet set, ItemIndex item) {
  switch (set) {
    case ItemSet::kPurchased: return part.is_purchased(item);
    case ItemSet::kClickedOnly: return part.is_clicked_only(item);
    case ItemSet::kNonClicked: return part.is_non_clicked(item);
    case ItemSet::kNonPurchased:
      return item < part.universe_size() && !part.is_purchased(item);
  }
  return false;
}

std::vector<RelationDef> pair_schema(Method method, const TriPartition& part) {
  std::vector<Relation> relations;
  switch (method) {
    case Method::kBpr: relations = {Relation::kPvsRest}; break;
    case Method::kP3s1: relations = {Relation::kPvsN}; break;
    case Method::kP3s2: relations = {Relation::kPvsC, Relation::kCvsN}; break;
    case Method::kP3s3: relations = {Relation::kPvsC, Relation::kNvsC}; break;
    default:
      throw Error(ErrorCode::kUnsupportedMethod,
                  fmt::format("{} is not a pairwise method", to_string(method)));
  }
  std::vector<RelationDef> defs;
  for (Relation r : relations) {
    const ItemSet w = winner_set(r);
    const ItemSet l = loser_set(r);
    const std::size_t pairs = set_size(part, w) * set_size(part, l);
    defs.push_back({r, w, l, pairs > 0, pairs});
  }
  return defs;
}

std::size_t total_pair_count(const Dataset& dataset, Method method) {
  std::size_t total = 0;
  for (const TriPartition& part : dataset.partitions()) {
    for (const RelationDef& def : pair_schema(method, part)) {
      total += def.pair_count;
    }
  }
  return total;
}

PairGradient pairwise_gradient(const ModelParams& params, const PairSample& s,
                               double lambda) {
  if (s.winner == s.loser) {
    throw Error(ErrorCode::kInvalidSample,
                fmt::format("winner and loser are both item {}", s.winner));
  }
  const auto alpha = params.user(s.u);
  const auto beta_w = params.item(s.winner);
  const auto beta_l = params.item(s.loser);
  const double gamma_w = params.bias(s.winner);
  const double gamma_l = params.bias(s.loser);

  double d = gamma_w - gamma_l;
  for (std::size_t f = 0; f < alpha.size(); ++f) {
    d += alpha[f] * (beta_w[f] - beta_l[f]);
  }
  const double g = 1.0 - sigmoid(d);

  PairGradient grad;
  grad.u = s.u;
  grad.winner = s.winner;
  grad.loser = s.loser;
  grad.log_likelihood = log_sigmoid(d);
  const std::size_t k = alpha.size();
  grad.user.resize(k);
  grad.winner_factors.resize(k);
  grad.loser_factors.resize(k);
  for (std::size_t f = 0; f < k; ++f) {
    grad.user[f] = g * (beta_w[f] - beta_l[f]) - lambda * alpha[f];
    grad.winner_factors[f] = g * alpha[f] - lambda * beta_w[f];
    grad.loser_factors[f] = -g * alpha[f] - lambda * beta_l[f];
  }
  grad.winner_bias = g - lambda * gamma_w;
  grad.loser_bias = -g - lambda * gamma_l;
  return grad;
}

double pair_objective(const ModelParams& params, const PairSample& s,
                      double lambda) {
  const double d = score(params, s.u, s.winner) - score(params, s.u, s.loser);
  const double reg = squared_norm(params.user(s.u)) +
                     squared_norm(params.item(s.winner)) +
                     squared_norm(params.item(s.loser)) +
                     params.bias(s.winner) * params.bias(s.winner) +
                     params.bias(s.loser) * params.bias(s.loser);
  return log_sigmoid(d) - 0.5 * lambda * reg;
}

double regularization(const ModelParams& params, double lambda) {
  return 0.5 * lambda *
         (squared_norm(params.user_factors()) +
          squared_norm(params.item_factors()) +
          squared_norm(params.item_bias()));
}

ObjectiveValue full_objective(const ModelParams& params,
                              const Dataset& dataset, Method method,
                              double lambda) {
  check_shape(params, dataset);
  ObjectiveValue value;
  for (std::size_t u = 0; u < dataset.num_users(); ++u) {
    const auto uid = static_cast<UserIndex>(u);
    const auto& part = dataset.partition(uid);
    const auto scores = score_all(params, uid);
    for_each_pair(method, part, [&](ItemIndex w, ItemIndex l) {
      value.log_likelihood += log_sigmoid(scores[w] - scores[l]);
    });
  }
  value.regularization = regularization(params, lambda);
  value.total = value.log_likelihood - value.regularization;
  return value;
}

ModelParams full_gradient(const ModelParams& params, const Dataset& dataset,
                          Method method, double lambda) {
  check_shape(params, dataset);
  const std::size_t k = params.k();
  ModelParams grad(params.num_users(), params.num_items(), k);
  std::vector<double> coeff(params.num_items());
  for (std::size_t u = 0; u < dataset.num_users(); ++u) {
    const auto uid = static_cast<UserIndex>(u);
    const auto scores = score_all(params, uid);
    std::fill(coeff.begin(), coeff.end(), 0.0);
    for_each_pair(method, dataset.partition(uid), [&](ItemIndex w, ItemIndex l) {
      const double g = 1.0 - sigmoid(scores[w] - scores[l]);
      coeff[w] += g;
      coeff[l] -= g;
    });
    const auto alpha = params.user(uid);
    auto grad_alpha = grad.user(uid);
    for (std::size_t i = 0; i < coeff.size(); ++i) {
      if (coeff[i] == 0.0) continue;
      const auto item = static_cast<ItemIndex>(i);
      const auto beta = params.item(item);
      auto grad_beta = grad.item(item);
      for (std::size_t f = 0; f < k; ++f) {
        grad_alpha[f] += coeff[i] * beta[f];
        grad_beta[f] += coeff[i] * alpha[f];
      }
      grad.bias(item) += coeff[i];
    }
  }
  auto shrink = [lambda](std::span<double> g, std::span<const double> theta) {
    for (std::size_t j = 0; j < g.size(); ++j) g[j] -= lambda * theta[j];
  };
  shrink(grad.user_factors(), params.user_factors());
  shrink(grad.item_factors(), params.item_factors());
  shrink(grad.item_bias(), params.item_bias());
  return grad;
}

double wmf_loss(const ModelParams& params, const Dataset& dataset,
                double alpha_conf, double lambda) {
  check_shape(params, dataset);
  double loss = 0.0;
  for (std::size_t u = 0; u < dataset.num_users(); ++u) {
    const auto uid = static_cast<UserIndex>(u);
    const auto& part = dataset.partition(uid);
    const auto alpha = params.user(uid);
    for (std::size_t i = 0; i < dataset.num_items(); ++i) {
      const auto item = static_cast<ItemIndex>(i);
      const double r = part.is_purchased(item) ? 1.0 : 0.0;
      const double c = 1.0 + alpha_conf * r;
      const double err = r - dot(alpha, params.item(item));
      loss += c * err * err;
    }
  }
  loss += lambda * (squared_norm(params.user_factors()) +
                    squared_norm(params.item_factors()));
  return loss;
}

namespace {

// Solves every row of `solve` against the fixed factors in `fixed`, where
// observed[row] lists the fixed-side indices with r = 1.
void als_half_step(Eigen::Map<RowMatrix> solve,
                   Eigen::Map<const RowMatrix> fixed,
                   const std::vector<std::vector<ItemIndex>>& observed,
                   double alpha_conf, double lambda, std::string_view side) {
  const Eigen::Index k = fixed.cols();
  const Eigen::MatrixXd gram = fixed.transpose() * fixed;
  Eigen::MatrixXd a(k, k);
  Eigen::VectorXd b(k);
  for (Eigen::Index row = 0; row < solve.rows(); ++row) {
    a = gram;
    a.diagonal().array() += lambda;
    b.setZero();
    for (ItemIndex j : observed[row]) {
      const auto y = fixed.row(j).transpose();
      a.noalias() += alpha_conf * y * y.transpose();
      b.noalias() += (1.0 + alpha_conf) * y;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-15)) {
      throw Error(ErrorCode::kNumerical,
                  fmt::format("singular normal equations for {} {}; use "
                              "lambda > 0",
                              side, row));
    }
    solve.row(row) = llt.solve(b).transpose();
  }
}

}  // namespace

ModelParams wmf_als_sweep(const ModelParams& params, const Dataset& dataset,
                          double alpha_conf, double lambda) {
  check_shape(params, dataset);
  if (!(alpha_conf >= 0.0)) {
    throw Error(ErrorCode::kConfig, "confidence weight must be >= 0");
  }
  std::vector<std::vector<ItemIndex>> by_user(dataset.num_users());
  std::vector<std::vector<ItemIndex>> by_item(dataset.num_items());
  for (std::size_t u = 0; u < dataset.num_users(); ++u) {
    for (ItemIndex i : dataset.partition(static_cast<UserIndex>(u)).purchased()) {
      by_user[u].push_back(i);
      by_item[i].push_back(static_cast<UserIndex>(u));
    }
  }
  ModelParams next = params;
  const auto n = static_cast<Eigen::Index>(next.num_users());
  const auto m = static_cast<Eigen::Index>(next.num_items());
  const auto k = static_cast<Eigen::Index>(next.k());
  Eigen::Map<RowMatrix> users(next.user_factors().data(), n, k);
  Eigen::Map<RowMatrix> items(next.item_factors().data(), m, k);
  als_half_step(users, Eigen::Map<const RowMatrix>(items.data(), m, k), by_user,
                alpha_conf, lambda, "user");
  als_half_step(items, Eigen::Map<const RowMatrix>(users.data(), n, k), by_item,
                alpha_conf, lambda, "item");
  return next;
}

std::vector<double> mostpop_scores(const Dataset& dataset) {
  std::vector<double> counts(dataset.num_items(), 0.0);
  for (const TriPartition& part : dataset.partitions()) {
    for (ItemIndex i : part.purchased()) counts[i] += 1.0;
  }
  return counts;
}

}  // namespace p3s
