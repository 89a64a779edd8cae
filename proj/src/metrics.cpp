#include "p3s/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <fmt/core.h>

#include "p3s/error.hpp"

namespace p3s {

namespace {

void require_relevant(const CandidateRanking& r) {
  if (r.relevant.empty()) {
    throw Error(ErrorCode::kContract,
                fmt::format("user {} has no relevant candidate", r.user));
  }
}

std::size_t hits_at(const CandidateRanking& r, std::size_t k) {
  const std::size_t top = std::min(k, r.candidates.size());
  return static_cast<std::size_t>(
      std::count(r.is_relevant.begin(), r.is_relevant.begin() + top, true));
}

}  // namespace

CandidateRanking rank_items(UserIndex user, std::span<const ItemIndex> items,
                            std::span<const double> scores,
                            std::span<const ItemIndex> relevant) {
  if (items.size() != scores.size()) {
    throw Error(ErrorCode::kContract, "items and scores differ in length");
  }
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return items[a] < items[b];
  });

  std::vector<ItemIndex> wanted(relevant.begin(), relevant.end());
  std::sort(wanted.begin(), wanted.end());

  CandidateRanking r;
  r.user = user;
  r.candidates.reserve(items.size());
  r.scores.reserve(items.size());
  r.is_relevant.reserve(items.size());
  for (std::size_t idx : order) {
    const ItemIndex item = items[idx];
    if (!r.candidates.empty() && r.candidates.back() == item) continue;
    const bool rel = std::binary_search(wanted.begin(), wanted.end(), item);
    r.candidates.push_back(item);
    r.scores.push_back(scores[idx]);
    r.is_relevant.push_back(rel);
    if (rel) r.relevant.push_back(item);
  }
  std::sort(r.relevant.begin(), r.relevant.end());
  r.relevant.erase(std::unique(r.relevant.begin(), r.relevant.end()),
                   r.relevant.end());
  return r;
}

CandidateRanking build_candidates(const Dataset& dataset,
                                  std::span<const double> item_scores,
                                  UserIndex u) {
  const TriPartition& part = dataset.partition(u);
  if (item_scores.size() != dataset.num_items()) {
    throw Error(ErrorCode::kContract, "score vector does not cover the catalog");
  }
  std::vector<ItemIndex> items;
  std::vector<double> scores;
  items.reserve(part.non_clicked_size());
  scores.reserve(part.non_clicked_size());
  for (std::size_t i = 0; i < dataset.num_items(); ++i) {
    const auto item = static_cast<ItemIndex>(i);
    if (!part.is_non_clicked(item)) continue;
    items.push_back(item);
    scores.push_back(item_scores[i]);
  }
  return rank_items(u, items, scores, dataset.test_purchases(u));
}

CandidateRanking build_candidates(const Dataset& dataset,
                                  const ModelParams& params, UserIndex u) {
  return build_candidates(dataset, score_all(params, u), u);
}

double precision_at_k(const CandidateRanking& r, std::size_t k) {
  require_relevant(r);
  if (k < 1) throw Error(ErrorCode::kConfig, "cutoff must be >= 1");
  return static_cast<double>(hits_at(r, k)) / static_cast<double>(k);
}

double recall_at_k(const CandidateRanking& r, std::size_t k) {
  require_relevant(r);
  if (k < 1) throw Error(ErrorCode::kConfig, "cutoff must be >= 1");
  return static_cast<double>(hits_at(r, k)) /
         static_cast<double>(r.num_relevant());
}

double average_precision(const CandidateRanking& r) {
  require_relevant(r);
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t p = 0; p < r.candidates.size(); ++p) {
    if (!r.is_relevant[p]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(p + 1);
  }
  return sum / static_cast<double>(r.num_relevant());
}

double reciprocal_rank(const CandidateRanking& r) {
  require_relevant(r);
  for (std::size_t p = 0; p < r.candidates.size(); ++p) {
    if (r.is_relevant[p]) return 1.0 / static_cast<double>(p + 1);
  }
  return 0.0;
}

double ndcg(const CandidateRanking& r) {
  require_relevant(r);
  double dcg = 0.0;
  for (std::size_t p = 0; p < r.candidates.size(); ++p) {
    if (r.is_relevant[p]) dcg += 1.0 / std::log2(static_cast<double>(p + 2));
  }
  double idcg = 0.0;
  for (std::size_t p = 0; p < r.num_relevant(); ++p) {
    idcg += 1.0 / std::log2(static_cast<double>(p + 2));
  }
  return dcg / idcg;
}

double auc_user(const CandidateRanking& r) {
  require_relevant(r);
  const std::size_t n_pos = r.num_relevant();
  const std::size_t n_neg = r.candidates.size() - n_pos;
  if (n_neg == 0) {
    throw Error(ErrorCode::kUndefinedAuc,
                fmt::format("user {} has no non-relevant candidate", r.user));
  }
  // Candidates are sorted by descending score, so walk tie groups from the
  // bottom while counting the negatives already passed.
  double correct = 0.0;
  std::size_t neg_below = 0;
  std::size_t end = r.candidates.size();
  while (end > 0) {
    std::size_t begin = end - 1;
    while (begin > 0 && r.scores[begin - 1] == r.scores[end - 1]) --begin;
    std::size_t pos = 0;
    for (std::size_t p = begin; p < end; ++p) pos += r.is_relevant[p] ? 1 : 0;
    const std::size_t neg = (end - begin) - pos;
    correct += static_cast<double>(pos) *
               (static_cast<double>(neg_below) + 0.5 * static_cast<double>(neg));
    neg_below += neg;
    end = begin;
  }
  return correct / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::array<double, kNumMetrics> as_array(const MetricMeans& means) {
  return {means.precision, means.recall, means.map,
          means.mrr,       means.ndcg,   means.auc};
}

std::vector<std::string> metric_names(std::size_t k) {
  return {fmt::format("prec@{}", k), fmt::format("recall@{}", k), "map", "mrr",
          "ndcg", "auc"};
}

MetricValues evaluate_user(const CandidateRanking& r, std::size_t k) {
  MetricValues v;
  v.precision = precision_at_k(r, k);
  v.recall = recall_at_k(r, k);
  v.average_precision = average_precision(r);
  v.reciprocal_rank = reciprocal_rank(r);
  v.ndcg = ndcg(r);
  if (r.candidates.size() > r.num_relevant()) v.auc = auc_user(r);
  return v;
}

namespace {

template <typename ScoreFn>
EvalReport evaluate_with(const Dataset& dataset, std::size_t k,
                         ScoreFn&& scores_for) {
  if (k < 1) throw Error(ErrorCode::kConfig, "cutoff must be >= 1");
  EvalReport report;
  report.k = k;
  double auc_sum = 0.0;
  for (std::size_t u = 0; u < dataset.num_users(); ++u) {
    const auto uid = static_cast<UserIndex>(u);
    const auto r = build_candidates(dataset, scores_for(uid), uid);
    if (r.relevant.empty()) {
      ++report.skipped_user_count;
      continue;
    }
    const MetricValues v = evaluate_user(r, k);
    report.means.precision += v.precision;
    report.means.recall += v.recall;
    report.means.map += v.average_precision;
    report.means.mrr += v.reciprocal_rank;
    report.means.ndcg += v.ndcg;
    if (v.auc) {
      auc_sum += *v.auc;
      ++report.auc_user_count;
    }
    report.per_user.emplace(uid, v);
    ++report.evaluated_user_count;
  }
  if (report.evaluated_user_count == 0) {
    throw Error(ErrorCode::kEvaluation,
                "no user has a test purchase among their candidates");
  }
  if (report.auc_user_count == 0) {
    throw Error(ErrorCode::kUndefinedAuc,
                "no evaluated user has a non-relevant candidate");
  }
  const auto count = static_cast<double>(report.evaluated_user_count);
  report.means.precision /= count;
  report.means.recall /= count;
  report.means.map /= count;
  report.means.mrr /= count;
  report.means.ndcg /= count;
  report.means.auc = auc_sum / static_cast<double>(report.auc_user_count);
  return report;
}

}  // namespace

EvalReport evaluate(const Dataset& dataset, const ModelParams& params,
                    std::size_t k) {
  if (params.num_users() != dataset.num_users() ||
      params.num_items() != dataset.num_items()) {
    throw Error(ErrorCode::kContract,
                fmt::format("model is {}x{} but dataset is {}x{}",
                            params.num_users(), params.num_items(),
                            dataset.num_users(), dataset.num_items()));
  }
  return evaluate_with(dataset, k,
                       [&](UserIndex u) { return score_all(params, u); });
}

EvalReport evaluate(const Dataset& dataset,
                    std::span<const double> item_scores, std::size_t k) {
  return evaluate_with(dataset, k, [&](UserIndex) { return item_scores; });
}

nlohmann::ordered_json to_json(const EvalReport& report, bool per_user,
                               const IdMap* users) {
  const auto names = metric_names(report.k);
  const auto means = as_array(report.means);
  nlohmann::ordered_json j;
  j["k"] = report.k;
  j["evaluated_users"] = report.evaluated_user_count;
  j["skipped_users"] = report.skipped_user_count;
  j["auc_users"] = report.auc_user_count;
  auto& m = j["means"];
  for (std::size_t c = 0; c < kNumMetrics; ++c) m[names[c]] = means[c];
  if (per_user) {
    auto rows = nlohmann::ordered_json::array();
    for (const auto& [u, v] : report.per_user) {
      nlohmann::ordered_json row;
      if (users != nullptr) {
        row["user"] = users->lookup(u);
      } else {
        row["user"] = u;
      }
      row[names[0]] = v.precision;
      row[names[1]] = v.recall;
      row[names[2]] = v.average_precision;
      row[names[3]] = v.reciprocal_rank;
      row[names[4]] = v.ndcg;
      row[names[5]] = v.auc ? nlohmann::ordered_json(*v.auc) : nullptr;
      rows.push_back(std::move(row));
    }
    j["per_user"] = std::move(rows);
  }
  return j;
}

EvalReport report_from_json(const nlohmann::json& j) {
  try {
    EvalReport report;
    report.k = j.at("k").get<std::size_t>();
    report.evaluated_user_count = j.at("evaluated_users").get<std::size_t>();
    report.skipped_user_count = j.value("skipped_users", std::size_t{0});
    report.auc_user_count = j.value("auc_users", report.evaluated_user_count);
    const auto names = metric_names(report.k);
    const auto& m = j.at("means");
    report.means.precision = m.at(names[0]).get<double>();
    report.means.recall = m.at(names[1]).get<double>();
    report.means.map = m.at(names[2]).get<double>();
    report.means.mrr = m.at(names[3]).get<double>();
    report.means.ndcg = m.at(names[4]).get<double>();
    report.means.auc = m.at(names[5]).get<double>();
    return report;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, fmt::format("bad report: {}", e.what()));
  }
}

void print_table(std::ostream& out, const EvalReport& report,
                 const std::string& label) {
  const std::array<std::string, kNumMetrics> rows = {
      fmt::format("Prec@{}", report.k), fmt::format("Recall@{}", report.k),
      "MAP", "MRR", "NDCG", "AUC"};
  const auto means = as_array(report.means);
  out << fmt::format("{:<10} {:>10}\n", "", label);
  for (std::size_t c = 0; c < kNumMetrics; ++c) {
    out << fmt::format("{:<10} {:>10.4f}\n", rows[c], means[c]);
  }
  out << fmt::format("users: {} evaluated, {} skipped\n",
                     report.evaluated_user_count, report.skipped_user_count);
}

}  // namespace p3s
