#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "p3s/interactions.hpp"
#include "p3s/latent_model.hpp"

namespace p3s {

inline constexpr std::size_t kDefaultCutoff = 5;

// Candidate items of one user ranked by descending score, ties broken by
// ascending item index. Scores and relevance flags are aligned with
// `candidates`.
struct CandidateRanking {
  UserIndex user = 0;
  std::vector<ItemIndex> candidates;
  std::vector<double> scores;
  std::vector<bool> is_relevant;
  std::vector<ItemIndex> relevant;  // sorted

  std::size_t num_relevant() const { return relevant.size(); }
};

// Builds a ranking from arbitrary (item, score) pairs; used by
// build_candidates and directly by tests.
CandidateRanking rank_items(UserIndex user, std::span<const ItemIndex> items,
                            std::span<const double> scores,
                            std::span<const ItemIndex> relevant);

// Candidates are the items the user neither clicked nor purchased in
// training; relevant items are test purchases among them.
CandidateRanking build_candidates(const Dataset& dataset,
                                  const ModelParams& params, UserIndex u);
CandidateRanking build_candidates(const Dataset& dataset,
                                  std::span<const double> item_scores,
                                  UserIndex u);

double precision_at_k(const CandidateRanking& r, std::size_t k);
double recall_at_k(const CandidateRanking& r, std::size_t k);
double average_precision(const CandidateRanking& r);
double reciprocal_rank(const CandidateRanking& r);
// Binary gain over the whole list, discount 1/log2(position + 1).
double ndcg(const CandidateRanking& r);
// Mann-Whitney statistic over (relevant, non-relevant) pairs; tied scores
// count one half.
double auc_user(const CandidateRanking& r);

struct MetricValues {
  double precision = 0.0;
  double recall = 0.0;
  double average_precision = 0.0;
  double reciprocal_rank = 0.0;
  double ndcg = 0.0;
  std::optional<double> auc;  // undefined when every candidate is relevant
};

struct MetricMeans {
  double precision = 0.0;
  double recall = 0.0;
  double map = 0.0;
  double mrr = 0.0;
  double ndcg = 0.0;
  double auc = 0.0;
};

inline constexpr std::size_t kNumMetrics = 6;
// Column order follows the usual results-table layout.
std::array<double, kNumMetrics> as_array(const MetricMeans& means);
std::vector<std::string> metric_names(std::size_t k);

struct EvalReport {
  std::size_t k = kDefaultCutoff;
  std::map<UserIndex, MetricValues> per_user;
  MetricMeans means;
  std::size_t evaluated_user_count = 0;
  std::size_t skipped_user_count = 0;
  std::size_t auc_user_count = 0;
};

MetricValues evaluate_user(const CandidateRanking& r, std::size_t k);

EvalReport evaluate(const Dataset& dataset, const ModelParams& params,
                    std::size_t k = kDefaultCutoff);
EvalReport evaluate(const Dataset& dataset,
                    std::span<const double> item_scores,
                    std::size_t k = kDefaultCutoff);

nlohmann::ordered_json to_json(const EvalReport& report, bool per_user,
                               const IdMap* users = nullptr);
// Reads the summary part (k, counts, means) of a serialized report.
EvalReport report_from_json(const nlohmann::json& j);

// Aligned two-column table, one metric per row.
void print_table(std::ostream& out, const EvalReport& report,
                 const std::string& label);

}  // namespace p3s
