#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "p3s/interactions.hpp"
#include "p3s/latent_model.hpp"

namespace p3s {

// Which of the user's item sets a relation draws from.
enum class ItemSet {
  kPurchased,     // P_u
  kClickedOnly,   // C_u
  kNonClicked,    // N_u
  kNonPurchased,  // C_u + N_u
};

// Preference relation "winner set over loser set". kPvsRest is the BPR
// relation; the other four come from the three-set assumptions.
enum class Relation { kPvsN, kPvsC, kCvsN, kNvsC, kPvsRest };

std::string_view to_string(Relation relation);
ItemSet winner_set(Relation relation);
ItemSet loser_set(Relation relation);

std::size_t set_size(const TriPartition& part, ItemSet set);
bool in_set(const TriPartition& part, ItemSet set, ItemIndex item);

struct RelationDef {
  Relation relation;
  ItemSet winners;
  ItemSet losers;
  bool active;  // both sides nonempty for this user
  std::size_t pair_count;
};

// Relations induced by a pairwise method for one user:
//   BPR   {P > C+N}
//   P3S-1 {P > N}
//   P3S-2 {P > C, C > N}
//   P3S-3 {P > C, N > C}
std::vector<RelationDef> pair_schema(Method method, const TriPartition& part);

std::size_t total_pair_count(const Dataset& dataset, Method method);

struct PairSample {
  UserIndex u = 0;
  ItemIndex winner = 0;
  ItemIndex loser = 0;
  Relation relation = Relation::kPvsN;
};

// Gradient of ln sigma(x_uw - x_ul) - (lambda/2)|theta|^2 restricted to the
// five parameter blocks a single pair touches.
struct PairGradient {
  UserIndex u = 0;
  ItemIndex winner = 0;
  ItemIndex loser = 0;
  std::vector<double> user;
  std::vector<double> winner_factors;
  std::vector<double> loser_factors;
  double winner_bias = 0.0;
  double loser_bias = 0.0;
  double log_likelihood = 0.0;  // ln sigma(d) at the current parameters
};

PairGradient pairwise_gradient(const ModelParams& params, const PairSample& s,
                               double lambda);

// The scalar objective pairwise_gradient differentiates.
double pair_objective(const ModelParams& params, const PairSample& s,
                      double lambda);

struct ObjectiveValue {
  double log_likelihood = 0.0;
  double regularization = 0.0;
  double total = 0.0;
};

// (lambda/2)(|alpha|_F^2 + |beta|_F^2 + |gamma|^2)
double regularization(const ModelParams& params, double lambda);

// Exact sum of ln sigma over every pair of the method's schema minus the
// regularizer. Cost is O(sum_u |winners| * |losers| * K); meant for small
// verification instances.
ObjectiveValue full_objective(const ModelParams& params,
                              const Dataset& dataset, Method method,
                              double lambda);

// Exact gradient of full_objective with respect to all parameters, laid out
// like ModelParams.
ModelParams full_gradient(const ModelParams& params, const Dataset& dataset,
                          Method method, double lambda);

// Confidence-weighted squared loss over all n*m cells with
// c_ui = 1 + alpha_conf * r_ui, plus lambda(|alpha|_F^2 + |beta|_F^2).
// Item biases are not part of this model.
double wmf_loss(const ModelParams& params, const Dataset& dataset,
                double alpha_conf, double lambda);

// One alternating least squares sweep: every user row solved exactly with
// items fixed, then every item row with users fixed.
ModelParams wmf_als_sweep(const ModelParams& params, const Dataset& dataset,
                          double alpha_conf, double lambda);

// Number of distinct training purchasers per item.
std::vector<double> mostpop_scores(const Dataset& dataset);

}  // namespace p3s
