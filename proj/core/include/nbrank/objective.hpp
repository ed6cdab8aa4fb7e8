// Copyright 2026 The nbrank Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef NBRANK_OBJECTIVE_HPP_
#define NBRANK_OBJECTIVE_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "nbrank/dataset.hpp"
#include "nbrank/scorer.hpp"

namespace nbrank {

enum class ExposureKind { kUniform, kLogDiscount };

// Position-dependent exposure of a basket slot. Positions are 1-based.
struct ExposureModel {
  ExposureKind kind = ExposureKind::kLogDiscount;

  // 1 for uniform; 1 / log2(position + 1) for log_discount.
  double Weight(std::size_t position) const;

  bool operator==(const ExposureModel&) const = default;
};

enum class SignMode { kPenalizeRepeat, kRewardRepeat };

enum class ObjectiveKind {
  kRadiv,
  kRaif,
  kNaiveDiv,
  kNaiveFair,
  kRepeatOnly,
  kRelevanceOnly,
};

struct RerankConfig {
  std::size_t k = 20;   // basket size
  std::size_t n = 100;  // candidates per user
  double epsilon = 0.0;
  double alpha = 0.0;
  double lambda = 0.0;
  double theta = 0.0;  // combined candidates only
  // Unset: picked per run from the original baskets' repeat ratio.
  std::optional<SignMode> sign_mode;
  ExposureModel exposure;
  double omega = 0.5;
  double recall_tolerance = 0.10;
  double log_base = 0.0;  // 0 means natural log
  ObjectiveKind objective_kind = ObjectiveKind::kRadiv;

  // Throws UsageError when an invariant fails.
  void Validate() const;

  bool operator==(const RerankConfig&) const = default;
};

std::string_view ToString(ExposureKind kind);
std::string_view ToString(SignMode mode);
std::string_view ToString(ObjectiveKind kind);
ExposureKind ParseExposureKind(std::string_view text);
SignMode ParseSignMode(std::string_view text);
// Accepts both `naive_div` and the CLI spelling `naive-div`.
ObjectiveKind ParseObjectiveKind(std::string_view text);

// `key = value` lines; '#' starts a comment. Unknown keys are errors.
RerankConfig ParseConfigText(std::string_view text, RerankConfig base = {},
                             std::string_view source = "<memory>");
RerankConfig LoadConfigFile(const std::string& path, RerankConfig base = {});
// Applies one `key`/`value` pair; throws UsageError on unknown keys.
void SetConfigValue(RerankConfig& cfg, std::string_view key,
                    std::string_view value);
std::string FormatConfigText(const RerankConfig& cfg);
nlohmann::json ConfigToJson(const RerankConfig& cfg);
RerankConfig ConfigFromJson(const nlohmann::json& j);

// Term weights after applying the objective kind: terms the kind does not
// optimize are zeroed.
struct ObjectiveWeights {
  double relevance_scale = 1.0;  // 1/K for diversity-family kinds, else 1
  double epsilon = 0.0;
  double alpha = 0.0;
  // Coefficient on (#repeat items)/K: -lambda when penalizing repeats,
  // +lambda when rewarding them.
  double repeat_weight = 0.0;

  bool operator==(const ObjectiveWeights&) const = default;
};

ObjectiveWeights EffectiveWeights(const RerankConfig& cfg, SignMode sign);

struct Candidate {
  ItemId item;
  double relevance = 0.0;
  bool is_repeat = false;
  CategoryId category;
  // +1/|I_1| for popular items, -1/|I_2| for unpopular ones, 0 for items
  // outside both groups.
  double fairness_coef = 0.0;
  // Dense per-problem category index, assigned in candidate order.
  int category_index = 0;
};

// One user's selection problem.
//
// Candidates are kept in basket order: unified problems sort by relevance
// descending (ties by id); combined problems list every repeat candidate
// (by repeat score) ahead of every explore candidate (by explore score), so
// scores from the two models are never compared. A selected item's basket
// position is its rank among the selected items in this order.
struct RerankProblem {
  UserId user;
  std::vector<Candidate> items;
  bool combined = false;
  std::size_t k = 20;  // basket size used for all 1/K factors
  std::size_t repeat_slots = 0;
  std::size_t explore_slots = 0;
  // Set when the candidates cannot fill K slots; the basket takes them all.
  bool short_basket = false;
  ObjectiveKind kind = ObjectiveKind::kRadiv;
  SignMode sign_mode = SignMode::kPenalizeRepeat;
  ObjectiveWeights weights;
  ExposureModel exposure;

  // Items a feasible selection must contain.
  std::size_t SlotsToFill() const;
  std::size_t CategoryCount() const;
  // Index of `item` in `items`, or npos.
  std::size_t IndexOf(const ItemId& item) const;
};

// Per-user objective: relevance_scale * sum(relevance)
//   + epsilon * (#distinct categories) / K
//   - alpha * sum(fairness_coef * e(position))
//   + repeat_weight * (#repeat items) / K.
// Throws SolverError if the selection violates the slot constraints or names
// an unknown or repeated item. Selection order is irrelevant.
double ObjectiveValue(const RerankProblem& problem,
                      std::span<const ItemId> selection);

// Same value from candidate indices. `indices` must be strictly ascending and
// satisfy the slot constraints; not rechecked.
double ObjectiveValueAt(const RerankProblem& problem,
                        std::span<const std::size_t> indices);

// Checks slot constraints on ascending candidate indices.
bool SatisfiesSlots(const RerankProblem& problem,
                    std::span<const std::size_t> indices);

RerankProblem BuildUnifiedProblem(const UserId& user,
                                  const CandidateSet& cands,
                                  const RepeatSets& reps,
                                  const ItemGroups& groups,
                                  const CategoryMap& categories,
                                  const RerankConfig& cfg, SignMode sign);

// Number of repeat scores strictly greater than theta, capped at K.
std::size_t ComputeHTheta(std::span<const double> repeat_scores, double theta,
                          std::size_t k);

RerankProblem BuildCombinedProblem(const UserId& user,
                                   const CandidateSet& cands,
                                   const RepeatSets& reps,
                                   const ItemGroups& groups,
                                   const CategoryMap& categories,
                                   const RerankConfig& cfg, SignMode sign);

struct RerankedBaskets;

// Penalize repeats when the original baskets repeat at least as often as the
// ground truth, reward them otherwise.
SignMode ChooseSignMode(double original_rep_ratio, double rep_ratio_gt);
SignMode ChooseSignMode(const RerankedBaskets& original, const RepeatSets& reps,
                        double rep_ratio_gt);

nlohmann::json ProblemToJson(const RerankProblem& problem);

}  // namespace nbrank

#endif  // NBRANK_OBJECTIVE_HPP_
