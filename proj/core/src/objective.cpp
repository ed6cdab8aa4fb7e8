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

#include "nbrank/objective.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "nbrank/error.hpp"
#include "nbrank/solver.hpp"
#include "text_io.hpp"

namespace nbrank {
namespace {

double ParseNumber(std::string_view key, std::string_view value) {
  double x = 0.0;
  if (!internal::ParseDouble(value, x) || !std::isfinite(x)) {
    throw UsageError("invalid number for `" + std::string(key) + "`: `" +
                     std::string(value) + "`");
  }
  return x;
}

std::size_t ParseCount(std::string_view key, std::string_view value) {
  std::size_t x = 0;
  if (!internal::ParseInt(value, x)) {
    throw UsageError("invalid count for `" + std::string(key) + "`: `" +
                     std::string(value) + "`");
  }
  return x;
}

void AssignCategoryIndices(std::vector<Candidate>& items) {
  std::unordered_map<CategoryId, int> index;
  for (auto& c : items) {
    const auto [it, inserted] =
        index.emplace(c.category, static_cast<int>(index.size()));
    c.category_index = it->second;
  }
}

Candidate MakeCandidate(const ScoredItem& entry, bool is_repeat,
                        const ItemGroups& groups,
                        const CategoryMap& categories) {
  Candidate c;
  c.item = entry.item;
  c.relevance = entry.score;
  c.is_repeat = is_repeat;
  const auto cat = categories.find(entry.item);
  c.category = cat == categories.end() ? CategoryId(kUnknownCategory)
                                       : cat->second;
  if (groups.popular.contains(entry.item)) {
    c.fairness_coef = 1.0 / static_cast<double>(groups.popular.size());
  } else if (groups.unpopular.contains(entry.item)) {
    c.fairness_coef = -1.0 / static_cast<double>(groups.unpopular.size());
  }
  return c;
}

ScoreList CanonicalList(const ScoreTable& table, const UserId& user,
                        std::size_t n) {
  const auto it = table.find(user);
  if (it == table.end()) return {};
  ScoreList list = it->second;
  SortAndTruncate(list, n);
  return list;
}

RerankProblem ProblemShell(const UserId& user, const RerankConfig& cfg,
                           SignMode sign) {
  cfg.Validate();
  RerankProblem p;
  p.user = user;
  p.k = cfg.k;
  p.kind = cfg.objective_kind;
  p.sign_mode = sign;
  p.weights = EffectiveWeights(cfg, sign);
  p.exposure = cfg.exposure;
  return p;
}

}  // namespace

double ExposureModel::Weight(std::size_t position) const {
  if (kind == ExposureKind::kUniform) return 1.0;
  return 1.0 / std::log2(static_cast<double>(position) + 1.0);
}

void RerankConfig::Validate() const {
  if (k == 0) throw UsageError("basket size K must be positive");
  if (k > n) {
    throw UsageError("basket size K (" + std::to_string(k) +
                     ") exceeds candidate count N (" + std::to_string(n) + ")");
  }
  for (const auto& [name, value] :
       {std::pair{"epsilon", epsilon}, std::pair{"alpha", alpha},
        std::pair{"lambda", lambda}, std::pair{"recall_tolerance",
                                               recall_tolerance}}) {
    if (!(value >= 0.0) || !std::isfinite(value)) {
      throw UsageError(std::string(name) + " must be a finite value >= 0");
    }
  }
  if (!std::isfinite(theta)) throw UsageError("theta must be finite");
  if (!(omega >= 0.0 && omega <= 1.0)) {
    throw UsageError("omega must lie in [0, 1]");
  }
  if (log_base != 0.0 && !(log_base > 0.0 && log_base != 1.0)) {
    throw UsageError("log_base must be 0 (natural) or a positive base != 1");
  }
}

std::string_view ToString(ExposureKind kind) {
  return kind == ExposureKind::kUniform ? "uniform" : "log_discount";
}

std::string_view ToString(SignMode mode) {
  return mode == SignMode::kPenalizeRepeat ? "penalize_repeat"
                                           : "reward_repeat";
}

std::string_view ToString(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::kRadiv:
      return "radiv";
    case ObjectiveKind::kRaif:
      return "raif";
    case ObjectiveKind::kNaiveDiv:
      return "naive_div";
    case ObjectiveKind::kNaiveFair:
      return "naive_fair";
    case ObjectiveKind::kRepeatOnly:
      return "repeat_only";
    case ObjectiveKind::kRelevanceOnly:
      return "relevance_only";
  }
  return "radiv";
}

ExposureKind ParseExposureKind(std::string_view text) {
  if (text == "uniform") return ExposureKind::kUniform;
  if (text == "log_discount" || text == "log-discount") {
    return ExposureKind::kLogDiscount;
  }
  throw UsageError("unknown exposure model `" + std::string(text) + "`");
}

SignMode ParseSignMode(std::string_view text) {
  if (text == "penalize_repeat" || text == "penalize-repeat") {
    return SignMode::kPenalizeRepeat;
  }
  if (text == "reward_repeat" || text == "reward-repeat") {
    return SignMode::kRewardRepeat;
  }
  throw UsageError("unknown sign mode `" + std::string(text) + "`");
}

ObjectiveKind ParseObjectiveKind(std::string_view text) {
  std::string key(text);
  std::replace(key.begin(), key.end(), '-', '_');
  if (key == "radiv") return ObjectiveKind::kRadiv;
  if (key == "raif") return ObjectiveKind::kRaif;
  if (key == "naive_div") return ObjectiveKind::kNaiveDiv;
  if (key == "naive_fair") return ObjectiveKind::kNaiveFair;
  if (key == "repeat_only") return ObjectiveKind::kRepeatOnly;
  if (key == "relevance_only" || key == "none") {
    return ObjectiveKind::kRelevanceOnly;
  }
  throw UsageError("unknown objective kind `" + std::string(text) + "`");
}

void SetConfigValue(RerankConfig& cfg, std::string_view key,
                    std::string_view value) {
  value = internal::Trim(value);
  if (key == "k") {
    cfg.k = ParseCount(key, value);
  } else if (key == "n") {
    cfg.n = ParseCount(key, value);
  } else if (key == "epsilon") {
    cfg.epsilon = ParseNumber(key, value);
  } else if (key == "alpha") {
    cfg.alpha = ParseNumber(key, value);
  } else if (key == "lambda") {
    cfg.lambda = ParseNumber(key, value);
  } else if (key == "theta") {
    cfg.theta = ParseNumber(key, value);
  } else if (key == "sign_mode") {
    if (value == "auto") {
      cfg.sign_mode.reset();
    } else {
      cfg.sign_mode = ParseSignMode(value);
    }
  } else if (key == "exposure") {
    cfg.exposure.kind = ParseExposureKind(value);
  } else if (key == "omega") {
    cfg.omega = ParseNumber(key, value);
  } else if (key == "recall_tolerance") {
    cfg.recall_tolerance = ParseNumber(key, value);
  } else if (key == "log_base") {
    if (value == "e") {
      cfg.log_base = 0.0;
    } else {
      cfg.log_base = ParseNumber(key, value);
    }
  } else if (key == "objective_kind" || key == "mode") {
    cfg.objective_kind = ParseObjectiveKind(value);
  } else {
    throw UsageError("unknown config key `" + std::string(key) + "`");
  }
}

RerankConfig ParseConfigText(std::string_view text, RerankConfig base,
                             std::string_view source) {
  std::size_t line_number = 0;
  for (auto line : internal::SplitLines(text)) {
    ++line_number;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    if (internal::IsBlank(line)) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw UsageError(internal::Where(source, line_number) +
                       ": expected `key = value`");
    }
    try {
      SetConfigValue(base, internal::Trim(line.substr(0, eq)),
                     line.substr(eq + 1));
    } catch (const UsageError& e) {
      throw UsageError(internal::Where(source, line_number) + ": " + e.what());
    }
  }
  return base;
}

RerankConfig LoadConfigFile(const std::string& path, RerankConfig base) {
  return ParseConfigText(internal::ReadFile(path), std::move(base), path);
}

std::string FormatConfigText(const RerankConfig& cfg) {
  std::string out;
  auto line = [&](std::string_view key, const std::string& value) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  };
  line("objective_kind", std::string(ToString(cfg.objective_kind)));
  line("k", std::to_string(cfg.k));
  line("n", std::to_string(cfg.n));
  line("epsilon", internal::FormatDouble(cfg.epsilon));
  line("alpha", internal::FormatDouble(cfg.alpha));
  line("lambda", internal::FormatDouble(cfg.lambda));
  line("theta", internal::FormatDouble(cfg.theta));
  line("sign_mode", cfg.sign_mode ? std::string(ToString(*cfg.sign_mode))
                                  : std::string("auto"));
  line("exposure", std::string(ToString(cfg.exposure.kind)));
  line("omega", internal::FormatDouble(cfg.omega));
  line("recall_tolerance", internal::FormatDouble(cfg.recall_tolerance));
  line("log_base",
       cfg.log_base == 0.0 ? std::string("e")
                           : internal::FormatDouble(cfg.log_base));
  return out;
}

nlohmann::json ConfigToJson(const RerankConfig& cfg) {
  nlohmann::json j;
  j["objective_kind"] = ToString(cfg.objective_kind);
  j["k"] = cfg.k;
  j["n"] = cfg.n;
  j["epsilon"] = cfg.epsilon;
  j["alpha"] = cfg.alpha;
  j["lambda"] = cfg.lambda;
  j["theta"] = cfg.theta;
  j["sign_mode"] =
      cfg.sign_mode ? std::string(ToString(*cfg.sign_mode)) : "auto";
  j["exposure"] = ToString(cfg.exposure.kind);
  j["omega"] = cfg.omega;
  j["recall_tolerance"] = cfg.recall_tolerance;
  j["log_base"] = cfg.log_base;
  return j;
}

RerankConfig ConfigFromJson(const nlohmann::json& j) {
  RerankConfig cfg;
  try {
    cfg.objective_kind =
        ParseObjectiveKind(j.at("objective_kind").get<std::string>());
    cfg.k = j.at("k").get<std::size_t>();
    cfg.n = j.at("n").get<std::size_t>();
    cfg.epsilon = j.at("epsilon").get<double>();
    cfg.alpha = j.at("alpha").get<double>();
    cfg.lambda = j.at("lambda").get<double>();
    cfg.theta = j.at("theta").get<double>();
    const auto sign = j.at("sign_mode").get<std::string>();
    if (sign != "auto") cfg.sign_mode = ParseSignMode(sign);
    cfg.exposure.kind = ParseExposureKind(j.at("exposure").get<std::string>());
    cfg.omega = j.at("omega").get<double>();
    cfg.recall_tolerance = j.at("recall_tolerance").get<double>();
    cfg.log_base = j.at("log_base").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed config object: ") + e.what());
  }
  return cfg;
}

ObjectiveWeights EffectiveWeights(const RerankConfig& cfg, SignMode sign) {
  ObjectiveWeights w;
  const double inv_k = 1.0 / static_cast<double>(cfg.k);
  bool use_epsilon = false;
  bool use_alpha = false;
  bool use_lambda = false;
  switch (cfg.objective_kind) {
    case ObjectiveKind::kRadiv:
      w.relevance_scale = inv_k;
      use_epsilon = use_lambda = true;
      break;
    case ObjectiveKind::kRaif:
      w.relevance_scale = 1.0;
      use_alpha = use_lambda = true;
      break;
    case ObjectiveKind::kNaiveDiv:
      w.relevance_scale = inv_k;
      use_epsilon = true;
      break;
    case ObjectiveKind::kNaiveFair:
      w.relevance_scale = 1.0;
      use_alpha = true;
      break;
    case ObjectiveKind::kRepeatOnly:
      w.relevance_scale = inv_k;
      use_lambda = true;
      break;
    case ObjectiveKind::kRelevanceOnly:
      w.relevance_scale = inv_k;
      break;
  }
  if (use_epsilon) w.epsilon = cfg.epsilon;
  if (use_alpha) w.alpha = cfg.alpha;
  if (use_lambda && cfg.lambda != 0.0) {
    w.repeat_weight =
        sign == SignMode::kPenalizeRepeat ? -cfg.lambda : cfg.lambda;
  }
  return w;
}

std::size_t RerankProblem::SlotsToFill() const {
  if (combined) return repeat_slots + explore_slots;
  return short_basket ? items.size() : k;
}

std::size_t RerankProblem::CategoryCount() const {
  int count = 0;
  for (const auto& c : items) count = std::max(count, c.category_index + 1);
  return static_cast<std::size_t>(count);
}

std::size_t RerankProblem::IndexOf(const ItemId& item) const {
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].item == item) return i;
  }
  return static_cast<std::size_t>(-1);
}

bool SatisfiesSlots(const RerankProblem& problem,
                    std::span<const std::size_t> indices) {
  if (indices.size() != problem.SlotsToFill()) return false;
  if (!problem.combined) return true;
  std::size_t repeats = 0;
  for (const std::size_t i : indices) repeats += problem.items[i].is_repeat;
  return repeats == problem.repeat_slots;
}

double ObjectiveValueAt(const RerankProblem& problem,
                        std::span<const std::size_t> indices) {
  const ObjectiveWeights& w = problem.weights;
  double relevance = 0.0;
  double fairness = 0.0;
  std::size_t repeats = 0;
  std::vector<char> covered(problem.CategoryCount(), 0);
  std::size_t coverage = 0;
  std::size_t position = 0;
  for (const std::size_t i : indices) {
    const Candidate& c = problem.items[i];
    ++position;
    relevance += c.relevance;
    fairness += c.fairness_coef * problem.exposure.Weight(position);
    repeats += c.is_repeat;
    if (!covered[static_cast<std::size_t>(c.category_index)]) {
      covered[static_cast<std::size_t>(c.category_index)] = 1;
      ++coverage;
    }
  }
  const double k = static_cast<double>(problem.k);
  return w.relevance_scale * relevance +
         w.epsilon * static_cast<double>(coverage) / k - w.alpha * fairness +
         w.repeat_weight * static_cast<double>(repeats) / k;
}

double ObjectiveValue(const RerankProblem& problem,
                      std::span<const ItemId> selection) {
  std::vector<std::size_t> indices;
  indices.reserve(selection.size());
  for (const auto& item : selection) {
    const std::size_t i = problem.IndexOf(item);
    if (i >= problem.items.size()) {
      throw SolverError("user `" + problem.user + "`: item `" + item +
                        "` is not a candidate");
    }
    indices.push_back(i);
  }
  std::sort(indices.begin(), indices.end());
  if (std::adjacent_find(indices.begin(), indices.end()) != indices.end()) {
    throw SolverError("user `" + problem.user +
                      "`: selection repeats an item");
  }
  if (!SatisfiesSlots(problem, indices)) {
    throw SolverError("user `" + problem.user +
                      "`: selection violates the slot constraints");
  }
  return ObjectiveValueAt(problem, indices);
}

RerankProblem BuildUnifiedProblem(const UserId& user,
                                  const CandidateSet& cands,
                                  const RepeatSets& reps,
                                  const ItemGroups& groups,
                                  const CategoryMap& categories,
                                  const RerankConfig& cfg, SignMode sign) {
  if (cands.kind != CandidateKind::kUnified) {
    throw UsageError("unified problem requested from combined candidates");
  }
  RerankProblem p = ProblemShell(user, cfg, sign);
  const ScoreList list = CanonicalList(cands.unified, user, cfg.n);
  if (list.size() < cfg.k) {
    throw DataError("user `" + user + "`: insufficient candidates (" +
                    std::to_string(list.size()) + " < K = " +
                    std::to_string(cfg.k) + ")");
  }
  static const std::set<ItemId> kEmpty;
  const auto rep_it = reps.find(user);
  const auto& rep = rep_it == reps.end() ? kEmpty : rep_it->second;
  p.items.reserve(list.size());
  for (const auto& entry : list) {
    p.items.push_back(
        MakeCandidate(entry, rep.contains(entry.item), groups, categories));
  }
  AssignCategoryIndices(p.items);
  return p;
}

std::size_t ComputeHTheta(std::span<const double> repeat_scores, double theta,
                          std::size_t k) {
  std::size_t above = 0;
  for (const double s : repeat_scores) above += s > theta;
  return std::min(above, k);
}

RerankProblem BuildCombinedProblem(const UserId& user,
                                   const CandidateSet& cands,
                                   const RepeatSets& reps,
                                   const ItemGroups& groups,
                                   const CategoryMap& categories,
                                   const RerankConfig& cfg, SignMode sign) {
  (void)reps;
  if (cands.kind != CandidateKind::kCombined) {
    throw UsageError("combined problem requested from unified candidates");
  }
  RerankProblem p = ProblemShell(user, cfg, sign);
  p.combined = true;
  const ScoreList repeat = CanonicalList(cands.repeat_list, user, cfg.n);
  const ScoreList explore = CanonicalList(cands.explore_list, user, cfg.n);
  std::unordered_set<ItemId> seen;
  for (const auto& entry : repeat) {
    seen.insert(entry.item);
    p.items.push_back(MakeCandidate(entry, true, groups, categories));
  }
  for (const auto& entry : explore) {
    if (seen.contains(entry.item)) {
      throw DataError("user `" + user + "`: item `" + entry.item +
                      "` is both a repeat and an explore candidate");
    }
    p.items.push_back(MakeCandidate(entry, false, groups, categories));
  }
  AssignCategoryIndices(p.items);

  std::vector<double> scores;
  scores.reserve(repeat.size());
  for (const auto& entry : repeat) scores.push_back(entry.score);
  std::size_t h = ComputeHTheta(scores, cfg.theta, cfg.k);
  if (repeat.size() + explore.size() < cfg.k) {
    p.short_basket = true;
    p.repeat_slots = repeat.size();
    p.explore_slots = explore.size();
    return p;
  }
  if (explore.size() < cfg.k - h) h = cfg.k - explore.size();
  p.repeat_slots = h;
  p.explore_slots = cfg.k - h;
  return p;
}

SignMode ChooseSignMode(double original_rep_ratio, double rep_ratio_gt) {
  return original_rep_ratio >= rep_ratio_gt ? SignMode::kPenalizeRepeat
                                            : SignMode::kRewardRepeat;
}

SignMode ChooseSignMode(const RerankedBaskets& original, const RepeatSets& reps,
                        double rep_ratio_gt) {
  if (original.baskets.empty()) {
    throw DataError("cannot choose a sign mode from empty baskets");
  }
  double total = 0.0;
  const double k = static_cast<double>(original.config.k);
  for (const auto& [user, selection] : original.baskets) {
    const auto it = reps.find(user);
    std::size_t hits = 0;
    if (it != reps.end()) {
      for (const auto& entry : selection.items) {
        hits += it->second.contains(entry.item);
      }
    }
    total += static_cast<double>(hits) / k;
  }
  return ChooseSignMode(total / static_cast<double>(original.baskets.size()),
                        rep_ratio_gt);
}

nlohmann::json ProblemToJson(const RerankProblem& problem) {
  nlohmann::json j;
  j["user_id"] = problem.user;
  j["combined"] = problem.combined;
  j["k"] = problem.k;
  if (problem.combined) {
    j["repeat_slots"] = problem.repeat_slots;
    j["explore_slots"] = problem.explore_slots;
  } else {
    j["total_slots"] = problem.SlotsToFill();
  }
  j["short_basket"] = problem.short_basket;
  j["objective_kind"] = ToString(problem.kind);
  j["sign_mode"] = ToString(problem.sign_mode);
  j["exposure"] = ToString(problem.exposure.kind);
  j["weights"] = {{"relevance_scale", problem.weights.relevance_scale},
                  {"epsilon", problem.weights.epsilon},
                  {"alpha", problem.weights.alpha},
                  {"repeat_weight", problem.weights.repeat_weight}};
  auto& items = j["items"] = nlohmann::json::array();
  for (const auto& c : problem.items) {
    items.push_back({{"item_id", c.item},
                     {"relevance", c.relevance},
                     {"is_repeat", c.is_repeat},
                     {"category", c.category},
                     {"fairness_coef", c.fairness_coef}});
  }
  return j;
}

}  // namespace nbrank
