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

#ifndef NBRANK_TUNER_HPP_
#define NBRANK_TUNER_HPP_

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "nbrank/dataset.hpp"
#include "nbrank/metrics.hpp"
#include "nbrank/objective.hpp"
#include "nbrank/scorer.hpp"
#include "nbrank/solver.hpp"

namespace nbrank {

// Everything needed to rerank and score one evaluation split.
struct EvaluationContext {
  RepeatSets reps;
  ItemGroups groups;
  CategoryMap categories;
  CandidateSet candidates;
  SplitDataset targets;
  double rep_ratio_gt = 0.0;

  static EvaluationContext Build(const BasketDataset& train,
                                 const SplitDataset& targets,
                                 CandidateSet candidates,
                                 double top_fraction = 0.2);

  // Target users, ascending.
  std::vector<UserId> Users() const;
};

std::vector<RerankProblem> BuildProblems(const EvaluationContext& ctx,
                                         const RerankConfig& cfg,
                                         SignMode sign,
                                         std::vector<std::string>* skipped =
                                             nullptr);

// The unmodified top-K baskets of the input scores (all weights zero).
RerankedBaskets OriginalBaskets(const EvaluationContext& ctx,
                                const RerankConfig& cfg);

// The configured sign, or the one implied by the original baskets.
SignMode ResolveSignMode(const EvaluationContext& ctx, const RerankConfig& cfg);

struct RunOutcome {
  RerankedBaskets baskets;
  MetricsReport report;
  SignMode sign = SignMode::kPenalizeRepeat;
};

RunOutcome RunConfig(const EvaluationContext& ctx, const RerankConfig& cfg,
                     const RerankOptions& options = {});

struct GridSpec {
  std::vector<double> epsilon_grid{0,    0.001, 0.01, 0.02, 0.04, 0.06, 0.08,
                                   0.1,  0.12,  0.14, 0.16, 0.18, 0.2};
  std::vector<double> alpha_grid{0,  0.001, 0.01, 0.1, 1,  10, 20, 30,
                                 40, 50,    60,   70,  80, 90, 100, 200};
  std::vector<double> lambda_grid{0,   0.001, 0.01, 0.1, 0.2, 0.3, 0.4,
                                  0.5, 0.6,   0.7,  0.8, 0.9, 1};
  // Empty: deciles of the pooled repeat scores.
  std::vector<double> theta_grid;

  // Sorts and deduplicates; throws UsageError on empty grids or negative
  // weights.
  void Normalize();
};

// Interior deciles (10%..90%, nearest rank) of every repeat score in `cands`.
std::vector<double> ThetaDeciles(const CandidateSet& cands);

// True for kinds whose selection rule maximizes mDR, false for mFR.
bool UsesDiversityRule(ObjectiveKind kind);

struct TunePoint {
  RerankConfig config;
  MetricsReport report;
  bool feasible = false;
};

struct TuneResult {
  RerankConfig best;  // sign_mode fixed to `sign`
  std::vector<TunePoint> points;  // grid order
  MetricsReport baseline;
  std::size_t feasible_count = 0;
  bool infeasible = false;
  std::optional<std::size_t> best_index;
  SignMode sign = SignMode::kPenalizeRepeat;
};

// Evaluates the grid on `ctx` (the validation split). Unified candidates
// sweep (weight, lambda); combined candidates sweep (weight, theta), where
// the weight is epsilon for diversity kinds and alpha for fairness kinds.
// Feasible points keep recall >= (1 - tolerance) * baseline recall; the
// winner maximizes mDR or minimizes mFR, ties going to the smallest
// (weight, lambda, theta) tuple.
TuneResult RunGrid(const EvaluationContext& ctx, const RerankConfig& cfg,
                   GridSpec grid, const RerankOptions& options = {});

// One evaluation of a frozen config on the test split.
MetricsReport FinalEvaluate(const RerankConfig& best,
                            ObjectiveKind expected_kind,
                            const EvaluationContext& test_ctx,
                            const RerankOptions& options = {});

// One row per grid point: epsilon,alpha,lambda,theta, every metric, feasible.
std::string FormatSweepCsv(const TuneResult& result);
// `param,value,recall,ds,logdp,repratio` rows: each swept parameter varied
// with the others held at the chosen point.
std::string FormatPlotCsv(const TuneResult& result);
nlohmann::json TuneResultToJson(const TuneResult& result);
// Inverse of TuneResultToJson. Throws DataError on malformed input.
TuneResult TuneResultFromJson(const nlohmann::json& j);

}  // namespace nbrank

#endif  // NBRANK_TUNER_HPP_
