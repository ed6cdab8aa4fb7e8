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

#include "nbrank/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "nbrank/error.hpp"
#include "text_io.hpp"

namespace nbrank {
namespace {

RunOutcome RunWithSign(const EvaluationContext& ctx, const RerankConfig& cfg,
                       SignMode sign, const RerankOptions& options) {
  RunOutcome out;
  out.sign = sign;
  std::vector<std::string> skipped;
  const auto problems =
      BuildProblems(ctx, cfg, sign, options.skip_errors ? &skipped : nullptr);
  out.baskets = RerankAll(problems, cfg, options);
  out.baskets.warnings.insert(out.baskets.warnings.begin(), skipped.begin(),
                              skipped.end());
  out.report = Evaluate(out.baskets.ToBasketMap(), ctx.targets, ctx.reps,
                        ctx.groups, ctx.categories, ctx.rep_ratio_gt, cfg);
  return out;
}

RerankConfig Baseline(RerankConfig cfg) {
  cfg.epsilon = 0.0;
  cfg.alpha = 0.0;
  cfg.lambda = 0.0;
  return cfg;
}

void NormalizeGrid(std::vector<double>& grid, const char* name) {
  if (grid.empty()) {
    throw UsageError(std::string(name) + " grid is empty");
  }
  for (const double v : grid) {
    if (!std::isfinite(v) || v < 0.0) {
      throw UsageError(std::string(name) + " grid values must be >= 0");
    }
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
}

double Weight(const RerankConfig& cfg) {
  return UsesDiversityRule(cfg.objective_kind) ? cfg.epsilon : cfg.alpha;
}

double Criterion(const MetricsReport& report, bool diversity) {
  // Larger is better in both cases.
  return diversity ? report.m_dr : -report.m_fr;
}

}  // namespace

EvaluationContext EvaluationContext::Build(const BasketDataset& train,
                                           const SplitDataset& targets,
                                           CandidateSet candidates,
                                           double top_fraction) {
  EvaluationContext ctx;
  ctx.reps = BuildRepeatSets(train);
  ctx.groups = BuildItemGroups(train, top_fraction);
  ctx.categories = train.categories;
  ctx.candidates = std::move(candidates);
  ctx.targets = targets;
  ctx.rep_ratio_gt = GroundTruthRepeatRatio(targets, ctx.reps);
  if (ctx.candidates.kind == CandidateKind::kCombined) {
    ValidateCombined(ctx.candidates, ctx.reps);
  }
  FlagMissingUsers(ctx.candidates, ctx.Users());
  return ctx;
}

std::vector<UserId> EvaluationContext::Users() const {
  std::vector<UserId> users;
  users.reserve(targets.eval_targets.size());
  for (const auto& [user, target] : targets.eval_targets) users.push_back(user);
  return users;
}

std::vector<RerankProblem> BuildProblems(const EvaluationContext& ctx,
                                         const RerankConfig& cfg,
                                         SignMode sign,
                                         std::vector<std::string>* skipped) {
  std::vector<RerankProblem> problems;
  problems.reserve(ctx.targets.eval_targets.size());
  for (const auto& [user, target] : ctx.targets.eval_targets) {
    try {
      problems.push_back(
          ctx.candidates.kind == CandidateKind::kUnified
              ? BuildUnifiedProblem(user, ctx.candidates, ctx.reps, ctx.groups,
                                    ctx.categories, cfg, sign)
              : BuildCombinedProblem(user, ctx.candidates, ctx.reps,
                                     ctx.groups, ctx.categories, cfg, sign));
    } catch (const DataError& e) {
      if (skipped == nullptr) throw;
      skipped->push_back(e.what());
    }
  }
  return problems;
}

RerankedBaskets OriginalBaskets(const EvaluationContext& ctx,
                                const RerankConfig& cfg) {
  const RerankConfig base = Baseline(cfg);
  const auto problems =
      BuildProblems(ctx, base, SignMode::kPenalizeRepeat, nullptr);
  RerankOptions options;
  options.engine = Engine::kTopkLinear;
  return RerankAll(problems, base, options);
}

SignMode ResolveSignMode(const EvaluationContext& ctx,
                         const RerankConfig& cfg) {
  if (cfg.sign_mode) return *cfg.sign_mode;
  return ChooseSignMode(OriginalBaskets(ctx, cfg), ctx.reps, ctx.rep_ratio_gt);
}

RunOutcome RunConfig(const EvaluationContext& ctx, const RerankConfig& cfg,
                     const RerankOptions& options) {
  cfg.Validate();
  return RunWithSign(ctx, cfg, ResolveSignMode(ctx, cfg), options);
}

void GridSpec::Normalize() {
  NormalizeGrid(epsilon_grid, "epsilon");
  NormalizeGrid(alpha_grid, "alpha");
  NormalizeGrid(lambda_grid, "lambda");
  if (!theta_grid.empty()) {
    for (const double v : theta_grid) {
      if (!std::isfinite(v)) throw UsageError("theta grid values must be finite");
    }
    std::sort(theta_grid.begin(), theta_grid.end());
    theta_grid.erase(std::unique(theta_grid.begin(), theta_grid.end()),
                     theta_grid.end());
  }
}

std::vector<double> ThetaDeciles(const CandidateSet& cands) {
  std::vector<double> scores;
  for (const auto& [user, list] : cands.repeat_list) {
    for (const auto& entry : list) scores.push_back(entry.score);
  }
  if (scores.empty()) return {0.0};
  std::sort(scores.begin(), scores.end());
  std::vector<double> deciles;
  for (int d = 1; d <= 9; ++d) {
    const auto rank = static_cast<std::size_t>(
        std::ceil(d / 10.0 * static_cast<double>(scores.size())));
    deciles.push_back(scores[std::max<std::size_t>(rank, 1) - 1]);
  }
  std::sort(deciles.begin(), deciles.end());
  deciles.erase(std::unique(deciles.begin(), deciles.end()), deciles.end());
  return deciles;
}

bool UsesDiversityRule(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::kRadiv:
    case ObjectiveKind::kNaiveDiv:
      return true;
    case ObjectiveKind::kRaif:
    case ObjectiveKind::kNaiveFair:
      return false;
    case ObjectiveKind::kRepeatOnly:
    case ObjectiveKind::kRelevanceOnly:
      break;
  }
  throw UsageError("grid search supports radiv, raif, naive_div and "
                   "naive_fair, not " +
                   std::string(ToString(kind)));
}

TuneResult RunGrid(const EvaluationContext& ctx, const RerankConfig& cfg,
                   GridSpec grid, const RerankOptions& options) {
  cfg.Validate();
  const bool diversity = UsesDiversityRule(cfg.objective_kind);
  const bool combined = ctx.candidates.kind == CandidateKind::kCombined;
  const bool naive = cfg.objective_kind == ObjectiveKind::kNaiveDiv ||
                     cfg.objective_kind == ObjectiveKind::kNaiveFair;
  grid.Normalize();
  if (combined && grid.theta_grid.empty()) {
    grid.theta_grid = ThetaDeciles(ctx.candidates);
  }
  const std::vector<double>& weights =
      diversity ? grid.epsilon_grid : grid.alpha_grid;
  // Fixed slots make the repeat term constant for combined candidates, and
  // naive kinds ignore lambda altogether.
  const std::vector<double> lambdas =
      combined || naive ? std::vector<double>{0.0} : grid.lambda_grid;
  const std::vector<double> thetas =
      combined ? grid.theta_grid : std::vector<double>{cfg.theta};

  TuneResult result;
  result.sign = ResolveSignMode(ctx, cfg);
  result.baseline = RunWithSign(ctx, Baseline(cfg), result.sign, options).report;
  const double floor =
      (1.0 - cfg.recall_tolerance) * result.baseline.recall;

  for (const double w : weights) {
    for (const double lambda : lambdas) {
      for (const double theta : thetas) {
        RerankConfig point = cfg;
        point.epsilon = diversity ? w : 0.0;
        point.alpha = diversity ? 0.0 : w;
        point.lambda = lambda;
        point.theta = theta;
        TunePoint tp;
        tp.config = point;
        tp.report = RunWithSign(ctx, point, result.sign, options).report;
        tp.feasible = tp.report.recall >= floor;
        result.points.push_back(std::move(tp));
      }
    }
  }
  for (std::size_t i = 0; i < result.points.size(); ++i) {
    const TunePoint& tp = result.points[i];
    if (!tp.feasible) continue;
    ++result.feasible_count;
    const double value = Criterion(tp.report, diversity);
    if (!result.best_index) {
      result.best_index = i;
      continue;
    }
    const double best = Criterion(result.points[*result.best_index].report,
                                  diversity);
    // Grid order is ascending in (weight, lambda, theta), so the first point
    // of a tie is the lexicographically smallest.
    if (value > best + 1e-12 * std::max(1.0, std::abs(best))) {
      result.best_index = i;
    }
  }
  if (result.best_index) {
    result.best = result.points[*result.best_index].config;
  } else {
    result.infeasible = true;
    result.best = Baseline(cfg);
  }
  // Freeze the sign chosen on the validation split so the test run and any
  // later rerun use the same objective.
  result.best.sign_mode = result.sign;
  return result;
}

MetricsReport FinalEvaluate(const RerankConfig& best,
                            ObjectiveKind expected_kind,
                            const EvaluationContext& test_ctx,
                            const RerankOptions& options) {
  if (best.objective_kind != expected_kind) {
    throw UsageError("objective kind mismatch: config was tuned for " +
                     std::string(ToString(best.objective_kind)) +
                     ", evaluation requested " +
                     std::string(ToString(expected_kind)));
  }
  return RunConfig(test_ctx, best, options).report;
}

std::string FormatSweepCsv(const TuneResult& result) {
  using internal::FormatDouble;
  std::string out =
      "epsilon,alpha,lambda,theta,recall,ds,logdp,rep_ratio_rec,rep_bias,mfr,"
      "mdr,feasible\n";
  for (const auto& tp : result.points) {
    const auto& c = tp.config;
    const auto& r = tp.report;
    for (const double v :
         {c.epsilon, c.alpha, c.lambda, c.theta, r.recall, r.ds, r.log_dp,
          r.rep_ratio_rec, r.rep_bias, r.m_fr, r.m_dr}) {
      out += FormatDouble(v);
      out += ',';
    }
    out += tp.feasible ? "1\n" : "0\n";
  }
  return out;
}

std::string FormatPlotCsv(const TuneResult& result) {
  using internal::FormatDouble;
  std::string out = "param,value,recall,ds,logdp,repratio\n";
  if (result.points.empty()) return out;
  const RerankConfig& best = result.best;
  const bool diversity = UsesDiversityRule(best.objective_kind);
  const char* weight_name = diversity ? "epsilon" : "alpha";
  auto row = [&](const char* param, double value, const MetricsReport& r) {
    out += param;
    for (const double v : {value, r.recall, r.ds, r.log_dp, r.rep_ratio_rec}) {
      out += ',';
      out += FormatDouble(v);
    }
    out += '\n';
  };
  auto key = [&](const RerankConfig& c) {
    return std::tuple{Weight(c), c.lambda, c.theta};
  };
  const auto [bw, bl, bt] = key(best);
  std::vector<double> seen_lambda;
  std::vector<double> seen_theta;
  for (const auto& tp : result.points) {
    const auto [w, l, t] = key(tp.config);
    if (l == bl && t == bt) row(weight_name, w, tp.report);
  }
  for (const auto& tp : result.points) {
    const auto [w, l, t] = key(tp.config);
    if (w == bw && t == bt) seen_lambda.push_back(l);
  }
  if (seen_lambda.size() > 1) {
    for (const auto& tp : result.points) {
      const auto [w, l, t] = key(tp.config);
      if (w == bw && t == bt) row("lambda", l, tp.report);
    }
  }
  for (const auto& tp : result.points) {
    const auto [w, l, t] = key(tp.config);
    if (w == bw && l == bl) seen_theta.push_back(t);
  }
  if (seen_theta.size() > 1) {
    for (const auto& tp : result.points) {
      const auto [w, l, t] = key(tp.config);
      if (w == bw && l == bl) row("theta", t, tp.report);
    }
  }
  return out;
}

nlohmann::json TuneResultToJson(const TuneResult& result) {
  nlohmann::json j;
  j["best"] = ConfigToJson(result.best);
  j["sign_mode"] = ToString(result.sign);
  j["feasible_count"] = result.feasible_count;
  j["infeasible"] = result.infeasible;
  j["grid_points"] = result.points.size();
  j["baseline"] = ReportToJson(result.baseline);
  if (result.best_index) {
    j["best_index"] = *result.best_index;
    j["best_report"] = ReportToJson(result.points[*result.best_index].report);
  }
  auto& points = j["points"] = nlohmann::json::array();
  for (const auto& tp : result.points) {
    points.push_back({{"config", ConfigToJson(tp.config)},
                      {"feasible", tp.feasible},
                      {"report", ReportToJson(tp.report)}});
  }
  return j;
}

TuneResult TuneResultFromJson(const nlohmann::json& j) {
  TuneResult result;
  try {
    result.best = ConfigFromJson(j.at("best"));
    result.sign = ParseSignMode(j.at("sign_mode").get<std::string>());
    result.feasible_count = j.at("feasible_count").get<std::size_t>();
    result.infeasible = j.at("infeasible").get<bool>();
    result.baseline = ReportFromJson(j.at("baseline"));
    if (j.contains("best_index")) {
      result.best_index = j["best_index"].get<std::size_t>();
    }
    for (const auto& row : j.at("points")) {
      TunePoint tp;
      tp.config = ConfigFromJson(row.at("config"));
      tp.feasible = row.at("feasible").get<bool>();
      tp.report = ReportFromJson(row.at("report"));
      result.points.push_back(std::move(tp));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed tune result: ") + e.what());
  }
  if (result.best_index && *result.best_index >= result.points.size()) {
    throw DataError("malformed tune result: best_index out of range");
  }
  return result;
}

}  // namespace nbrank
