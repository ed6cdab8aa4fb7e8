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

#include "nbrank/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "nbrank/dataset.hpp"
#include "nbrank/error.hpp"
#include "nbrank/metrics.hpp"
#include "nbrank/objective.hpp"
#include "nbrank/random.hpp"
#include "nbrank/scorer.hpp"
#include "nbrank/solver.hpp"
#include "nbrank/tuner.hpp"

namespace nbrank::cli {
namespace {

const std::vector<std::string> kModes = {"radiv",       "raif",
                                         "naive-div",   "naive-fair",
                                         "repeat-only", "none"};
const std::vector<std::string> kEngines = {"auto", "topk", "bnb", "bruteforce",
                                           "greedy"};

void WriteText(const std::string& path, std::string_view text) {
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw DataError("cannot write file: " + path);
  file.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!file) throw DataError("write failed: " + path);
}

// Writes to `path`, or to `out` when the path is empty or "-".
void Emit(const std::string& path, std::string_view text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    WriteText(path, text);
  }
}

std::string ReadText(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw DataError("cannot open file: " + path);
  return std::string(std::istreambuf_iterator<char>(file), {});
}

nlohmann::json ReadJson(const std::string& path) {
  try {
    return nlohmann::json::parse(ReadText(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path + ": " + e.what());
  }
}

std::string Fixed(double value, int digits = 4) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.*f", digits, value);
  return buffer;
}

std::string Stem(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

BasketFormat FormatFor(const std::string& path, const std::string& format) {
  if (format == "csv") return BasketFormat::kCsv;
  if (format == "jsonl") return BasketFormat::kJsonl;
  return std::filesystem::path(path).extension() == ".csv"
             ? BasketFormat::kCsv
             : BasketFormat::kJsonl;
}

// Flags mirroring RerankConfig fields, applied over an optional config file.
class ConfigFlags {
 public:
  // `full` exposes every field; otherwise only the candidate count.
  void Attach(CLI::App* app, bool full) {
    app->add_option("--config", file_, "config file of `key = value` lines");
    Add(app, "--n", "n", "candidates per user");
    if (!full) return;
    Add(app, "--k", "k", "basket size");
    Add(app, "--epsilon", "epsilon", "diversity weight");
    Add(app, "--alpha", "alpha", "item-fairness weight");
    Add(app, "--lambda", "lambda", "repeat-bias weight");
    Add(app, "--theta", "theta", "repeat-score threshold (combined input)");
    Add(app, "--sign-mode", "sign_mode",
        "auto, penalize_repeat or reward_repeat")
        ->check(CLI::IsMember({"auto", "penalize_repeat", "reward_repeat",
                               "penalize-repeat", "reward-repeat"}));
    Add(app, "--exposure", "exposure", "uniform or log_discount")
        ->check(CLI::IsMember({"uniform", "log_discount", "log-discount"}));
    Add(app, "--omega", "omega", "composite metric weight");
    Add(app, "--recall-tolerance", "recall_tolerance",
        "allowed relative recall loss when tuning");
    Add(app, "--log-base", "log_base", "logDP logarithm base, or `e`");
    Add(app, "--mode", "objective_kind", "objective to optimize")
        ->check(CLI::IsMember(kModes));
  }

  // Checks every invariant when `validate` is set.
  RerankConfig Resolve(bool validate = true) const {
    RerankConfig cfg = file_.empty() ? RerankConfig{} : LoadConfigFile(file_);
    for (const auto& flag : flags_) {
      if (flag.option->count() > 0) SetConfigValue(cfg, flag.key, flag.value);
    }
    if (validate) cfg.Validate();
    return cfg;
  }

 private:
  struct Flag {
    std::string key;
    std::string value;
    CLI::Option* option = nullptr;
  };

  CLI::Option* Add(CLI::App* app, const std::string& name,
                   const std::string& key, const std::string& help) {
    Flag& flag = flags_.emplace_back();
    flag.key = key;
    flag.option = app->add_option(name, flag.value, help);
    return flag.option;
  }

  std::string file_;
  std::deque<Flag> flags_;  // stable addresses for CLI11
};

// Training data: the train split plus the category file that defines the
// item universe.
struct TrainFlags {
  std::string train;
  std::string categories;

  void Attach(CLI::App* app) {
    app->add_option("--train", train, "training baskets (JSONL or CSV)")
        ->required();
    app->add_option("--categories", categories,
                    "item categories TSV; its items join the vocabulary");
  }

  BasketDataset Load() const {
    BasketDataset ds = LoadBaskets(train, FormatFor(train, ""));
    if (categories.empty()) return ds;
    const CategoryMap map = LoadCategories(categories);
    for (const auto& [item, category] : map) ds.vocabulary.insert(item);
    return WithCategories(std::move(ds), map);
  }
};

struct ScoreFlags {
  std::string unified;
  std::string repeat;
  std::string explore;

  void Attach(CLI::App* app) {
    auto* u = app->add_option("--scores", unified, "unified candidate scores TSV");
    auto* r = app->add_option("--repeat-scores", repeat,
                              "repeat-model candidate scores TSV");
    auto* e = app->add_option("--explore-scores", explore,
                              "explore-model candidate scores TSV");
    u->excludes(r)->excludes(e);
    r->needs(e);
    e->needs(r);
  }

  CandidateSet Load(std::size_t n) const {
    if (!unified.empty()) return ImportUnifiedScores(unified, n);
    if (!repeat.empty()) return ImportCombinedScores(repeat, explore, n);
    throw UsageError(
        "candidate scores are required: --scores, or --repeat-scores with "
        "--explore-scores");
  }
};

struct SampleFlags {
  std::size_t count = 0;
  std::uint64_t seed = 0;

  void Attach(CLI::App* app) {
    app->add_option("--sample-users", count,
                    "keep a seeded random sample of this many users (0: all)");
    app->add_option("--seed", seed, "seed for every random choice");
  }

  SplitDataset Apply(SplitDataset targets) const {
    if (count == 0 || count >= targets.eval_targets.size()) return targets;
    std::vector<UserId> users;
    for (const auto& [user, target] : targets.eval_targets) {
      users.push_back(user);
    }
    Rng rng(seed);
    Shuffle(users, rng);
    users.resize(count);
    std::sort(users.begin(), users.end());
    SplitDataset sampled;
    sampled.split_label = targets.split_label;
    for (const auto& user : users) {
      sampled.eval_targets.emplace(user, targets.eval_targets.at(user));
    }
    return sampled;
  }
};

struct SolveFlags {
  std::string engine = "auto";
  std::size_t threads = 0;
  bool skip_errors = false;

  void Attach(CLI::App* app) {
    app->add_option("--engine", engine, "solver engine")
        ->check(CLI::IsMember(kEngines));
    app->add_option("--threads", threads,
                    "solver threads (0: NBRANK_THREADS or 1)");
    app->add_flag("--skip-errors", skip_errors,
                  "record per-user failures as warnings and continue");
  }

  RerankOptions Options() const {
    RerankOptions options;
    options.engine = ParseEngine(engine);
    options.threads = threads;
    options.skip_errors = skip_errors;
    return options;
  }
};

void PrintWarnings(const std::vector<std::string>& warnings,
                   std::ostream& err) {
  for (const auto& w : warnings) err << "warning: " << w << '\n';
}

// ingest: raw baskets to train split, category map and held-out targets.
struct IngestCommand {
  std::string baskets;
  std::string format;
  std::string categories;
  std::size_t min_baskets = 3;
  std::size_t min_item_purchases = 5;
  std::size_t max_history = 50;
  SampleFlags sample;
  std::string out_dir;
  bool dry_run = false;

  void Attach(CLI::App* app) {
    app->add_option("--baskets", baskets, "raw basket file")->required();
    app->add_option("--format", format, "jsonl or csv (default: by extension)")
        ->check(CLI::IsMember({"jsonl", "csv"}));
    app->add_option("--categories", categories, "item categories TSV");
    app->add_option("--min-baskets", min_baskets,
                    "drop users with fewer baskets");
    app->add_option("--min-item-purchases", min_item_purchases,
                    "drop items bought fewer times");
    app->add_option("--max-history", max_history,
                    "keep this many most recent baskets per user");
    sample.Attach(app);
    app->add_option("--out-dir", out_dir, "output directory");
    app->add_flag("--dry-run", dry_run, "validate and summarize only");
  }

  int Run(std::ostream& out, std::ostream& err) const {
    if (out_dir.empty() && !dry_run) {
      throw UsageError("--out-dir is required unless --dry-run is given");
    }
    BasketDataset ds = LoadBaskets(baskets, FormatFor(baskets, format));
    if (!categories.empty()) {
      ds = WithCategories(std::move(ds), LoadCategories(categories));
    }
    if (ds.duplicates_removed > 0) {
      err << "warning: removed " << ds.duplicates_removed
          << " duplicate item(s) within baskets\n";
    }
    ds = CapHistory(ds, max_history);
    ds = FilterMinActivity(ds, min_baskets, min_item_purchases);
    if (sample.count > 0) ds = SampleUsers(ds, sample.count, sample.seed);
    const SplitResult split = SplitLeaveLast(ds, sample.seed);
    out << "users = " << ds.users.size() << '\n'
        << "items = " << ds.vocabulary.size() << '\n'
        << "baskets = " << ds.BasketCount() << '\n'
        << "validation_users = " << split.validation.eval_targets.size() << '\n'
        << "test_users = " << split.test.eval_targets.size() << '\n';
    if (dry_run) return kExitOk;
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);
    SaveBasketsJsonl(split.train, (dir / "train.jsonl").string());
    SaveCategories(split.train.categories, (dir / "categories.tsv").string());
    SaveTargetsJsonl(split.validation, (dir / "validation.jsonl").string());
    SaveTargetsJsonl(split.test, (dir / "test.jsonl").string());
    return kExitOk;
  }
};

// score: built-in repeat and explore scorers over the training split.
struct ScoreCommand {
  TrainFlags train;
  ConfigFlags config;
  std::string candidates = "unified";
  double mix = 0.5;
  std::string out_path;
  std::string repeat_out;
  std::string explore_out;
  bool dry_run = false;

  void Attach(CLI::App* app) {
    train.Attach(app);
    config.Attach(app, false);
    app->add_option("--candidates", candidates, "unified or combined")
        ->check(CLI::IsMember({"unified", "combined"}));
    app->add_option("--mix", mix,
                    "unified score weight on repeat frequency, in [0, 1]");
    app->add_option("--out", out_path, "unified scores TSV (default: stdout)");
    app->add_option("--repeat-out", repeat_out, "combined repeat scores TSV");
    app->add_option("--explore-out", explore_out, "combined explore scores TSV");
    app->add_flag("--dry-run", dry_run, "validate and summarize only");
  }

  int Run(std::ostream& out, std::ostream&) const {
    const bool combined = candidates == "combined";
    if (combined && !dry_run && (repeat_out.empty() || explore_out.empty())) {
      throw UsageError(
          "combined candidates need --repeat-out and --explore-out");
    }
    if (!combined && (!repeat_out.empty() || !explore_out.empty())) {
      throw UsageError("--repeat-out and --explore-out need --candidates "
                       "combined");
    }
    if (!(mix >= 0.0 && mix <= 1.0)) throw UsageError("--mix must lie in [0, 1]");
    // Only the candidate count matters here; K is chosen at rerank time.
    const RerankConfig cfg = config.Resolve(false);
    if (cfg.n == 0) throw UsageError("candidate count n must be positive");
    const BasketDataset ds = train.Load();
    if (dry_run) {
      out << "users = " << ds.users.size() << "\nn = " << cfg.n << '\n';
      return kExitOk;
    }
    const RepeatSets reps = BuildRepeatSets(ds);
    const CandidateSet r = ScoreRepeatTopFreq(ds, reps, cfg.n);
    const CandidateSet e = ScoreExplorePopularity(ds, reps, cfg.n);
    if (combined) {
      const CandidateSet c = MakeCombined(r, e);
      SaveScoresTsv(c.repeat_list, repeat_out);
      SaveScoresTsv(c.explore_list, explore_out);
    } else {
      Emit(out_path, FormatScoresTsv(MakeUnified(r, e, mix).unified), out);
    }
    return kExitOk;
  }
};

// rerank: solve every target user's problem and write the baskets.
struct RerankCommand {
  TrainFlags train;
  ConfigFlags config;
  ScoreFlags scores;
  SampleFlags sample;
  SolveFlags solve;
  std::string targets;
  std::string out_path;
  std::string stats_path;
  std::string dump_problems;
  bool dry_run = false;

  void Attach(CLI::App* app) {
    train.Attach(app);
    config.Attach(app, true);
    scores.Attach(app);
    sample.Attach(app);
    solve.Attach(app);
    app->add_option("--targets", targets, "held-out targets JSONL")->required();
    app->add_option("--out", out_path, "reranked baskets TSV (default: stdout)");
    app->add_option("--stats", stats_path, "solver statistics JSON");
    app->add_option("--dump-problems", dump_problems,
                    "write every per-user problem as JSON");
    app->add_flag("--dry-run", dry_run,
                  "validate inputs and print the resolved config");
  }

  int Run(std::ostream& out, std::ostream& err) const {
    RerankConfig cfg = config.Resolve();
    const RerankOptions options = solve.Options();
    const BasketDataset ds = train.Load();
    const SplitDataset split =
        sample.Apply(LoadTargetsJsonl(targets, SplitLabel::kValidation));
    const auto ctx = EvaluationContext::Build(ds, split, scores.Load(cfg.n));
    PrintWarnings(ctx.candidates.missing_users.empty()
                      ? std::vector<std::string>{}
                      : std::vector<std::string>{
                            std::to_string(ctx.candidates.missing_users.size()) +
                            " target user(s) have no candidate scores"},
                  err);
    const SignMode sign = ResolveSignMode(ctx, cfg);
    std::vector<std::string> skipped;
    const auto problems = BuildProblems(ctx, cfg, sign,
                                        options.skip_errors ? &skipped : nullptr);
    PrintWarnings(skipped, err);
    if (!dump_problems.empty()) {
      nlohmann::json all = nlohmann::json::array();
      for (const auto& p : problems) all.push_back(ProblemToJson(p));
      WriteText(dump_problems, all.dump(2) + "\n");
    }
    if (dry_run) {
      RerankConfig resolved = cfg;
      resolved.sign_mode = sign;
      out << FormatConfigText(resolved);
      out << "# users = " << problems.size() << '\n';
      return kExitOk;
    }
    RerankedBaskets result = RerankAll(problems, cfg, options);
    PrintWarnings(result.warnings, err);
    Emit(out_path, FormatBasketsTsv(result), out);
    if (!stats_path.empty()) {
      WriteText(stats_path, SolverStatsToJson(result).dump(2) + "\n");
    }
    return kExitOk;
  }
};

// evaluate: metrics of a basket TSV against held-out targets.
struct EvaluateCommand {
  TrainFlags train;
  ConfigFlags config;
  std::string targets;
  std::string baskets;
  std::string out_path;
  std::string per_user;
  bool dry_run = false;

  void Attach(CLI::App* app) {
    train.Attach(app);
    config.Attach(app, true);
    app->add_option("--targets", targets, "held-out targets JSONL")->required();
    app->add_option("--baskets", baskets, "basket TSV to score")->required();
    app->add_option("--out", out_path, "metrics report JSON");
    app->add_option("--per-user", per_user, "per-user metrics TSV");
    app->add_flag("--dry-run", dry_run,
                  "validate inputs and print the resolved config");
  }

  int Run(std::ostream& out, std::ostream& err) const {
    const RerankConfig cfg = config.Resolve();
    const BasketDataset ds = train.Load();
    const SplitDataset split = LoadTargetsJsonl(targets, SplitLabel::kTest);
    const BasketMap map = LoadBasketsTsv(baskets);
    if (dry_run) {
      out << FormatConfigText(cfg);
      return kExitOk;
    }
    const RepeatSets reps = BuildRepeatSets(ds);
    const MetricsReport report =
        Evaluate(map, split, reps, BuildItemGroups(ds), ds.categories,
                 GroundTruthRepeatRatio(split, reps), cfg);
    PrintWarnings(report.warnings, err);
    if (!out_path.empty()) SaveReportJson(report, out_path, true);
    if (!per_user.empty()) WriteText(per_user, FormatPerUserTsv(report));
    out << FormatReportTable(report);
    return kExitOk;
  }
};

std::vector<double> ParseGrid(const std::vector<std::string>& values,
                              const char* name) {
  std::vector<double> grid;
  for (const auto& v : values) {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != v.size() || v.empty()) {
      throw UsageError(std::string("--") + name + ": `" + v +
                       "` is not a number");
    }
    grid.push_back(x);
  }
  return grid;
}

// tune: grid search on the validation split, optional frozen test run.
struct TuneCommand {
  TrainFlags train;
  ConfigFlags config;
  ScoreFlags scores;
  SampleFlags sample;
  SolveFlags solve;
  std::string validation;
  std::string test;
  std::vector<std::string> epsilon_grid;
  std::vector<std::string> alpha_grid;
  std::vector<std::string> lambda_grid;
  std::vector<std::string> theta_grid;
  std::string sweep_csv;
  std::string plot_csv;
  std::string chosen;
  std::string test_report;
  bool dry_run = false;

  void Attach(CLI::App* app) {
    train.Attach(app);
    config.Attach(app, true);
    scores.Attach(app);
    sample.Attach(app);
    solve.Attach(app);
    app->add_option("--validation-targets", validation,
                    "validation targets JSONL")
        ->required();
    app->add_option("--test-targets", test, "test targets JSONL");
    app->add_option("--epsilon-grid", epsilon_grid, "comma-separated values")
        ->delimiter(',');
    app->add_option("--alpha-grid", alpha_grid, "comma-separated values")
        ->delimiter(',');
    app->add_option("--lambda-grid", lambda_grid, "comma-separated values")
        ->delimiter(',');
    app->add_option("--theta-grid", theta_grid,
                    "comma-separated values (default: repeat-score deciles)")
        ->delimiter(',');
    app->add_option("--sweep-csv", sweep_csv, "one row per grid point");
    app->add_option("--plot-csv", plot_csv, "one-parameter sensitivity rows");
    app->add_option("--chosen", chosen, "tune result JSON");
    app->add_option("--test-report", test_report,
                    "metrics JSON of the chosen config on the test split");
    app->add_flag("--dry-run", dry_run,
                  "validate inputs and print the resolved config");
  }

  int Run(std::ostream& out, std::ostream& err) const {
    const RerankConfig cfg = config.Resolve();
    const RerankOptions options = solve.Options();
    GridSpec grid;
    if (!epsilon_grid.empty()) grid.epsilon_grid = ParseGrid(epsilon_grid, "epsilon-grid");
    if (!alpha_grid.empty()) grid.alpha_grid = ParseGrid(alpha_grid, "alpha-grid");
    if (!lambda_grid.empty()) grid.lambda_grid = ParseGrid(lambda_grid, "lambda-grid");
    if (!theta_grid.empty()) grid.theta_grid = ParseGrid(theta_grid, "theta-grid");
    grid.Normalize();
    if (!test_report.empty() && test.empty()) {
      throw UsageError("--test-report needs --test-targets");
    }
    const BasketDataset ds = train.Load();
    const CandidateSet cands = scores.Load(cfg.n);
    const auto val_ctx = EvaluationContext::Build(
        ds, sample.Apply(LoadTargetsJsonl(validation, SplitLabel::kValidation)),
        cands);
    std::optional<EvaluationContext> test_ctx;
    if (!test.empty()) {
      test_ctx = EvaluationContext::Build(
          ds, sample.Apply(LoadTargetsJsonl(test, SplitLabel::kTest)), cands);
    }
    if (dry_run) {
      out << FormatConfigText(cfg);
      out << "# validation_users = " << val_ctx.targets.eval_targets.size()
          << '\n';
      if (test_ctx) {
        out << "# test_users = " << test_ctx->targets.eval_targets.size()
            << '\n';
      }
      return kExitOk;
    }
    const TuneResult result = RunGrid(val_ctx, cfg, grid, options);
    if (!sweep_csv.empty()) WriteText(sweep_csv, FormatSweepCsv(result));
    if (!plot_csv.empty()) WriteText(plot_csv, FormatPlotCsv(result));
    if (!chosen.empty()) {
      WriteText(chosen, TuneResultToJson(result).dump(2) + "\n");
    }
    if (result.infeasible) {
      err << "warning: no grid point kept recall within tolerance; "
             "falling back to the baseline config\n";
    }
    out << "# grid_points = " << result.points.size()
        << ", feasible = " << result.feasible_count << '\n';
    out << FormatConfigText(result.best);
    if (test_ctx) {
      const MetricsReport report =
          FinalEvaluate(result.best, cfg.objective_kind, *test_ctx, options);
      PrintWarnings(report.warnings, err);
      if (!test_report.empty()) SaveReportJson(report, test_report, true);
      out << FormatReportTable(report);
    }
    return kExitOk;
  }
};

// One report row; `best` marks are assigned per column.
struct Column {
  std::string title;
  std::function<double(const MetricsReport&)> value;
  // +1: larger is better, -1: smaller is better, 0: no preference.
  int direction = 0;
  // Compare magnitudes rather than signed values.
  bool absolute = false;
};

std::string FormatComparison(const std::vector<std::string>& labels,
                             const std::vector<MetricsReport>& reports) {
  const std::vector<Column> columns = {
      {"Recall@K", [](const MetricsReport& r) { return r.recall; }, +1, false},
      {"DS", [](const MetricsReport& r) { return r.ds; }, +1, false},
      {"logDP", [](const MetricsReport& r) { return r.log_dp; }, -1, true},
      {"RepR", [](const MetricsReport& r) { return r.rep_ratio_rec; }, 0,
       false},
      {"RepBias", [](const MetricsReport& r) { return r.rep_bias; }, -1, true},
      {"mDR", [](const MetricsReport& r) { return r.m_dr; }, +1, false},
      {"mFR", [](const MetricsReport& r) { return r.m_fr; }, -1, false},
  };
  std::string text = "| Method |";
  std::string rule = "|---|";
  for (const auto& c : columns) {
    text += " " + c.title + " |";
    rule += "---:|";
  }
  text += "\n" + rule + "\n";
  const bool mark = reports.size() > 1;
  std::vector<double> best(columns.size(), 0.0);
  for (std::size_t c = 0; c < columns.size(); ++c) {
    for (std::size_t r = 0; r < reports.size(); ++r) {
      double v = columns[c].value(reports[r]);
      if (columns[c].absolute) v = std::fabs(v);
      const double key = columns[c].direction * v;
      if (r == 0 || key > best[c]) best[c] = key;
    }
  }
  for (std::size_t r = 0; r < reports.size(); ++r) {
    text += "| " + labels[r] + " |";
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const double raw = columns[c].value(reports[r]);
      const double v = columns[c].absolute ? std::fabs(raw) : raw;
      const double key = columns[c].direction * v;
      const bool is_best =
          mark && columns[c].direction != 0 &&
          key >= best[c] - 1e-12 * std::max(1.0, std::fabs(best[c]));
      const std::string cell = Fixed(raw);
      text += is_best ? " **" + cell + "** |" : " " + cell + " |";
    }
    text += '\n';
  }
  const RerankConfig& cfg = reports.front().config;
  text += "\nK = " + std::to_string(cfg.k) + ", omega = " + Fixed(cfg.omega, 2) +
          ", RepR(gt) = " + Fixed(reports.front().rep_ratio_gt) +
          ", exposure = " + std::string(ToString(cfg.exposure.kind)) + "\n";
  if (mark) {
    text += "Bold marks the best value per column (largest Recall@K, DS and "
            "mDR; smallest |logDP|, |RepBias| and mFR).\n";
  }
  return text;
}

std::string FormatChosen(const std::vector<std::string>& labels,
                         const std::vector<TuneResult>& results) {
  std::string text =
      "| Tune run | objective | epsilon | alpha | lambda | theta | sign | "
      "feasible |\n|---|---|---:|---:|---:|---:|---|---:|\n";
  for (std::size_t i = 0; i < results.size(); ++i) {
    const TuneResult& t = results[i];
    text += "| " + labels[i] + " | " +
            std::string(ToString(t.best.objective_kind)) + " | " +
            Fixed(t.best.epsilon) + " | " + Fixed(t.best.alpha) + " | " +
            Fixed(t.best.lambda) + " | " + Fixed(t.best.theta) + " | " +
            std::string(ToString(t.sign)) + " | " +
            std::to_string(t.feasible_count) + "/" +
            std::to_string(t.points.size()) + " |\n";
  }
  return text;
}

// report: comparison table over metrics reports and tune results.
struct ReportCommand {
  std::vector<std::string> reports;
  std::vector<std::string> labels;
  std::vector<std::string> tune_results;
  std::string sweep_dir;
  std::string out_path;

  void Attach(CLI::App* app) {
    app->add_option("reports", reports, "metrics report JSON files");
    app->add_option("--labels", labels, "comma-separated row labels")
        ->delimiter(',');
    app->add_option("--tune-results", tune_results, "tune result JSON files");
    app->add_option("--sweep-dir", sweep_dir,
                    "write sweep and plot CSVs of each tune result here");
    app->add_option("--out", out_path, "markdown output (default: stdout)");
  }

  int Run(std::ostream& out, std::ostream&) const {
    if (reports.empty() && tune_results.empty()) {
      throw UsageError("report needs metrics reports or --tune-results");
    }
    if (!labels.empty() && labels.size() != reports.size()) {
      throw UsageError("--labels has " + std::to_string(labels.size()) +
                       " entries for " + std::to_string(reports.size()) +
                       " report(s)");
    }
    if (!sweep_dir.empty() && tune_results.empty()) {
      throw UsageError("--sweep-dir needs --tune-results");
    }
    std::vector<MetricsReport> loaded;
    for (const auto& path : reports) loaded.push_back(LoadReportJson(path));
    for (std::size_t i = 1; i < loaded.size(); ++i) {
      if (loaded[i].config.k != loaded[0].config.k) {
        throw DataError("mixed basket sizes: " + reports[0] + " has K = " +
                        std::to_string(loaded[0].config.k) + ", " +
                        reports[i] + " has K = " +
                        std::to_string(loaded[i].config.k));
      }
      if (loaded[i].config.omega != loaded[0].config.omega) {
        throw DataError("mixed omega: " + reports[0] + " and " + reports[i]);
      }
    }
    std::vector<TuneResult> tuned;
    for (const auto& path : tune_results) {
      try {
        tuned.push_back(TuneResultFromJson(ReadJson(path)));
      } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
      }
    }
    std::string text;
    if (!loaded.empty()) {
      std::vector<std::string> row_labels = labels;
      if (row_labels.empty()) {
        for (const auto& path : reports) row_labels.push_back(Stem(path));
      }
      text += FormatComparison(row_labels, loaded);
    }
    if (!tuned.empty()) {
      std::vector<std::string> tune_labels;
      for (const auto& path : tune_results) tune_labels.push_back(Stem(path));
      if (!text.empty()) text += '\n';
      text += FormatChosen(tune_labels, tuned);
      if (!sweep_dir.empty()) {
        std::filesystem::create_directories(sweep_dir);
        const std::filesystem::path dir(sweep_dir);
        for (std::size_t i = 0; i < tuned.size(); ++i) {
          WriteText((dir / (tune_labels[i] + "_sweep.csv")).string(),
                    FormatSweepCsv(tuned[i]));
          WriteText((dir / (tune_labels[i] + "_plot.csv")).string(),
                    FormatPlotCsv(tuned[i]));
        }
      }
    }
    Emit(out_path, text, out);
    return kExitOk;
  }
};

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"Next-basket reranking for diversity, fairness and repeat bias",
               "nbrank"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "nbrank 0.1.0");

  IngestCommand ingest;
  ScoreCommand score;
  RerankCommand rerank;
  EvaluateCommand evaluate;
  TuneCommand tune;
  ReportCommand report;
  std::function<int()> run;

  auto add = [&](const char* name, const char* help, auto& command) {
    CLI::App* sub = app.add_subcommand(name, help);
    command.Attach(sub);
    sub->callback([&, sub] {
      (void)sub;
      run = [&] { return command.Run(out, err); };
    });
  };
  add("ingest", "filter, cap and split raw baskets", ingest);
  add("score", "score candidates with the built-in scorers", score);
  add("rerank", "rerank candidate lists into baskets", rerank);
  add("evaluate", "compute metrics of reranked baskets", evaluate);
  add("tune", "grid-search weights on the validation split", tune);
  add("report", "compare metrics reports in one table", report);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  try {
    return run();
  } catch (const UsageError& e) {
    err << "nbrank: usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    err << "nbrank: data error: " << e.what() << '\n';
    return kExitData;
  } catch (const SolverError& e) {
    err << "nbrank: solver error: " << e.what() << '\n';
    return kExitSolver;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "nbrank: data error: " << e.what() << '\n';
    return kExitData;
  } catch (const nlohmann::json::exception& e) {
    err << "nbrank: data error: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace nbrank::cli
