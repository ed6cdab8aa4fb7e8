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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "nbrank/cli.hpp"
#include "nbrank/dataset.hpp"
#include "nbrank/metrics.hpp"
#include "nbrank/scorer.hpp"
#include "nbrank/solver.hpp"
#include "nbrank/tuner.hpp"
#include "support/temp_dir.hpp"

namespace nbrank {
namespace {

using testing::ReadText;
using testing::TempDir;

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult Cli(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  CliResult r;
  r.code = cli::RunCli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::vector<std::string> Concat(std::vector<std::string> a,
                                const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// The toy fixture ingested and scored once for the whole suite.
class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir();
    const std::string toy = NBRANK_TOY_DIR;
    const auto ingest =
        Cli({"ingest", "--baskets", toy + "/baskets.jsonl", "--categories",
             toy + "/categories.tsv", "--out-dir", dir_->File("data")});
    ASSERT_EQ(ingest.code, 0) << ingest.err;
    const auto score = Cli(Concat({"score", "--n", "10", "--out", Path("scores.tsv")},
                                  Train()));
    ASSERT_EQ(score.code, 0) << score.err;
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }

  static std::string Path(const std::string& name) { return dir_->File(name); }
  static std::string Data(const std::string& name) {
    return dir_->File("data/" + name);
  }
  static std::vector<std::string> Train() {
    return {"--train", Data("train.jsonl"), "--categories",
            Data("categories.tsv")};
  }
  // Arguments shared by every rerank call on the validation users.
  static std::vector<std::string> RerankArgs(const std::string& targets =
                                                 "validation.jsonl") {
    return Concat({"rerank", "--targets", Data(targets), "--scores",
                   Path("scores.tsv"), "--k", "5", "--n", "10"},
                  Train());
  }
  static CliResult Evaluate(const std::string& baskets,
                            const std::string& report,
                            const std::string& targets = "validation.jsonl") {
    return Cli(Concat({"evaluate", "--targets", Data(targets), "--baskets",
                       baskets, "--k", "5", "--out", report},
                      Train()));
  }

  static TempDir* dir_;
};

TempDir* CliTest::dir_ = nullptr;

TEST_F(CliTest, IngestWritesSplitFiles) {
  for (const char* name :
       {"train.jsonl", "categories.tsv", "validation.jsonl", "test.jsonl"}) {
    EXPECT_TRUE(std::filesystem::exists(Data(name))) << name;
  }
  const auto val = LoadTargetsJsonl(Data("validation.jsonl"),
                                    SplitLabel::kValidation);
  const auto test = LoadTargetsJsonl(Data("test.jsonl"), SplitLabel::kTest);
  EXPECT_EQ(val.eval_targets.size() + test.eval_targets.size(), 12u);
  EXPECT_EQ(val.eval_targets.size(), 6u);
}

TEST_F(CliTest, IngestIsReproducibleFromSeed) {
  const std::string toy = NBRANK_TOY_DIR;
  TempDir a;
  TempDir b;
  for (TempDir* d : {&a, &b}) {
    const auto r = Cli({"ingest", "--baskets", toy + "/baskets.jsonl",
                        "--sample-users", "8", "--seed", "5", "--out-dir",
                        d->File("out")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("users = 8"), std::string::npos) << r.out;
  }
  for (const char* name : {"train.jsonl", "validation.jsonl", "test.jsonl"}) {
    EXPECT_EQ(ReadText(a.File(std::string("out/") + name)),
              ReadText(b.File(std::string("out/") + name)));
  }
}

TEST_F(CliTest, NoOpRerankMatchesDirectTopKEvaluation) {
  const auto rerank =
      Cli(Concat(RerankArgs(), {"--mode", "none", "--out", Path("none.tsv")}));
  ASSERT_EQ(rerank.code, 0) << rerank.err;

  // Independent top-K: the first five entries of each user's sorted list.
  const auto scores = LoadScoresTsv(Path("scores.tsv"), 10);
  const auto targets =
      LoadTargetsJsonl(Data("validation.jsonl"), SplitLabel::kValidation);
  BasketMap expected;
  for (const auto& [user, target] : targets.eval_targets) {
    const auto& list = scores.at(user);
    for (std::size_t i = 0; i < 5 && i < list.size(); ++i) {
      expected[user].push_back(list[i].item);
    }
  }
  const BasketMap got = LoadBasketsTsv(Path("none.tsv"));
  EXPECT_EQ(got, expected);

  const auto eval = Evaluate(Path("none.tsv"), Path("none.json"));
  ASSERT_EQ(eval.code, 0) << eval.err;
  const MetricsReport via_cli = LoadReportJson(Path("none.json"));

  // The category file defines the item universe, as in the CLI.
  const CategoryMap categories = LoadCategories(Data("categories.tsv"));
  auto train = LoadBaskets(Data("train.jsonl"), BasketFormat::kJsonl);
  for (const auto& [item, c] : categories) train.vocabulary.insert(item);
  train = WithCategories(train, categories);
  const auto reps = BuildRepeatSets(train);
  RerankConfig cfg;
  cfg.k = 5;
  const MetricsReport direct =
      nbrank::Evaluate(expected, targets, reps, BuildItemGroups(train),
                       train.categories, GroundTruthRepeatRatio(targets, reps),
                       cfg);
  EXPECT_EQ(ReportToJson(via_cli, true).dump(), ReportToJson(direct, true).dump());
}

TEST_F(CliTest, RerankMatchesGoldenFile) {
  const std::string golden = ReadText(std::string(NBRANK_TOY_DIR) +
                                      "/golden_radiv.tsv");
  ASSERT_FALSE(golden.empty());
  for (const char* engine : {"auto", "bnb", "bruteforce"}) {
    const auto r = Cli(Concat(RerankArgs(), {"--mode", "radiv", "--epsilon",
                                             "0.1", "--lambda", "0.1",
                                             "--engine", engine}));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, golden) << engine;
  }
}

TEST_F(CliTest, RerankIsThreadCountInvariant) {
  const auto args = Concat(RerankArgs(), {"--mode", "raif", "--alpha", "10",
                                          "--lambda", "0.5"});
  const auto one = Cli(Concat(args, {"--threads", "1"}));
  const auto four = Cli(Concat(args, {"--threads", "4"}));
  ASSERT_EQ(one.code, 0) << one.err;
  EXPECT_EQ(one.out, four.out);
}

TEST_F(CliTest, TuneTwiceWithSameSeedGivesIdenticalChoice) {
  std::vector<std::string> outputs;
  std::vector<std::string> chosen;
  for (int run = 0; run < 2; ++run) {
    const std::string file = Path("chosen" + std::to_string(run) + ".json");
    const auto r = Cli(Concat(
        {"tune", "--mode", "radiv", "--seed", "7", "--sample-users", "4",
         "--validation-targets", Data("validation.jsonl"), "--scores",
         Path("scores.tsv"), "--k", "5", "--n", "10", "--chosen", file},
        Train()));
    ASSERT_EQ(r.code, 0) << r.err;
    outputs.push_back(r.out);
    chosen.push_back(ReadText(file));
  }
  EXPECT_EQ(outputs[0], outputs[1]);
  EXPECT_EQ(chosen[0], chosen[1]);
  const auto j = nlohmann::json::parse(chosen[0]);
  EXPECT_EQ(j.at("best").at("objective_kind"), "radiv");
  EXPECT_NE(j.at("best").at("sign_mode"), "auto");
}

TEST_F(CliTest, TuneWritesSweepThatReportReproduces) {
  const auto r = Cli(Concat(
      {"tune", "--mode", "raif", "--validation-targets",
       Data("validation.jsonl"), "--test-targets", Data("test.jsonl"),
       "--scores", Path("scores.tsv"), "--k", "5", "--n", "10",
       "--alpha-grid", "0,1,10", "--lambda-grid", "0,0.5", "--chosen",
       Path("raif_tune.json"), "--sweep-csv", Path("raif_sweep_direct.csv"),
       "--plot-csv", Path("raif_plot_direct.csv"), "--test-report",
       Path("raif_test.json")},
      Train()));
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string sweep = ReadText(Path("raif_sweep_direct.csv"));
  EXPECT_EQ(std::count(sweep.begin(), sweep.end(), '\n'), 7);  // header + 6
  EXPECT_TRUE(std::filesystem::exists(Path("raif_test.json")));

  const auto rep = Cli({"report", "--tune-results", Path("raif_tune.json"),
                        "--sweep-dir", Path("sweeps")});
  ASSERT_EQ(rep.code, 0) << rep.err;
  EXPECT_EQ(ReadText(Path("sweeps/raif_tune_sweep.csv")), sweep);
  EXPECT_EQ(ReadText(Path("sweeps/raif_tune_plot.csv")),
            ReadText(Path("raif_plot_direct.csv")));
  EXPECT_NE(rep.out.find("| raif_tune | raif |"), std::string::npos)
      << rep.out;
}

TEST_F(CliTest, CombinedPipelineRuns) {
  const auto score = Cli(Concat({"score", "--n", "10", "--candidates",
                                 "combined", "--repeat-out", Path("rep.tsv"),
                                 "--explore-out", Path("exp.tsv")},
                                Train()));
  ASSERT_EQ(score.code, 0) << score.err;
  const auto r = Cli(Concat(
      {"rerank", "--targets", Data("validation.jsonl"), "--repeat-scores",
       Path("rep.tsv"), "--explore-scores", Path("exp.tsv"), "--k", "5",
       "--n", "10", "--theta", "0.3", "--mode", "raif", "--alpha", "1"},
      Train()));
  ASSERT_EQ(r.code, 0) << r.err;
  const BasketMap baskets = ParseBasketsTsv(r.out);
  EXPECT_EQ(baskets.size(), 6u);
}

TEST_F(CliTest, DryRunValidatesWithoutSolving) {
  const auto r = Cli(Concat(RerankArgs(),
                            {"--mode", "radiv", "--epsilon", "0.2",
                             "--dry-run", "--out", Path("never.tsv"),
                             "--dump-problems", Path("problems.json")}));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_FALSE(std::filesystem::exists(Path("never.tsv")));
  EXPECT_NE(r.out.find("epsilon = 0.2"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("sign_mode = "), std::string::npos);
  EXPECT_EQ(r.out.find("sign_mode = auto"), std::string::npos);
  const auto problems = nlohmann::json::parse(ReadText(Path("problems.json")));
  ASSERT_TRUE(problems.is_array());
  EXPECT_EQ(problems.size(), 6u);
}

TEST_F(CliTest, FlagsOverrideConfigFile) {
  const std::string cfg =
      dir_->Write("run.cfg", "# toy run\nepsilon = 0.3\nlambda = 0.2\nk = 4\n");
  const auto r = Cli(Concat(RerankArgs(), {"--config", cfg, "--epsilon",
                                           "0.1", "--dry-run"}));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("epsilon = 0.1"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("lambda = 0.2"), std::string::npos) << r.out;
  // The --k flag in RerankArgs wins over the file's k = 4.
  EXPECT_NE(r.out.find("k = 5"), std::string::npos) << r.out;
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(Cli({}).code, cli::kExitUsage);
  EXPECT_EQ(Cli({"frobnicate"}).code, cli::kExitUsage);
  EXPECT_EQ(Cli({"--help"}).code, cli::kExitOk);
  EXPECT_EQ(Cli(Concat(RerankArgs(), {"--no-such-flag"})).code,
            cli::kExitUsage);
  EXPECT_EQ(Cli(Concat(RerankArgs(), {"--mode", "quantum"})).code,
            cli::kExitUsage);
  EXPECT_EQ(Cli(Concat(RerankArgs(), {"--omega", "2"})).code, cli::kExitUsage);
  EXPECT_EQ(Cli(Concat(RerankArgs(), {"--repeat-scores", Path("scores.tsv"),
                                      "--explore-scores", Path("scores.tsv")}))
                .code,
            cli::kExitUsage);

  const auto missing = Cli(Concat(
      {"rerank", "--targets", Path("absent.jsonl"), "--scores",
       Path("scores.tsv"), "--k", "5", "--n", "10"},
      Train()));
  EXPECT_EQ(missing.code, cli::kExitData);
  EXPECT_NE(missing.err.find("absent.jsonl"), std::string::npos);

  const std::string bad =
      dir_->Write("bad_targets.jsonl", "{\"user_id\":\"u01\",\"baskets\":[[\"p01\"]]}\nnot json\n");
  const auto malformed = Cli(Concat(
      {"rerank", "--targets", bad, "--scores", Path("scores.tsv"), "--k", "5",
       "--n", "10"},
      Train()));
  EXPECT_EQ(malformed.code, cli::kExitData);
  EXPECT_NE(malformed.err.find(":2"), std::string::npos) << malformed.err;

  // The top-k engine cannot handle a diversity term.
  const auto solver = Cli(Concat(RerankArgs(), {"--engine", "topk",
                                                "--epsilon", "0.1"}));
  EXPECT_EQ(solver.code, cli::kExitSolver) << solver.err;
  EXPECT_NE(solver.err.find("user `"), std::string::npos) << solver.err;
}

TEST_F(CliTest, SkipErrorsContinuesPastUsersWithoutScores) {
  // Drop one validation user's candidate rows.
  const auto targets =
      LoadTargetsJsonl(Data("validation.jsonl"), SplitLabel::kValidation);
  const std::string victim = targets.eval_targets.begin()->first;
  std::string kept;
  std::istringstream lines(ReadText(Path("scores.tsv")));
  for (std::string line; std::getline(lines, line);) {
    if (line.rfind(victim + "\t", 0) != 0) kept += line + "\n";
  }
  const std::string partial = dir_->Write("partial.tsv", kept);
  const auto args = Concat({"rerank", "--targets", Data("validation.jsonl"),
                            "--scores", partial, "--k", "5", "--n", "10",
                            "--sign-mode", "penalize_repeat"},
                           Train());
  const auto strict = Cli(args);
  EXPECT_EQ(strict.code, cli::kExitData);
  EXPECT_NE(strict.err.find(victim), std::string::npos) << strict.err;
  const auto lenient = Cli(Concat(args, {"--skip-errors"}));
  ASSERT_EQ(lenient.code, 0) << lenient.err;
  EXPECT_NE(lenient.err.find("warning"), std::string::npos);
  EXPECT_EQ(ParseBasketsTsv(lenient.out).size(), 5u);
}

TEST_F(CliTest, ReportTables) {
  ASSERT_EQ(Cli(Concat(RerankArgs("test.jsonl"),
                       {"--mode", "none", "--out", Path("ori.tsv")}))
                .code,
            0);
  ASSERT_EQ(Cli(Concat(RerankArgs("test.jsonl"),
                       {"--mode", "radiv", "--epsilon", "0.1", "--lambda",
                        "0.1", "--out", Path("rd.tsv")}))
                .code,
            0);
  ASSERT_EQ(Evaluate(Path("ori.tsv"), Path("Ori.json"), "test.jsonl").code, 0);
  ASSERT_EQ(Evaluate(Path("rd.tsv"), Path("RD.json"), "test.jsonl").code, 0);

  const auto one = Cli({"report", Path("Ori.json")});
  ASSERT_EQ(one.code, 0) << one.err;
  EXPECT_NE(one.out.find("| Ori |"), std::string::npos) << one.out;
  EXPECT_EQ(one.out.find("**"), std::string::npos);
  const auto table_rows = [](const std::string& text) {
    std::size_t rows = 0;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
      if (line.rfind("| ", 0) == 0) ++rows;
    }
    return rows;  // header included
  };
  EXPECT_EQ(table_rows(one.out), 2u);

  const auto two = Cli({"report", Path("Ori.json"), Path("RD.json"),
                        "--labels", "Ori.,RD"});
  ASSERT_EQ(two.code, 0) << two.err;
  EXPECT_EQ(table_rows(two.out), 3u);
  EXPECT_NE(two.out.find("**"), std::string::npos);

  // On the fixture, RD raises DS and shrinks |RepBias| relative to Ori.
  const auto ori = LoadReportJson(Path("Ori.json"));
  const auto rd = LoadReportJson(Path("RD.json"));
  EXPECT_GT(rd.ds, ori.ds);
  EXPECT_LT(std::fabs(rd.rep_bias), std::fabs(ori.rep_bias));
  std::istringstream in(two.out);
  std::string line;
  std::string rd_row;
  while (std::getline(in, line)) {
    if (line.rfind("| RD |", 0) == 0) rd_row = line;
  }
  // DS and RepBias are the third and sixth cells of the row.
  std::vector<std::string> cells;
  std::istringstream row(rd_row);
  for (std::string cell; std::getline(row, cell, '|');) cells.push_back(cell);
  ASSERT_GE(cells.size(), 7u) << rd_row;
  EXPECT_NE(cells[3].find("**"), std::string::npos) << rd_row;
  EXPECT_NE(cells[6].find("**"), std::string::npos) << rd_row;

  // Mixed basket sizes are rejected.
  const auto k4 = Cli(Concat({"evaluate", "--targets", Data("test.jsonl"),
                              "--baskets", Path("ori.tsv"), "--k", "4",
                              "--out", Path("k4.json")},
                             Train()));
  ASSERT_EQ(k4.code, 0) << k4.err;
  const auto mixed = Cli({"report", Path("Ori.json"), Path("k4.json")});
  EXPECT_EQ(mixed.code, cli::kExitData);
  EXPECT_NE(mixed.err.find("K = "), std::string::npos) << mixed.err;

  EXPECT_EQ(Cli({"report", Path("Ori.json"), "--labels", "a,b"}).code,
            cli::kExitUsage);
}

}  // namespace
}  // namespace nbrank
