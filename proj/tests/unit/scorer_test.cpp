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
#include <set>

#include "nbrank/dataset.hpp"
#include "nbrank/error.hpp"
#include "nbrank/scorer.hpp"
#include "support/temp_dir.hpp"

namespace nbrank {
namespace {

using testing::TempDir;

std::vector<ItemId> Items(const ScoreList& list) {
  std::vector<ItemId> out;
  for (const auto& s : list) out.push_back(s.item);
  return out;
}

BasketDataset SmallTrain() {
  return MakeDataset({
      {"u1", {{"a", "b"}, {"a"}, {"a", "c"}, {"d"}}},
      {"u2", {{"b", "e"}, {"e"}}},
      {"u3", {{"e", "b"}, {"f"}}},
  });
}

TEST(ImportScores, EchoesRows) {
  const auto table = ParseScoresTsv("u1\ta\t0.9\nu1\tb\t0.7\n", 100);
  EXPECT_EQ(Items(table.at("u1")), (std::vector<ItemId>{"a", "b"}));
  EXPECT_DOUBLE_EQ(table.at("u1")[0].score, 0.9);
}

TEST(ImportScores, EqualScoresOrderById) {
  const auto table = ParseScoresTsv("u1\tb\t0.5\nu1\ta\t0.5\n", 100);
  EXPECT_EQ(Items(table.at("u1")), (std::vector<ItemId>{"a", "b"}));
}

TEST(ImportScores, TruncatesToN) {
  const auto table = ParseScoresTsv("u1\ta\t0.1\nu1\tb\t0.9\nu1\tc\t0.5\n", 1);
  EXPECT_EQ(Items(table.at("u1")), (std::vector<ItemId>{"b"}));
}

TEST(ImportScores, NonFiniteScoreIsError) {
  EXPECT_THROW(ParseScoresTsv("u1\ta\tnan\n", 10), DataError);
  EXPECT_THROW(ParseScoresTsv("u1\ta\tinf\n", 10), DataError);
  EXPECT_THROW(ParseScoresTsv("u1\ta\tabc\n", 10), DataError);
}

TEST(ImportScores, DuplicateRowIsError) {
  try {
    ParseScoresTsv("u1\ta\t0.1\nu2\ta\t0.3\nu1\ta\t0.2\n", 10, "s.tsv");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("s.tsv:3"), std::string::npos)
        << e.what();
  }
}

TEST(ImportScores, FlagsAbsentUsers) {
  TempDir dir;
  const auto path = dir.Write("u.tsv", "u1\ta\t0.3\n");
  auto cands = ImportUnifiedScores(path, 10);
  FlagMissingUsers(cands, {"u1", "u2"});
  EXPECT_EQ(cands.missing_users, (std::vector<UserId>{"u2"}));
  EXPECT_EQ(cands.Users(), (std::vector<UserId>{"u1"}));
}

TEST(ImportScores, FileRoundTrip) {
  TempDir dir;
  ScoreTable table;
  table["u1"] = {{"a", 0.1 + 0.2}, {"b", 1e-17}};
  table["u2"] = {{"c", -3.5}};
  SaveScoresTsv(table, dir.File("s.tsv"));
  EXPECT_EQ(LoadScoresTsv(dir.File("s.tsv"), 10), table);
}

TEST(ImportScores, CombinedPairIsValidated) {
  TempDir dir;
  const auto rep = dir.Write("r.tsv", "u1\ta\t0.9\n");
  const auto exp = dir.Write("e.tsv", "u1\ta\t0.4\nu1\tz\t0.2\n");
  const auto cands = ImportCombinedScores(rep, exp, 10);
  EXPECT_EQ(cands.kind, CandidateKind::kCombined);
  EXPECT_THROW(ValidateCombined(cands, RepeatSets{{"u1", {"a"}}}), DataError);
}

TEST(RepeatTopFreq, FrequencyOverBaskets) {
  const auto train = SmallTrain();
  const auto reps = BuildRepeatSets(train);
  const auto cands = ScoreRepeatTopFreq(train, reps, 10);
  const auto& u1 = cands.repeat_list.at("u1");
  ASSERT_EQ(u1[0].item, "a");
  EXPECT_DOUBLE_EQ(u1[0].score, 0.75);
  // b, c, d all bought once: id order.
  EXPECT_EQ(Items(u1), (std::vector<ItemId>{"a", "b", "c", "d"}));
  const auto ids = Items(u1);
  EXPECT_EQ(std::count(ids.begin(), ids.end(), "e"), 0);
}

TEST(ExplorePopularity, NormalizedAndDisjoint) {
  const auto train = SmallTrain();
  const auto reps = BuildRepeatSets(train);
  const auto cands = ScoreExplorePopularity(train, reps, 100);
  // Global counts: a3 b3 e3 c1 d1 f1. u1 has never bought e.
  const auto& u1 = cands.explore_list.at("u1");
  EXPECT_EQ(Items(u1), (std::vector<ItemId>{"e", "f"}));
  EXPECT_DOUBLE_EQ(u1[0].score, 1.0);
  EXPECT_DOUBLE_EQ(u1[1].score, 1.0 / 3.0);
  for (const auto& [user, list] : cands.explore_list) {
    for (const auto& s : list) EXPECT_FALSE(reps.at(user).contains(s.item));
  }
  // N above the unseen count keeps them all; below it truncates.
  EXPECT_EQ(cands.explore_list.at("u2").size(), 4u);
  EXPECT_EQ(ScoreExplorePopularity(train, reps, 2).explore_list.at("u2").size(),
            2u);
}

CandidateSet HandSides(CandidateSet* explore_side) {
  CandidateSet repeat_side;
  repeat_side.kind = CandidateKind::kCombined;
  repeat_side.n = 10;
  repeat_side.repeat_list["u"] = {{"r1", 0.8}, {"r2", 0.3}};
  explore_side->kind = CandidateKind::kCombined;
  explore_side->n = 10;
  explore_side->explore_list["u"] = {{"e1", 1.0}, {"e2", 0.5}};
  return repeat_side;
}

TEST(MakeUnified, HalfMixHandComputed) {
  CandidateSet explore;
  const auto repeat = HandSides(&explore);
  // 0.5 * {0.8, 0.3} = {0.4, 0.15}; 0.5 * {1.0, 0.5} = {0.5, 0.25}.
  const auto u = MakeUnified(repeat, explore, 0.5);
  EXPECT_EQ(Items(u.unified.at("u")),
            (std::vector<ItemId>{"e1", "r1", "e2", "r2"}));
  EXPECT_DOUBLE_EQ(u.unified.at("u")[2].score, 0.25);
}

TEST(MakeUnified, MixLimits) {
  CandidateSet explore;
  const auto repeat = HandSides(&explore);
  const auto all_repeat = Items(MakeUnified(repeat, explore, 1.0).unified.at("u"));
  EXPECT_EQ(std::vector<ItemId>(all_repeat.begin(), all_repeat.begin() + 2),
            (std::vector<ItemId>{"r1", "r2"}));
  const auto all_explore =
      Items(MakeUnified(repeat, explore, 0.0).unified.at("u"));
  EXPECT_EQ(std::vector<ItemId>(all_explore.begin(), all_explore.begin() + 2),
            (std::vector<ItemId>{"e1", "e2"}));
  EXPECT_THROW(MakeUnified(repeat, explore, 1.5), UsageError);
}

TEST(ScorerProperties, ListsCanonicalAndDisjoint) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    SyntheticSpec spec;
    spec.users = 25;
    spec.seed = seed;
    const auto train = SplitLeaveLast(MakeSyntheticDataset(spec), seed).train;
    const auto reps = BuildRepeatSets(train);
    const auto r = ScoreRepeatTopFreq(train, reps, 20);
    const auto e = ScoreExplorePopularity(train, reps, 20);
    const auto combined = MakeCombined(r, e);
    EXPECT_NO_THROW(ValidateCombined(combined, reps));
    const auto unified = MakeUnified(r, e, 0.7);
    for (const auto* table :
         {&combined.repeat_list, &combined.explore_list, &unified.unified}) {
      for (const auto& [user, list] : *table) {
        EXPECT_TRUE(IsCanonical(list)) << user;
        EXPECT_LE(list.size(), 20u);
        ScoreList resorted = list;
        std::reverse(resorted.begin(), resorted.end());
        SortAndTruncate(resorted, 20);
        EXPECT_EQ(resorted, list);
        std::set<ItemId> seen;
        for (const auto& s : list) EXPECT_TRUE(seen.insert(s.item).second);
      }
    }
  }
}

}  // namespace
}  // namespace nbrank
