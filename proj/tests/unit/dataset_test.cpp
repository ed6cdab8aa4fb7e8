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
#include <string>

#include "nbrank/dataset.hpp"
#include "nbrank/error.hpp"
#include "support/temp_dir.hpp"

namespace nbrank {
namespace {

using testing::TempDir;

UserHistory User(std::string id, std::vector<Basket> baskets) {
  return UserHistory{std::move(id), std::move(baskets)};
}

TEST(LoadBaskets, OneUserTwoBaskets) {
  const auto ds = ParseBasketsJsonl(
      R"({"user_id": "u1", "baskets": [["a", "b"], ["a", "c"]]})");
  ASSERT_EQ(ds.users.size(), 1u);
  EXPECT_EQ(ds.users[0].baskets.size(), 2u);
  EXPECT_EQ(ds.vocabulary, (std::set<ItemId>{"a", "b", "c"}));
  EXPECT_EQ(ds.duplicates_removed, 0u);
}

TEST(LoadBaskets, DuplicateItemsCollapse) {
  const auto ds =
      ParseBasketsJsonl(R"({"user_id": "u1", "baskets": [["a", "a", "b"]]})");
  EXPECT_EQ(ds.users[0].baskets[0], (Basket{"a", "b"}));
  EXPECT_EQ(ds.duplicates_removed, 1u);
}

TEST(LoadBaskets, CsvMatchesJsonl) {
  const auto jsonl = ParseBasketsJsonl(
      "{\"user_id\": \"u1\", \"baskets\": [[\"a\", \"b\"], [\"c\"]]}\n"
      "{\"user_id\": \"u2\", \"baskets\": [[\"b\"]]}\n");
  const auto csv = ParseBasketsCsv(
      "user_id,basket_index,item_id\n"
      "u1,0,a\nu1,0,b\nu1,1,c\nu2,0,b\n");
  EXPECT_TRUE(csv.SameData(jsonl));
}

TEST(LoadBaskets, MalformedLineNamesLine) {
  try {
    ParseBasketsJsonl("{\"user_id\": \"u1\", \"baskets\": [[\"a\"]]}\n{oops\n",
                      "in.jsonl");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("in.jsonl:2"), std::string::npos)
        << e.what();
  }
}

TEST(LoadBaskets, EmptyFileIsError) {
  TempDir dir;
  const auto path = dir.Write("empty.jsonl", "");
  EXPECT_THROW(LoadBaskets(path, BasketFormat::kJsonl), DataError);
}

TEST(LoadBaskets, MissingCategoryIsUnknown) {
  auto ds = ParseBasketsJsonl(R"({"user_id": "u1", "baskets": [["a", "b"]]})");
  ds = WithCategories(ds, ParseCategories("a\tdairy\nzz\tsnacks\n"));
  EXPECT_EQ(ds.CategoryOf("a"), "dairy");
  EXPECT_EQ(ds.CategoryOf("b"), kUnknownCategory);
  EXPECT_FALSE(ds.categories.contains("zz"));
}

TEST(LoadBaskets, SaveReloadRoundTrips) {
  TempDir dir;
  SyntheticSpec spec;
  spec.users = 15;
  const auto ds = MakeSyntheticDataset(spec);
  SaveBasketsJsonl(ds, dir.File("b.jsonl"));
  SaveCategories(ds.categories, dir.File("c.tsv"));
  const auto back = WithCategories(
      LoadBaskets(dir.File("b.jsonl"), BasketFormat::kJsonl),
      LoadCategories(dir.File("c.tsv")));
  EXPECT_TRUE(back.SameData(ds));
}

TEST(LoadBaskets, ToyFixtureShape) {
  const std::string dir = NBRANK_TOY_DIR;
  const auto ds =
      WithCategories(LoadBaskets(dir + "/baskets.jsonl", BasketFormat::kJsonl),
                     LoadCategories(dir + "/categories.tsv"));
  EXPECT_EQ(ds.users.size(), 12u);
  EXPECT_EQ(ds.vocabulary.size(), 30u);
  std::set<CategoryId> cats;
  for (const auto& [item, cat] : ds.categories) cats.insert(cat);
  EXPECT_EQ(cats.size(), 5u);
}

TEST(FilterMinActivity, DropsShortUsers) {
  auto ds = MakeDataset({User("u1", {{"a"}, {"a"}}),
                         User("u2", {{"a"}, {"a"}, {"a"}})});
  const auto out = FilterMinActivity(ds, 3, 1);
  ASSERT_EQ(out.users.size(), 1u);
  EXPECT_EQ(out.users[0].user_id, "u2");
}

TEST(FilterMinActivity, DropsRareItems) {
  auto ds = MakeDataset({User("u1", {{"a", "r"}, {"a", "r"}, {"a"}}),
                         User("u2", {{"a", "r"}, {"a", "r"}, {"a"}})});
  const auto out = FilterMinActivity(ds, 3, 5);
  EXPECT_EQ(out.vocabulary, (std::set<ItemId>{"a"}));
  EXPECT_EQ(out.users.size(), 2u);
}

// Hand trace: `r` has 4 purchases and goes; that empties u9's third basket,
// so u9 falls to 2 baskets and goes; u9 held one of `c`'s 5 purchases, so
// `c` drops to 4 and goes on the next round. A single pass would keep `c`.
TEST(FilterMinActivity, CascadesToFixedPoint) {
  std::vector<UserHistory> users;
  for (int u = 0; u < 9; ++u) {
    std::vector<Basket> baskets{{"a"}, {"a"}, {"a"}};
    if (u < 3) baskets[2].push_back("r");
    if (u >= 3 && u < 7) baskets[0].push_back("c");
    users.push_back(User("u" + std::to_string(u), baskets));
  }
  users.push_back(User("u9", {{"a", "c"}, {"a"}, {"r"}}));
  const auto out = FilterMinActivity(MakeDataset(users), 3, 5);
  EXPECT_EQ(out.users.size(), 9u);
  EXPECT_EQ(out.FindUser("u9"), nullptr);
  EXPECT_EQ(out.vocabulary, (std::set<ItemId>{"a"}));
}

TEST(FilterMinActivity, ExhaustedIsError) {
  auto ds = MakeDataset({User("u1", {{"a"}})});
  EXPECT_THROW(FilterMinActivity(ds), DataError);
}

TEST(FilterMinActivity, IdempotentOnSyntheticData) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SyntheticSpec spec;
    spec.users = 40;
    spec.min_baskets = 2;
    spec.seed = seed;
    const auto once = FilterMinActivity(MakeSyntheticDataset(spec), 3, 5);
    const auto twice = FilterMinActivity(once, 3, 5);
    EXPECT_TRUE(twice.SameData(once)) << "seed " << seed;
    for (const auto& user : once.users) EXPECT_GE(user.baskets.size(), 3u);
  }
}

TEST(CapHistory, Boundaries) {
  std::vector<Basket> sixty;
  for (int b = 0; b < 60; ++b) sixty.push_back({"i" + std::to_string(b)});
  std::vector<Basket> eight(sixty.begin(), sixty.begin() + 8);
  const auto ds = MakeDataset({User("long", sixty), User("short", eight)});
  const auto capped = CapHistory(ds, 50);
  const auto& kept = capped.FindUser("long")->baskets;
  ASSERT_EQ(kept.size(), 50u);
  EXPECT_EQ(kept.front(), (Basket{"i10"}));
  EXPECT_EQ(kept.back(), (Basket{"i59"}));
  EXPECT_EQ(capped.FindUser("short")->baskets, eight);

  const auto last_only = CapHistory(ds, 1);
  EXPECT_EQ(last_only.FindUser("long")->baskets,
            (std::vector<Basket>{{"i59"}}));
  EXPECT_EQ(last_only.FindUser("short")->baskets,
            (std::vector<Basket>{{"i7"}}));
}

TEST(SampleUsers, SeededAndBounded) {
  SyntheticSpec spec;
  spec.users = 30;
  const auto ds = MakeSyntheticDataset(spec);
  const auto a = SampleUsers(ds, 10, 3);
  const auto b = SampleUsers(ds, 10, 3);
  EXPECT_EQ(a.users.size(), 10u);
  EXPECT_TRUE(a.SameData(b));
  EXPECT_EQ(SampleUsers(ds, 100, 3).users.size(), 30u);
}

TEST(SplitLeaveLast, HoldsOutLastBasket) {
  const auto ds = MakeDataset({User("u1", {{"b1"}, {"b2"}, {"b3"}})});
  const auto split = SplitLeaveLast(ds, 1);
  EXPECT_EQ(split.train.users[0].baskets,
            (std::vector<Basket>{{"b1"}, {"b2"}}));
  ASSERT_EQ(split.validation.eval_targets.size(), 1u);
  EXPECT_EQ(split.validation.eval_targets.at("u1"), (Basket{"b3"}));
  EXPECT_TRUE(split.test.eval_targets.empty());
}

TEST(SplitLeaveLast, DeterministicHalves) {
  std::vector<UserHistory> users;
  for (int u = 0; u < 4; ++u) {
    users.push_back(User("u" + std::to_string(u), {{"a"}, {"b"}}));
  }
  const auto ds = MakeDataset(users);
  const auto a = SplitLeaveLast(ds, 11);
  const auto b = SplitLeaveLast(ds, 11);
  EXPECT_EQ(a.validation.eval_targets.size(), 2u);
  EXPECT_EQ(a.test.eval_targets.size(), 2u);
  EXPECT_EQ(a.validation.eval_targets, b.validation.eval_targets);
  EXPECT_EQ(a.test.eval_targets, b.test.eval_targets);
}

TEST(SplitLeaveLast, OddCountGivesValidationTheExtraUser) {
  std::vector<UserHistory> users;
  for (int u = 0; u < 5; ++u) {
    users.push_back(User("u" + std::to_string(u), {{"a"}, {"b"}}));
  }
  const auto ds = MakeDataset(users);
  std::set<std::set<UserId>> partitions;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto split = SplitLeaveLast(ds, seed);
    ASSERT_EQ(split.validation.eval_targets.size(), 3u);
    ASSERT_EQ(split.test.eval_targets.size(), 2u);
    std::set<UserId> all;
    std::set<UserId> val;
    for (const auto& [u, t] : split.validation.eval_targets) {
      all.insert(u);
      val.insert(u);
    }
    for (const auto& [u, t] : split.test.eval_targets) {
      EXPECT_TRUE(all.insert(u).second) << "user in both halves: " << u;
    }
    EXPECT_EQ(all.size(), 5u);
    partitions.insert(val);
  }
  // The seed actually moves users around.
  EXPECT_GT(partitions.size(), 1u);
}

TEST(SplitLeaveLast, SingleBasketUserIsError) {
  const auto ds = MakeDataset({User("u1", {{"a"}})});
  EXPECT_THROW(SplitLeaveLast(ds, 0), DataError);
}

TEST(BuildRepeatSets, UnionOfBaskets) {
  const auto ds = MakeDataset(
      {User("u1", {{"a", "b"}, {"b", "c"}}), User("u2", {{"a"}})});
  const auto reps = BuildRepeatSets(ds);
  EXPECT_EQ(reps.at("u1"), (std::set<ItemId>{"a", "b", "c"}));
  EXPECT_EQ(reps.at("u2"), (std::set<ItemId>{"a"}));
}

TEST(BuildRepeatSets, EmptyHistoryIsError) {
  BasketDataset ds;
  ds.users.push_back(User("u1", {}));
  EXPECT_THROW(BuildRepeatSets(ds), DataError);
}

TEST(BuildItemGroups, TwentyPercentOfTen) {
  std::vector<Basket> baskets;
  for (int i = 0; i < 10; ++i) baskets.push_back({"i" + std::to_string(i)});
  const auto groups = BuildItemGroups(MakeDataset({User("u", baskets)}), 0.2);
  EXPECT_EQ(groups.popular.size(), 2u);
  EXPECT_EQ(groups.unpopular.size(), 8u);
}

TEST(BuildItemGroups, CountTiesGoToSmallerId) {
  std::vector<Basket> baskets;
  for (int k = 0; k < 5; ++k) baskets.push_back({"b", "a"});
  baskets.push_back({"c"});
  const auto ds = MakeDataset({User("u", baskets)});
  EXPECT_EQ(BuildItemGroups(ds, 0.3).popular, (std::set<ItemId>{"a"}));
  // ceil(0.34 * 3) = 2.
  EXPECT_EQ(BuildItemGroups(ds, 0.34).popular, (std::set<ItemId>{"a", "b"}));
}

TEST(BuildItemGroups, UniformCountsTakeFirstIds) {
  std::vector<ItemId> ids;
  for (int i = 0; i < 25; ++i) {
    ids.push_back("item" + std::string(i < 10 ? "0" : "") + std::to_string(i));
  }
  std::vector<Basket> baskets{ids};
  std::reverse(baskets[0].begin(), baskets[0].end());
  const auto groups = BuildItemGroups(MakeDataset({User("u", baskets)}), 0.2);
  std::sort(ids.begin(), ids.end());
  const std::set<ItemId> expected(ids.begin(), ids.begin() + 5);
  EXPECT_EQ(groups.popular, expected);
}

TEST(BuildItemGroups, PartitionsVocabulary) {
  SyntheticSpec spec;
  spec.users = 50;
  const auto ds = MakeSyntheticDataset(spec);
  for (const double fraction : {0.05, 0.2, 0.5, 0.9}) {
    const auto groups = BuildItemGroups(ds, fraction);
    std::set<ItemId> all = groups.popular;
    for (const auto& item : groups.unpopular) {
      EXPECT_TRUE(all.insert(item).second);
    }
    EXPECT_EQ(all, ds.vocabulary);
    std::size_t min_popular = SIZE_MAX;
    std::size_t max_unpopular = 0;
    for (const auto& item : groups.popular) {
      min_popular = std::min(min_popular, groups.popularity_counts.at(item));
    }
    for (const auto& item : groups.unpopular) {
      max_unpopular =
          std::max(max_unpopular, groups.popularity_counts.at(item));
    }
    EXPECT_GE(min_popular, max_unpopular);
  }
  EXPECT_THROW(BuildItemGroups(ds, 1.0), UsageError);
}

TEST(GroundTruthRepeatRatio, Definition) {
  SplitDataset targets;
  targets.eval_targets["u1"] = {"a", "b"};
  RepeatSets reps{{"u1", {"a"}}};
  EXPECT_DOUBLE_EQ(GroundTruthRepeatRatio(targets, reps), 0.5);

  targets.eval_targets["u2"] = {"x"};
  reps["u2"] = {"x", "y"};
  EXPECT_DOUBLE_EQ(GroundTruthRepeatRatio(targets, reps), 0.75);
}

TEST(GroundTruthRepeatRatio, AllRepeatIsOne) {
  SplitDataset targets;
  targets.eval_targets["u1"] = {"a", "b"};
  targets.eval_targets["u2"] = {"c"};
  RepeatSets reps{{"u1", {"a", "b", "z"}}, {"u2", {"c"}}};
  EXPECT_DOUBLE_EQ(GroundTruthRepeatRatio(targets, reps), 1.0);
}

TEST(GroundTruthRepeatRatio, EmptyTargetsIsError) {
  EXPECT_THROW(GroundTruthRepeatRatio(SplitDataset{}, RepeatSets{}), DataError);
}

TEST(GroundTruthRepeatRatio, BoundedOnSyntheticSplits) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SyntheticSpec spec;
    spec.users = 30;
    spec.seed = seed;
    const auto split = SplitLeaveLast(MakeSyntheticDataset(spec), seed);
    const auto reps = BuildRepeatSets(split.train);
    const double r = GroundTruthRepeatRatio(split.validation, reps);
    EXPECT_GE(r, 0.0);
    EXPECT_LE(r, 1.0);
  }
}

TEST(Targets, SaveLoadRoundTrip) {
  TempDir dir;
  SplitDataset split;
  split.eval_targets["u1"] = {"a", "b"};
  split.eval_targets["u2"] = {"c"};
  SaveTargetsJsonl(split, dir.File("t.jsonl"));
  const auto back = LoadTargetsJsonl(dir.File("t.jsonl"), SplitLabel::kTest);
  EXPECT_EQ(back.eval_targets, split.eval_targets);
  EXPECT_EQ(back.split_label, SplitLabel::kTest);
}

TEST(Synthetic, SeededGeneratorIsDeterministic) {
  SyntheticSpec spec;
  spec.users = 20;
  EXPECT_TRUE(MakeSyntheticDataset(spec).SameData(MakeSyntheticDataset(spec)));
  spec.seed = 2;
  SyntheticSpec other;
  other.users = 20;
  EXPECT_FALSE(
      MakeSyntheticDataset(spec).SameData(MakeSyntheticDataset(other)));
}

}  // namespace
}  // namespace nbrank
