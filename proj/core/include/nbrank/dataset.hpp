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

#ifndef NBRANK_DATASET_HPP_
#define NBRANK_DATASET_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace nbrank {

using UserId = std::string;
using ItemId = std::string;
using CategoryId = std::string;

// Items without an entry in the category file land here.
inline constexpr std::string_view kUnknownCategory = "UNK";

// A basket keeps the order items were read in; duplicates are removed on
// load, so it behaves as a set.
using Basket = std::vector<ItemId>;
using CategoryMap = std::map<ItemId, CategoryId>;

struct UserHistory {
  UserId user_id;
  std::vector<Basket> baskets;  // chronological

  bool operator==(const UserHistory&) const = default;
};

struct BasketDataset {
  std::vector<UserHistory> users;  // input order
  CategoryMap categories;          // covers every vocabulary item
  std::set<ItemId> vocabulary;
  // Number of duplicate items dropped from baskets while loading.
  std::size_t duplicates_removed = 0;

  const UserHistory* FindUser(std::string_view user_id) const;
  const CategoryId& CategoryOf(const ItemId& item) const;
  std::size_t BasketCount() const;

  // Data equality; ignores the load-time duplicate counter.
  bool SameData(const BasketDataset& other) const;
};

enum class BasketFormat { kJsonl, kCsv };

enum class SplitLabel { kValidation, kTest };

std::string_view ToString(SplitLabel label);

// Ground-truth next baskets for one half of the users.
struct SplitDataset {
  std::map<UserId, Basket> eval_targets;
  SplitLabel split_label = SplitLabel::kValidation;
};

struct SplitResult {
  BasketDataset train;  // every user's baskets except the last
  SplitDataset validation;
  SplitDataset test;
};

using RepeatSets = std::map<UserId, std::set<ItemId>>;

struct ItemGroups {
  std::set<ItemId> popular;    // I_1
  std::set<ItemId> unpopular;  // I_2
  std::map<ItemId, std::size_t> popularity_counts;

  bool IsPopular(const ItemId& item) const { return popular.contains(item); }
};

// Loading and saving. Every error names the file and line at fault.
BasketDataset LoadBaskets(const std::string& path, BasketFormat format);
BasketDataset ParseBasketsJsonl(std::string_view text,
                                std::string_view source = "<memory>");
BasketDataset ParseBasketsCsv(std::string_view text,
                              std::string_view source = "<memory>");
CategoryMap LoadCategories(const std::string& path);
CategoryMap ParseCategories(std::string_view text,
                            std::string_view source = "<memory>");

void SaveBasketsJsonl(const BasketDataset& ds, const std::string& path);
std::string FormatBasketsJsonl(const BasketDataset& ds);
void SaveCategories(const CategoryMap& categories, const std::string& path);

// Restricts `categories` to the vocabulary and assigns kUnknownCategory to
// vocabulary items it does not mention.
BasketDataset WithCategories(BasketDataset ds, const CategoryMap& categories);

// Builds a dataset from raw user histories: drops empty baskets, removes
// duplicates within a basket, and derives the vocabulary.
BasketDataset MakeDataset(std::vector<UserHistory> users,
                          const CategoryMap& categories = {});

// Removes items bought fewer than `min_item_purchases` times and users with
// fewer than `min_baskets` baskets, repeating until both hold at once.
BasketDataset FilterMinActivity(const BasketDataset& ds,
                                std::size_t min_baskets = 3,
                                std::size_t min_item_purchases = 5);

// Keeps each user's `max_baskets` most recent baskets.
BasketDataset CapHistory(const BasketDataset& ds, std::size_t max_baskets = 50);

// Uniformly samples `count` users (all users if count >= size).
BasketDataset SampleUsers(const BasketDataset& ds, std::size_t count,
                          std::uint64_t seed);

// Holds out each user's last basket; users are split 50/50 into validation
// and test, with validation receiving the extra user when the count is odd.
SplitResult SplitLeaveLast(const BasketDataset& ds, std::uint64_t seed);

RepeatSets BuildRepeatSets(const BasketDataset& train);

// Items ranked by training purchase count (descending, ties by id ascending);
// the first ceil(top_fraction * |vocabulary|) are popular.
ItemGroups BuildItemGroups(const BasketDataset& train,
                           double top_fraction = 0.2);

// Mean over users of the fraction of target items found in the user's
// repeat set.
double GroundTruthRepeatRatio(const SplitDataset& targets,
                              const RepeatSets& reps);

// Target file helpers: one JSONL line per user with a single basket.
void SaveTargetsJsonl(const SplitDataset& split, const std::string& path);
SplitDataset LoadTargetsJsonl(const std::string& path, SplitLabel label);

// Seeded generator for desk-scale experiments. Each user has a private pool
// of favourite items that they rebuy with probability `repeat_probability`
// per slot; other slots draw from a Zipf-like global popularity curve.
struct SyntheticSpec {
  std::size_t users = 100;
  std::size_t items = 300;
  std::size_t categories = 12;
  std::size_t min_baskets = 4;
  std::size_t max_baskets = 10;
  std::size_t basket_size = 8;
  std::size_t favourites = 15;
  double repeat_probability = 0.55;
  std::uint64_t seed = 1;
};

BasketDataset MakeSyntheticDataset(const SyntheticSpec& spec);

}  // namespace nbrank

#endif  // NBRANK_DATASET_HPP_
