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

#include "nbrank/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <unordered_set>
#include <utility>

#include "json.hpp"
#include "nbrank/error.hpp"
#include "nbrank/random.hpp"
#include "text_io.hpp"

namespace nbrank {
namespace {

using internal::Where;

const CategoryId& UnknownCategory() {
  static const CategoryId kUnk(kUnknownCategory);
  return kUnk;
}

// Removes repeated items while keeping first occurrences in place.
std::size_t Deduplicate(Basket& basket) {
  std::unordered_set<ItemId> seen;
  seen.reserve(basket.size());
  std::size_t removed = 0;
  Basket out;
  out.reserve(basket.size());
  for (auto& item : basket) {
    if (seen.insert(item).second) {
      out.push_back(std::move(item));
    } else {
      ++removed;
    }
  }
  basket = std::move(out);
  return removed;
}

std::set<ItemId> CollectVocabulary(const std::vector<UserHistory>& users) {
  std::set<ItemId> vocab;
  for (const auto& user : users) {
    for (const auto& basket : user.baskets) {
      vocab.insert(basket.begin(), basket.end());
    }
  }
  return vocab;
}

CategoryMap RestrictCategories(const std::set<ItemId>& vocab,
                               const CategoryMap& categories) {
  CategoryMap out;
  for (const auto& item : vocab) {
    const auto it = categories.find(item);
    out.emplace_hint(out.end(), item,
                     it == categories.end() ? UnknownCategory() : it->second);
  }
  return out;
}

// Rebuilds vocabulary and category map after baskets changed.
BasketDataset Rebuild(std::vector<UserHistory> users,
                      const CategoryMap& categories) {
  BasketDataset ds;
  ds.users = std::move(users);
  ds.vocabulary = CollectVocabulary(ds.users);
  ds.categories = RestrictCategories(ds.vocabulary, categories);
  return ds;
}

// Number of baskets containing each item.
void CountPurchases(const std::vector<UserHistory>& users,
                    std::unordered_map<ItemId, std::size_t>& counts) {
  counts.clear();
  for (const auto& user : users) {
    for (const auto& basket : user.baskets) {
      for (const auto& item : basket) ++counts[item];
    }
  }
}

}  // namespace

const UserHistory* BasketDataset::FindUser(std::string_view user_id) const {
  for (const auto& user : users) {
    if (user.user_id == user_id) return &user;
  }
  return nullptr;
}

const CategoryId& BasketDataset::CategoryOf(const ItemId& item) const {
  const auto it = categories.find(item);
  return it == categories.end() ? UnknownCategory() : it->second;
}

std::size_t BasketDataset::BasketCount() const {
  std::size_t n = 0;
  for (const auto& user : users) n += user.baskets.size();
  return n;
}

bool BasketDataset::SameData(const BasketDataset& other) const {
  return users == other.users && categories == other.categories &&
         vocabulary == other.vocabulary;
}

std::string_view ToString(SplitLabel label) {
  return label == SplitLabel::kValidation ? "validation" : "test";
}

BasketDataset MakeDataset(std::vector<UserHistory> users,
                          const CategoryMap& categories) {
  std::size_t removed = 0;
  for (auto& user : users) {
    for (auto& basket : user.baskets) removed += Deduplicate(basket);
    std::erase_if(user.baskets, [](const Basket& b) { return b.empty(); });
  }
  BasketDataset ds = Rebuild(std::move(users), categories);
  ds.duplicates_removed = removed;
  return ds;
}

BasketDataset ParseBasketsJsonl(std::string_view text,
                                std::string_view source) {
  std::vector<UserHistory> users;
  std::unordered_set<UserId> seen;
  std::size_t line_number = 0;
  for (const auto line : internal::SplitLines(text)) {
    ++line_number;
    if (internal::IsBlank(line)) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(Where(source, line_number) + ": parse error: " +
                      e.what());
    }
    if (!obj.is_object() || !obj.contains("user_id") ||
        !obj["user_id"].is_string() || !obj.contains("baskets") ||
        !obj["baskets"].is_array()) {
      throw DataError(Where(source, line_number) +
                      ": expected object with string `user_id` and array "
                      "`baskets`");
    }
    UserHistory user;
    user.user_id = obj["user_id"].get<std::string>();
    if (!seen.insert(user.user_id).second) {
      throw DataError(Where(source, line_number) + ": duplicate user `" +
                      user.user_id + "`");
    }
    for (const auto& basket : obj["baskets"]) {
      if (!basket.is_array()) {
        throw DataError(Where(source, line_number) + ": basket of user `" +
                        user.user_id + "` is not an array");
      }
      Basket items;
      for (const auto& item : basket) {
        if (!item.is_string()) {
          throw DataError(Where(source, line_number) + ": item of user `" +
                          user.user_id + "` is not a string");
        }
        items.push_back(item.get<std::string>());
      }
      user.baskets.push_back(std::move(items));
    }
    users.push_back(std::move(user));
  }
  if (users.empty()) throw DataError(std::string(source) + ": no users");
  return MakeDataset(std::move(users));
}

BasketDataset ParseBasketsCsv(std::string_view text, std::string_view source) {
  std::vector<UserHistory> users;
  std::unordered_map<UserId, std::size_t> index_of;
  std::vector<std::map<long long, Basket>> staged;
  std::size_t line_number = 0;
  for (const auto line : internal::SplitLines(text)) {
    ++line_number;
    if (internal::IsBlank(line)) continue;
    const auto fields = internal::SplitFields(line, ',');
    if (line_number == 1 && fields.size() == 3 &&
        internal::Trim(fields[0]) == "user_id") {
      continue;  // header
    }
    long long basket_index = 0;
    if (fields.size() != 3 || internal::Trim(fields[0]).empty() ||
        internal::Trim(fields[2]).empty() ||
        !internal::ParseInt(fields[1], basket_index)) {
      throw DataError(Where(source, line_number) +
                      ": expected `user_id,basket_index,item_id`");
    }
    const UserId user_id(internal::Trim(fields[0]));
    auto [it, inserted] = index_of.emplace(user_id, users.size());
    if (inserted) {
      users.push_back(UserHistory{user_id, {}});
      staged.emplace_back();
    }
    staged[it->second][basket_index].emplace_back(internal::Trim(fields[2]));
  }
  if (users.empty()) throw DataError(std::string(source) + ": no users");
  for (std::size_t u = 0; u < users.size(); ++u) {
    for (auto& [index, basket] : staged[u]) {
      users[u].baskets.push_back(std::move(basket));
    }
  }
  return MakeDataset(std::move(users));
}

BasketDataset LoadBaskets(const std::string& path, BasketFormat format) {
  const std::string text = internal::ReadFile(path);
  if (internal::IsBlank(text)) throw DataError(path + ": empty file");
  return format == BasketFormat::kJsonl ? ParseBasketsJsonl(text, path)
                                        : ParseBasketsCsv(text, path);
}

CategoryMap ParseCategories(std::string_view text, std::string_view source) {
  CategoryMap categories;
  std::size_t line_number = 0;
  for (const auto line : internal::SplitLines(text)) {
    ++line_number;
    if (internal::IsBlank(line)) continue;
    const auto fields = internal::SplitFields(line, '\t');
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
      throw DataError(Where(source, line_number) +
                      ": expected `item_id<TAB>category_id`");
    }
    const auto [it, inserted] =
        categories.emplace(std::string(fields[0]), std::string(fields[1]));
    if (!inserted && it->second != fields[1]) {
      throw DataError(Where(source, line_number) + ": item `" + it->first +
                      "` has two categories");
    }
  }
  return categories;
}

CategoryMap LoadCategories(const std::string& path) {
  return ParseCategories(internal::ReadFile(path), path);
}

std::string FormatBasketsJsonl(const BasketDataset& ds) {
  std::string out;
  for (const auto& user : ds.users) {
    nlohmann::json obj;
    obj["user_id"] = user.user_id;
    obj["baskets"] = user.baskets;
    out += obj.dump();
    out += '\n';
  }
  return out;
}

void SaveBasketsJsonl(const BasketDataset& ds, const std::string& path) {
  internal::WriteFile(path, FormatBasketsJsonl(ds));
}

void SaveCategories(const CategoryMap& categories, const std::string& path) {
  std::string out;
  for (const auto& [item, category] : categories) {
    out += item;
    out += '\t';
    out += category;
    out += '\n';
  }
  internal::WriteFile(path, out);
}

BasketDataset WithCategories(BasketDataset ds, const CategoryMap& categories) {
  ds.categories = RestrictCategories(ds.vocabulary, categories);
  return ds;
}

BasketDataset FilterMinActivity(const BasketDataset& ds,
                                std::size_t min_baskets,
                                std::size_t min_item_purchases) {
  std::vector<UserHistory> users = ds.users;
  std::unordered_map<ItemId, std::size_t> counts;
  bool changed = true;
  while (changed) {
    changed = false;
    CountPurchases(users, counts);
    for (auto& user : users) {
      for (auto& basket : user.baskets) {
        const std::size_t before = basket.size();
        std::erase_if(basket, [&](const ItemId& item) {
          return counts[item] < min_item_purchases;
        });
        changed |= basket.size() != before;
      }
      const std::size_t before = user.baskets.size();
      std::erase_if(user.baskets, [](const Basket& b) { return b.empty(); });
      changed |= user.baskets.size() != before;
    }
    const std::size_t before = users.size();
    std::erase_if(users, [&](const UserHistory& user) {
      return user.baskets.size() < min_baskets;
    });
    changed |= users.size() != before;
  }
  if (users.empty()) throw DataError("dataset exhausted by filtering");
  return Rebuild(std::move(users), ds.categories);
}

BasketDataset CapHistory(const BasketDataset& ds, std::size_t max_baskets) {
  std::vector<UserHistory> users = ds.users;
  for (auto& user : users) {
    if (user.baskets.size() > max_baskets) {
      user.baskets.erase(user.baskets.begin(),
                         user.baskets.end() - static_cast<std::ptrdiff_t>(
                                                  max_baskets));
    }
  }
  std::erase_if(users,
                [](const UserHistory& user) { return user.baskets.empty(); });
  return Rebuild(std::move(users), ds.categories);
}

BasketDataset SampleUsers(const BasketDataset& ds, std::size_t count,
                          std::uint64_t seed) {
  if (count >= ds.users.size()) return ds;
  std::vector<std::size_t> order(ds.users.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  Shuffle(order, rng);
  order.resize(count);
  std::sort(order.begin(), order.end());
  std::vector<UserHistory> users;
  users.reserve(count);
  for (const std::size_t i : order) users.push_back(ds.users[i]);
  return Rebuild(std::move(users), ds.categories);
}

SplitResult SplitLeaveLast(const BasketDataset& ds, std::uint64_t seed) {
  SplitResult result;
  result.validation.split_label = SplitLabel::kValidation;
  result.test.split_label = SplitLabel::kTest;
  std::vector<UserHistory> train_users;
  train_users.reserve(ds.users.size());
  for (const auto& user : ds.users) {
    if (user.baskets.size() < 2) {
      throw DataError("user `" + user.user_id + "` has " +
                      std::to_string(user.baskets.size()) +
                      " basket(s); at least 2 are needed to hold one out "
                      "(filter first)");
    }
    UserHistory train = user;
    train.baskets.pop_back();
    train_users.push_back(std::move(train));
  }
  std::vector<std::size_t> order(ds.users.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  Shuffle(order, rng);
  const std::size_t validation_size = (order.size() + 1) / 2;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& user = ds.users[order[k]];
    auto& half = k < validation_size ? result.validation : result.test;
    half.eval_targets.emplace(user.user_id, user.baskets.back());
  }
  // The training side keeps the full vocabulary and category map so that
  // items seen only in held-out baskets still have a group and a category.
  result.train.users = std::move(train_users);
  result.train.vocabulary = ds.vocabulary;
  result.train.categories = ds.categories;
  return result;
}

RepeatSets BuildRepeatSets(const BasketDataset& train) {
  RepeatSets reps;
  for (const auto& user : train.users) {
    if (user.baskets.empty()) {
      throw DataError("user `" + user.user_id + "` has no training baskets");
    }
    auto& set = reps[user.user_id];
    for (const auto& basket : user.baskets) {
      set.insert(basket.begin(), basket.end());
    }
  }
  return reps;
}

ItemGroups BuildItemGroups(const BasketDataset& train, double top_fraction) {
  if (!(top_fraction > 0.0 && top_fraction < 1.0)) {
    throw UsageError("top_fraction must lie in (0, 1)");
  }
  ItemGroups groups;
  for (const auto& item : train.vocabulary) {
    groups.popularity_counts.emplace_hint(groups.popularity_counts.end(), item,
                                          0);
  }
  for (const auto& user : train.users) {
    for (const auto& basket : user.baskets) {
      for (const auto& item : basket) ++groups.popularity_counts[item];
    }
  }
  std::vector<std::pair<std::size_t, const ItemId*>> ranked;
  ranked.reserve(groups.popularity_counts.size());
  for (const auto& [item, count] : groups.popularity_counts) {
    ranked.emplace_back(count, &item);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  const auto n_popular = static_cast<std::size_t>(
      std::ceil(top_fraction * static_cast<double>(ranked.size())));
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    (k < n_popular ? groups.popular : groups.unpopular).insert(*ranked[k].second);
  }
  return groups;
}

double GroundTruthRepeatRatio(const SplitDataset& targets,
                              const RepeatSets& reps) {
  double total = 0.0;
  std::size_t users = 0;
  for (const auto& [user, target] : targets.eval_targets) {
    if (target.empty()) continue;
    const auto it = reps.find(user);
    std::size_t hits = 0;
    if (it != reps.end()) {
      for (const auto& item : target) hits += it->second.contains(item);
    }
    total += static_cast<double>(hits) / static_cast<double>(target.size());
    ++users;
  }
  if (users == 0) throw DataError("no evaluation targets");
  return total / static_cast<double>(users);
}

void SaveTargetsJsonl(const SplitDataset& split, const std::string& path) {
  std::string out;
  for (const auto& [user, basket] : split.eval_targets) {
    nlohmann::json obj;
    obj["user_id"] = user;
    obj["baskets"] = nlohmann::json::array({basket});
    out += obj.dump();
    out += '\n';
  }
  internal::WriteFile(path, out);
}

SplitDataset LoadTargetsJsonl(const std::string& path, SplitLabel label) {
  const BasketDataset ds = LoadBaskets(path, BasketFormat::kJsonl);
  SplitDataset split;
  split.split_label = label;
  for (const auto& user : ds.users) {
    if (user.baskets.size() != 1) {
      throw DataError(path + ": user `" + user.user_id +
                      "` must have exactly one target basket");
    }
    split.eval_targets.emplace(user.user_id, user.baskets.front());
  }
  return split;
}

BasketDataset MakeSyntheticDataset(const SyntheticSpec& spec) {
  if (spec.items == 0 || spec.categories == 0 || spec.users == 0 ||
      spec.basket_size == 0 || spec.min_baskets == 0 ||
      spec.min_baskets > spec.max_baskets) {
    throw UsageError("invalid synthetic dataset parameters");
  }
  Rng rng(spec.seed);
  auto item_name = [](std::size_t i) {
    std::string digits = std::to_string(i);
    return "i" + std::string(digits.size() < 4 ? 4 - digits.size() : 0, '0') +
           digits;
  };
  CategoryMap categories;
  for (std::size_t i = 0; i < spec.items; ++i) {
    categories.emplace(item_name(i),
                       "c" + std::to_string(UniformIndex(rng, spec.categories)));
  }
  // Zipf-like popularity over a random item permutation.
  std::vector<std::size_t> by_popularity(spec.items);
  std::iota(by_popularity.begin(), by_popularity.end(), 0);
  Shuffle(by_popularity, rng);
  std::vector<double> cumulative(spec.items);
  double acc = 0.0;
  for (std::size_t r = 0; r < spec.items; ++r) {
    acc += 1.0 / std::pow(static_cast<double>(r + 1), 0.8);
    cumulative[r] = acc;
  }
  auto draw_popular = [&]() {
    const double x = UniformUnit(rng) * acc;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), x);
    const auto rank = std::min<std::size_t>(
        static_cast<std::size_t>(it - cumulative.begin()), spec.items - 1);
    return by_popularity[rank];
  };

  std::vector<UserHistory> users;
  users.reserve(spec.users);
  for (std::size_t u = 0; u < spec.users; ++u) {
    UserHistory user;
    std::string digits = std::to_string(u);
    user.user_id =
        "u" + std::string(digits.size() < 4 ? 4 - digits.size() : 0, '0') +
        digits;
    std::vector<std::size_t> favourites;
    while (favourites.size() < std::min(spec.favourites, spec.items)) {
      const std::size_t item = draw_popular();
      if (std::find(favourites.begin(), favourites.end(), item) ==
          favourites.end()) {
        favourites.push_back(item);
      }
    }
    const std::size_t n_baskets =
        spec.min_baskets +
        UniformIndex(rng, spec.max_baskets - spec.min_baskets + 1);
    for (std::size_t b = 0; b < n_baskets; ++b) {
      const std::size_t size =
          1 + UniformIndex(rng, 2 * spec.basket_size - 1);
      Basket basket;
      for (std::size_t s = 0; s < size; ++s) {
        const std::size_t item =
            UniformUnit(rng) < spec.repeat_probability && !favourites.empty()
                ? favourites[UniformIndex(rng, favourites.size())]
                : draw_popular();
        basket.push_back(item_name(item));
      }
      user.baskets.push_back(std::move(basket));
    }
    users.push_back(std::move(user));
  }
  BasketDataset ds = MakeDataset(std::move(users), categories);
  ds.duplicates_removed = 0;
  return ds;
}

}  // namespace nbrank
