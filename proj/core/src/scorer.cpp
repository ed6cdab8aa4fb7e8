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

#include "nbrank/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "nbrank/error.hpp"
#include "text_io.hpp"

namespace nbrank {
namespace {

bool Before(const ScoredItem& a, const ScoredItem& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.item < b.item;
}

void CollectUsers(const ScoreTable& table, std::set<UserId>& out) {
  for (const auto& [user, list] : table) {
    if (!list.empty()) out.insert(user);
  }
}

}  // namespace

std::string_view ToString(CandidateKind kind) {
  return kind == CandidateKind::kUnified ? "unified" : "combined";
}

std::vector<UserId> CandidateSet::Users() const {
  std::set<UserId> users;
  CollectUsers(unified, users);
  CollectUsers(repeat_list, users);
  CollectUsers(explore_list, users);
  return {users.begin(), users.end()};
}

void SortAndTruncate(ScoreList& list, std::size_t n) {
  std::sort(list.begin(), list.end(), Before);
  if (list.size() > n) list.resize(n);
}

bool IsCanonical(const ScoreList& list) {
  for (std::size_t i = 1; i < list.size(); ++i) {
    if (!Before(list[i - 1], list[i])) return false;
  }
  return true;
}

ScoreTable ParseScoresTsv(std::string_view text, std::size_t n,
                          std::string_view source) {
  ScoreTable table;
  std::unordered_map<UserId, std::unordered_set<ItemId>> seen;
  std::size_t line_number = 0;
  for (const auto line : internal::SplitLines(text)) {
    ++line_number;
    if (internal::IsBlank(line)) continue;
    const auto fields = internal::SplitFields(line, '\t');
    double score = 0.0;
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty() ||
        !internal::ParseDouble(fields[2], score)) {
      throw DataError(internal::Where(source, line_number) +
                      ": expected `user_id<TAB>item_id<TAB>score`");
    }
    const UserId user(fields[0]);
    const ItemId item(fields[1]);
    if (!std::isfinite(score)) {
      throw DataError(internal::Where(source, line_number) +
                      ": non-finite score for user `" + user + "`, item `" +
                      item + "`");
    }
    if (!seen[user].insert(item).second) {
      throw DataError(internal::Where(source, line_number) +
                      ": duplicate row for user `" + user + "`, item `" +
                      item + "`");
    }
    table[user].push_back({item, score});
  }
  for (auto& [user, list] : table) SortAndTruncate(list, n);
  return table;
}

ScoreTable LoadScoresTsv(const std::string& path, std::size_t n) {
  return ParseScoresTsv(internal::ReadFile(path), n, path);
}

std::string FormatScoresTsv(const ScoreTable& table) {
  std::string out;
  for (const auto& [user, list] : table) {
    for (const auto& entry : list) {
      out += user;
      out += '\t';
      out += entry.item;
      out += '\t';
      out += internal::FormatDouble(entry.score);
      out += '\n';
    }
  }
  return out;
}

void SaveScoresTsv(const ScoreTable& table, const std::string& path) {
  internal::WriteFile(path, FormatScoresTsv(table));
}

CandidateSet ImportUnifiedScores(const std::string& path, std::size_t n) {
  CandidateSet cands;
  cands.kind = CandidateKind::kUnified;
  cands.n = n;
  cands.unified = LoadScoresTsv(path, n);
  return cands;
}

CandidateSet ImportCombinedScores(const std::string& repeat_path,
                                  const std::string& explore_path,
                                  std::size_t n) {
  CandidateSet cands;
  cands.kind = CandidateKind::kCombined;
  cands.n = n;
  cands.repeat_list = LoadScoresTsv(repeat_path, n);
  cands.explore_list = LoadScoresTsv(explore_path, n);
  return cands;
}

void FlagMissingUsers(CandidateSet& cands, const std::vector<UserId>& expected) {
  const std::vector<UserId> present = cands.Users();
  cands.missing_users.clear();
  for (const auto& user : expected) {
    if (!std::binary_search(present.begin(), present.end(), user)) {
      cands.missing_users.push_back(user);
    }
  }
}

void ValidateCombined(const CandidateSet& cands, const RepeatSets& reps) {
  static const std::set<ItemId> kEmpty;
  auto repeat_set_of = [&](const UserId& user) -> const std::set<ItemId>& {
    const auto it = reps.find(user);
    return it == reps.end() ? kEmpty : it->second;
  };
  for (const auto& [user, list] : cands.repeat_list) {
    const auto& rep = repeat_set_of(user);
    for (const auto& entry : list) {
      if (!rep.contains(entry.item)) {
        throw DataError("repeat candidate `" + entry.item + "` of user `" +
                        user + "` was never bought by the user");
      }
    }
  }
  for (const auto& [user, list] : cands.explore_list) {
    const auto& rep = repeat_set_of(user);
    for (const auto& entry : list) {
      if (rep.contains(entry.item)) {
        throw DataError("explore candidate `" + entry.item + "` of user `" +
                        user + "` is in the user's repeat set");
      }
    }
  }
}

CandidateSet ScoreRepeatTopFreq(const BasketDataset& train,
                                const RepeatSets& reps, std::size_t n) {
  CandidateSet cands;
  cands.kind = CandidateKind::kCombined;
  cands.n = n;
  for (const auto& user : train.users) {
    if (user.baskets.empty()) continue;
    std::unordered_map<ItemId, std::size_t> counts;
    for (const auto& basket : user.baskets) {
      for (const auto& item : basket) ++counts[item];
    }
    const auto rep = reps.find(user.user_id);
    ScoreList list;
    const double denom = static_cast<double>(user.baskets.size());
    for (const auto& [item, count] : counts) {
      if (rep != reps.end() && !rep->second.contains(item)) continue;
      list.push_back({item, static_cast<double>(count) / denom});
    }
    SortAndTruncate(list, n);
    cands.repeat_list.emplace(user.user_id, std::move(list));
  }
  return cands;
}

CandidateSet ScoreExplorePopularity(const BasketDataset& train,
                                    const RepeatSets& reps, std::size_t n) {
  CandidateSet cands;
  cands.kind = CandidateKind::kCombined;
  cands.n = n;
  std::unordered_map<ItemId, std::size_t> counts;
  for (const auto& item : train.vocabulary) counts.emplace(item, 0);
  for (const auto& user : train.users) {
    for (const auto& basket : user.baskets) {
      for (const auto& item : basket) ++counts[item];
    }
  }
  std::size_t max_count = 0;
  for (const auto& [item, count] : counts) max_count = std::max(max_count, count);
  ScoreList global;
  global.reserve(counts.size());
  for (const auto& [item, count] : counts) {
    global.push_back({item, max_count == 0 ? 0.0
                                           : static_cast<double>(count) /
                                                 static_cast<double>(max_count)});
  }
  SortAndTruncate(global, global.size());
  for (const auto& user : train.users) {
    const auto rep = reps.find(user.user_id);
    ScoreList list;
    for (const auto& entry : global) {
      if (list.size() >= n) break;
      if (rep != reps.end() && rep->second.contains(entry.item)) continue;
      list.push_back(entry);
    }
    cands.explore_list.emplace(user.user_id, std::move(list));
  }
  return cands;
}

CandidateSet MakeCombined(const CandidateSet& repeat_side,
                          const CandidateSet& explore_side) {
  CandidateSet cands;
  cands.kind = CandidateKind::kCombined;
  cands.n = std::max(repeat_side.n, explore_side.n);
  cands.repeat_list = repeat_side.repeat_list;
  cands.explore_list = explore_side.explore_list;
  return cands;
}

CandidateSet MakeUnified(const CandidateSet& repeat_side,
                         const CandidateSet& explore_side, double mix) {
  if (!(mix >= 0.0 && mix <= 1.0)) {
    throw UsageError("mix must lie in [0, 1]");
  }
  CandidateSet cands;
  cands.kind = CandidateKind::kUnified;
  cands.n = std::max(repeat_side.n, explore_side.n);
  std::set<UserId> users;
  CollectUsers(repeat_side.repeat_list, users);
  CollectUsers(explore_side.explore_list, users);
  for (const auto& user : users) {
    ScoreList merged;
    if (const auto it = repeat_side.repeat_list.find(user);
        it != repeat_side.repeat_list.end()) {
      for (const auto& entry : it->second) {
        merged.push_back({entry.item, mix * entry.score});
      }
    }
    if (const auto it = explore_side.explore_list.find(user);
        it != explore_side.explore_list.end()) {
      for (const auto& entry : it->second) {
        merged.push_back({entry.item, (1.0 - mix) * entry.score});
      }
    }
    SortAndTruncate(merged, cands.n);
    cands.unified.emplace(user, std::move(merged));
  }
  return cands;
}

}  // namespace nbrank
