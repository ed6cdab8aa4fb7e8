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

#ifndef NBRANK_SCORER_HPP_
#define NBRANK_SCORER_HPP_

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "nbrank/dataset.hpp"

namespace nbrank {

struct ScoredItem {
  ItemId item;
  double score = 0.0;

  bool operator==(const ScoredItem&) const = default;
};

// Sorted by score descending, ties by item id ascending.
using ScoreList = std::vector<ScoredItem>;
using ScoreTable = std::map<UserId, ScoreList>;

enum class CandidateKind { kUnified, kCombined };

std::string_view ToString(CandidateKind kind);

// Per-user top-N candidates. A unified set fills `unified`; a combined set
// fills `repeat_list` (items the user bought before) and `explore_list`
// (items the user never bought).
struct CandidateSet {
  CandidateKind kind = CandidateKind::kUnified;
  std::size_t n = 100;
  ScoreTable unified;
  ScoreTable repeat_list;
  ScoreTable explore_list;
  // Expected users that have no scores at all.
  std::vector<UserId> missing_users;

  // Users with at least one candidate, ascending.
  std::vector<UserId> Users() const;
};

// Orders by score descending (ties by id) and keeps the first n entries.
void SortAndTruncate(ScoreList& list, std::size_t n);
bool IsCanonical(const ScoreList& list);

// Parses `user_id<TAB>item_id<TAB>score` rows. Non-finite scores and repeated
// (user, item) rows are errors.
ScoreTable ParseScoresTsv(std::string_view text, std::size_t n,
                          std::string_view source = "<memory>");
ScoreTable LoadScoresTsv(const std::string& path, std::size_t n);
std::string FormatScoresTsv(const ScoreTable& table);
void SaveScoresTsv(const ScoreTable& table, const std::string& path);

CandidateSet ImportUnifiedScores(const std::string& path, std::size_t n);
CandidateSet ImportCombinedScores(const std::string& repeat_path,
                                  const std::string& explore_path,
                                  std::size_t n);

// Records which of `expected` have no candidates.
void FlagMissingUsers(CandidateSet& cands, const std::vector<UserId>& expected);

// Checks that repeat lists hold only repeat items, explore lists only explore
// items, and the two never overlap. Throws DataError naming the offender.
void ValidateCombined(const CandidateSet& cands, const RepeatSets& reps);

// score = (baskets of u containing i) / (baskets of u), over RepeatSets(u).
CandidateSet ScoreRepeatTopFreq(const BasketDataset& train,
                                const RepeatSets& reps, std::size_t n);

// score = (global purchase count of i) / (max global count), over items the
// user has not bought.
CandidateSet ScoreExplorePopularity(const BasketDataset& train,
                                    const RepeatSets& reps, std::size_t n);

// Joins a repeat-side and an explore-side set into one combined set.
CandidateSet MakeCombined(const CandidateSet& repeat_side,
                          const CandidateSet& explore_side);

// Unified score: mix * repeat score for repeat items, (1 - mix) * explore
// score for explore items; merged, re-sorted, and truncated to N.
CandidateSet MakeUnified(const CandidateSet& repeat_side,
                         const CandidateSet& explore_side, double mix);

}  // namespace nbrank

#endif  // NBRANK_SCORER_HPP_
