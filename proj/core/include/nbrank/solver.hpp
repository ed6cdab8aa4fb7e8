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

#ifndef NBRANK_SOLVER_HPP_
#define NBRANK_SOLVER_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "nbrank/objective.hpp"

namespace nbrank {

enum class SolverTag {
  kTopkLinear,
  kBranchAndBound,
  kBruteForce,
  kGreedyFallback,
};

std::string_view ToString(SolverTag tag);

struct SolveStats {
  std::uint64_t nodes = 0;
  std::uint64_t prunes = 0;
  double wall_seconds = 0.0;
  // Upper bound minus objective; zero for exact solvers.
  double bound_gap = 0.0;
};

struct BasketEntry {
  ItemId item;
  bool is_repeat = false;

  bool operator==(const BasketEntry&) const = default;
};

struct Selection {
  UserId user;
  std::vector<BasketEntry> items;  // rank order
  double objective = 0.0;
  SolverTag solver_tag = SolverTag::kBranchAndBound;
  bool optimal = true;
  bool short_basket = false;
  SolveStats stats;

  std::vector<ItemId> ItemIds() const;
};

// Ranked item lists per user, the common currency of the metrics module.
using BasketMap = std::map<UserId, std::vector<ItemId>>;

struct RerankedBaskets {
  std::map<UserId, Selection> baskets;
  RerankConfig config;
  std::vector<std::string> warnings;

  double TotalObjective() const;
  BasketMap ToBasketMap() const;
};

// Exact when epsilon = 0 and exposure is position-free (uniform, or alpha = 0):
// every item's contribution is then fixed, so per-pool top slots by adjusted
// value are optimal. Throws SolverError otherwise.
Selection SolveTopkLinear(const RerankProblem& problem);
bool TopkLinearApplies(const RerankProblem& problem);

// Exact depth-first branch-and-bound over candidates in basket order.
Selection SolveBranchAndBound(const RerankProblem& problem);

// Two-pool branch-and-bound for combined problems.
Selection SolveCombined(const RerankProblem& problem);

// Largest problem the enumeration oracle accepts.
inline constexpr double kBruteForceLimit = 1e7;
double FeasibleSelectionCount(const RerankProblem& problem);

// Enumerates every feasible selection. Throws SolverError when the count
// exceeds kBruteForceLimit.
Selection SolveBruteForce(const RerankProblem& problem);

// Marginal-gain greedy followed by pairwise-swap local search. Not exact:
// sets optimal = false and reports the gap to the root bound.
Selection SolveGreedy(const RerankProblem& problem);

// Tie rule shared by all exact solvers: a larger objective wins, and within
// kTieTolerance the lexicographically smaller sorted item-id sequence wins.
inline constexpr double kTieTolerance = 1e-10;
bool PreferSelection(double value, std::span<const ItemId> sorted_ids,
                     double best_value, std::span<const ItemId> best_sorted_ids);

enum class Engine {
  kAuto,  // top-k linear when it applies, branch-and-bound otherwise
  kTopkLinear,
  kBranchAndBound,
  kBruteForce,
  kGreedy,
};

std::string_view ToString(Engine engine);
Engine ParseEngine(std::string_view text);

Selection Solve(const RerankProblem& problem, Engine engine);

struct RerankOptions {
  Engine engine = Engine::kAuto;
  // 0 reads NBRANK_THREADS, falling back to 1.
  std::size_t threads = 0;
  // Record per-user failures as warnings instead of throwing.
  bool skip_errors = false;
};

// Solves every problem independently. The result does not depend on thread
// count or scheduling.
RerankedBaskets RerankAll(std::span<const RerankProblem> problems,
                          const RerankConfig& config,
                          const RerankOptions& options = {});

std::size_t ThreadsFromEnvironment();

// `user_id<TAB>rank<TAB>item_id<TAB>is_repeat`, users ascending, rank 1..K.
std::string FormatBasketsTsv(const RerankedBaskets& baskets);
void SaveBasketsTsv(const RerankedBaskets& baskets, const std::string& path);
BasketMap ParseBasketsTsv(std::string_view text,
                          std::string_view source = "<memory>");
BasketMap LoadBasketsTsv(const std::string& path);

nlohmann::json SolverStatsToJson(const RerankedBaskets& baskets);

}  // namespace nbrank

#endif  // NBRANK_SOLVER_HPP_
