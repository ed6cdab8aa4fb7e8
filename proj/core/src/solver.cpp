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

#include "nbrank/solver.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>
#include <thread>

#include "nbrank/error.hpp"
#include "text_io.hpp"

namespace nbrank {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double TieScale(double a, double b) {
  return kTieTolerance * std::max({1.0, std::abs(a), std::abs(b)});
}

// Problem data flattened for the search routines. Pool 0 holds every item of
// a unified problem, or the repeat candidates of a combined one; pool 1 holds
// explore candidates and always follows pool 0 in candidate order.
struct Prepared {
  explicit Prepared(const RerankProblem& problem);

  const RerankProblem& problem;
  std::size_t n = 0;
  std::size_t total = 0;  // slots to fill
  std::array<std::size_t, 2> required{0, 0};
  std::array<std::size_t, 2> offset{0, 0};  // position offset of each pool
  std::vector<int> pool;
  std::vector<int> category;
  std::size_t category_count = 0;
  // Position-free part of each item's contribution.
  std::vector<double> linear;
  std::vector<double> coef;  // alpha * fairness_coef
  double bonus = 0.0;        // epsilon / K per newly covered category
  bool position_free = true;
  std::vector<double> exposure;  // exposure[p] for p in 1..total
  // suffix[q][j]: items of pool q with index >= j.
  std::array<std::vector<std::size_t>, 2> suffix;
  // Nearest earlier candidate that is interchangeable with this one and has
  // a smaller id, or -1. Including an item while its twin is excluded can
  // never beat the swapped selection under the tie rule.
  std::vector<std::ptrdiff_t> twin;
};

Prepared::Prepared(const RerankProblem& p) : problem(p), n(p.items.size()) {
  const ObjectiveWeights& w = p.weights;
  const double k = static_cast<double>(p.k);
  total = p.SlotsToFill();
  if (p.combined) {
    required = {p.repeat_slots, p.explore_slots};
    offset = {0, p.repeat_slots};
  } else {
    required = {total, 0};
  }
  pool.resize(n);
  category.resize(n);
  linear.resize(n);
  coef.resize(n);
  bool seen_explore = false;
  for (std::size_t i = 0; i < n; ++i) {
    const Candidate& c = p.items[i];
    pool[i] = p.combined && !c.is_repeat ? 1 : 0;
    if (pool[i] == 1) {
      seen_explore = true;
    } else if (seen_explore) {
      throw SolverError("user `" + p.user +
                        "`: repeat candidates must precede explore candidates");
    }
    category[i] = c.category_index;
    linear[i] = w.relevance_scale * c.relevance +
                (c.is_repeat ? w.repeat_weight / k : 0.0);
    coef[i] = w.alpha * c.fairness_coef;
  }
  category_count = p.CategoryCount();
  bonus = w.epsilon / k;
  position_free =
      w.alpha == 0.0 || p.exposure.kind == ExposureKind::kUniform;
  exposure.assign(total + 2, 0.0);
  for (std::size_t pos = 1; pos <= total + 1; ++pos) {
    exposure[pos] = p.exposure.Weight(pos);
  }
  for (int q = 0; q < 2; ++q) {
    suffix[q].assign(n + 1, 0);
    for (std::size_t j = n; j-- > 0;) {
      suffix[q][j] = suffix[q][j + 1] + (pool[j] == q ? 1 : 0);
    }
    if (suffix[q][0] < required[q]) {
      throw SolverError("user `" + p.user + "`: infeasible slot constraints");
    }
  }
  twin.assign(n, -1);
  for (std::size_t j = 1; j < n; ++j) {
    for (std::size_t i = j; i-- > 0;) {
      const Candidate& a = p.items[i];
      const Candidate& b = p.items[j];
      if (pool[i] != pool[j] || a.relevance != b.relevance) break;
      const bool same = a.is_repeat == b.is_repeat &&
                        (bonus == 0.0 || a.category_index == b.category_index) &&
                        (w.alpha == 0.0 || a.fairness_coef == b.fairness_coef);
      if (same && a.item < b.item) {
        twin[j] = static_cast<std::ptrdiff_t>(i);
        break;
      }
      if (!position_free) break;  // only adjacent items may swap
    }
  }
}

std::vector<ItemId> SortedIds(const RerankProblem& problem,
                              std::span<const std::size_t> indices) {
  std::vector<ItemId> ids;
  ids.reserve(indices.size());
  for (const std::size_t i : indices) ids.push_back(problem.items[i].item);
  std::sort(ids.begin(), ids.end());
  return ids;
}

// Best selection seen so far under the shared tie rule.
struct Incumbent {
  bool has_value = false;
  double value = kNegInf;
  std::vector<std::size_t> indices;
  std::vector<ItemId> sorted_ids;

  void Offer(const RerankProblem& problem,
             std::span<const std::size_t> candidate) {
    const double v = ObjectiveValueAt(problem, candidate);
    if (has_value) {
      if (v < value - TieScale(v, value)) return;
      std::vector<ItemId> ids = SortedIds(problem, candidate);
      if (!PreferSelection(v, ids, value, sorted_ids)) return;
      sorted_ids = std::move(ids);
    } else {
      sorted_ids = SortedIds(problem, candidate);
    }
    has_value = true;
    value = v;
    indices.assign(candidate.begin(), candidate.end());
  }
};

Selection MakeSelection(const RerankProblem& problem,
                        std::span<const std::size_t> indices, SolverTag tag) {
  Selection s;
  s.user = problem.user;
  s.solver_tag = tag;
  s.short_basket = problem.short_basket;
  s.items.reserve(indices.size());
  for (const std::size_t i : indices) {
    s.items.push_back({problem.items[i].item, problem.items[i].is_repeat});
  }
  s.objective = ObjectiveValueAt(problem, indices);
  return s;
}

// Admissible bound on what the unfilled slots can still add, given the items
// from `start` on. Each item is credited its best exposure over the positions
// its pool can still occupy; every uncovered category credits the bonus once.
class BoundCalculator {
 public:
  explicit BoundCalculator(const Prepared& prep)
      : prep_(prep),
        best_in_category_(prep.category_count, -1),
        category_values_(prep.category_count) {}

  double Quick(std::size_t start, const std::array<std::size_t, 2>& count,
               std::span<const int> covered) {
    double bound = 0.0;
    for (int q = 0; q < 2; ++q) {
      const std::size_t r = prep_.required[q] - count[q];
      if (r == 0) continue;
      Collect(start, q, count[q]);
      touched_.clear();
      for (std::size_t v = 0; v < values_.size(); ++v) {
        const int c = prep_.category[items_[v]];
        if (covered[static_cast<std::size_t>(c)] || prep_.bonus == 0.0) {
          continue;
        }
        auto& best = best_in_category_[static_cast<std::size_t>(c)];
        if (best < 0) {
          touched_.push_back(c);
          best = static_cast<int>(v);
        } else if (values_[v] > values_[static_cast<std::size_t>(best)]) {
          best = static_cast<int>(v);
        }
      }
      for (const int c : touched_) {
        auto& best = best_in_category_[static_cast<std::size_t>(c)];
        values_[static_cast<std::size_t>(best)] += prep_.bonus;
        best = -1;
      }
      bound += TopSum(r);
    }
    return bound;
  }

  // Exact optimum of the relaxation that keeps category coverage but credits
  // every item its best exposure: a knapsack over categories by item count.
  double Coverage(std::size_t start, const std::array<std::size_t, 2>& count,
                  std::span<const int> covered) {
    double bound = 0.0;
    for (int q = 0; q < 2; ++q) {
      const std::size_t r = prep_.required[q] - count[q];
      if (r == 0) continue;
      Collect(start, q, count[q]);
      touched_.clear();
      for (std::size_t v = 0; v < values_.size(); ++v) {
        const auto c = static_cast<std::size_t>(prep_.category[items_[v]]);
        if (category_values_[c].empty()) touched_.push_back(static_cast<int>(c));
        category_values_[c].push_back(values_[v]);
      }
      dp_.assign(r + 1, kNegInf);
      dp_[0] = 0.0;
      std::size_t reach = 0;
      for (const int c : touched_) {
        auto& vals = category_values_[static_cast<std::size_t>(c)];
        std::sort(vals.begin(), vals.end(), std::greater<>());
        const double b =
            covered[static_cast<std::size_t>(c)] ? 0.0 : prep_.bonus;
        const std::size_t take = std::min(vals.size(), r);
        reach = std::min(r, reach + take);
        for (std::size_t t = reach; t >= 1; --t) {
          double prefix = b;
          for (std::size_t s = 1; s <= std::min(t, take); ++s) {
            prefix += vals[s - 1];
            if (dp_[t - s] == kNegInf) continue;
            dp_[t] = std::max(dp_[t], dp_[t - s] + prefix);
          }
        }
        vals.clear();
      }
      bound += dp_[r];
    }
    return bound;
  }

 private:
  // Gathers best-case values of the pool-q items from `start` on.
  void Collect(std::size_t start, int q, std::size_t count_q) {
    values_.clear();
    items_.clear();
    const std::size_t first = prep_.offset[q] + count_q + 1;
    const std::size_t last = prep_.offset[q] + prep_.required[q];
    const double e_first = prep_.exposure[first];
    const double e_last = prep_.exposure[last];
    for (std::size_t i = start; i < prep_.n; ++i) {
      if (prep_.pool[i] != q) continue;
      const double c = prep_.coef[i];
      // The fairness term is -coef * e(p); e is non-increasing in p.
      const double fair = c > 0.0 ? -c * e_last : -c * e_first;
      values_.push_back(prep_.linear[i] + fair);
      items_.push_back(i);
    }
  }

  double TopSum(std::size_t r) {
    if (r < values_.size()) {
      std::nth_element(values_.begin(),
                       values_.begin() + static_cast<std::ptrdiff_t>(r),
                       values_.end(), std::greater<>());
    }
    double sum = 0.0;
    for (std::size_t t = 0; t < r && t < values_.size(); ++t) sum += values_[t];
    return sum;
  }

  const Prepared& prep_;
  std::vector<double> values_;
  std::vector<std::size_t> items_;
  std::vector<int> best_in_category_;
  std::vector<int> touched_;
  std::vector<std::vector<double>> category_values_;
  std::vector<double> dp_;
};

// Marginal-gain greedy plus first-improvement pairwise swaps within a pool.
std::vector<std::size_t> GreedySelect(const Prepared& prep) {
  const RerankProblem& p = prep.problem;
  std::vector<std::size_t> chosen;
  std::vector<char> in(prep.n, 0);
  std::array<std::size_t, 2> count{0, 0};
  std::vector<std::size_t> trial;
  while (chosen.size() < prep.total) {
    std::size_t best = prep.n;
    double best_value = kNegInf;
    for (std::size_t i = 0; i < prep.n; ++i) {
      const int q = prep.pool[i];
      if (in[i] || count[q] >= prep.required[q]) continue;
      trial = chosen;
      trial.insert(std::upper_bound(trial.begin(), trial.end(), i), i);
      const double v = ObjectiveValueAt(p, trial);
      if (v > best_value) {
        best_value = v;
        best = i;
      }
    }
    in[best] = 1;
    ++count[prep.pool[best]];
    chosen.insert(std::upper_bound(chosen.begin(), chosen.end(), best), best);
  }
  double current = ObjectiveValueAt(p, chosen);
  bool improved = true;
  while (improved) {
    improved = false;
    for (std::size_t a = 0; a < chosen.size() && !improved; ++a) {
      for (std::size_t i = 0; i < prep.n && !improved; ++i) {
        if (in[i] || prep.pool[i] != prep.pool[chosen[a]]) continue;
        trial = chosen;
        trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(a));
        trial.insert(std::upper_bound(trial.begin(), trial.end(), i), i);
        const double v = ObjectiveValueAt(p, trial);
        if (v > current + TieScale(v, current)) {
          in[chosen[a]] = 0;
          in[i] = 1;
          chosen = trial;
          current = v;
          improved = true;
        }
      }
    }
  }
  return chosen;
}

class BranchAndBound {
 public:
  explicit BranchAndBound(const Prepared& prep)
      : prep_(prep),
        bounds_(prep),
        covered_(prep.category_count, 0),
        included_(prep.n, 0) {}

  Selection Run() {
    const auto started = std::chrono::steady_clock::now();
    incumbent_.Offer(prep_.problem, GreedySelect(prep_));
    chosen_.reserve(prep_.total);
    Visit(0, 0.0);
    Selection s = MakeSelection(prep_.problem, incumbent_.indices,
                                SolverTag::kBranchAndBound);
    s.optimal = true;
    s.stats.nodes = nodes_;
    s.stats.prunes = prunes_;
    s.stats.wall_seconds = std::chrono::duration<double>(
                               std::chrono::steady_clock::now() - started)
                               .count();
    return s;
  }

 private:
  bool Prunable(std::size_t j, double partial) {
    const double floor =
        incumbent_.value - TieScale(incumbent_.value, incumbent_.value);
    if (partial + bounds_.Quick(j, count_, covered_) < floor) return true;
    return prep_.bonus > 0.0 &&
           partial + bounds_.Coverage(j, count_, covered_) < floor;
  }

  // `partial` is the exact objective of the items chosen so far, which hold
  // positions 1..chosen_.size().
  void Visit(std::size_t j, double partial) {
    ++nodes_;
    if (chosen_.size() == prep_.total) {
      incumbent_.Offer(prep_.problem, chosen_);
      return;
    }
    if (j >= prep_.n) return;
    if (Prunable(j, partial)) {
      ++prunes_;
      return;
    }
    const int q = prep_.pool[j];
    const std::size_t need = prep_.required[q] - count_[q];
    const std::ptrdiff_t twin = prep_.twin[j];
    if (need > 0 && (twin < 0 || included_[static_cast<std::size_t>(twin)])) {
      const auto c = static_cast<std::size_t>(prep_.category[j]);
      const std::size_t position = chosen_.size() + 1;
      double gain = prep_.linear[j] - prep_.coef[j] * prep_.exposure[position];
      if (covered_[c] == 0) gain += prep_.bonus;
      ++covered_[c];
      ++count_[q];
      included_[j] = 1;
      chosen_.push_back(j);
      Visit(j + 1, partial + gain);
      chosen_.pop_back();
      included_[j] = 0;
      --count_[q];
      --covered_[c];
    }
    if (prep_.suffix[q][j + 1] >= need) Visit(j + 1, partial);
  }

  const Prepared& prep_;
  BoundCalculator bounds_;
  Incumbent incumbent_;
  std::vector<int> covered_;
  std::vector<char> included_;
  std::vector<std::size_t> chosen_;
  std::array<std::size_t, 2> count_{0, 0};
  std::uint64_t nodes_ = 0;
  std::uint64_t prunes_ = 0;
};

double Choose(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  double result = 1.0;
  for (std::size_t i = 1; i <= k; ++i) {
    result = result * static_cast<double>(n - k + i) / static_cast<double>(i);
  }
  return std::round(result);
}

void Enumerate(const Prepared& prep, std::size_t j,
               std::array<std::size_t, 2>& count,
               std::vector<std::size_t>& chosen, Incumbent& best,
               std::uint64_t& nodes) {
  ++nodes;
  if (chosen.size() == prep.total) {
    best.Offer(prep.problem, chosen);
    return;
  }
  if (j >= prep.n) return;
  const int q = prep.pool[j];
  const std::size_t need = prep.required[q] - count[q];
  if (need > 0) {
    ++count[q];
    chosen.push_back(j);
    Enumerate(prep, j + 1, count, chosen, best, nodes);
    chosen.pop_back();
    --count[q];
  }
  if (prep.suffix[q][j + 1] >= need) {
    Enumerate(prep, j + 1, count, chosen, best, nodes);
  }
}

}  // namespace

std::string_view ToString(SolverTag tag) {
  switch (tag) {
    case SolverTag::kTopkLinear:
      return "topk_linear";
    case SolverTag::kBranchAndBound:
      return "branch_and_bound";
    case SolverTag::kBruteForce:
      return "brute_force";
    case SolverTag::kGreedyFallback:
      return "greedy_fallback";
  }
  return "branch_and_bound";
}

std::vector<ItemId> Selection::ItemIds() const {
  std::vector<ItemId> ids;
  ids.reserve(items.size());
  for (const auto& entry : items) ids.push_back(entry.item);
  return ids;
}

double RerankedBaskets::TotalObjective() const {
  double total = 0.0;
  for (const auto& [user, selection] : baskets) total += selection.objective;
  return total;
}

BasketMap RerankedBaskets::ToBasketMap() const {
  BasketMap out;
  for (const auto& [user, selection] : baskets) {
    out.emplace_hint(out.end(), user, selection.ItemIds());
  }
  return out;
}

bool PreferSelection(double value, std::span<const ItemId> sorted_ids,
                     double best_value,
                     std::span<const ItemId> best_sorted_ids) {
  const double tol = TieScale(value, best_value);
  if (value > best_value + tol) return true;
  if (value < best_value - tol) return false;
  return std::lexicographical_compare(sorted_ids.begin(), sorted_ids.end(),
                                      best_sorted_ids.begin(),
                                      best_sorted_ids.end());
}

bool TopkLinearApplies(const RerankProblem& problem) {
  return problem.weights.epsilon == 0.0 &&
         (problem.weights.alpha == 0.0 ||
          problem.exposure.kind == ExposureKind::kUniform);
}

Selection SolveTopkLinear(const RerankProblem& problem) {
  if (!TopkLinearApplies(problem)) {
    throw SolverError("user `" + problem.user +
                      "`: top-k linear path needs epsilon = 0 and a "
                      "position-free fairness term");
  }
  const auto started = std::chrono::steady_clock::now();
  const Prepared prep(problem);
  std::vector<std::size_t> chosen;
  for (int q = 0; q < 2; ++q) {
    struct Scored {
      double value;
      std::size_t index;
    };
    std::vector<Scored> scored;
    for (std::size_t i = 0; i < prep.n; ++i) {
      if (prep.pool[i] != q) continue;
      scored.push_back({prep.linear[i] - prep.coef[i], i});
    }
    std::sort(scored.begin(), scored.end(), [](const Scored& a,
                                               const Scored& b) {
      return a.value > b.value;
    });
    // Values within rounding noise of each other count as ties and are
    // reordered by id, matching the exact solvers' tie rule.
    for (std::size_t lo = 0; lo < scored.size();) {
      std::size_t hi = lo + 1;
      while (hi < scored.size() &&
             scored[hi - 1].value - scored[hi].value <=
                 TieScale(scored[hi - 1].value, scored[hi].value)) {
        ++hi;
      }
      std::sort(scored.begin() + static_cast<std::ptrdiff_t>(lo),
                scored.begin() + static_cast<std::ptrdiff_t>(hi),
                [&](const Scored& a, const Scored& b) {
                  return problem.items[a.index].item <
                         problem.items[b.index].item;
                });
      lo = hi;
    }
    for (std::size_t t = 0; t < prep.required[q]; ++t) {
      chosen.push_back(scored[t].index);
    }
  }
  std::sort(chosen.begin(), chosen.end());
  Selection s = MakeSelection(problem, chosen, SolverTag::kTopkLinear);
  s.stats.wall_seconds = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - started)
                             .count();
  return s;
}

Selection SolveBranchAndBound(const RerankProblem& problem) {
  const Prepared prep(problem);
  return BranchAndBound(prep).Run();
}

Selection SolveCombined(const RerankProblem& problem) {
  if (!problem.combined) {
    throw SolverError("user `" + problem.user +
                      "`: combined solver needs repeat/explore slots");
  }
  return SolveBranchAndBound(problem);
}

double FeasibleSelectionCount(const RerankProblem& problem) {
  if (!problem.combined) {
    return Choose(problem.items.size(), problem.SlotsToFill());
  }
  std::size_t repeats = 0;
  for (const auto& c : problem.items) repeats += c.is_repeat;
  return Choose(repeats, problem.repeat_slots) *
         Choose(problem.items.size() - repeats, problem.explore_slots);
}

Selection SolveBruteForce(const RerankProblem& problem) {
  const double count = FeasibleSelectionCount(problem);
  if (count > kBruteForceLimit) {
    throw SolverError("user `" + problem.user + "`: " +
                      internal::FormatDouble(count) +
                      " feasible selections exceed the brute-force limit; "
                      "use branch_and_bound");
  }
  const auto started = std::chrono::steady_clock::now();
  const Prepared prep(problem);
  Incumbent best;
  std::vector<std::size_t> chosen;
  std::array<std::size_t, 2> counts{0, 0};
  std::uint64_t nodes = 0;
  Enumerate(prep, 0, counts, chosen, best, nodes);
  Selection s = MakeSelection(problem, best.indices, SolverTag::kBruteForce);
  s.stats.nodes = nodes;
  s.stats.wall_seconds = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - started)
                             .count();
  return s;
}

Selection SolveGreedy(const RerankProblem& problem) {
  const auto started = std::chrono::steady_clock::now();
  const Prepared prep(problem);
  const std::vector<std::size_t> chosen = GreedySelect(prep);
  Selection s = MakeSelection(problem, chosen, SolverTag::kGreedyFallback);
  s.optimal = false;
  BoundCalculator bounds(prep);
  const std::vector<int> none(prep.category_count, 0);
  double root = bounds.Quick(0, {0, 0}, none);
  if (prep.bonus > 0.0) root = std::min(root, bounds.Coverage(0, {0, 0}, none));
  s.stats.bound_gap = std::max(0.0, root - s.objective);
  s.stats.wall_seconds = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - started)
                             .count();
  return s;
}

std::string_view ToString(Engine engine) {
  switch (engine) {
    case Engine::kAuto:
      return "auto";
    case Engine::kTopkLinear:
      return "topk";
    case Engine::kBranchAndBound:
      return "bnb";
    case Engine::kBruteForce:
      return "bruteforce";
    case Engine::kGreedy:
      return "greedy";
  }
  return "auto";
}

Engine ParseEngine(std::string_view text) {
  if (text == "auto") return Engine::kAuto;
  if (text == "topk" || text == "topk_linear") return Engine::kTopkLinear;
  if (text == "bnb" || text == "branch_and_bound") {
    return Engine::kBranchAndBound;
  }
  if (text == "bruteforce" || text == "brute_force") return Engine::kBruteForce;
  if (text == "greedy" || text == "greedy_fallback") return Engine::kGreedy;
  throw UsageError("unknown engine `" + std::string(text) + "`");
}

Selection Solve(const RerankProblem& problem, Engine engine) {
  switch (engine) {
    case Engine::kAuto:
      if (TopkLinearApplies(problem)) return SolveTopkLinear(problem);
      return problem.combined ? SolveCombined(problem)
                              : SolveBranchAndBound(problem);
    case Engine::kTopkLinear:
      return SolveTopkLinear(problem);
    case Engine::kBranchAndBound:
      return SolveBranchAndBound(problem);
    case Engine::kBruteForce:
      return SolveBruteForce(problem);
    case Engine::kGreedy:
      return SolveGreedy(problem);
  }
  return SolveBranchAndBound(problem);
}

std::size_t ThreadsFromEnvironment() {
  if (const char* env = std::getenv("NBRANK_THREADS")) {
    std::size_t n = 0;
    if (internal::ParseInt(env, n) && n > 0) return n;
  }
  return 1;
}

RerankedBaskets RerankAll(std::span<const RerankProblem> problems,
                          const RerankConfig& config,
                          const RerankOptions& options) {
  std::vector<std::optional<Selection>> results(problems.size());
  std::vector<std::string> errors(problems.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < problems.size(); i = next++) {
      try {
        results[i] = Solve(problems[i], options.engine);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  std::size_t threads =
      options.threads == 0 ? ThreadsFromEnvironment() : options.threads;
  threads = std::max<std::size_t>(1, std::min(threads, problems.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  RerankedBaskets out;
  out.config = config;
  for (std::size_t i = 0; i < problems.size(); ++i) {
    const UserId& user = problems[i].user;
    if (!results[i]) {
      const std::string prefix = "user `" + user + "`";
      std::string message = errors[i].starts_with(prefix)
                                ? errors[i]
                                : prefix + ": " + errors[i];
      if (!options.skip_errors) throw SolverError(message);
      out.warnings.push_back(std::move(message));
      continue;
    }
    if (!out.baskets.emplace(user, std::move(*results[i])).second) {
      throw SolverError("user `" + user + "` appears in two problems");
    }
  }
  return out;
}

std::string FormatBasketsTsv(const RerankedBaskets& baskets) {
  std::string out;
  for (const auto& [user, selection] : baskets.baskets) {
    for (std::size_t r = 0; r < selection.items.size(); ++r) {
      out += user;
      out += '\t';
      out += std::to_string(r + 1);
      out += '\t';
      out += selection.items[r].item;
      out += selection.items[r].is_repeat ? "\t1\n" : "\t0\n";
    }
  }
  return out;
}

void SaveBasketsTsv(const RerankedBaskets& baskets, const std::string& path) {
  internal::WriteFile(path, FormatBasketsTsv(baskets));
}

BasketMap ParseBasketsTsv(std::string_view text, std::string_view source) {
  BasketMap out;
  std::size_t line_number = 0;
  for (const auto line : internal::SplitLines(text)) {
    ++line_number;
    if (internal::IsBlank(line)) continue;
    const auto fields = internal::SplitFields(line, '\t');
    std::size_t rank = 0;
    if (fields.size() != 4 || fields[0].empty() || fields[2].empty() ||
        !internal::ParseInt(fields[1], rank) ||
        (fields[3] != "0" && fields[3] != "1")) {
      throw DataError(internal::Where(source, line_number) +
                      ": expected `user_id<TAB>rank<TAB>item_id<TAB>0|1`");
    }
    auto& basket = out[UserId(fields[0])];
    if (rank != basket.size() + 1) {
      throw DataError(internal::Where(source, line_number) + ": user `" +
                      std::string(fields[0]) + "` rank " +
                      std::to_string(rank) + " out of sequence");
    }
    basket.emplace_back(fields[2]);
  }
  return out;
}

BasketMap LoadBasketsTsv(const std::string& path) {
  return ParseBasketsTsv(internal::ReadFile(path), path);
}

nlohmann::json SolverStatsToJson(const RerankedBaskets& baskets) {
  nlohmann::json j;
  auto& users = j["users"] = nlohmann::json::array();
  std::uint64_t nodes = 0;
  double wall = 0.0;
  for (const auto& [user, s] : baskets.baskets) {
    users.push_back({{"user_id", user},
                     {"solver", ToString(s.solver_tag)},
                     {"optimal", s.optimal},
                     {"objective", s.objective},
                     {"nodes", s.stats.nodes},
                     {"prunes", s.stats.prunes},
                     {"wall_seconds", s.stats.wall_seconds},
                     {"bound_gap", s.stats.bound_gap}});
    nodes += s.stats.nodes;
    wall += s.stats.wall_seconds;
  }
  j["total_objective"] = baskets.TotalObjective();
  j["total_nodes"] = nodes;
  j["total_wall_seconds"] = wall;
  j["warnings"] = baskets.warnings;
  return j;
}

}  // namespace nbrank
