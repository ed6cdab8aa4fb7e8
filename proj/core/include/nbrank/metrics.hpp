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

#ifndef NBRANK_METRICS_HPP_
#define NBRANK_METRICS_HPP_

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "nbrank/dataset.hpp"
#include "nbrank/objective.hpp"
#include "nbrank/solver.hpp"

namespace nbrank {

// Additive smoothing that keeps logDP finite when a group gets no exposure.
inline constexpr double kLogDpSmoothing = 1e-9;

struct UserMetrics {
  UserId user;
  std::optional<double> recall;  // unset when the target is empty
  double ds = 0.0;
  double rep_ratio = 0.0;
};

struct MetricsReport {
  double recall = 0.0;
  double ds = 0.0;
  double log_dp = 0.0;
  double rep_ratio_rec = 0.0;
  double rep_bias = 0.0;
  double m_fr = 0.0;
  double m_dr = 0.0;
  double rep_ratio_gt = 0.0;
  double exposure_popular = 0.0;    // e1
  double exposure_unpopular = 0.0;  // e2
  std::size_t user_count = 0;
  std::size_t recall_user_count = 0;
  std::vector<UserMetrics> per_user;
  RerankConfig config;
  std::vector<std::string> warnings;
};

// Mean over users of |basket ∩ target| / |target|. Users with an empty target
// are skipped and reported through `warnings`; a basket user without a
// target is an error.
double RecallAtK(const BasketMap& baskets, const SplitDataset& targets,
                 std::vector<std::string>* warnings = nullptr);

// Mean over users of (#distinct categories in the basket) / K.
double DiversityScore(const BasketMap& baskets, const CategoryMap& categories,
                      std::size_t k);

// Average exposure of the popular and unpopular groups. Item exposure sums
// e(rank) over every basket containing the item.
std::pair<double, double> GroupExposure(const BasketMap& baskets,
                                        const ItemGroups& groups,
                                        const ExposureModel& exposure);

// log((e1 + delta) / (e2 + delta)); log_base 0 means natural log.
double LogDp(double e1, double e2, double log_base = 0.0);

struct RepeatMetricsResult {
  double rep_ratio_rec = 0.0;
  double rep_bias = 0.0;
};

RepeatMetricsResult RepeatMetrics(const BasketMap& baskets,
                                  const RepeatSets& reps, double rep_ratio_gt,
                                  std::size_t k);

struct CompositeResult {
  double m_fr = 0.0;
  double m_dr = 0.0;
};

// mFR = omega |logDP| + (1 - omega) |RepBias|;
// mDR = omega DS - (1 - omega) |RepBias|.
CompositeResult CompositeMetrics(double log_dp, double ds, double rep_bias,
                                 double omega);

MetricsReport Evaluate(const BasketMap& baskets, const SplitDataset& targets,
                       const RepeatSets& reps, const ItemGroups& groups,
                       const CategoryMap& categories, double rep_ratio_gt,
                       const RerankConfig& cfg);

nlohmann::json ReportToJson(const MetricsReport& report,
                            bool include_per_user = false);
MetricsReport ReportFromJson(const nlohmann::json& j);
MetricsReport LoadReportJson(const std::string& path);
void SaveReportJson(const MetricsReport& report, const std::string& path,
                    bool include_per_user = false);

// Aligned two-line text rendering of the aggregate fields.
std::string FormatReportTable(const MetricsReport& report);
// `user_id<TAB>recall<TAB>ds<TAB>rep_ratio`; recall is empty when skipped.
std::string FormatPerUserTsv(const MetricsReport& report);

}  // namespace nbrank

#endif  // NBRANK_METRICS_HPP_
