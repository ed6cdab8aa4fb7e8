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

#include "nbrank/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "nbrank/error.hpp"
#include "text_io.hpp"

namespace nbrank {
namespace {

std::size_t DistinctCategories(const std::vector<ItemId>& basket,
                               const CategoryMap& categories) {
  std::set<std::string_view> seen;
  for (const auto& item : basket) {
    const auto it = categories.find(item);
    seen.insert(it == categories.end() ? kUnknownCategory
                                       : std::string_view(it->second));
  }
  return seen.size();
}

std::size_t RepeatHits(const std::vector<ItemId>& basket,
                       const RepeatSets& reps, const UserId& user) {
  const auto it = reps.find(user);
  if (it == reps.end()) return 0;
  std::size_t hits = 0;
  for (const auto& item : basket) hits += it->second.contains(item);
  return hits;
}

std::optional<double> UserRecall(const std::vector<ItemId>& basket,
                                 const Basket& target) {
  if (target.empty()) return std::nullopt;
  const std::unordered_set<std::string_view> in_basket(basket.begin(),
                                                       basket.end());
  std::size_t hits = 0;
  for (const auto& item : target) hits += in_basket.contains(item);
  return static_cast<double>(hits) / static_cast<double>(target.size());
}

const Basket& TargetOf(const SplitDataset& targets, const UserId& user) {
  const auto it = targets.eval_targets.find(user);
  if (it == targets.eval_targets.end()) {
    throw DataError("user `" + user + "` has a basket but no target in the " +
                    std::string(ToString(targets.split_label)) + " split");
  }
  return it->second;
}

std::string Fixed(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", value);
  return buf;
}

}  // namespace

double RecallAtK(const BasketMap& baskets, const SplitDataset& targets,
                 std::vector<std::string>* warnings) {
  double total = 0.0;
  std::size_t users = 0;
  for (const auto& [user, basket] : baskets) {
    const auto recall = UserRecall(basket, TargetOf(targets, user));
    if (!recall) {
      if (warnings) {
        warnings->push_back("user `" + user +
                            "` has an empty target and is excluded from "
                            "recall");
      }
      continue;
    }
    total += *recall;
    ++users;
  }
  return users == 0 ? 0.0 : total / static_cast<double>(users);
}

double DiversityScore(const BasketMap& baskets, const CategoryMap& categories,
                      std::size_t k) {
  if (baskets.empty()) return 0.0;
  double total = 0.0;
  for (const auto& [user, basket] : baskets) {
    total += static_cast<double>(DistinctCategories(basket, categories)) /
             static_cast<double>(k);
  }
  return total / static_cast<double>(baskets.size());
}

std::pair<double, double> GroupExposure(const BasketMap& baskets,
                                        const ItemGroups& groups,
                                        const ExposureModel& exposure) {
  std::unordered_map<std::string_view, double> item_exposure;
  for (const auto& [user, basket] : baskets) {
    for (std::size_t r = 0; r < basket.size(); ++r) {
      item_exposure[basket[r]] += exposure.Weight(r + 1);
    }
  }
  auto average = [&](const std::set<ItemId>& group) {
    if (group.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& item : group) {
      if (const auto it = item_exposure.find(item); it != item_exposure.end()) {
        sum += it->second;
      }
    }
    return sum / static_cast<double>(group.size());
  };
  return {average(groups.popular), average(groups.unpopular)};
}

double LogDp(double e1, double e2, double log_base) {
  const double ratio =
      std::log((e1 + kLogDpSmoothing) / (e2 + kLogDpSmoothing));
  return log_base == 0.0 ? ratio : ratio / std::log(log_base);
}

RepeatMetricsResult RepeatMetrics(const BasketMap& baskets,
                                  const RepeatSets& reps, double rep_ratio_gt,
                                  std::size_t k) {
  RepeatMetricsResult result;
  if (!baskets.empty()) {
    double total = 0.0;
    for (const auto& [user, basket] : baskets) {
      total += static_cast<double>(RepeatHits(basket, reps, user)) /
               static_cast<double>(k);
    }
    result.rep_ratio_rec = total / static_cast<double>(baskets.size());
  }
  result.rep_bias = result.rep_ratio_rec - rep_ratio_gt;
  return result;
}

CompositeResult CompositeMetrics(double log_dp, double ds, double rep_bias,
                                 double omega) {
  if (!(omega >= 0.0 && omega <= 1.0)) {
    throw UsageError("omega must lie in [0, 1]");
  }
  return {omega * std::abs(log_dp) + (1.0 - omega) * std::abs(rep_bias),
          omega * ds - (1.0 - omega) * std::abs(rep_bias)};
}

MetricsReport Evaluate(const BasketMap& baskets, const SplitDataset& targets,
                       const RepeatSets& reps, const ItemGroups& groups,
                       const CategoryMap& categories, double rep_ratio_gt,
                       const RerankConfig& cfg) {
  if (baskets.empty()) throw DataError("no baskets to evaluate");
  cfg.Validate();
  MetricsReport report;
  report.config = cfg;
  report.user_count = baskets.size();
  report.rep_ratio_gt = rep_ratio_gt;
  report.per_user.reserve(baskets.size());
  double recall_sum = 0.0;
  double ds_sum = 0.0;
  double rep_sum = 0.0;
  const double k = static_cast<double>(cfg.k);
  for (const auto& [user, basket] : baskets) {
    UserMetrics m;
    m.user = user;
    m.recall = UserRecall(basket, TargetOf(targets, user));
    m.ds = static_cast<double>(DistinctCategories(basket, categories)) / k;
    m.rep_ratio = static_cast<double>(RepeatHits(basket, reps, user)) / k;
    if (m.recall) {
      recall_sum += *m.recall;
      ++report.recall_user_count;
    } else {
      report.warnings.push_back("user `" + user +
                                "` has an empty target and is excluded from "
                                "recall");
    }
    ds_sum += m.ds;
    rep_sum += m.rep_ratio;
    report.per_user.push_back(std::move(m));
  }
  const double users = static_cast<double>(report.user_count);
  report.recall = report.recall_user_count == 0
                      ? 0.0
                      : recall_sum /
                            static_cast<double>(report.recall_user_count);
  report.ds = ds_sum / users;
  report.rep_ratio_rec = rep_sum / users;
  report.rep_bias = report.rep_ratio_rec - rep_ratio_gt;
  const auto [e1, e2] = GroupExposure(baskets, groups, cfg.exposure);
  report.exposure_popular = e1;
  report.exposure_unpopular = e2;
  report.log_dp = LogDp(e1, e2, cfg.log_base);
  const auto composite =
      CompositeMetrics(report.log_dp, report.ds, report.rep_bias, cfg.omega);
  report.m_fr = composite.m_fr;
  report.m_dr = composite.m_dr;
  return report;
}

nlohmann::json ReportToJson(const MetricsReport& report,
                            bool include_per_user) {
  nlohmann::json j;
  j["recall"] = report.recall;
  j["ds"] = report.ds;
  j["log_dp"] = report.log_dp;
  j["rep_ratio_rec"] = report.rep_ratio_rec;
  j["rep_bias"] = report.rep_bias;
  j["m_fr"] = report.m_fr;
  j["m_dr"] = report.m_dr;
  j["rep_ratio_gt"] = report.rep_ratio_gt;
  j["exposure_popular"] = report.exposure_popular;
  j["exposure_unpopular"] = report.exposure_unpopular;
  j["user_count"] = report.user_count;
  j["recall_user_count"] = report.recall_user_count;
  j["config"] = ConfigToJson(report.config);
  j["warnings"] = report.warnings;
  if (include_per_user) {
    auto& users = j["per_user"] = nlohmann::json::array();
    for (const auto& m : report.per_user) {
      nlohmann::json row = {{"user_id", m.user},
                            {"ds", m.ds},
                            {"rep_ratio", m.rep_ratio}};
      row["recall"] = m.recall ? nlohmann::json(*m.recall) : nlohmann::json();
      users.push_back(std::move(row));
    }
  }
  return j;
}

MetricsReport ReportFromJson(const nlohmann::json& j) {
  MetricsReport r;
  try {
    r.recall = j.at("recall").get<double>();
    r.ds = j.at("ds").get<double>();
    r.log_dp = j.at("log_dp").get<double>();
    r.rep_ratio_rec = j.at("rep_ratio_rec").get<double>();
    r.rep_bias = j.at("rep_bias").get<double>();
    r.m_fr = j.at("m_fr").get<double>();
    r.m_dr = j.at("m_dr").get<double>();
    r.rep_ratio_gt = j.value("rep_ratio_gt", 0.0);
    r.exposure_popular = j.value("exposure_popular", 0.0);
    r.exposure_unpopular = j.value("exposure_unpopular", 0.0);
    r.user_count = j.at("user_count").get<std::size_t>();
    r.recall_user_count = j.value("recall_user_count", r.user_count);
    r.config = ConfigFromJson(j.at("config"));
    if (j.contains("per_user")) {
      for (const auto& row : j["per_user"]) {
        UserMetrics m;
        m.user = row.at("user_id").get<std::string>();
        m.ds = row.at("ds").get<double>();
        m.rep_ratio = row.at("rep_ratio").get<double>();
        if (!row.at("recall").is_null()) m.recall = row["recall"].get<double>();
        r.per_user.push_back(std::move(m));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed metrics report: ") + e.what());
  }
  return r;
}

MetricsReport LoadReportJson(const std::string& path) {
  try {
    return ReportFromJson(nlohmann::json::parse(internal::ReadFile(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void SaveReportJson(const MetricsReport& report, const std::string& path,
                    bool include_per_user) {
  internal::WriteFile(path, ReportToJson(report, include_per_user).dump(2) +
                                "\n");
}

std::string FormatReportTable(const MetricsReport& report) {
  const std::vector<std::pair<std::string, std::string>> columns = {
      {"users", std::to_string(report.user_count)},
      {"Recall", Fixed(report.recall)},
      {"DS", Fixed(report.ds)},
      {"logDP", Fixed(report.log_dp)},
      {"RepR", Fixed(report.rep_ratio_rec)},
      {"RepBias", Fixed(report.rep_bias)},
      {"mDR", Fixed(report.m_dr)},
      {"mFR", Fixed(report.m_fr)},
  };
  std::string header;
  std::string values;
  for (const auto& [name, value] : columns) {
    const std::size_t width = std::max(name.size(), value.size()) + 2;
    header += std::string(width - name.size(), ' ') + name;
    values += std::string(width - value.size(), ' ') + value;
  }
  return header + "\n" + values + "\n";
}

std::string FormatPerUserTsv(const MetricsReport& report) {
  std::string out = "user_id\trecall\tds\trep_ratio\n";
  for (const auto& m : report.per_user) {
    out += m.user;
    out += '\t';
    if (m.recall) out += internal::FormatDouble(*m.recall);
    out += '\t';
    out += internal::FormatDouble(m.ds);
    out += '\t';
    out += internal::FormatDouble(m.rep_ratio);
    out += '\n';
  }
  return out;
}

}  // namespace nbrank
