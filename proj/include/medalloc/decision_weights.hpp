/*
 * Copyright 2026 The medalloc Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Training-row weights from a first-order expansion of the allocation loss.
// For each (product, period) group the reference allocation a* is solved
// once; a row's weight is the magnitude of (J^T g)_n, where g is the
// shortfall subgradient at a* and J[i][j] = d a*_i / d xi_j.

#ifndef MEDALLOC_DECISION_WEIGHTS_HPP_
#define MEDALLOC_DECISION_WEIGHTS_HPP_

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "medalloc/allocator.hpp"
#include "medalloc/core/csv.hpp"
#include "medalloc/core/error.hpp"
#include "medalloc/core/parallel.hpp"
#include "medalloc/core/period.hpp"
#include "medalloc/feature_table.hpp"
#include "medalloc/forest.hpp"
#include "medalloc/linear_model.hpp"

namespace medalloc {

enum class JacobianMode { kIdentity, kDiagonalFd, kFullFd };
enum class WeightNormalization { kNone, kMeanOne };
/// Where the reference allocation is solved: on the initial model's demand
/// scenarios, or on the realized demand itself (one scenario).
enum class EvaluationPoint { kPredicted, kRealized };

inline std::string_view jacobian_name(JacobianMode mode) {
  switch (mode) {
    case JacobianMode::kIdentity: return "identity";
    case JacobianMode::kDiagonalFd: return "diagonal_fd";
    case JacobianMode::kFullFd: return "full_fd";
  }
  return "identity";
}

inline JacobianMode parse_jacobian(std::string_view name) {
  if (name == "identity") return JacobianMode::kIdentity;
  if (name == "diagonal_fd") return JacobianMode::kDiagonalFd;
  if (name == "full_fd") return JacobianMode::kFullFd;
  fail(ErrorCategory::kConfig, "unknown jacobian mode '" + std::string(name) + "' (identity|diagonal_fd|full_fd)");
}

inline WeightNormalization parse_normalization(std::string_view name) {
  if (name == "none") return WeightNormalization::kNone;
  if (name == "mean_one") return WeightNormalization::kMeanOne;
  fail(ErrorCategory::kConfig, "unknown weight normalization '" + std::string(name) + "' (none|mean_one)");
}

inline EvaluationPoint parse_evaluation_point(std::string_view name) {
  if (name == "predicted") return EvaluationPoint::kPredicted;
  if (name == "realized") return EvaluationPoint::kRealized;
  fail(ErrorCategory::kConfig, "unknown evaluation point '" + std::string(name) + "' (predicted|realized)");
}

struct WeightConfig {
  JacobianMode jacobian = JacobianMode::kIdentity;
  /// Unset means 1e-2 times the mean sampled demand of the problem.
  std::optional<double> fd_step;
  double floor = 0.05;
  WeightNormalization normalization = WeightNormalization::kNone;
  EvaluationPoint evaluation_point = EvaluationPoint::kPredicted;
  std::size_t threads = 1;

  void validate() const {
    if (fd_step) {
      require(std::isfinite(*fd_step) && *fd_step > 0.0, ErrorCategory::kConfig, "fd_step must be positive");
    }
    require(std::isfinite(floor) && floor >= 0.0, ErrorCategory::kConfig, "weight floor must be >= 0");
  }
};

/// g_n = -1 where demand is strictly unmet, else 0 (0 at the kink).
inline std::vector<double> loss_gradient(std::span<const double> a, std::span<const double> xi_star) {
  require(a.size() == xi_star.size(), ErrorCategory::kShape, "allocation and demand differ in length");
  std::vector<double> g(a.size(), 0.0);
  for (std::size_t n = 0; n < a.size(); ++n) g[n] = xi_star[n] > a[n] ? -1.0 : 0.0;
  return g;
}

inline double default_fd_step(const AllocationProblem& problem) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& s : problem.samples) {
    for (double v : s) sum += v;
    count += s.size();
  }
  const double mean = count > 0 ? sum / static_cast<double>(count) : 0.0;
  return mean > 0.0 ? 1e-2 * mean : 1e-2;
}

/// J(i, j) = d a*_i / d xi_j, with xi_j moving all K samples of facility j
/// together. Central differences, or forward differences when a sample of
/// facility j lies within one step of zero.
inline Eigen::MatrixXd policy_jacobian(const AllocationProblem& problem, const WeightConfig& config) {
  problem.validate();
  config.validate();
  const auto n_fac = static_cast<Eigen::Index>(problem.facilities());
  if (config.jacobian == JacobianMode::kIdentity) return Eigen::MatrixXd::Identity(n_fac, n_fac);

  const double h = config.fd_step.value_or(default_fd_step(problem));
  const auto base = solve_greedy(problem).allocation;
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n_fac, n_fac);
  auto shifted = [&](std::size_t column, double delta) {
    AllocationProblem p = problem;
    for (auto& s : p.samples) s[column] += delta;
    return solve_greedy(p).allocation;
  };
  for (Eigen::Index j = 0; j < n_fac; ++j) {
    const auto col = static_cast<std::size_t>(j);
    double lowest = problem.samples.front()[col];
    for (const auto& s : problem.samples) lowest = std::min(lowest, s[col]);
    const auto plus = shifted(col, h);
    std::vector<double> minus;
    double span = h;
    if (lowest >= h) {
      minus = shifted(col, -h);
      span = 2.0 * h;
    } else {
      minus = base;
    }
    if (config.jacobian == JacobianMode::kDiagonalFd) {
      jac(j, j) = (plus[col] - minus[col]) / span;
    } else {
      for (Eigen::Index i = 0; i < n_fac; ++i) {
        const auto row = static_cast<std::size_t>(i);
        jac(i, j) = (plus[row] - minus[row]) / span;
      }
    }
  }
  return jac;
}

/// Budgets keyed by (product, period).
struct BudgetKey {
  std::string product_id;
  YearMonth period;
  friend auto operator<=>(const BudgetKey&, const BudgetKey&) = default;
};
using BudgetSchedule = std::map<BudgetKey, double>;

/// rho times the realized total demand of each (product, period) group.
inline BudgetSchedule fraction_budgets(const FeatureTable& table, double rho) {
  BudgetSchedule out;
  for (const auto& row : table.rows()) out[{row.product_id, row.period}] += rho * row.target;
  return out;
}

struct WeightEntry {
  std::size_t row = 0;
  std::string facility_id;
  std::string product_id;
  YearMonth period;
  double g = 0.0;
  double raw_w = 0.0;
  double final_weight = 0.0;
  double reference_allocation = 0.0;
  /// True when the group lacked a full facility panel and J fell back to I.
  bool identity_fallback = false;
};

struct WeightReport {
  JacobianMode jacobian = JacobianMode::kIdentity;
  /// One entry per training row, in table order.
  std::vector<WeightEntry> entries;

  std::vector<double> final_weights() const {
    std::vector<double> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.final_weight);
    return out;
  }

  void write_csv(std::ostream& out) const {
    csv::write_row(out, {"period", "facility_id", "product_id", "g", "raw_w", "final_weight"});
    for (const auto& e : entries) {
      csv::write_row(out, {e.period.str(), e.facility_id, e.product_id, csv::format_number(e.g),
                           csv::format_number(e.raw_w), csv::format_number(e.final_weight)});
    }
  }

  /// Reads the audit CSV back. Row indices are not stored, so entries are
  /// matched to table rows by (facility, product, period).
  static WeightReport read_csv(std::istream& in) {
    csv::Reader reader(in);
    std::vector<std::string> fields;
    if (!reader.next(fields)) fail(ErrorCategory::kEmptyInput, "weights CSV is empty");
    const std::vector<std::string> header{"period", "facility_id", "product_id", "g", "raw_w", "final_weight"};
    require(fields == header, ErrorCategory::kSchema,
            "weights CSV header must be period,facility_id,product_id,g,raw_w,final_weight");
    WeightReport report;
    while (reader.next(fields)) {
      if (fields.size() == 1 && fields[0].empty()) continue;
      const std::string where = "weights line " + std::to_string(reader.line());
      require(fields.size() == header.size(), ErrorCategory::kShape, where + ": wrong number of columns");
      WeightEntry e;
      e.row = report.entries.size();
      auto period = YearMonth::parse(fields[0]);
      require(period.has_value(), ErrorCategory::kInvalidInput, where + ": bad period");
      e.period = *period;
      e.facility_id = fields[1];
      e.product_id = fields[2];
      auto g = csv::parse_number(fields[3]);
      auto raw = csv::parse_number(fields[4]);
      auto fin = csv::parse_number(fields[5]);
      require(g && raw && fin && *fin >= 0.0, ErrorCategory::kInvalidInput, where + ": bad numeric value");
      e.g = *g;
      e.raw_w = *raw;
      e.final_weight = *fin;
      report.entries.push_back(std::move(e));
    }
    return report;
  }
};

namespace detail {

inline std::vector<std::vector<std::size_t>> group_rows(const FeatureTable& table) {
  std::map<BudgetKey, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < table.size(); ++i) groups[{table[i].product_id, table[i].period}].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  for (auto& [key, rows] : groups) {
    // Facility order fixes greedy tie-breaking, so make it input-independent.
    std::stable_sort(rows.begin(), rows.end(),
                     [&](std::size_t a, std::size_t b) { return table[a].facility_id < table[b].facility_id; });
    out.push_back(std::move(rows));
  }
  return out;
}

}  // namespace detail

template <DemandModel Model>
WeightReport compute_weights(const FeatureTable& train, const Model& initial_model, const BudgetSchedule& budgets,
                             const WeightConfig& config) {
  config.validate();
  require(initial_model.feature_dim() == train.dim(), ErrorCategory::kShape,
          "model dimension " + std::to_string(initial_model.feature_dim()) + " does not match table dimension " +
              std::to_string(train.dim()));

  std::map<std::string, std::set<std::string>> panel;
  for (const auto& row : train.rows()) panel[row.product_id].insert(row.facility_id);

  const auto groups = detail::group_rows(train);
  for (const auto& rows : groups) {
    const auto& first = train[rows.front()];
    if (!budgets.contains({first.product_id, first.period})) {
      fail(ErrorCategory::kConfig, "no budget for product '" + first.product_id + "' in " + first.period.str());
    }
  }

  WeightReport report;
  report.jacobian = config.jacobian;
  report.entries.resize(train.size());
  parallel_for(groups.size(), config.threads, [&](std::size_t gi) {
    const auto& rows = groups[gi];
    const auto& first = train[rows.front()];
    std::vector<std::vector<double>> per_facility;
    std::vector<double> realized;
    std::set<std::string> facilities;
    for (std::size_t i : rows) {
      const auto& row = train[i];
      realized.push_back(row.target);
      facilities.insert(row.facility_id);
      if (config.evaluation_point == EvaluationPoint::kRealized) {
        per_facility.push_back({std::max(row.target, 0.0)});
      } else {
        per_facility.push_back(initial_model.predict_samples(row.features));
      }
    }
    const auto problem =
        AllocationProblem::from_facility_samples(per_facility, budgets.at({first.product_id, first.period}));
    const auto allocation = solve_greedy(problem).allocation;
    const auto g = loss_gradient(allocation, realized);

    const bool full_panel = facilities.size() == rows.size() && facilities == panel.at(first.product_id);
    const bool fallback = config.jacobian != JacobianMode::kIdentity && !full_panel;
    std::vector<double> raw = g;
    if (config.jacobian != JacobianMode::kIdentity && full_panel) {
      const Eigen::MatrixXd jac = policy_jacobian(problem, config);
      const Eigen::VectorXd w = jac.transpose() * Eigen::Map<const Eigen::VectorXd>(g.data(), g.size());
      for (std::size_t n = 0; n < raw.size(); ++n) raw[n] = w(static_cast<Eigen::Index>(n));
    }
    for (std::size_t n = 0; n < rows.size(); ++n) {
      const auto& row = train[rows[n]];
      auto& e = report.entries[rows[n]];
      e.row = rows[n];
      e.facility_id = row.facility_id;
      e.product_id = row.product_id;
      e.period = row.period;
      e.g = g[n];
      e.raw_w = raw[n];
      e.final_weight = std::max(std::abs(raw[n]), config.floor);
      e.reference_allocation = allocation[n];
      e.identity_fallback = fallback;
    }
  });

  if (config.normalization == WeightNormalization::kMeanOne && !report.entries.empty()) {
    double sum = 0.0;
    for (const auto& e : report.entries) sum += e.final_weight;
    const double mean = sum / static_cast<double>(report.entries.size());
    if (mean > 0.0) {
      for (auto& e : report.entries) e.final_weight /= mean;
    }
  }
  return report;
}

/// Copy of `train` carrying the report's final weights. Every row must be
/// covered, matched by (facility, product, period).
inline FeatureTable apply_weights(const FeatureTable& train, const WeightReport& report) {
  std::map<std::tuple<std::string, std::string, YearMonth>, double> lookup;
  for (const auto& e : report.entries) lookup[{e.facility_id, e.product_id, e.period}] = e.final_weight;
  FeatureTable out = train.empty_like();
  for (const auto& row : train.rows()) {
    auto it = lookup.find({row.facility_id, row.product_id, row.period});
    if (it == lookup.end()) {
      fail(ErrorCategory::kMissingWeight, "no weight for facility '" + row.facility_id + "', product '" +
                                              row.product_id + "', " + row.period.str());
    }
    FeatureRow copy = row;
    copy.weight = it->second;
    out.add_row(std::move(copy));
  }
  return out;
}

inline Forest retrain_weighted(const FeatureTable& train, const WeightReport& report, const ForestParams& params,
                               std::uint64_t seed) {
  return train_forest(apply_weights(train, report), params, seed);
}

inline LinearModel retrain_weighted_linear(const FeatureTable& train, const WeightReport& report) {
  return fit_linear(apply_weights(train, report));
}

}  // namespace medalloc

#endif  // MEDALLOC_DECISION_WEIGHTS_HPP_
