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

// Budget-constrained expected-shortfall allocation under sample average
// approximation:
//
//   minimize (1/K) sum_k sum_n max(xi_kn - a_n, 0)
//   subject to sum_n a_n <= budget, a >= 0.
//
// The objective is separable, convex and piecewise linear, so water-filling
// over per-facility segments is exact. The LP form is kept as an oracle.

#ifndef MEDALLOC_ALLOCATOR_HPP_
#define MEDALLOC_ALLOCATOR_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "medalloc/core/error.hpp"
#include "medalloc/dense_simplex.hpp"

namespace medalloc {

struct AllocationProblem {
  /// samples[k][n]: demand of facility n in scenario k.
  std::vector<std::vector<double>> samples;
  double budget = 0.0;

  std::size_t scenarios() const { return samples.size(); }
  std::size_t facilities() const { return samples.empty() ? 0 : samples.front().size(); }

  void validate() const {
    require(!samples.empty(), ErrorCategory::kShape, "allocation problem needs at least one scenario");
    const std::size_t n = samples.front().size();
    require(n >= 1, ErrorCategory::kShape, "allocation problem needs at least one facility");
    for (const auto& s : samples) {
      require(s.size() == n, ErrorCategory::kShape, "scenarios differ in facility count");
      for (double v : s) {
        require(std::isfinite(v) && v >= 0.0, ErrorCategory::kInvalidInput,
                "demand samples must be finite and nonnegative");
      }
    }
    require(std::isfinite(budget) && budget >= 0.0, ErrorCategory::kInvalidInput,
            "budget must be finite and nonnegative");
  }

  /// Largest sampled demand per facility.
  std::vector<double> max_demand() const {
    std::vector<double> out(facilities(), 0.0);
    for (const auto& s : samples) {
      for (std::size_t n = 0; n < s.size(); ++n) out[n] = std::max(out[n], s[n]);
    }
    return out;
  }

  /// Builds the K-scenario problem from per-facility sample lists
  /// (per_facility[n][k]), the layout a forest produces row by row.
  static AllocationProblem from_facility_samples(std::span<const std::vector<double>> per_facility, double budget) {
    require(!per_facility.empty(), ErrorCategory::kShape, "allocation problem needs at least one facility");
    const std::size_t k = per_facility.front().size();
    AllocationProblem p;
    p.budget = budget;
    p.samples.assign(k, std::vector<double>(per_facility.size(), 0.0));
    for (std::size_t n = 0; n < per_facility.size(); ++n) {
      require(per_facility[n].size() == k, ErrorCategory::kShape, "facilities differ in sample count");
      for (std::size_t s = 0; s < k; ++s) p.samples[s][n] = per_facility[n][s];
    }
    return p;
  }

  nlohmann::json to_json() const { return {{"budget", budget}, {"samples", samples}}; }

  static AllocationProblem from_json(const nlohmann::json& j) {
    try {
      AllocationProblem p;
      p.budget = j.at("budget").get<double>();
      p.samples = j.at("samples").get<std::vector<std::vector<double>>>();
      p.validate();
      return p;
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCategory::kSchema, std::string("malformed allocation problem: ") + e.what());
    }
  }
};

/// One budget increment taken by the greedy solver: `amount` units of the
/// segment starting at `start` for `facility`.
struct FillStep {
  std::size_t facility = 0;
  std::size_t segment = 0;
  double start = 0.0;
  double amount = 0.0;
  double marginal_value = 0.0;
};

struct AllocationResult {
  std::vector<double> allocation;
  double objective = 0.0;
  std::vector<FillStep> fill_trace;

  double total() const {
    double s = 0.0;
    for (double v : allocation) s += v;
    return s;
  }

  nlohmann::json to_json() const {
    nlohmann::json trace = nlohmann::json::array();
    for (const auto& step : fill_trace) {
      trace.push_back({{"facility", step.facility},
                       {"segment", step.segment},
                       {"start", step.start},
                       {"amount", step.amount},
                       {"marginal_value", step.marginal_value}});
    }
    return {{"allocation", allocation}, {"objective", objective}, {"fill_trace", trace}};
  }
};

inline double shortfall(std::span<const double> a, std::span<const double> xi) {
  require(a.size() == xi.size(), ErrorCategory::kShape, "allocation and demand differ in length");
  double total = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) total += std::max(xi[n] - a[n], 0.0);
  return total;
}

inline double saa_objective(const AllocationProblem& problem, std::span<const double> a) {
  require(!problem.samples.empty(), ErrorCategory::kShape, "allocation problem has no scenarios");
  double total = 0.0;
  for (const auto& s : problem.samples) total += shortfall(a, s);
  return total / static_cast<double>(problem.samples.size());
}

/// Exact optimum by water-filling. Segment (b_j, b_{j+1}] of a facility's
/// sorted samples removes (K - j)/K expected shortfall per unit. Segments are
/// consumed by value descending, then facility ascending, then start
/// ascending. Allocation never exceeds the largest sample.
inline AllocationResult solve_greedy(const AllocationProblem& problem) {
  problem.validate();
  const std::size_t k = problem.scenarios();
  const std::size_t n_fac = problem.facilities();

  struct Segment {
    std::size_t weight;  // K - j; the marginal value is weight / K.
    std::size_t facility;
    std::size_t index;
    double start;
    double length;
  };
  std::vector<Segment> segments;
  std::vector<double> sorted(k);
  for (std::size_t n = 0; n < n_fac; ++n) {
    for (std::size_t s = 0; s < k; ++s) sorted[s] = problem.samples[s][n];
    std::sort(sorted.begin(), sorted.end());
    double prev = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (sorted[j] > prev) segments.push_back({k - j, n, j, prev, sorted[j] - prev});
      prev = sorted[j];
    }
  }
  std::sort(segments.begin(), segments.end(), [](const Segment& a, const Segment& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    if (a.facility != b.facility) return a.facility < b.facility;
    return a.start < b.start;
  });

  AllocationResult result;
  result.allocation.assign(n_fac, 0.0);
  double remaining = problem.budget;
  for (const auto& seg : segments) {
    if (remaining <= 0.0) break;
    const double amount = std::min(seg.length, remaining);
    result.allocation[seg.facility] = seg.start + amount;
    remaining -= amount;
    result.fill_trace.push_back(
        {seg.facility, seg.index, seg.start, amount, static_cast<double>(seg.weight) / static_cast<double>(k)});
  }
  result.objective = saa_objective(problem, result.allocation);
  return result;
}

/// The same problem as an explicit LP over (a, c), solved by dense simplex.
/// Returned allocations are clipped into [0, max sample], which leaves the
/// objective unchanged.
inline AllocationResult solve_lp(const AllocationProblem& problem, double tolerance = 1e-8) {
  problem.validate();
  require(tolerance > 0.0, ErrorCategory::kConfig, "LP tolerance must be positive");
  const std::size_t k = problem.scenarios();
  const std::size_t n_fac = problem.facilities();
  const std::size_t vars = n_fac + n_fac * k;

  LinearProgram lp;
  lp.cost.assign(vars, 0.0);
  for (std::size_t v = n_fac; v < vars; ++v) lp.cost[v] = 1.0 / static_cast<double>(k);
  // -a_n - c_kn <= -xi_kn
  for (std::size_t s = 0; s < k; ++s) {
    for (std::size_t n = 0; n < n_fac; ++n) {
      std::vector<double> row(vars, 0.0);
      row[n] = -1.0;
      row[n_fac + s * n_fac + n] = -1.0;
      lp.a.push_back(std::move(row));
      lp.b.push_back(-problem.samples[s][n]);
    }
  }
  std::vector<double> budget_row(vars, 0.0);
  for (std::size_t n = 0; n < n_fac; ++n) budget_row[n] = 1.0;
  lp.a.push_back(std::move(budget_row));
  lp.b.push_back(problem.budget);

  const LpSolution solution = solve_dense_lp(lp, tolerance);
  const auto cap = problem.max_demand();
  AllocationResult result;
  result.allocation.resize(n_fac);
  double total = 0.0;
  for (std::size_t n = 0; n < n_fac; ++n) {
    result.allocation[n] = std::clamp(solution.x[n], 0.0, cap[n]);
    total += result.allocation[n];
  }
  if (total > problem.budget && total > 0.0) {
    const double scale = problem.budget / total;
    for (double& v : result.allocation) v *= scale;
  }
  result.objective = saa_objective(problem, result.allocation);
  return result;
}

}  // namespace medalloc

#endif  // MEDALLOC_ALLOCATOR_HPP_
