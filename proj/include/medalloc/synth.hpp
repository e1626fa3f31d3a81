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

// Two-class misspecification scenario. Low-inventory facilities have demand
// that grows quickly with prior inventory; high-inventory facilities have
// demand that grows slowly and stays below what they already hold. A single
// linear model pooled over both classes interpolates badly for the class
// that matters for allocation.

#ifndef MEDALLOC_SYNTH_HPP_
#define MEDALLOC_SYNTH_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "medalloc/allocator.hpp"
#include "medalloc/core/csv.hpp"
#include "medalloc/core/error.hpp"
#include "medalloc/core/period.hpp"
#include "medalloc/core/random.hpp"
#include "medalloc/feature_table.hpp"

namespace medalloc {

struct InventoryRange {
  double lo = 0.0;
  double hi = 0.0;
  double midpoint() const { return 0.5 * (lo + hi); }
};

struct TwoClassScenario {
  std::size_t n_low = 50;
  std::size_t n_high = 50;
  double slope_low = 0.9;
  double slope_high = 0.2;
  double intercept_low = 2.0;
  double intercept_high = 1.0;
  InventoryRange range_low{0.0, 10.0};
  InventoryRange range_high{20.0, 40.0};
  /// Unset means 0.1 times the expected demand.
  std::optional<double> noise_sd;
  double budget_fraction = 0.5;
  std::size_t periods = 24;
  YearMonth start = YearMonth(2020, 1);
  std::uint64_t seed = 0;

  void validate() const {
    require(n_low + n_high >= 1, ErrorCategory::kConfig, "scenario needs at least one facility");
    require(range_low.lo < range_low.hi && range_high.lo < range_high.hi, ErrorCategory::kConfig,
            "inventory ranges must be nonempty");
    require(range_low.hi <= range_high.lo, ErrorCategory::kConfig,
            "low-class inventory range must lie below the high-class range");
    require(range_low.lo >= 0.0, ErrorCategory::kConfig, "inventory cannot be negative");
    require(slope_low > 0.0 && slope_high > 0.0, ErrorCategory::kConfig, "slopes must be positive");
    require(slope_low > slope_high, ErrorCategory::kConfig, "slope_low must exceed slope_high");
    require(!noise_sd || (std::isfinite(*noise_sd) && *noise_sd >= 0.0), ErrorCategory::kConfig,
            "noise_sd must be >= 0");
    require(budget_fraction >= 0.0 && budget_fraction <= 1.0, ErrorCategory::kConfig,
            "budget fraction must lie in [0, 1]");
  }

  double mean_low() const { return intercept_low + slope_low * range_low.midpoint(); }
  double mean_high() const { return intercept_high + slope_high * range_high.midpoint(); }

  /// Facility-weighted expected demand before noise.
  double expected_demand() const {
    const double total = static_cast<double>(n_low + n_high);
    return (static_cast<double>(n_low) * mean_low() + static_cast<double>(n_high) * mean_high()) / total;
  }

  double resolved_noise_sd() const { return noise_sd.value_or(0.1 * expected_demand()); }
};

enum class FacilityClass { kLow, kHigh };

struct SynthData {
  /// Features per row: [prior inventory, class-blind uniform(0, 1) extra].
  FeatureTable table;
  std::vector<double> true_mean;
  std::vector<FacilityClass> facility_class;

  void write_ground_truth_csv(std::ostream& out) const {
    csv::write_row(out, {"facility_id", "period", "class", "true_mean"});
    for (std::size_t i = 0; i < table.size(); ++i) {
      csv::write_row(out, {table[i].facility_id, table[i].period.str(),
                           facility_class[i] == FacilityClass::kLow ? "low" : "high",
                           csv::format_number(true_mean[i])});
    }
  }
};

inline constexpr const char* kSynthProduct = "synth";

inline std::string synth_facility_id(std::size_t index, std::size_t count) {
  const std::size_t width = std::max<std::size_t>(3, std::to_string(count > 0 ? count - 1 : 0).size());
  std::string digits = std::to_string(index);
  return "F" + std::string(width - std::min(width, digits.size()), '0') + digits;
}

/// Facilities are numbered low class first. Per period and facility the draws
/// are, in order: inventory, extra feature, noise.
inline SynthData generate(const TwoClassScenario& scenario, std::size_t periods) {
  scenario.validate();
  require(periods >= 1, ErrorCategory::kConfig, "scenario needs at least one period");
  const std::size_t count = scenario.n_low + scenario.n_high;
  const double sd = scenario.resolved_noise_sd();
  Rng rng(scenario.seed);
  SynthData data{FeatureTable(2, scenario.start + static_cast<int>(periods - 1)), {}, {}};
  for (std::size_t p = 0; p < periods; ++p) {
    const YearMonth period = scenario.start + static_cast<int>(p);
    for (std::size_t f = 0; f < count; ++f) {
      const bool low = f < scenario.n_low;
      const auto& range = low ? scenario.range_low : scenario.range_high;
      const double inventory = rng.uniform(range.lo, range.hi);
      const double extra = rng.uniform();
      const double noise = rng.normal() * sd;
      const double mean = low ? scenario.intercept_low + scenario.slope_low * inventory
                              : scenario.intercept_high + scenario.slope_high * inventory;
      FeatureRow row;
      row.facility_id = synth_facility_id(f, count);
      row.product_id = kSynthProduct;
      row.period = period;
      row.features = {inventory, extra};
      row.target = sd > 0.0 ? std::max(mean + noise, 0.0) : std::max(mean, 0.0);
      data.table.add_row(std::move(row));
      data.true_mean.push_back(mean);
      data.facility_class.push_back(low ? FacilityClass::kLow : FacilityClass::kHigh);
    }
  }
  return data;
}

inline SynthData generate(const TwoClassScenario& scenario) { return generate(scenario, scenario.periods); }

/// Perfect-foresight shortfall: the greedy optimum on the realized demand.
inline double optimal_loss_oracle(std::span<const double> realized_demand, double budget) {
  AllocationProblem problem;
  problem.samples.emplace_back(realized_demand.begin(), realized_demand.end());
  problem.budget = budget;
  return solve_greedy(problem).objective;
}

}  // namespace medalloc

#endif  // MEDALLOC_SYNTH_HPP_
