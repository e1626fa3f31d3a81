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

#ifndef MEDALLOC_FEATURE_TABLE_HPP_
#define MEDALLOC_FEATURE_TABLE_HPP_

#include <cmath>
#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "medalloc/core/csv.hpp"
#include "medalloc/core/error.hpp"
#include "medalloc/core/period.hpp"

namespace medalloc {

struct FeatureRow {
  std::string facility_id;
  std::string product_id;
  YearMonth period;
  std::vector<double> features;
  double target = 0.0;
  double weight = 1.0;
};

/// Multitask training table: one row per (facility, product, period), all rows
/// sharing the same feature dimension. Invariants are checked on insertion.
class FeatureTable {
 public:
  FeatureTable() = default;
  explicit FeatureTable(std::size_t dim, std::optional<YearMonth> horizon = std::nullopt)
      : dim_(dim), horizon_(horizon) {}

  void add_row(FeatureRow row) {
    if (row.features.size() != dim_) {
      fail(ErrorCategory::kShape, "feature row has dimension " + std::to_string(row.features.size()) +
                                      ", table expects " + std::to_string(dim_));
    }
    for (double v : row.features) {
      require(std::isfinite(v), ErrorCategory::kInvalidInput, "non-finite feature value");
    }
    require(std::isfinite(row.target), ErrorCategory::kInvalidInput, "non-finite target");
    require(std::isfinite(row.weight) && row.weight >= 0.0, ErrorCategory::kInvalidInput,
            "weights must be finite and non-negative");
    if (horizon_ && row.period > *horizon_) {
      fail(ErrorCategory::kInvalidInput,
           "row period " + row.period.str() + " is beyond the table horizon " + horizon_->str());
    }
    rows_.push_back(std::move(row));
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }
  const std::optional<YearMonth>& horizon() const { return horizon_; }
  const std::vector<FeatureRow>& rows() const { return rows_; }
  const FeatureRow& operator[](std::size_t i) const { return rows_[i]; }

  void set_weight(std::size_t i, double weight) {
    require(std::isfinite(weight) && weight >= 0.0, ErrorCategory::kInvalidInput,
            "weights must be finite and non-negative");
    rows_[i].weight = weight;
  }

  /// Same header, no rows.
  FeatureTable empty_like() const { return FeatureTable(dim_, horizon_); }

  // CSV layout: facility_id, product_id, period, f_0..f_{d-1}, target, weight.
  void write_csv(std::ostream& out) const {
    std::vector<std::string> fields{"facility_id", "product_id", "period"};
    for (std::size_t j = 0; j < dim_; ++j) fields.push_back("f_" + std::to_string(j));
    fields.emplace_back("target");
    fields.emplace_back("weight");
    csv::write_row(out, fields);
    for (const auto& row : rows_) {
      fields.clear();
      fields.push_back(row.facility_id);
      fields.push_back(row.product_id);
      fields.push_back(row.period.str());
      for (double v : row.features) fields.push_back(csv::format_number(v));
      fields.push_back(csv::format_number(row.target));
      fields.push_back(csv::format_number(row.weight));
      csv::write_row(out, fields);
    }
  }

  static FeatureTable read_csv(std::istream& in) {
    csv::Reader reader(in);
    std::vector<std::string> fields;
    if (!reader.next(fields)) fail(ErrorCategory::kEmptyInput, "feature table CSV is empty");
    const std::size_t n = fields.size();
    if (n < 5 || fields[0] != "facility_id" || fields[1] != "product_id" || fields[2] != "period" ||
        fields[n - 2] != "target" || fields[n - 1] != "weight") {
      fail(ErrorCategory::kSchema,
           "feature table header must be facility_id,product_id,period,f_0..f_{d-1},target,weight");
    }
    const std::size_t dim = n - 5;
    for (std::size_t j = 0; j < dim; ++j) {
      if (fields[3 + j] != "f_" + std::to_string(j)) {
        fail(ErrorCategory::kSchema, "feature table column " + std::to_string(3 + j) + " should be f_" +
                                         std::to_string(j));
      }
    }
    FeatureTable table(dim);
    std::optional<YearMonth> latest;
    while (reader.next(fields)) {
      if (fields.size() == 1 && fields[0].empty()) continue;
      const std::string where = "feature table line " + std::to_string(reader.line());
      require(fields.size() == n, ErrorCategory::kShape, where + ": wrong number of columns");
      FeatureRow row;
      row.facility_id = fields[0];
      row.product_id = fields[1];
      auto period = YearMonth::parse(fields[2]);
      require(period.has_value(), ErrorCategory::kInvalidInput, where + ": bad period");
      row.period = *period;
      row.features.resize(dim);
      for (std::size_t j = 0; j < dim; ++j) {
        auto v = csv::parse_number(fields[3 + j]);
        require(v.has_value(), ErrorCategory::kInvalidInput, where + ": bad feature value");
        row.features[j] = *v;
      }
      auto target = csv::parse_number(fields[n - 2]);
      auto weight = csv::parse_number(fields[n - 1]);
      require(target && weight, ErrorCategory::kInvalidInput, where + ": bad target or weight");
      row.target = *target;
      row.weight = *weight;
      if (!latest || row.period > *latest) latest = row.period;
      table.add_row(std::move(row));
    }
    table.horizon_ = latest;
    return table;
  }

 private:
  std::size_t dim_ = 0;
  std::optional<YearMonth> horizon_;
  std::vector<FeatureRow> rows_;
};

}  // namespace medalloc

#endif  // MEDALLOC_FEATURE_TABLE_HPP_
