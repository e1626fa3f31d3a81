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

// Stock-ledger ingestion: CSV parsing, cleaning rules and lag-feature
// construction for the multitask demand model.

#ifndef MEDALLOC_INGEST_HPP_
#define MEDALLOC_INGEST_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "medalloc/core/csv.hpp"
#include "medalloc/core/error.hpp"
#include "medalloc/core/kv_config.hpp"
#include "medalloc/core/period.hpp"
#include "medalloc/feature_table.hpp"

namespace medalloc {

/// One (facility, product, month) ledger line.
struct StockRecord {
  std::string facility_id;
  std::string product_id;
  YearMonth period;
  std::string region;
  double opening_balance = 0.0;
  double quantity_received = 0.0;
  double quantity_dispensed = 0.0;
  double adjustment = 0.0;
  double closing_balance = 0.0;

  /// Demand is the dispensed quantity: the only flow observed as consumption.
  double demand() const { return quantity_dispensed; }

  // The identity is exact over the reals; the tolerance only absorbs binary
  // rounding of decimal inputs.
  bool balanced() const {
    const double lhs = opening_balance + quantity_received - quantity_dispensed + adjustment;
    const double scale = std::max({1.0, std::abs(opening_balance), std::abs(quantity_received),
                                   std::abs(quantity_dispensed), std::abs(adjustment),
                                   std::abs(closing_balance)});
    return std::abs(lhs - closing_balance) <= 1e-9 * scale;
  }

  bool all_zero() const {
    return opening_balance == 0.0 && quantity_received == 0.0 && quantity_dispensed == 0.0 &&
           adjustment == 0.0 && closing_balance == 0.0;
  }
};

enum class RecordField {
  kFacilityId,
  kProductId,
  kPeriod,
  kRegion,
  kOpeningBalance,
  kQuantityReceived,
  kQuantityDispensed,
  kAdjustment,
  kClosingBalance,
};

inline constexpr std::array<RecordField, 9> kAllRecordFields = {
    RecordField::kFacilityId,       RecordField::kProductId,         RecordField::kPeriod,
    RecordField::kRegion,           RecordField::kOpeningBalance,    RecordField::kQuantityReceived,
    RecordField::kQuantityDispensed, RecordField::kAdjustment,       RecordField::kClosingBalance,
};

inline std::string_view field_key(RecordField field) {
  switch (field) {
    case RecordField::kFacilityId: return "facility_id";
    case RecordField::kProductId: return "product_id";
    case RecordField::kPeriod: return "period";
    case RecordField::kRegion: return "region";
    case RecordField::kOpeningBalance: return "opening_balance";
    case RecordField::kQuantityReceived: return "quantity_received";
    case RecordField::kQuantityDispensed: return "quantity_dispensed";
    case RecordField::kAdjustment: return "adjustment";
    case RecordField::kClosingBalance: return "closing_balance";
  }
  return "";
}

/// Maps record fields to CSV header names. Region is optional: when its column
/// is absent every record gets an empty region.
struct ColumnSchema {
  std::map<RecordField, std::string> columns;

  static ColumnSchema defaults() {
    ColumnSchema schema;
    for (RecordField f : kAllRecordFields) schema.columns[f] = std::string(field_key(f));
    return schema;
  }

  /// Reads `column.<field> = <header name>` entries over the defaults.
  static ColumnSchema from_config(const KeyValueConfig& config) {
    ColumnSchema schema = defaults();
    for (const auto& [key, value] : config.with_prefix("column.")) {
      auto it = std::find_if(kAllRecordFields.begin(), kAllRecordFields.end(),
                             [&](RecordField f) { return field_key(f) == key; });
      if (it == kAllRecordFields.end()) fail(ErrorCategory::kConfig, "unknown schema field 'column." + key + "'");
      schema.columns[*it] = value;
    }
    return schema;
  }
};

struct RejectedRow {
  std::size_t line = 0;
  std::string reason;
  std::vector<std::string> fields;
};

struct ParseResult {
  std::vector<StockRecord> records;
  std::vector<RejectedRow> rejects;
};

inline ParseResult parse_records(std::istream& in, const ColumnSchema& schema = ColumnSchema::defaults()) {
  csv::Reader reader(in);
  std::vector<std::string> header;
  if (!reader.next(header) || (header.size() == 1 && header[0].empty())) {
    fail(ErrorCategory::kEmptyInput, "input CSV is empty");
  }
  if (!header.empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0].erase(0, 3);

  std::map<RecordField, std::size_t> index;
  for (RecordField f : kAllRecordFields) {
    auto mapped = schema.columns.find(f);
    const std::string name = mapped == schema.columns.end() ? std::string(field_key(f)) : mapped->second;
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      if (f == RecordField::kRegion) continue;
      fail(ErrorCategory::kSchema, "missing required column '" + name + "' (field " +
                                       std::string(field_key(f)) + ")");
    }
    index[f] = static_cast<std::size_t>(it - header.begin());
  }

  ParseResult result;
  std::vector<std::string> fields;
  while (reader.next(fields)) {
    if (fields.size() == 1 && fields[0].empty()) continue;
    auto reject = [&](std::string reason) {
      result.rejects.push_back({reader.line(), std::move(reason), fields});
    };
    auto cell = [&](RecordField f) -> std::optional<std::string_view> {
      auto it = index.find(f);
      if (it == index.end()) return std::string_view{};
      if (it->second >= fields.size()) return std::nullopt;
      return std::string_view(fields[it->second]);
    };

    StockRecord record;
    bool ok = true;
    for (RecordField f : {RecordField::kFacilityId, RecordField::kProductId}) {
      auto value = cell(f);
      if (!value || value->empty()) {
        reject("missing " + std::string(field_key(f)));
        ok = false;
        break;
      }
      (f == RecordField::kFacilityId ? record.facility_id : record.product_id) = std::string(*value);
    }
    if (!ok) continue;

    auto period_cell = cell(RecordField::kPeriod);
    auto period = period_cell ? YearMonth::parse(*period_cell) : std::nullopt;
    if (!period) {
      reject("unparseable period");
      continue;
    }
    record.period = *period;
    record.region = std::string(cell(RecordField::kRegion).value_or(""));

    const std::pair<RecordField, double StockRecord::*> numeric[] = {
        {RecordField::kOpeningBalance, &StockRecord::opening_balance},
        {RecordField::kQuantityReceived, &StockRecord::quantity_received},
        {RecordField::kQuantityDispensed, &StockRecord::quantity_dispensed},
        {RecordField::kAdjustment, &StockRecord::adjustment},
        {RecordField::kClosingBalance, &StockRecord::closing_balance},
    };
    for (const auto& [field, member] : numeric) {
      auto text = cell(field);
      auto value = text ? csv::parse_number(*text) : std::nullopt;
      if (!value) {
        reject("unparseable " + std::string(field_key(field)));
        ok = false;
        break;
      }
      if (field != RecordField::kAdjustment && *value < 0.0) {
        reject("negative " + std::string(field_key(field)));
        ok = false;
        break;
      }
      record.*member = *value;
    }
    if (ok) result.records.push_back(std::move(record));
  }
  return result;
}

enum class ExclusionReason { kUnbalanced, kAllZero, kOutlier };

inline std::string_view reason_name(ExclusionReason reason) {
  switch (reason) {
    case ExclusionReason::kUnbalanced: return "unbalanced";
    case ExclusionReason::kAllZero: return "all_zero";
    case ExclusionReason::kOutlier: return "outlier";
  }
  return "";
}

struct ExcludedRecord {
  StockRecord record;
  ExclusionReason reason;
  std::size_t input_index = 0;
};

struct CleanResult {
  std::vector<StockRecord> kept;
  std::vector<ExcludedRecord> excluded;
};

namespace detail {

inline double median_of(std::vector<double>& values) {
  const std::size_t n = values.size();
  std::sort(values.begin(), values.end());
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace detail

/// Applies the three cleaning rules in order: stock-flow identity, all-zero
/// ledger lines, then demand outliers. A record is an outlier when its demand
/// exceeds `outlier_multiplier` times the median positive demand of the other
/// surviving records in its (facility, product) series. Outlier removal is
/// repeated until no record qualifies, which makes the whole pass idempotent.
inline CleanResult clean_records(std::span<const StockRecord> records, double outlier_multiplier = 10.0) {
  require(outlier_multiplier > 1.0 && std::isfinite(outlier_multiplier), ErrorCategory::kConfig,
          "outlier multiplier must be a finite value > 1");

  std::vector<std::optional<ExclusionReason>> verdict(records.size());
  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> series;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].balanced()) {
      verdict[i] = ExclusionReason::kUnbalanced;
    } else if (records[i].all_zero()) {
      verdict[i] = ExclusionReason::kAllZero;
    } else {
      series[{records[i].facility_id, records[i].product_id}].push_back(i);
    }
  }

  for (auto& [key, members] : series) {
    while (true) {
      std::vector<std::size_t> flagged;
      std::vector<double> others;
      for (std::size_t i : members) {
        const double d = records[i].demand();
        if (d <= 0.0) continue;
        others.clear();
        for (std::size_t j : members) {
          if (j != i && records[j].demand() > 0.0) others.push_back(records[j].demand());
        }
        if (others.empty()) continue;
        if (d > outlier_multiplier * detail::median_of(others)) flagged.push_back(i);
      }
      if (flagged.empty()) break;
      for (std::size_t i : flagged) verdict[i] = ExclusionReason::kOutlier;
      std::erase_if(members, [&](std::size_t i) { return verdict[i].has_value(); });
    }
  }

  CleanResult result;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (verdict[i]) {
      result.excluded.push_back({records[i], *verdict[i], i});
    } else {
      result.kept.push_back(records[i]);
    }
  }
  return result;
}

inline void write_rejects_csv(std::ostream& out, std::span<const RejectedRow> rejects) {
  csv::write_row(out, {"line", "reason", "raw"});
  for (const auto& r : rejects) {
    std::string raw;
    for (std::size_t i = 0; i < r.fields.size(); ++i) {
      if (i) raw += ',';
      raw += r.fields[i];
    }
    csv::write_row(out, {std::to_string(r.line), r.reason, raw});
  }
}

inline void write_exclusions_csv(std::ostream& out, std::span<const ExcludedRecord> excluded) {
  csv::write_row(out, {"facility_id", "product_id", "period", "region", "opening_balance", "quantity_received",
                       "quantity_dispensed", "adjustment", "closing_balance", "reason"});
  for (const auto& e : excluded) {
    const auto& r = e.record;
    csv::write_row(out, {r.facility_id, r.product_id, r.period.str(), r.region,
                         csv::format_number(r.opening_balance), csv::format_number(r.quantity_received),
                         csv::format_number(r.quantity_dispensed), csv::format_number(r.adjustment),
                         csv::format_number(r.closing_balance), std::string(reason_name(e.reason))});
  }
}

/// What a custom feature hook sees for one series at one forecast month.
struct SeriesView {
  const std::string& facility_id;
  const std::string& product_id;
  const std::string& region;
  YearMonth as_of;
  const std::map<YearMonth, double>& demand_history;  // all months, including as_of
};

/// Layout per row: lag demands (most recent first, -1 when missing), one 0/1
/// availability flag per lag, month of year, year, integer region code, then
/// `extra_dim` values produced by the optional hook.
struct FeatureOptions {
  std::size_t lag_months = 10;
  std::size_t extra_dim = 0;
  std::function<void(const SeriesView&, std::span<double>)> extra;

  std::size_t dim() const { return 2 * lag_months + 3 + extra_dim; }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (std::size_t l = 1; l <= lag_months; ++l) out.push_back("demand_lag_" + std::to_string(l));
    for (std::size_t l = 1; l <= lag_months; ++l) out.push_back("has_lag_" + std::to_string(l));
    out.insert(out.end(), {"month", "year", "region_code"});
    for (std::size_t e = 0; e < extra_dim; ++e) out.push_back("extra_" + std::to_string(e));
    return out;
  }
};

inline constexpr double kMissingLag = -1.0;

namespace detail {

struct SeriesHistory {
  std::string facility_id;
  std::string product_id;
  std::map<YearMonth, double> demand;
  std::map<YearMonth, std::string> region;
};

struct SeriesIndex {
  std::map<std::pair<std::string, std::string>, SeriesHistory> series;
  std::map<std::string, int> region_codes;
  YearMonth earliest;
  YearMonth latest;

  explicit SeriesIndex(std::span<const StockRecord> records) {
    require(!records.empty(), ErrorCategory::kEmptyInput, "no records to build features from");
    std::set<std::string> regions;
    earliest = latest = records.front().period;
    for (const auto& r : records) {
      auto& s = series[{r.facility_id, r.product_id}];
      s.facility_id = r.facility_id;
      s.product_id = r.product_id;
      if (!s.demand.emplace(r.period, r.demand()).second) {
        fail(ErrorCategory::kInvalidInput, "duplicate record for facility '" + r.facility_id + "', product '" +
                                               r.product_id + "', period " + r.period.str());
      }
      s.region[r.period] = r.region;
      regions.insert(r.region);
      earliest = std::min(earliest, r.period);
      latest = std::max(latest, r.period);
    }
    int code = 0;
    for (const auto& name : regions) region_codes[name] = code++;
  }

  void append_rows(YearMonth as_of, const FeatureOptions& options, FeatureTable& table) const {
    for (const auto& [key, s] : series) {
      auto at = s.demand.find(as_of);
      if (at == s.demand.end()) continue;
      FeatureRow row;
      row.facility_id = s.facility_id;
      row.product_id = s.product_id;
      row.period = as_of;
      row.target = at->second;
      row.features.assign(options.dim(), 0.0);
      const std::size_t lags = options.lag_months;
      for (std::size_t l = 1; l <= lags; ++l) {
        auto it = s.demand.find(as_of - static_cast<int>(l));
        row.features[l - 1] = it == s.demand.end() ? kMissingLag : it->second;
        row.features[lags + l - 1] = it == s.demand.end() ? 0.0 : 1.0;
      }
      const std::string& region = s.region.at(as_of);
      row.features[2 * lags] = as_of.month();
      row.features[2 * lags + 1] = as_of.year();
      row.features[2 * lags + 2] = region_codes.at(region);
      if (options.extra_dim > 0) {
        require(static_cast<bool>(options.extra), ErrorCategory::kConfig,
                "extra_dim > 0 but no extra feature hook is set");
        SeriesView view{s.facility_id, s.product_id, region, as_of, s.demand};
        options.extra(view, std::span<double>(row.features).subspan(2 * lags + 3));
      }
      table.add_row(std::move(row));
    }
  }
};

}  // namespace detail

/// One row per (facility, product) series that has a record at `as_of`.
inline FeatureTable build_features(std::span<const StockRecord> records, const FeatureOptions& options,
                                   YearMonth as_of) {
  require(options.lag_months >= 1, ErrorCategory::kConfig, "lag_months must be >= 1");
  detail::SeriesIndex index(records);
  if (as_of < index.earliest) {
    fail(ErrorCategory::kEmptyInput,
         "as_of " + as_of.str() + " precedes every record (earliest " + index.earliest.str() + ")");
  }
  FeatureTable table(options.dim(), as_of);
  index.append_rows(as_of, options, table);
  return table;
}

inline FeatureTable build_features(std::span<const StockRecord> records, std::size_t lag_months, YearMonth as_of) {
  FeatureOptions options;
  options.lag_months = lag_months;
  return build_features(records, options, as_of);
}

/// Stacks build_features over every month in [first, last]. Defaults to the
/// month after the earliest record through the latest record.
inline FeatureTable build_feature_panel(std::span<const StockRecord> records, const FeatureOptions& options,
                                        std::optional<YearMonth> first = std::nullopt,
                                        std::optional<YearMonth> last = std::nullopt) {
  require(options.lag_months >= 1, ErrorCategory::kConfig, "lag_months must be >= 1");
  detail::SeriesIndex index(records);
  const YearMonth from = first.value_or(index.earliest + 1);
  const YearMonth to = last.value_or(index.latest);
  require(from <= to, ErrorCategory::kConfig, "empty period range for the feature panel");
  if (to < index.earliest) fail(ErrorCategory::kEmptyInput, "panel range precedes every record");
  FeatureTable table(options.dim(), to);
  for (YearMonth m = from; m <= to; m = m + 1) index.append_rows(m, options, table);
  return table;
}

/// Rows at `eval_period` versus all strictly earlier rows. Later rows are in
/// neither output.
inline std::pair<FeatureTable, FeatureTable> split_train_eval(const FeatureTable& table, YearMonth eval_period) {
  FeatureTable train(table.dim(), eval_period - 1);
  FeatureTable eval(table.dim(), eval_period);
  for (const auto& row : table.rows()) {
    if (row.period < eval_period) {
      train.add_row(row);
    } else if (row.period == eval_period) {
      eval.add_row(row);
    }
  }
  if (eval.empty()) fail(ErrorCategory::kNotFound, "evaluation period " + eval_period.str() + " has no rows");
  return {std::move(train), std::move(eval)};
}

}  // namespace medalloc

#endif  // MEDALLOC_INGEST_HPP_
