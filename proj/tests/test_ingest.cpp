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

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "medalloc/core/random.hpp"
#include "medalloc/ingest.hpp"
#include "oracles.hpp"

namespace medalloc {
namespace {

constexpr const char* kHeader =
    "facility_id,product_id,period,region,opening_balance,quantity_received,quantity_dispensed,adjustment,"
    "closing_balance\n";

StockRecord record(std::string facility, YearMonth period, double dispensed, std::string region = "R") {
  StockRecord r;
  r.facility_id = std::move(facility);
  r.product_id = "amox";
  r.period = period;
  r.region = std::move(region);
  r.opening_balance = 100;
  r.quantity_dispensed = dispensed;
  r.closing_balance = 100 - dispensed;
  return r;
}

TEST(ParseRecords, WellFormedRow) {
  std::istringstream in(std::string(kHeader) + "F1,amox,2021-01,North,10,5,3,0,12\n");
  auto result = parse_records(in);
  ASSERT_EQ(result.records.size(), 1u);
  EXPECT_TRUE(result.rejects.empty());
  const auto& r = result.records[0];
  EXPECT_EQ(r.facility_id, "F1");
  EXPECT_EQ(r.period, YearMonth(2021, 1));
  EXPECT_EQ(r.region, "North");
  EXPECT_EQ(r.demand(), 3.0);
  EXPECT_TRUE(r.balanced());
}

TEST(ParseRecords, NonNumericOpeningBalanceIsRejectedWithLine) {
  std::istringstream in(std::string(kHeader) + "F1,amox,2021-01,North,ten,5,3,0,12\n");
  auto result = parse_records(in);
  EXPECT_TRUE(result.records.empty());
  ASSERT_EQ(result.rejects.size(), 1u);
  EXPECT_EQ(result.rejects[0].line, 2u);
  EXPECT_NE(result.rejects[0].reason.find("opening_balance"), std::string::npos);
}

TEST(ParseRecords, MissingClosingCellRejectsOnlyThatRow) {
  std::istringstream in(std::string(kHeader) +
                        "F1,amox,2021-01,N,10,5,3,0,12\n"
                        "F1,amox,2021-02,N,12,0,2,0,\n"
                        "F1,amox,2021-03,N,10,0,0,0,10\n");
  auto result = parse_records(in);
  EXPECT_EQ(result.records.size(), 2u);
  ASSERT_EQ(result.rejects.size(), 1u);
  EXPECT_EQ(result.rejects[0].line, 3u);
}

TEST(ParseRecords, MissingColumnNamesTheColumn) {
  std::istringstream in("facility_id,product_id,period,opening_balance\nF1,a,2021-01,1\n");
  try {
    parse_records(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kSchema);
    EXPECT_NE(std::string(e.what()).find("quantity_received"), std::string::npos);
  }
}

TEST(ParseRecords, EmptyFileIsEmptyInput) {
  std::istringstream in("");
  try {
    parse_records(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kEmptyInput);
  }
}

TEST(ParseRecords, SchemaRenamesColumns) {
  std::istringstream cfg_in("column.facility_id = orgunit\ncolumn.quantity_dispensed = consumed\n");
  auto schema = ColumnSchema::from_config(KeyValueConfig::parse(cfg_in));
  std::istringstream in(
      "orgunit,product_id,period,opening_balance,quantity_received,consumed,adjustment,closing_balance\n"
      "F9,amox,202105,4,0,1,0,3\n");
  auto result = parse_records(in, schema);
  ASSERT_EQ(result.records.size(), 1u);
  EXPECT_EQ(result.records[0].facility_id, "F9");
  EXPECT_EQ(result.records[0].region, "");
  EXPECT_EQ(result.records[0].period, YearMonth(2021, 5));
}

TEST(CleanRecords, BalancedRecordIsKept) {
  StockRecord r = record("F", YearMonth(2021, 1), 3);
  r.opening_balance = 10;
  r.quantity_received = 5;
  r.closing_balance = 12;
  auto out = clean_records(std::vector<StockRecord>{r});
  EXPECT_EQ(out.kept.size(), 1u);
  EXPECT_TRUE(out.excluded.empty());
}

TEST(CleanRecords, AllZeroIsTagged) {
  StockRecord r;
  r.facility_id = "F";
  r.product_id = "p";
  auto out = clean_records(std::vector<StockRecord>{r});
  ASSERT_EQ(out.excluded.size(), 1u);
  EXPECT_EQ(out.excluded[0].reason, ExclusionReason::kAllZero);
}

TEST(CleanRecords, OutlierAgainstSeriesMedian) {
  std::vector<StockRecord> rs;
  const std::vector<double> demand{18, 20, 22, 19, 21, 900, 20};
  for (std::size_t i = 0; i < demand.size(); ++i) {
    StockRecord r = record("F", YearMonth(2021, 1) + static_cast<int>(i), demand[i]);
    r.opening_balance = 1000;
    r.closing_balance = 1000 - demand[i];
    rs.push_back(r);
  }
  std::vector<double> positive;
  for (double d : demand) {
    if (d != 900) positive.push_back(d);
  }
  ASSERT_EQ(oracles::median(positive), 20.0);
  auto out = clean_records(rs, 10.0);
  ASSERT_EQ(out.excluded.size(), 1u);
  EXPECT_EQ(out.excluded[0].reason, ExclusionReason::kOutlier);
  EXPECT_EQ(out.excluded[0].record.demand(), 900.0);
  EXPECT_EQ(out.excluded[0].input_index, 5u);
}

TEST(CleanRecords, RejectsMultiplierAtMostOne) {
  EXPECT_THROW(clean_records(std::vector<StockRecord>{}, 1.0), Error);
  EXPECT_TRUE(clean_records(std::vector<StockRecord>{}).kept.empty());
}

TEST(CleanRecords, FixtureFile) {
  std::ifstream in(std::string(MEDALLOC_TEST_DATA) + "/cleaning_fixture.csv");
  ASSERT_TRUE(in.good());
  auto parsed = parse_records(in);
  ASSERT_EQ(parsed.records.size(), 4u);
  auto out = clean_records(parsed.records);
  ASSERT_EQ(out.kept.size(), 1u);
  EXPECT_EQ(out.kept[0].period, YearMonth(2021, 1));
  std::map<std::string, int> tags;
  for (const auto& e : out.excluded) ++tags[std::string(reason_name(e.reason))];
  EXPECT_EQ(tags, (std::map<std::string, int>{{"all_zero", 1}, {"outlier", 1}, {"unbalanced", 1}}));
}

std::vector<StockRecord> random_ledger(Rng& rng) {
  std::vector<StockRecord> rs;
  const int facilities = 1 + static_cast<int>(rng.index(4));
  for (int f = 0; f < facilities; ++f) {
    const int months = 1 + static_cast<int>(rng.index(12));
    for (int m = 0; m < months; ++m) {
      StockRecord r = record("F" + std::to_string(f), YearMonth(2020, 1) + m, std::floor(rng.uniform(0, 30)));
      const double u = rng.uniform();
      if (u < 0.1) {
        r.closing_balance += 1;
      } else if (u < 0.2) {
        r.opening_balance = r.quantity_dispensed = r.closing_balance = 0;
      } else if (u < 0.3) {
        r.quantity_dispensed = 500 + static_cast<double>(rng.index(500));
        r.opening_balance = 2000;
        r.closing_balance = 2000 - r.quantity_dispensed;
      }
      rs.push_back(r);
    }
  }
  return rs;
}

TEST(CleanRecords, IdempotentAndPartitioning) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    auto rs = random_ledger(rng);
    auto once = clean_records(rs);
    EXPECT_EQ(once.kept.size() + once.excluded.size(), rs.size());
    std::vector<std::size_t> seen;
    for (const auto& e : once.excluded) seen.push_back(e.input_index);
    std::sort(seen.begin(), seen.end());
    EXPECT_TRUE(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
    auto twice = clean_records(once.kept);
    EXPECT_TRUE(twice.excluded.empty());
    ASSERT_EQ(twice.kept.size(), once.kept.size());
    for (std::size_t i = 0; i < once.kept.size(); ++i) {
      EXPECT_EQ(twice.kept[i].period, once.kept[i].period);
      EXPECT_EQ(twice.kept[i].facility_id, once.kept[i].facility_id);
    }
  }
}

TEST(BuildFeatures, DirectReadout) {
  std::vector<StockRecord> rs{record("F", YearMonth(2021, 1), 2), record("F", YearMonth(2021, 2), 3),
                              record("F", YearMonth(2021, 3), 4)};
  auto t = build_features(rs, 2, YearMonth(2021, 3));
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t.dim(), 7u);
  EXPECT_EQ(t[0].features, (std::vector<double>{3, 2, 1, 1, 3, 2021, 0}));
  EXPECT_EQ(t[0].target, 4.0);
}

TEST(BuildFeatures, MissingMonthUsesSentinelAndFlag) {
  std::vector<StockRecord> rs{record("F", YearMonth(2021, 1), 2), record("F", YearMonth(2021, 3), 4)};
  auto t = build_features(rs, 2, YearMonth(2021, 3));
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0].features[0], kMissingLag);
  EXPECT_EQ(t[0].features[1], 2.0);
  EXPECT_EQ(t[0].features[2], 0.0);
  EXPECT_EQ(t[0].features[3], 1.0);
}

TEST(BuildFeatures, MultitaskShapeAndRegionCodes) {
  std::vector<StockRecord> rs{record("F1", YearMonth(2021, 1), 2, "South"),
                              record("F2", YearMonth(2021, 1), 5, "North")};
  auto t = build_features(rs, 10, YearMonth(2021, 1));
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t.dim(), 23u);
  EXPECT_EQ(t[0].features.size(), t[1].features.size());
  EXPECT_EQ(t[0].features[22], 1.0);  // South sorts after North
  EXPECT_EQ(t[1].features[22], 0.0);
  for (const auto& row : t.rows()) {
    for (double v : row.features) EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(BuildFeatures, AsOfBeforeAllRecordsIsEmptyInput) {
  std::vector<StockRecord> rs{record("F", YearMonth(2021, 5), 2)};
  try {
    build_features(rs, 2, YearMonth(2021, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kEmptyInput);
  }
}

TEST(BuildFeatures, DuplicateRecordsAreInvalid) {
  std::vector<StockRecord> rs{record("F", YearMonth(2021, 5), 2), record("F", YearMonth(2021, 5), 3)};
  EXPECT_THROW(build_features(rs, 2, YearMonth(2021, 5)), Error);
}

TEST(BuildFeatures, ExtraHookAppendsColumns) {
  std::vector<StockRecord> rs{record("F", YearMonth(2021, 1), 2), record("F", YearMonth(2021, 2), 6)};
  FeatureOptions options;
  options.lag_months = 1;
  options.extra_dim = 1;
  options.extra = [](const SeriesView& view, std::span<double> out) {
    out[0] = static_cast<double>(view.demand_history.size());
  };
  auto t = build_features(rs, options, YearMonth(2021, 2));
  ASSERT_EQ(t.dim(), 6u);
  EXPECT_EQ(t[0].features.back(), 2.0);
  EXPECT_EQ(options.names().back(), "extra_0");
}

FeatureTable three_month_table() {
  std::vector<StockRecord> rs;
  for (int f = 0; f < 2; ++f) {
    for (int m = 1; m <= 3; ++m) rs.push_back(record("F" + std::to_string(f), YearMonth(2021, m), m + f));
  }
  FeatureOptions options;
  options.lag_months = 1;
  return build_feature_panel(rs, options, YearMonth(2021, 1), YearMonth(2021, 3));
}

TEST(SplitTrainEval, PartitionsByPeriod) {
  auto table = three_month_table();
  ASSERT_EQ(table.size(), 6u);
  auto [train, eval] = split_train_eval(table, YearMonth(2021, 3));
  EXPECT_EQ(train.size(), 4u);
  EXPECT_EQ(eval.size(), 2u);
  for (const auto& r : train.rows()) EXPECT_LT(r.period, YearMonth(2021, 3));
  for (const auto& r : eval.rows()) EXPECT_EQ(r.period, YearMonth(2021, 3));
}

TEST(SplitTrainEval, EarliestPeriodLeavesTrainEmpty) {
  auto [train, eval] = split_train_eval(three_month_table(), YearMonth(2021, 1));
  EXPECT_TRUE(train.empty());
  EXPECT_EQ(eval.size(), 2u);
}

TEST(SplitTrainEval, AbsentPeriodIsNotFound) {
  try {
    split_train_eval(three_month_table(), YearMonth(2022, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kNotFound);
  }
}

}  // namespace
}  // namespace medalloc
