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

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "medalloc/pipeline.hpp"

namespace medalloc {
namespace {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("medalloc_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RunConfig fast_synth(std::uint64_t seed) {
  RunConfig c;
  c.seed = seed;
  c.forest.trees = 20;
  c.forest.max_depth = 8;
  c.scenario.periods = 8;
  return c;
}

double pct(const EvalReport& r, const char* policy) { return r.find("synth", policy)->unmet_pct.value(); }

TEST(Metrics, UnmetDemandPct) {
  const std::vector<double> xi{4, 6};
  EXPECT_EQ(unmet_demand_pct(xi, xi), 0.0);
  EXPECT_EQ(unmet_demand_pct(std::vector<double>{0, 0}, xi), 100.0);
  EXPECT_EQ(unmet_demand_pct(std::vector<double>{2, 6}, xi), 20.0);
  EXPECT_FALSE(unmet_demand_pct(std::vector<double>{0}, std::vector<double>{0}).has_value());
}

TEST(Metrics, Mdape) {
  EXPECT_EQ(mdape(std::vector<double>{10, 30}, std::vector<double>{20, 30}), 25.0);
  EXPECT_EQ(mdape(std::vector<double>{1, 5, 9}, std::vector<double>{0, 4, 10}), 17.5);
  EXPECT_FALSE(mdape(std::vector<double>{1}, std::vector<double>{0}).has_value());
}

TEST(RunConfig, ParsesKeys) {
  std::istringstream in(
      "learner = linear\nbudget.fraction = 0.4\nweights.jacobian = full_fd\nforest.trees = 7\n"
      "synth.n_high = 0\nseed = 12\neval.period = 2021-06\n");
  auto c = RunConfig::from_config(KeyValueConfig::parse(in));
  EXPECT_EQ(c.learner, LearnerKind::kLinear);
  EXPECT_EQ(c.resolved_fraction(), 0.4);
  EXPECT_EQ(c.weights.jacobian, JacobianMode::kFullFd);
  EXPECT_EQ(c.forest.trees, 7u);
  EXPECT_EQ(c.scenario.n_high, 0u);
  EXPECT_EQ(c.seed, 12u);
  EXPECT_EQ(c.eval_period, YearMonth(2021, 6));
  EXPECT_EQ(RunConfig{}.resolved_fraction(), 0.5);
}

TEST(RunConfig, RejectsUnknownKeysAndBadValues) {
  for (const char* text : {"forest.tress = 3\n", "learner = svm\n", "budget.fraction = 1.5\n",
                           "weights.jacobian = exact\n", "budget.rule = absolute\n"}) {
    std::istringstream in(text);
    try {
      Experiment e(RunConfig::from_config(KeyValueConfig::parse(in)));
      FAIL() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.category(), ErrorCategory::kConfig) << text;
    }
  }
}

TEST(Experiment, PerfectInformationFullBudget) {
  RunConfig c = fast_synth(1);
  c.scenario.n_high = 0;
  c.scenario.noise_sd = 0.0;
  c.scenario.periods = 24;
  c.budget_fraction = 1.0;
  c.forest.max_depth = 64;
  c.forest.min_leaf_weight = 1;
  c.forest.bootstrap = false;
  c.forest.features_per_split = 2;
  c.forest.trees = 1;
  Experiment e(c);
  auto report = e.evaluate(std::vector<PolicyRun>{e.run_decision_blind(), e.run_oracle()});
  EXPECT_LT(pct(report, kDecisionBlind), 0.5);
  EXPECT_EQ(pct(report, kOracle), 0.0);
}

TEST(Experiment, ZeroBudgetLeavesAllDemandUnmet) {
  RunConfig c = fast_synth(2);
  c.budget_fraction = 0.0;
  Experiment e(c);
  auto report = e.compare();
  for (const auto* policy : {kDecisionBlind, kDecisionAware, kRollingAverage, kOracle}) {
    EXPECT_EQ(pct(report, policy), 100.0);
  }
}

TEST(Experiment, EqualWeightsReproduceDecisionBlind) {
  // A zero training budget makes every gradient -1, so every weight is 1.
  RunConfig c = fast_synth(3);
  c.budget_fraction = 0.0;
  Experiment e(c);
  for (const auto& entry : e.weight_report().entries) EXPECT_EQ(entry.final_weight, 1.0);
  auto blind = e.run_decision_blind();
  auto aware = e.run_decision_aware();
  EXPECT_EQ(blind.forecast, aware.forecast);
  EXPECT_EQ(blind.allocation, aware.allocation);
}

TEST(Experiment, OracleIsALowerBound) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    for (auto learner : {LearnerKind::kForest, LearnerKind::kLinear}) {
      RunConfig c = fast_synth(seed);
      c.learner = learner;
      Experiment e(c);
      auto report = e.compare();
      EXPECT_TRUE(report.oracle_dominates());
      EXPECT_GT(pct(report, kDecisionBlind), pct(report, kOracle));
      for (const auto& m : report.metrics) {
        EXPECT_LE(m.allocated, m.budget + 1e-9);
        EXPECT_GE(*m.unmet_pct, 0.0);
        EXPECT_LE(*m.unmet_pct, 100.0);
      }
    }
  }
}

TEST(Experiment, ConfigDiffIsOnlyTheWeights) {
  Experiment e(fast_synth(4));
  auto report = e.compare();
  auto diff = report.config_diff();
  ASSERT_EQ(diff.size(), 1u);
  EXPECT_EQ(diff.begin()->first, "training_weights");
  EXPECT_EQ(diff.begin()->second.first, "uniform");
  EXPECT_EQ(report.to_json()["config_diff"].size(), 1u);
}

TEST(Experiment, CompareIsDeterministic) {
  auto run = [] {
    RunConfig c = fast_synth(5);
    c.threads = 3;
    Experiment e(c);
    return e.compare().to_json().dump();
  };
  EXPECT_EQ(run(), run());
}

TEST(Experiment, RollingAverageOnTableInput) {
  auto dir = temp_dir("rolling");
  FeatureTable t(1);
  const std::vector<double> history{100, 2, 4, 6, 9};
  for (std::size_t m = 0; m < history.size(); ++m) {
    t.add_row({"F", "amox", YearMonth(2021, 1) + static_cast<int>(m), {double(m)}, history[m], 1});
    t.add_row({"G", "amox", YearMonth(2021, 1) + static_cast<int>(m), {double(m)}, 5, 1});
  }
  t.add_row({"H", "amox", YearMonth(2021, 5), {4}, 3, 1});  // no history
  {
    std::ofstream out(dir / "table.csv");
    t.write_csv(out);
  }
  RunConfig c;
  c.source = InputSource::kTable;
  c.input_path = (dir / "table.csv").string();
  c.learner = LearnerKind::kLinear;
  c.budget_fraction = 1.0;
  Experiment e(c);
  auto run = e.run_rolling_average();
  ASSERT_EQ(e.eval().size(), 3u);
  EXPECT_EQ(run.forecast[0], 4.0);
  EXPECT_EQ(run.forecast[1], 5.0);
  EXPECT_EQ(run.forecast[2], 0.0);
  EXPECT_EQ(run.allocation, (std::vector<double>{4.0, 5.0, 0.0}));
}

TEST(Experiment, RecordsInputEndToEnd) {
  auto dir = temp_dir("records");
  {
    std::ofstream out(dir / "ledger.csv");
    out << "facility_id,product_id,period,region,opening_balance,quantity_received,quantity_dispensed,adjustment,"
           "closing_balance\n";
    for (int f = 0; f < 6; ++f) {
      for (int m = 0; m < 14; ++m) {
        const int d = 5 + f + (m % 3);
        out << "F" << f << ",amox," << (YearMonth(2020, 1) + m).str() << ",R" << (f % 2) << ",100,0," << d << ",0,"
            << 100 - d << "\n";
      }
    }
    out << "F0,amox,2021-03,R0,1,1,1,1,1\n";  // unbalanced
  }
  RunConfig c;
  c.source = InputSource::kRecords;
  c.input_path = (dir / "ledger.csv").string();
  c.forest.trees = 10;
  c.lag_months = 3;
  Experiment e(c);
  EXPECT_EQ(e.dataset().exclusions.size(), 1u);
  EXPECT_EQ(e.eval_period(), YearMonth(2021, 2));
  EXPECT_EQ(e.eval().size(), 6u);
  EXPECT_EQ(e.train().dim(), 9u);
  auto report = e.compare();
  EXPECT_TRUE(report.oracle_dominates());
  auto out = temp_dir("records_out");
  write_compare_outputs(out, report, e.weight_report());
  for (const char* f : {"report.json", "policies.csv", "facilities.csv", "weights.csv"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
}

TEST(Experiment, ZeroDemandProductIsNotApplicable) {
  auto dir = temp_dir("zero");
  FeatureTable t(1);
  for (int m = 0; m < 3; ++m) t.add_row({"F", "p", YearMonth(2021, 1) + m, {double(m)}, m < 2 ? 1.0 : 0.0, 1});
  {
    std::ofstream out(dir / "table.csv");
    t.write_csv(out);
  }
  RunConfig c;
  c.source = InputSource::kTable;
  c.input_path = (dir / "table.csv").string();
  c.learner = LearnerKind::kLinear;
  Experiment e(c);
  auto report = e.compare();
  EXPECT_FALSE(report.find("p", kOracle)->unmet_pct.has_value());
  EXPECT_TRUE(report.to_json()["products"]["p"]["policies"]["oracle"]["unmet_demand_pct"].is_null());
  std::ostringstream csv;
  report.write_policies_csv(csv);
  EXPECT_NE(csv.str().find("NA"), std::string::npos);
}

TEST(AnyModel, JsonDispatch) {
  LinearModel lin(1.5, {2.0});
  auto back = AnyModel::from_json(AnyModel(lin).to_json());
  EXPECT_EQ(back.predict_point(std::vector<double>{1}), 3.5);
  EXPECT_THROW(AnyModel::from_json(nlohmann::json::object()), Error);
}

}  // namespace
}  // namespace medalloc
