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

// End-to-end experiments: load data, hold out one period, run every policy
// on per-product budgets and score the allocations against realized demand.

#ifndef MEDALLOC_PIPELINE_HPP_
#define MEDALLOC_PIPELINE_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "medalloc/allocator.hpp"
#include "medalloc/core/csv.hpp"
#include "medalloc/core/error.hpp"
#include "medalloc/core/kv_config.hpp"
#include "medalloc/core/period.hpp"
#include "medalloc/core/random.hpp"
#include "medalloc/decision_weights.hpp"
#include "medalloc/feature_table.hpp"
#include "medalloc/forest.hpp"
#include "medalloc/ingest.hpp"
#include "medalloc/linear_model.hpp"
#include "medalloc/synth.hpp"

namespace medalloc {

enum class InputSource { kSynth, kRecords, kTable };
enum class LearnerKind { kForest, kLinear };
enum class BudgetRule { kFraction, kAbsolute };

inline constexpr const char* kDecisionBlind = "decision_blind";
inline constexpr const char* kDecisionAware = "decision_aware";
inline constexpr const char* kRollingAverage = "rolling_average";
inline constexpr const char* kOracle = "oracle";

struct RunConfig {
  InputSource source = InputSource::kSynth;
  std::string input_path;
  ColumnSchema schema = ColumnSchema::defaults();
  std::size_t lag_months = 10;
  double outlier_multiplier = 10.0;
  TwoClassScenario scenario;
  /// Unset means the latest period in the data.
  std::optional<YearMonth> eval_period;
  BudgetRule budget_rule = BudgetRule::kFraction;
  /// Unset means the scenario's fraction for synthetic input, 0.7 otherwise.
  std::optional<double> budget_fraction;
  std::map<std::string, double> absolute_budgets;
  LearnerKind learner = LearnerKind::kForest;
  ForestParams forest;
  WeightConfig weights;
  std::size_t rolling_window = 3;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  double resolved_fraction() const {
    if (budget_fraction) return *budget_fraction;
    return source == InputSource::kSynth ? scenario.budget_fraction : 0.7;
  }

  void validate() const {
    if (source != InputSource::kSynth) {
      require(!input_path.empty(), ErrorCategory::kConfig, "input.path is required for file input");
    } else {
      scenario.validate();
    }
    require(lag_months >= 1, ErrorCategory::kConfig, "ingest.lag_months must be >= 1");
    require(outlier_multiplier > 1.0, ErrorCategory::kConfig, "ingest.outlier_multiplier must exceed 1");
    if (budget_rule == BudgetRule::kFraction) {
      const double rho = resolved_fraction();
      require(std::isfinite(rho) && rho >= 0.0 && rho <= 1.0, ErrorCategory::kConfig,
              "budget.fraction must lie in [0, 1]");
    } else {
      require(!absolute_budgets.empty(), ErrorCategory::kConfig,
              "budget.rule = absolute needs budget.absolute.<product> entries");
      for (const auto& [product, value] : absolute_budgets) {
        require(std::isfinite(value) && value >= 0.0, ErrorCategory::kConfig,
                "budget.absolute." + product + " must be >= 0");
      }
    }
    require(rolling_window >= 1, ErrorCategory::kConfig, "rolling.window must be >= 1");
    forest.validate();
    weights.validate();
  }

  static RunConfig from_config(const KeyValueConfig& cfg) {
    static const std::set<std::string> known{
        "input.source", "input.path", "ingest.lag_months", "ingest.outlier_multiplier", "synth.n_low",
        "synth.n_high", "synth.slope_low", "synth.slope_high", "synth.intercept_low", "synth.intercept_high",
        "synth.low_min", "synth.low_max", "synth.high_min", "synth.high_max", "synth.noise_sd",
        "synth.budget_fraction", "synth.periods", "synth.start", "eval.period", "budget.rule", "budget.fraction",
        "learner", "forest.trees", "forest.max_depth", "forest.min_leaf_weight", "forest.features_per_split",
        "forest.bootstrap", "forest.criterion", "weights.jacobian", "weights.fd_step", "weights.floor",
        "weights.normalization", "weights.evaluation_point", "rolling.window", "seed", "threads"};
    for (const auto& [key, value] : cfg.values()) {
      if (known.contains(key) || key.starts_with("column.") || key.starts_with("budget.absolute.")) continue;
      fail(ErrorCategory::kConfig, "unknown config key '" + key + "'");
    }

    RunConfig rc;
    const std::string source = cfg.get_string("input.source", "synth");
    if (source == "synth") {
      rc.source = InputSource::kSynth;
    } else if (source == "records") {
      rc.source = InputSource::kRecords;
    } else if (source == "table") {
      rc.source = InputSource::kTable;
    } else {
      fail(ErrorCategory::kConfig, "input.source must be synth, records or table");
    }
    rc.input_path = cfg.get_string("input.path", "");
    rc.schema = ColumnSchema::from_config(cfg);
    rc.lag_months = cfg.get_uint("ingest.lag_months", rc.lag_months);
    rc.outlier_multiplier = cfg.get_double("ingest.outlier_multiplier", rc.outlier_multiplier);

    auto& s = rc.scenario;
    s.n_low = cfg.get_uint("synth.n_low", s.n_low);
    s.n_high = cfg.get_uint("synth.n_high", s.n_high);
    s.slope_low = cfg.get_double("synth.slope_low", s.slope_low);
    s.slope_high = cfg.get_double("synth.slope_high", s.slope_high);
    s.intercept_low = cfg.get_double("synth.intercept_low", s.intercept_low);
    s.intercept_high = cfg.get_double("synth.intercept_high", s.intercept_high);
    s.range_low = {cfg.get_double("synth.low_min", s.range_low.lo), cfg.get_double("synth.low_max", s.range_low.hi)};
    s.range_high = {cfg.get_double("synth.high_min", s.range_high.lo),
                    cfg.get_double("synth.high_max", s.range_high.hi)};
    if (cfg.contains("synth.noise_sd")) s.noise_sd = cfg.get_double("synth.noise_sd", 0.0);
    s.budget_fraction = cfg.get_double("synth.budget_fraction", s.budget_fraction);
    s.periods = cfg.get_uint("synth.periods", s.periods);
    if (auto start = cfg.get("synth.start")) s.start = YearMonth::parse_or_throw(*start);

    if (auto eval = cfg.get("eval.period")) rc.eval_period = YearMonth::parse_or_throw(*eval);
    const std::string rule = cfg.get_string("budget.rule", "fraction");
    if (rule == "fraction") {
      rc.budget_rule = BudgetRule::kFraction;
    } else if (rule == "absolute") {
      rc.budget_rule = BudgetRule::kAbsolute;
    } else {
      fail(ErrorCategory::kConfig, "budget.rule must be fraction or absolute");
    }
    if (cfg.contains("budget.fraction")) rc.budget_fraction = cfg.get_double("budget.fraction", 0.0);
    for (const auto& [product, raw] : cfg.with_prefix("budget.absolute.")) {
      rc.absolute_budgets[product] = cfg.get_double("budget.absolute." + product, 0.0);
    }

    const std::string learner = cfg.get_string("learner", "forest");
    if (learner == "forest") {
      rc.learner = LearnerKind::kForest;
    } else if (learner == "linear") {
      rc.learner = LearnerKind::kLinear;
    } else {
      fail(ErrorCategory::kConfig, "learner must be forest or linear");
    }
    auto& f = rc.forest;
    f.trees = cfg.get_uint("forest.trees", f.trees);
    f.max_depth = cfg.get_uint("forest.max_depth", f.max_depth);
    f.min_leaf_weight = cfg.get_double("forest.min_leaf_weight", f.min_leaf_weight);
    f.features_per_split = cfg.get_uint("forest.features_per_split", f.features_per_split);
    f.bootstrap = cfg.get_bool("forest.bootstrap", f.bootstrap);
    if (auto c = cfg.get("forest.criterion")) f.criterion = parse_criterion(*c);

    auto& w = rc.weights;
    if (auto j = cfg.get("weights.jacobian")) w.jacobian = parse_jacobian(*j);
    if (cfg.contains("weights.fd_step")) w.fd_step = cfg.get_double("weights.fd_step", 0.0);
    w.floor = cfg.get_double("weights.floor", w.floor);
    if (auto n = cfg.get("weights.normalization")) w.normalization = parse_normalization(*n);
    if (auto e = cfg.get("weights.evaluation_point")) w.evaluation_point = parse_evaluation_point(*e);

    rc.rolling_window = cfg.get_uint("rolling.window", rc.rolling_window);
    rc.seed = cfg.get_uint("seed", rc.seed);
    rc.threads = cfg.get_uint("threads", rc.threads);
    return rc;
  }

  /// Everything that determines a learned policy, as flat strings.
  std::map<std::string, std::string> describe() const {
    std::map<std::string, std::string> out;
    out["learner"] = learner == LearnerKind::kForest ? "forest" : "linear";
    if (learner == LearnerKind::kForest) {
      out["forest.trees"] = std::to_string(forest.trees);
      out["forest.max_depth"] = std::to_string(forest.max_depth);
      out["forest.min_leaf_weight"] = csv::format_number(forest.min_leaf_weight);
      out["forest.features_per_split"] = std::to_string(forest.features_per_split);
      out["forest.bootstrap"] = forest.bootstrap ? "true" : "false";
      out["forest.criterion"] = std::string(criterion_name(forest.criterion));
    }
    out["seed"] = std::to_string(seed);
    out["budget.rule"] = budget_rule == BudgetRule::kFraction ? "fraction" : "absolute";
    if (budget_rule == BudgetRule::kFraction) out["budget.fraction"] = csv::format_number(resolved_fraction());
    out["training_weights"] = "uniform";
    return out;
  }

  std::string decision_weight_label() const {
    std::string label = "decision(jacobian=" + std::string(jacobian_name(weights.jacobian)) +
                        ",floor=" + csv::format_number(weights.floor) + ",normalization=" +
                        (weights.normalization == WeightNormalization::kMeanOne ? "mean_one" : "none") +
                        ",evaluation_point=" +
                        (weights.evaluation_point == EvaluationPoint::kRealized ? "realized" : "predicted");
    if (weights.fd_step) label += ",fd_step=" + csv::format_number(*weights.fd_step);
    return label + ")";
  }
};

/// Either learner behind one DemandModel-conforming interface.
class AnyModel {
 public:
  explicit AnyModel(Forest forest) : model_(std::move(forest)) {}
  explicit AnyModel(LinearModel linear) : model_(std::move(linear)) {}

  std::size_t feature_dim() const {
    return std::visit([](const auto& m) { return m.feature_dim(); }, model_);
  }
  double predict_point(std::span<const double> x) const {
    return std::visit([&](const auto& m) { return m.predict_point(x); }, model_);
  }
  std::vector<double> predict_samples(std::span<const double> x) const {
    return std::visit([&](const auto& m) { return m.predict_samples(x); }, model_);
  }
  nlohmann::json to_json() const {
    return std::visit([](const auto& m) { return m.to_json(); }, model_);
  }

  static AnyModel from_json(const nlohmann::json& j) {
    const std::string format = j.contains("format") && j["format"].is_string() ? j["format"].get<std::string>() : "";
    if (format == "medalloc.forest") return AnyModel(Forest::from_json(j));
    if (format == "medalloc.linear") return AnyModel(LinearModel::from_json(j));
    fail(ErrorCategory::kSchema, "unrecognized model document format '" + format + "'");
  }

  const std::variant<Forest, LinearModel>& variant() const { return model_; }

 private:
  std::variant<Forest, LinearModel> model_;
};

/// Fits the configured learner on the table's current weights.
inline AnyModel train_model(const FeatureTable& table, const RunConfig& config) {
  if (config.learner == LearnerKind::kLinear) return AnyModel(fit_linear(table));
  ForestParams params = config.forest;
  params.threads = config.threads;
  return AnyModel(train_forest(table, params, derive_seed(config.seed, 2)));
}

struct Dataset {
  FeatureTable table;
  std::optional<SynthData> synth;
  std::vector<RejectedRow> rejects;
  std::vector<ExcludedRecord> exclusions;
};

inline Dataset load_dataset(const RunConfig& config) {
  Dataset data;
  if (config.source == InputSource::kSynth) {
    TwoClassScenario scenario = config.scenario;
    scenario.seed = derive_seed(config.seed, 1);
    data.synth = generate(scenario);
    data.table = data.synth->table;
    return data;
  }
  std::ifstream in(config.input_path, std::ios::binary);
  require(in.good(), ErrorCategory::kIo, "cannot open input '" + config.input_path + "'");
  if (config.source == InputSource::kTable) {
    data.table = FeatureTable::read_csv(in);
    require(!data.table.empty(), ErrorCategory::kEmptyInput, "feature table has no rows");
    return data;
  }
  auto parsed = parse_records(in, config.schema);
  data.rejects = std::move(parsed.rejects);
  auto cleaned = clean_records(parsed.records, config.outlier_multiplier);
  data.exclusions = std::move(cleaned.excluded);
  require(!cleaned.kept.empty(), ErrorCategory::kEmptyInput, "no records survive cleaning");
  FeatureOptions options;
  options.lag_months = config.lag_months;
  data.table = build_feature_panel(cleaned.kept, options);
  return data;
}

inline YearMonth latest_period(const FeatureTable& table) {
  require(!table.empty(), ErrorCategory::kEmptyInput, "table has no rows");
  YearMonth latest = table[0].period;
  for (const auto& row : table.rows()) latest = std::max(latest, row.period);
  return latest;
}

/// 100 * shortfall / total realized demand; nullopt when total demand is 0.
inline std::optional<double> unmet_demand_pct(std::span<const double> a, std::span<const double> realized) {
  double total = 0.0;
  for (double v : realized) total += v;
  if (!(total > 0.0)) return std::nullopt;
  return 100.0 * shortfall(a, realized) / total;
}

/// Median absolute percentage error over rows with positive realized demand.
inline std::optional<double> mdape(std::span<const double> predicted, std::span<const double> realized) {
  require(predicted.size() == realized.size(), ErrorCategory::kShape, "prediction and demand differ in length");
  std::vector<double> ape;
  for (std::size_t i = 0; i < realized.size(); ++i) {
    if (realized[i] > 0.0) ape.push_back(100.0 * std::abs(predicted[i] - realized[i]) / realized[i]);
  }
  if (ape.empty()) return std::nullopt;
  std::sort(ape.begin(), ape.end());
  const std::size_t mid = ape.size() / 2;
  return ape.size() % 2 == 1 ? ape[mid] : 0.5 * (ape[mid - 1] + ape[mid]);
}

/// One policy's point forecasts and allocations, aligned with the
/// experiment's evaluation rows.
struct PolicyRun {
  std::string policy;
  std::vector<double> forecast;
  std::vector<double> allocation;
};

struct PolicyMetrics {
  std::string product_id;
  std::string policy;
  double budget = 0.0;
  double total_demand = 0.0;
  double allocated = 0.0;
  double shortfall = 0.0;
  std::optional<double> unmet_pct;
  std::optional<double> mdape;
};

struct FacilityLine {
  std::string product_id;
  std::string facility_id;
  std::string policy;
  double realized = 0.0;
  double forecast = 0.0;
  double allocation = 0.0;
  double shortfall = 0.0;
};

namespace detail {

inline nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline std::string optional_field(const std::optional<double>& v) { return v ? csv::format_number(*v) : "NA"; }

}  // namespace detail

struct EvalReport {
  YearMonth eval_period;
  std::vector<std::string> policies;
  std::vector<PolicyMetrics> metrics;
  std::vector<FacilityLine> facilities;
  std::map<std::string, std::map<std::string, std::string>> runs;

  /// Keys whose value differs between the decision-blind and decision-aware
  /// run descriptors.
  std::map<std::string, std::pair<std::string, std::string>> config_diff() const {
    std::map<std::string, std::pair<std::string, std::string>> diff;
    auto blind = runs.find(kDecisionBlind);
    auto aware = runs.find(kDecisionAware);
    if (blind == runs.end() || aware == runs.end()) return diff;
    std::set<std::string> keys;
    for (const auto& [k, v] : blind->second) keys.insert(k);
    for (const auto& [k, v] : aware->second) keys.insert(k);
    for (const auto& k : keys) {
      auto b = blind->second.contains(k) ? blind->second.at(k) : "";
      auto a = aware->second.contains(k) ? aware->second.at(k) : "";
      if (a != b) diff[k] = {b, a};
    }
    return diff;
  }

  const PolicyMetrics* find(const std::string& product, const std::string& policy) const {
    for (const auto& m : metrics) {
      if (m.product_id == product && m.policy == policy) return &m;
    }
    return nullptr;
  }

  /// The perfect-foresight shortfall is no larger than any policy's, per
  /// product, up to rounding.
  bool oracle_dominates() const {
    for (const auto& m : metrics) {
      const auto* oracle = find(m.product_id, kOracle);
      if (oracle == nullptr) continue;
      if (oracle->shortfall > m.shortfall + 1e-9 * (1.0 + m.total_demand)) return false;
    }
    return true;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["format"] = "medalloc.report";
    j["version"] = 1;
    j["eval_period"] = eval_period.str();
    j["policies"] = policies;
    nlohmann::json products = nlohmann::json::object();
    for (const auto& m : metrics) {
      auto& p = products[m.product_id];
      p["budget"] = m.budget;
      p["total_demand"] = m.total_demand;
      p["policies"][m.policy] = {{"unmet_demand_pct", detail::optional_number(m.unmet_pct)},
                                 {"mdape", detail::optional_number(m.mdape)},
                                 {"shortfall", m.shortfall},
                                 {"allocated", m.allocated}};
    }
    j["products"] = products;
    j["oracle_dominates"] = oracle_dominates();
    j["runs"] = runs;
    nlohmann::json diff = nlohmann::json::object();
    for (const auto& [k, v] : config_diff()) diff[k] = {{kDecisionBlind, v.first}, {kDecisionAware, v.second}};
    j["config_diff"] = diff;
    return j;
  }

  void write_policies_csv(std::ostream& out) const {
    csv::write_row(out, {"product_id", "policy", "budget", "total_demand", "allocated", "shortfall",
                         "unmet_demand_pct", "mdape"});
    for (const auto& m : metrics) {
      csv::write_row(out, {m.product_id, m.policy, csv::format_number(m.budget), csv::format_number(m.total_demand),
                           csv::format_number(m.allocated), csv::format_number(m.shortfall),
                           detail::optional_field(m.unmet_pct), detail::optional_field(m.mdape)});
    }
  }

  void write_facilities_csv(std::ostream& out) const {
    csv::write_row(out, {"product_id", "facility_id", "policy", "realized", "forecast", "allocation", "shortfall"});
    for (const auto& f : facilities) {
      csv::write_row(out, {f.product_id, f.facility_id, f.policy, csv::format_number(f.realized),
                           csv::format_number(f.forecast), csv::format_number(f.allocation),
                           csv::format_number(f.shortfall)});
    }
  }
};

/// One held-out evaluation of the configured data. Models are trained lazily
/// and cached, so running several policies trains the uniform model once.
class Experiment {
 public:
  explicit Experiment(RunConfig config) : config_(std::move(config)) {
    config_.validate();
    config_.weights.threads = config_.threads;
    data_ = load_dataset(config_);
    eval_period_ = config_.eval_period.value_or(latest_period(data_.table));
    auto [train, eval] = split_train_eval(data_.table, eval_period_);
    train_ = std::move(train);
    eval_ = std::move(eval);

    std::map<std::string, std::vector<std::size_t>> by_product;
    for (std::size_t i = 0; i < eval_.size(); ++i) by_product[eval_[i].product_id].push_back(i);
    for (auto& [product, rows] : by_product) {
      std::stable_sort(rows.begin(), rows.end(),
                       [&](std::size_t a, std::size_t b) { return eval_[a].facility_id < eval_[b].facility_id; });
      products_.push_back({product, std::move(rows), eval_budget(product)});
    }
  }

  const RunConfig& config() const { return config_; }
  const Dataset& dataset() const { return data_; }
  const FeatureTable& train() const { return train_; }
  const FeatureTable& eval() const { return eval_; }
  YearMonth eval_period() const { return eval_period_; }

  std::vector<double> realized() const {
    std::vector<double> out;
    for (const auto& row : eval_.rows()) out.push_back(row.target);
    return out;
  }

  double eval_budget(const std::string& product) const {
    if (config_.budget_rule == BudgetRule::kAbsolute) {
      auto it = config_.absolute_budgets.find(product);
      if (it == config_.absolute_budgets.end()) fail(ErrorCategory::kConfig, "no budget for product '" + product + "'");
      return it->second;
    }
    double total = 0.0;
    for (const auto& row : eval_.rows()) {
      if (row.product_id == product) total += std::max(row.target, 0.0);
    }
    return config_.resolved_fraction() * total;
  }

  BudgetSchedule train_budgets() const {
    if (config_.budget_rule == BudgetRule::kFraction) return fraction_budgets(train_, config_.resolved_fraction());
    BudgetSchedule out;
    for (const auto& row : train_.rows()) {
      auto it = config_.absolute_budgets.find(row.product_id);
      if (it != config_.absolute_budgets.end()) out[{row.product_id, row.period}] = it->second;
    }
    return out;
  }

  const AnyModel& blind_model() {
    if (!blind_model_) blind_model_ = train_model(train_, config_);
    return *blind_model_;
  }

  const WeightReport& weight_report() {
    if (!weights_) weights_ = compute_weights(train_, blind_model(), train_budgets(), config_.weights);
    return *weights_;
  }

  const AnyModel& aware_model() {
    if (!aware_model_) aware_model_ = train_model(apply_weights(train_, weight_report()), config_);
    return *aware_model_;
  }

  PolicyRun run_decision_blind() { return run_model(kDecisionBlind, blind_model()); }
  PolicyRun run_decision_aware() { return run_model(kDecisionAware, aware_model()); }

  /// Trailing mean of the table's demand for the same series over the
  /// `window` months before the evaluation period; 0 without history.
  PolicyRun run_rolling_average() {
    std::map<std::tuple<std::string, std::string, YearMonth>, double> history;
    for (const auto& row : data_.table.rows()) {
      if (row.period < eval_period_) history[{row.facility_id, row.product_id, row.period}] = row.target;
    }
    std::vector<double> forecast(eval_.size(), 0.0);
    for (std::size_t i = 0; i < eval_.size(); ++i) {
      double sum = 0.0;
      std::size_t count = 0;
      for (std::size_t back = 1; back <= config_.rolling_window; ++back) {
        auto it = history.find({eval_[i].facility_id, eval_[i].product_id, eval_period_ - static_cast<int>(back)});
        if (it != history.end()) {
          sum += it->second;
          ++count;
        }
      }
      forecast[i] = count > 0 ? std::max(sum / static_cast<double>(count), 0.0) : 0.0;
    }
    return run_point(kRollingAverage, std::move(forecast));
  }

  PolicyRun run_oracle() { return run_point(kOracle, realized()); }

  EvalReport evaluate(std::span<const PolicyRun> runs) const {
    EvalReport report;
    report.eval_period = eval_period_;
    for (const auto& run : runs) {
      require(run.allocation.size() == eval_.size() && run.forecast.size() == eval_.size(), ErrorCategory::kShape,
              "policy '" + run.policy + "' does not cover the evaluation rows");
      report.policies.push_back(run.policy);
    }
    for (const auto& product : products_) {
      std::vector<double> xi;
      for (std::size_t i : product.rows) xi.push_back(eval_[i].target);
      for (const auto& run : runs) {
        std::vector<double> a, f;
        for (std::size_t i : product.rows) {
          a.push_back(run.allocation[i]);
          f.push_back(run.forecast[i]);
        }
        PolicyMetrics m;
        m.product_id = product.id;
        m.policy = run.policy;
        m.budget = product.budget;
        for (double v : xi) m.total_demand += v;
        for (double v : a) m.allocated += v;
        m.shortfall = shortfall(a, xi);
        m.unmet_pct = unmet_demand_pct(a, xi);
        m.mdape = medalloc::mdape(f, xi);
        report.metrics.push_back(std::move(m));
      }
      for (std::size_t n = 0; n < product.rows.size(); ++n) {
        const auto& row = eval_[product.rows[n]];
        for (const auto& run : runs) {
          const std::size_t i = product.rows[n];
          report.facilities.push_back({product.id, row.facility_id, run.policy, row.target, run.forecast[i],
                                       run.allocation[i], std::max(row.target - run.allocation[i], 0.0)});
        }
      }
    }
    return report;
  }

  /// Runs all four policies and scores them.
  EvalReport compare() {
    std::vector<PolicyRun> runs{run_decision_blind(), run_decision_aware(), run_rolling_average(), run_oracle()};
    EvalReport report = evaluate(runs);
    auto blind = config_.describe();
    auto aware = blind;
    aware["training_weights"] = config_.decision_weight_label();
    report.runs[kDecisionBlind] = std::move(blind);
    report.runs[kDecisionAware] = std::move(aware);
    return report;
  }

 private:
  struct ProductGroup {
    std::string id;
    std::vector<std::size_t> rows;  // eval row indices, facility order
    double budget;
  };

  PolicyRun run_model(const std::string& name, const AnyModel& model) {
    PolicyRun run{name, std::vector<double>(eval_.size()), std::vector<double>(eval_.size())};
    for (const auto& product : products_) {
      std::vector<std::vector<double>> per_facility;
      for (std::size_t i : product.rows) {
        per_facility.push_back(model.predict_samples(eval_[i].features));
        run.forecast[i] = model.predict_point(eval_[i].features);
      }
      const auto result = solve_greedy(AllocationProblem::from_facility_samples(per_facility, product.budget));
      for (std::size_t n = 0; n < product.rows.size(); ++n) run.allocation[product.rows[n]] = result.allocation[n];
    }
    return run;
  }

  PolicyRun run_point(const std::string& name, std::vector<double> forecast) {
    PolicyRun run{name, std::move(forecast), std::vector<double>(eval_.size())};
    for (const auto& product : products_) {
      std::vector<std::vector<double>> per_facility;
      for (std::size_t i : product.rows) per_facility.push_back({std::max(run.forecast[i], 0.0)});
      const auto result = solve_greedy(AllocationProblem::from_facility_samples(per_facility, product.budget));
      for (std::size_t n = 0; n < product.rows.size(); ++n) run.allocation[product.rows[n]] = result.allocation[n];
    }
    return run;
  }

  RunConfig config_;
  Dataset data_;
  YearMonth eval_period_;
  FeatureTable train_;
  FeatureTable eval_;
  std::vector<ProductGroup> products_;
  std::optional<AnyModel> blind_model_;
  std::optional<WeightReport> weights_;
  std::optional<AnyModel> aware_model_;
};

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorCategory::kIo, "cannot write '" + path.string() + "'");
  out << contents;
  require(out.good(), ErrorCategory::kIo, "failed writing '" + path.string() + "'");
}

}  // namespace detail

/// report.json, policies.csv, facilities.csv and weights.csv under `dir`.
/// Contents depend only on the inputs, never on time or thread count.
inline void write_compare_outputs(const std::filesystem::path& dir, const EvalReport& report,
                                  const WeightReport& weights) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, ErrorCategory::kIo, "cannot create output directory '" + dir.string() + "'");
  detail::write_file(dir / "report.json", report.to_json().dump(2) + "\n");
  std::ostringstream policies, facilities, weight_csv;
  report.write_policies_csv(policies);
  report.write_facilities_csv(facilities);
  weights.write_csv(weight_csv);
  detail::write_file(dir / "policies.csv", policies.str());
  detail::write_file(dir / "facilities.csv", facilities.str());
  detail::write_file(dir / "weights.csv", weight_csv.str());
}

}  // namespace medalloc

#endif  // MEDALLOC_PIPELINE_HPP_
