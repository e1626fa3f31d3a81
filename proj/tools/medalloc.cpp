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

// medalloc command-line driver. Every subcommand reads the same key = value
// config; flags override individual keys.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "medalloc/medalloc.hpp"

namespace {

using namespace medalloc;
namespace fs = std::filesystem;

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "medalloc_out";
  std::optional<std::string> jacobian;
  std::optional<double> budget_fraction;
  std::optional<std::size_t> threads;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "key = value config file");
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--out", o.out, "output directory")->capture_default_str();
  cmd->add_option("--jacobian", o.jacobian, "identity, diagonal_fd or full_fd")
      ->check(CLI::IsMember({"identity", "diagonal_fd", "full_fd"}));
  cmd->add_option("--budget-fraction", o.budget_fraction, "budget as a fraction of realized demand");
  cmd->add_option("--threads", o.threads, "worker threads, 0 for all cores");
}

RunConfig resolve(const CommonOptions& o) {
  KeyValueConfig cfg = o.config_path.empty() ? KeyValueConfig{} : KeyValueConfig::load(o.config_path);
  if (o.seed) cfg.set("seed", std::to_string(*o.seed));
  if (o.jacobian) cfg.set("weights.jacobian", *o.jacobian);
  if (o.budget_fraction) {
    cfg.set("budget.rule", "fraction");
    cfg.set("budget.fraction", csv::format_number(*o.budget_fraction));
  }
  if (o.threads) cfg.set("threads", std::to_string(*o.threads));
  return RunConfig::from_config(cfg);
}

fs::path out_dir(const CommonOptions& o) {
  std::error_code ec;
  fs::create_directories(o.out, ec);
  require(!ec, ErrorCategory::kIo, "cannot create output directory '" + o.out + "'");
  return o.out;
}

template <typename Writer>
void write_with(const fs::path& path, Writer&& writer) {
  std::ostringstream buf;
  writer(buf);
  detail::write_file(path, buf.str());
  std::cout << "wrote " << path.string() << "\n";
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCategory::kIo, "cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::kSchema, "'" + path + "' is not valid JSON: " + e.what());
  }
}

WeightReport read_weights(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCategory::kIo, "cannot open '" + path + "'");
  return WeightReport::read_csv(in);
}

void cmd_ingest(const CommonOptions& o) {
  RunConfig config = resolve(o);
  require(config.source == InputSource::kRecords, ErrorCategory::kConfig, "ingest needs input.source = records");
  const Dataset data = load_dataset(config);
  const fs::path dir = out_dir(o);
  write_with(dir / "features.csv", [&](std::ostream& s) { data.table.write_csv(s); });
  write_with(dir / "rejects.csv", [&](std::ostream& s) { write_rejects_csv(s, data.rejects); });
  write_with(dir / "exclusions.csv", [&](std::ostream& s) { write_exclusions_csv(s, data.exclusions); });
  std::cout << data.table.size() << " feature rows, " << data.rejects.size() << " rejected lines, "
            << data.exclusions.size() << " excluded series\n";
}

void cmd_synth(const CommonOptions& o) {
  RunConfig config = resolve(o);
  TwoClassScenario scenario = config.scenario;
  scenario.seed = derive_seed(config.seed, 1);
  const SynthData data = generate(scenario);
  const fs::path dir = out_dir(o);
  write_with(dir / "features.csv", [&](std::ostream& s) { data.table.write_csv(s); });
  write_with(dir / "ground_truth.csv", [&](std::ostream& s) { data.write_ground_truth_csv(s); });
}

void cmd_train(const CommonOptions& o) {
  Experiment e(resolve(o));
  const fs::path dir = out_dir(o);
  write_with(dir / "model.json", [&](std::ostream& s) { s << e.blind_model().to_json().dump(2) << "\n"; });
}

void cmd_weights(const CommonOptions& o, const std::string& model_path) {
  Experiment e(resolve(o));
  const fs::path dir = out_dir(o);
  if (model_path.empty()) {
    write_with(dir / "weights.csv", [&](std::ostream& s) { e.weight_report().write_csv(s); });
    return;
  }
  const AnyModel model = AnyModel::from_json(read_json(model_path));
  const WeightReport report = compute_weights(e.train(), model, e.train_budgets(), e.config().weights);
  write_with(dir / "weights.csv", [&](std::ostream& s) { report.write_csv(s); });
}

void cmd_retrain(const CommonOptions& o, const std::string& weights_path) {
  Experiment e(resolve(o));
  const fs::path dir = out_dir(o);
  if (weights_path.empty()) {
    write_with(dir / "model_aware.json", [&](std::ostream& s) { s << e.aware_model().to_json().dump(2) << "\n"; });
    return;
  }
  const AnyModel model = train_model(apply_weights(e.train(), read_weights(weights_path)), e.config());
  write_with(dir / "model_aware.json", [&](std::ostream& s) { s << model.to_json().dump(2) << "\n"; });
}

PolicyRun run_policy(Experiment& e, const std::string& policy) {
  if (policy == kDecisionBlind) return e.run_decision_blind();
  if (policy == kDecisionAware) return e.run_decision_aware();
  if (policy == kRollingAverage) return e.run_rolling_average();
  if (policy == kOracle) return e.run_oracle();
  fail(ErrorCategory::kConfig, "unknown policy '" + policy + "'");
}

void cmd_allocate(const CommonOptions& o, const std::string& problem_path, const std::string& solver,
                  const std::string& policy) {
  if (!problem_path.empty()) {
    const auto problem = AllocationProblem::from_json(read_json(problem_path));
    const auto result = solver == "lp" ? solve_lp(problem) : solve_greedy(problem);
    const fs::path dir = out_dir(o);
    write_with(dir / "allocation.json", [&](std::ostream& s) { s << result.to_json().dump(2) << "\n"; });
    std::printf("objective %s\n", csv::format_number(result.objective).c_str());
    return;
  }
  Experiment e(resolve(o));
  const PolicyRun run = run_policy(e, policy);
  const fs::path dir = out_dir(o);
  write_with(dir / "allocations.csv", [&](std::ostream& s) {
    csv::write_row(s, {"facility_id", "product_id", "period", "policy", "forecast", "allocation"});
    for (std::size_t i = 0; i < e.eval().size(); ++i) {
      const auto& row = e.eval()[i];
      csv::write_row(s, {row.facility_id, row.product_id, row.period.str(), run.policy,
                         csv::format_number(run.forecast[i]), csv::format_number(run.allocation[i])});
    }
  });
}

void cmd_evaluate(const CommonOptions& o, const std::vector<std::string>& policies) {
  Experiment e(resolve(o));
  std::vector<PolicyRun> runs;
  for (const auto& p : policies) runs.push_back(run_policy(e, p));
  const EvalReport report = e.evaluate(runs);
  const fs::path dir = out_dir(o);
  write_with(dir / "report.json", [&](std::ostream& s) { s << report.to_json().dump(2) << "\n"; });
  write_with(dir / "policies.csv", [&](std::ostream& s) { report.write_policies_csv(s); });
}

void cmd_compare(const CommonOptions& o) {
  Experiment e(resolve(o));
  const EvalReport report = e.compare();
  write_compare_outputs(out_dir(o), report, e.weight_report());
  std::cout << "eval period " << report.eval_period.str() << "\n";
  for (const auto& m : report.metrics) {
    std::cout << m.product_id << " " << m.policy << ": unmet " << detail::optional_field(m.unmet_pct) << "%, mdape "
              << detail::optional_field(m.mdape) << "\n";
  }
  std::cout << "wrote " << o.out << "/{report.json,policies.csv,facilities.csv,weights.csv}\n";
}

// 0 success, 1 unexpected failure, 2 usage error, 10 + category otherwise.
int exit_code(ErrorCategory category) { return 10 + static_cast<int>(category); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"medalloc: decision-aware demand forecasting and budgeted allocation"};
  app.require_subcommand(1);
  CommonOptions o;
  std::string model_path, weights_path, problem_path, solver = "greedy", policy = kDecisionAware;
  std::vector<std::string> policies{kDecisionBlind, kDecisionAware, kRollingAverage, kOracle};

  auto* ingest = app.add_subcommand("ingest", "parse, clean and featurize stock records");
  auto* synth = app.add_subcommand("synth", "generate the two-class synthetic panel");
  auto* train = app.add_subcommand("train", "fit the uniform-weight model");
  auto* weights = app.add_subcommand("weights", "compute decision-aware row weights");
  auto* retrain = app.add_subcommand("retrain", "refit with decision-aware weights");
  auto* allocate = app.add_subcommand("allocate", "solve an allocation problem or run one policy");
  auto* evaluate = app.add_subcommand("evaluate", "score selected policies on the evaluation period");
  auto* compare = app.add_subcommand("compare", "run every policy and write the full report");
  for (auto* cmd : {ingest, synth, train, weights, retrain, allocate, evaluate, compare}) add_common(cmd, o);
  weights->add_option("--model", model_path, "model JSON to differentiate instead of a fresh fit");
  retrain->add_option("--weights", weights_path, "weights CSV to apply instead of computing them");
  allocate->add_option("--problem", problem_path, "allocation problem JSON");
  allocate->add_option("--solver", solver, "greedy or lp")->check(CLI::IsMember({"greedy", "lp"}));
  allocate->add_option("--policy", policy, "policy when no problem file is given");
  evaluate->add_option("--policy", policies, "policies to score");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*ingest) cmd_ingest(o);
    if (*synth) cmd_synth(o);
    if (*train) cmd_train(o);
    if (*weights) cmd_weights(o, model_path);
    if (*retrain) cmd_retrain(o, weights_path);
    if (*allocate) cmd_allocate(o, problem_path, solver, policy);
    if (*evaluate) cmd_evaluate(o, policies);
    if (*compare) cmd_compare(o);
  } catch (const Error& e) {
    std::cerr << "error [" << category_name(e.category()) << "]: " << e.what() << "\n";
    return exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error [internal]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
