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

// Weighted least squares with intercept. Deliberately simple: it is the
// misspecified learner of the two-class scenario, trained through the same
// weighting interface as the forest.

#ifndef MEDALLOC_LINEAR_MODEL_HPP_
#define MEDALLOC_LINEAR_MODEL_HPP_

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "medalloc/core/error.hpp"
#include "medalloc/feature_table.hpp"

namespace medalloc {

/// Anything that maps a feature vector to a point forecast and to a list of
/// nonnegative demand scenarios.
template <typename M>
concept DemandModel = requires(const M& m, std::span<const double> x) {
  { m.feature_dim() } -> std::convertible_to<std::size_t>;
  { m.predict_point(x) } -> std::convertible_to<double>;
  { m.predict_samples(x) } -> std::convertible_to<std::vector<double>>;
};

class LinearModel {
 public:
  LinearModel(double intercept, std::vector<double> coefficients)
      : intercept_(intercept), coefficients_(std::move(coefficients)) {}

  std::size_t feature_dim() const { return coefficients_.size(); }
  double intercept() const { return intercept_; }
  const std::vector<double>& coefficients() const { return coefficients_; }

  double predict_point(std::span<const double> x) const {
    require(x.size() == coefficients_.size(), ErrorCategory::kShape,
            "input has dimension " + std::to_string(x.size()) + ", model expects " +
                std::to_string(coefficients_.size()));
    double y = intercept_;
    for (std::size_t j = 0; j < x.size(); ++j) y += coefficients_[j] * x[j];
    return y;
  }

  /// A single scenario: the clamped point forecast.
  std::vector<double> predict_samples(std::span<const double> x) const { return {std::max(predict_point(x), 0.0)}; }

  nlohmann::json to_json() const {
    return {{"format", "medalloc.linear"}, {"version", 1}, {"intercept", intercept_}, {"coefficients", coefficients_}};
  }

  static LinearModel from_json(const nlohmann::json& j) {
    try {
      require(j.at("format").get<std::string>() == "medalloc.linear", ErrorCategory::kSchema,
              "not a medalloc linear model document");
      return LinearModel(j.at("intercept").get<double>(), j.at("coefficients").get<std::vector<double>>());
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCategory::kSchema, std::string("malformed linear model document: ") + e.what());
    }
  }

 private:
  double intercept_;
  std::vector<double> coefficients_;
};

/// Minimizes sum_i w_i (y_i - b - c.x_i)^2. Rank-deficient designs get the
/// column-pivoted QR basic solution.
inline LinearModel fit_linear(const FeatureTable& table) {
  require(!table.empty(), ErrorCategory::kEmptyInput, "cannot fit a linear model on an empty table");
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (table[i].weight > 0.0) rows.push_back(i);
  }
  require(!rows.empty(), ErrorCategory::kDegenerateWeights, "all training weights are zero");
  const auto d = static_cast<Eigen::Index>(table.dim());
  Eigen::MatrixXd design(static_cast<Eigen::Index>(rows.size()), d + 1);
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(rows.size()));
  for (Eigen::Index r = 0; r < design.rows(); ++r) {
    const auto& row = table[rows[static_cast<std::size_t>(r)]];
    const double s = std::sqrt(row.weight);
    design(r, 0) = s;
    for (Eigen::Index j = 0; j < d; ++j) design(r, j + 1) = s * row.features[static_cast<std::size_t>(j)];
    rhs(r) = s * row.target;
  }
  const Eigen::VectorXd beta = design.colPivHouseholderQr().solve(rhs);
  std::vector<double> coefficients(static_cast<std::size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j) coefficients[static_cast<std::size_t>(j)] = beta(j + 1);
  return LinearModel(beta(0), std::move(coefficients));
}

}  // namespace medalloc

#endif  // MEDALLOC_LINEAR_MODEL_HPP_
