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

// Weighted multitask random forest. The K trees are used two ways: their mean
// is the point forecast, and each individual tree output is one demand
// scenario for sample average approximation.

#ifndef MEDALLOC_FOREST_HPP_
#define MEDALLOC_FOREST_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "medalloc/core/error.hpp"
#include "medalloc/core/parallel.hpp"
#include "medalloc/core/random.hpp"
#include "medalloc/feature_table.hpp"

namespace medalloc {

enum class SplitCriterion { kMse, kMae };

inline std::string_view criterion_name(SplitCriterion c) { return c == SplitCriterion::kMse ? "mse" : "mae"; }

inline SplitCriterion parse_criterion(std::string_view name) {
  if (name == "mse") return SplitCriterion::kMse;
  if (name == "mae") return SplitCriterion::kMae;
  fail(ErrorCategory::kConfig, "unknown split criterion '" + std::string(name) + "' (mse|mae)");
}

struct ForestParams {
  std::size_t trees = 100;
  std::size_t max_depth = 12;
  double min_leaf_weight = 5.0;
  /// 0 selects ceil(sqrt(d)).
  std::size_t features_per_split = 0;
  /// Weight-proportional bootstrap per tree. When off, every tree sees all
  /// rows with their raw weights.
  bool bootstrap = true;
  SplitCriterion criterion = SplitCriterion::kMse;
  /// Execution only; results do not depend on it.
  std::size_t threads = 1;

  std::size_t resolved_features(std::size_t dim) const {
    if (features_per_split == 0) {
      return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(dim)))));
    }
    return std::min(features_per_split, dim);
  }

  void validate() const {
    require(trees >= 1, ErrorCategory::kConfig, "forest needs at least one tree");
    require(std::isfinite(min_leaf_weight) && min_leaf_weight >= 0.0, ErrorCategory::kConfig,
            "min_leaf_weight must be finite and >= 0");
  }

  friend bool operator==(const ForestParams& a, const ForestParams& b) {
    return a.trees == b.trees && a.max_depth == b.max_depth && a.min_leaf_weight == b.min_leaf_weight &&
           a.features_per_split == b.features_per_split && a.bootstrap == b.bootstrap &&
           a.criterion == b.criterion;
  }
};

/// Internal nodes route `x[feature] <= threshold` to `left`. Leaves have
/// feature == -1 and carry the weighted mean target and total weight.
struct TreeNode {
  std::int32_t feature = -1;
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;
  double support = 0.0;

  bool is_leaf() const { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

class RegressionTree {
 public:
  RegressionTree() = default;

  /// Node 0 is the root; children must have larger indices than their parent.
  explicit RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
    require(!nodes_.empty(), ErrorCategory::kInvalidInput, "tree has no nodes");
    const auto n = static_cast<std::int32_t>(nodes_.size());
    for (std::int32_t i = 0; i < n; ++i) {
      const auto& node = nodes_[i];
      if (node.is_leaf()) {
        require(node.support > 0.0 && std::isfinite(node.value), ErrorCategory::kInvalidInput,
                "leaf needs positive support and a finite value");
      } else {
        require(node.left > i && node.left < n && node.right > i && node.right < n, ErrorCategory::kInvalidInput,
                "internal node has invalid children");
      }
    }
  }

  double predict(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes_[i].is_leaf()) {
      const auto& node = nodes_[i];
      i = static_cast<std::size_t>(x[node.feature] <= node.threshold ? node.left : node.right);
    }
    return nodes_[i].value;
  }

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  std::size_t depth() const { return depth_from(0); }

  friend bool operator==(const RegressionTree&, const RegressionTree&) = default;

 private:
  std::size_t depth_from(std::size_t i) const {
    if (nodes_[i].is_leaf()) return 0;
    return 1 + std::max(depth_from(nodes_[i].left), depth_from(nodes_[i].right));
  }

  std::vector<TreeNode> nodes_;
};

class Forest {
 public:
  static constexpr int kFormatVersion = 1;

  Forest(ForestParams params, std::size_t dim, std::uint64_t seed, std::vector<RegressionTree> trees)
      : params_(params), dim_(dim), seed_(seed), trees_(std::move(trees)) {
    require(!trees_.empty(), ErrorCategory::kInvalidInput, "forest has no trees");
    for (const auto& tree : trees_) {
      for (const auto& node : tree.nodes()) {
        require(node.is_leaf() || static_cast<std::size_t>(node.feature) < dim_, ErrorCategory::kShape,
                "tree splits on a feature outside the forest dimension");
      }
    }
    params_.trees = trees_.size();
  }

  std::size_t feature_dim() const { return dim_; }
  std::size_t size() const { return trees_.size(); }
  std::uint64_t seed() const { return seed_; }
  const ForestParams& params() const { return params_; }
  const std::vector<RegressionTree>& trees() const { return trees_; }

  /// Raw per-tree outputs in tree order.
  std::vector<double> tree_outputs(std::span<const double> x) const {
    check_dim(x);
    std::vector<double> out;
    out.reserve(trees_.size());
    for (const auto& tree : trees_) out.push_back(tree.predict(x));
    return out;
  }

  double predict_point(std::span<const double> x) const {
    check_dim(x);
    double sum = 0.0;
    for (const auto& tree : trees_) sum += tree.predict(x);
    return sum / static_cast<double>(trees_.size());
  }

  /// Per-tree outputs used as demand scenarios; negatives are clamped to 0.
  std::vector<double> predict_samples(std::span<const double> x) const {
    auto out = tree_outputs(x);
    for (double& v : out) v = std::max(v, 0.0);
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["format"] = "medalloc.forest";
    j["version"] = kFormatVersion;
    j["feature_dim"] = dim_;
    j["seed"] = seed_;
    j["hyperparameters"] = {
        {"trees", params_.trees},
        {"max_depth", params_.max_depth},
        {"min_leaf_weight", params_.min_leaf_weight},
        {"features_per_split", params_.features_per_split},
        {"bootstrap", params_.bootstrap},
        {"criterion", criterion_name(params_.criterion)},
    };
    auto& trees = j["trees"] = nlohmann::json::array();
    for (const auto& tree : trees_) {
      std::vector<std::int32_t> feature, left, right;
      std::vector<double> threshold, value, support;
      for (const auto& node : tree.nodes()) {
        feature.push_back(node.feature);
        threshold.push_back(node.threshold);
        left.push_back(node.left);
        right.push_back(node.right);
        value.push_back(node.value);
        support.push_back(node.support);
      }
      trees.push_back({{"feature", feature},
                       {"threshold", threshold},
                       {"left", left},
                       {"right", right},
                       {"value", value},
                       {"support", support}});
    }
    return j;
  }

  static Forest from_json(const nlohmann::json& j) {
    try {
      require(j.at("format").get<std::string>() == "medalloc.forest", ErrorCategory::kSchema,
              "not a medalloc forest document");
      require(j.at("version").get<int>() == kFormatVersion, ErrorCategory::kSchema,
              "unsupported forest format version");
      ForestParams params;
      const auto& hp = j.at("hyperparameters");
      params.trees = hp.at("trees").get<std::size_t>();
      params.max_depth = hp.at("max_depth").get<std::size_t>();
      params.min_leaf_weight = hp.at("min_leaf_weight").get<double>();
      params.features_per_split = hp.at("features_per_split").get<std::size_t>();
      params.bootstrap = hp.at("bootstrap").get<bool>();
      params.criterion = parse_criterion(hp.at("criterion").get<std::string>());
      std::vector<RegressionTree> trees;
      for (const auto& t : j.at("trees")) {
        auto feature = t.at("feature").get<std::vector<std::int32_t>>();
        auto threshold = t.at("threshold").get<std::vector<double>>();
        auto left = t.at("left").get<std::vector<std::int32_t>>();
        auto right = t.at("right").get<std::vector<std::int32_t>>();
        auto value = t.at("value").get<std::vector<double>>();
        auto support = t.at("support").get<std::vector<double>>();
        const std::size_t n = feature.size();
        require(threshold.size() == n && left.size() == n && right.size() == n && value.size() == n &&
                    support.size() == n,
                ErrorCategory::kSchema, "tree node arrays differ in length");
        std::vector<TreeNode> nodes(n);
        for (std::size_t i = 0; i < n; ++i) {
          nodes[i] = {feature[i], threshold[i], left[i], right[i], value[i], support[i]};
        }
        trees.emplace_back(std::move(nodes));
      }
      return Forest(params, j.at("feature_dim").get<std::size_t>(), j.at("seed").get<std::uint64_t>(),
                    std::move(trees));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCategory::kSchema, std::string("malformed forest document: ") + e.what());
    }
  }

  friend bool operator==(const Forest& a, const Forest& b) {
    return a.params_ == b.params_ && a.dim_ == b.dim_ && a.seed_ == b.seed_ && a.trees_ == b.trees_;
  }

 private:
  void check_dim(std::span<const double> x) const {
    if (x.size() != dim_) {
      fail(ErrorCategory::kShape,
           "input has dimension " + std::to_string(x.size()) + ", forest expects " + std::to_string(dim_));
    }
  }

  ForestParams params_;
  std::size_t dim_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<RegressionTree> trees_;
};

namespace detail {

struct WeightedSample {
  std::size_t row;
  double weight;
};

/// Weighted median and total absolute deviation around it.
inline double weighted_abs_deviation(std::vector<std::pair<double, double>>& yw) {
  std::sort(yw.begin(), yw.end());
  double total = 0.0;
  for (const auto& [y, w] : yw) total += w;
  double acc = 0.0;
  double median = yw.back().first;
  for (const auto& [y, w] : yw) {
    acc += w;
    if (acc >= 0.5 * total) {
      median = y;
      break;
    }
  }
  double dev = 0.0;
  for (const auto& [y, w] : yw) dev += w * std::abs(y - median);
  return dev;
}

class TreeBuilder {
 public:
  TreeBuilder(const FeatureTable& table, const ForestParams& params, Rng& rng)
      : table_(table), params_(params), rng_(rng), dim_(table.dim()),
        features_per_split_(params.resolved_features(table.dim())) {
    feature_pool_.resize(dim_);
  }

  RegressionTree build(std::vector<WeightedSample> samples) {
    nodes_.clear();
    grow(std::span<WeightedSample>(samples), 0);
    return RegressionTree(std::move(nodes_));
  }

 private:
  struct Split {
    std::int32_t feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
  };

  double x(std::size_t row, std::size_t f) const { return table_[row].features[f]; }
  double y(std::size_t row) const { return table_[row].target; }

  std::int32_t grow(std::span<WeightedSample> samples, std::size_t depth) {
    const auto index = static_cast<std::int32_t>(nodes_.size());
    nodes_.emplace_back();
    double w_sum = 0.0;
    double wy_sum = 0.0;
    double y_min = y(samples.front().row);
    double y_max = y_min;
    for (const auto& s : samples) {
      w_sum += s.weight;
      wy_sum += s.weight * y(s.row);
      y_min = std::min(y_min, y(s.row));
      y_max = std::max(y_max, y(s.row));
    }
    // An exactly constant node returns the constant, not a rounded mean.
    const double value = y_min == y_max ? y_min : wy_sum / w_sum;

    std::optional<Split> split;
    if (depth < params_.max_depth && y_min != y_max) split = best_split(samples, w_sum, wy_sum);
    if (!split) {
      nodes_[index].value = value;
      nodes_[index].support = w_sum;
      return index;
    }

    auto middle = std::stable_partition(samples.begin(), samples.end(), [&](const WeightedSample& s) {
      return x(s.row, split->feature) <= split->threshold;
    });
    const auto n_left = static_cast<std::size_t>(middle - samples.begin());
    const std::int32_t left = grow(samples.first(n_left), depth + 1);
    const std::int32_t right = grow(samples.subspan(n_left), depth + 1);
    auto& node = nodes_[index];
    node.feature = split->feature;
    node.threshold = split->threshold;
    node.left = left;
    node.right = right;
    node.value = value;
    node.support = w_sum;
    return index;
  }

  std::vector<std::size_t> sample_features() {
    std::iota(feature_pool_.begin(), feature_pool_.end(), std::size_t{0});
    const std::size_t m = features_per_split_;
    if (m < dim_) {
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng_.index(dim_ - i));
        std::swap(feature_pool_[i], feature_pool_[j]);
      }
    }
    std::vector<std::size_t> chosen(feature_pool_.begin(), feature_pool_.begin() + m);
    std::sort(chosen.begin(), chosen.end());
    return chosen;
  }

  static double midpoint(double lo, double hi) {
    const double mid = lo + 0.5 * (hi - lo);
    return mid < hi ? mid : lo;
  }

  // Features are scanned in ascending index and thresholds ascending; only a
  // strictly larger gain replaces the incumbent, which gives the lowest
  // (feature, threshold) among ties.
  std::optional<Split> best_split(std::span<const WeightedSample> samples, double w_sum, double wy_sum) {
    const double min_leaf = params_.min_leaf_weight;
    if (w_sum < 2.0 * min_leaf) return std::nullopt;
    double wyy_sum = 0.0;
    for (const auto& s : samples) wyy_sum += s.weight * y(s.row) * y(s.row);
    const double gain_floor = 1e-12 * wyy_sum;

    std::optional<Split> best;
    order_.resize(samples.size());
    for (std::size_t f : sample_features()) {
      std::iota(order_.begin(), order_.end(), std::size_t{0});
      std::sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
        const double xa = x(samples[a].row, f);
        const double xb = x(samples[b].row, f);
        return xa < xb || (xa == xb && samples[a].row < samples[b].row);
      });
      if (params_.criterion == SplitCriterion::kMse) {
        scan_mse(samples, f, w_sum, wy_sum, min_leaf, gain_floor, best);
      } else {
        scan_mae(samples, f, w_sum, min_leaf, gain_floor, best);
      }
    }
    return best;
  }

  void scan_mse(std::span<const WeightedSample> samples, std::size_t f, double w_sum, double wy_sum, double min_leaf,
                double gain_floor, std::optional<Split>& best) const {
    const double parent = wy_sum * wy_sum / w_sum;
    double w_left = 0.0;
    double wy_left = 0.0;
    for (std::size_t i = 0; i + 1 < order_.size(); ++i) {
      const auto& s = samples[order_[i]];
      w_left += s.weight;
      wy_left += s.weight * y(s.row);
      const double xi = x(s.row, f);
      const double xn = x(samples[order_[i + 1]].row, f);
      if (!(xi < xn)) continue;
      const double w_right = w_sum - w_left;
      if (w_left < min_leaf || w_right < min_leaf || w_right <= 0.0) continue;
      const double wy_right = wy_sum - wy_left;
      const double gain = wy_left * wy_left / w_left + wy_right * wy_right / w_right - parent;
      if (gain > gain_floor && (!best || gain > best->gain)) {
        best = Split{static_cast<std::int32_t>(f), midpoint(xi, xn), gain};
      }
    }
  }

  // Quadratic in node size; intended for modest tables.
  void scan_mae(std::span<const WeightedSample> samples, std::size_t f, double w_sum, double min_leaf,
                double gain_floor, std::optional<Split>& best) const {
    std::vector<std::pair<double, double>> all;
    for (std::size_t i : order_) all.emplace_back(y(samples[i].row), samples[i].weight);
    auto scratch = all;
    const double parent = weighted_abs_deviation(scratch);
    double w_left = 0.0;
    for (std::size_t i = 0; i + 1 < order_.size(); ++i) {
      w_left += samples[order_[i]].weight;
      const double xi = x(samples[order_[i]].row, f);
      const double xn = x(samples[order_[i + 1]].row, f);
      if (!(xi < xn)) continue;
      const double w_right = w_sum - w_left;
      if (w_left < min_leaf || w_right < min_leaf || w_right <= 0.0) continue;
      std::vector<std::pair<double, double>> left(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(i + 1));
      std::vector<std::pair<double, double>> right(all.begin() + static_cast<std::ptrdiff_t>(i + 1), all.end());
      const double gain = parent - weighted_abs_deviation(left) - weighted_abs_deviation(right);
      if (gain > gain_floor && (!best || gain > best->gain)) {
        best = Split{static_cast<std::int32_t>(f), midpoint(xi, xn), gain};
      }
    }
  }

  const FeatureTable& table_;
  const ForestParams& params_;
  Rng& rng_;
  std::size_t dim_;
  std::size_t features_per_split_;
  std::vector<std::size_t> feature_pool_;
  std::vector<std::size_t> order_;
  std::vector<TreeNode> nodes_;
};

/// Rows drawn with probability proportional to weight, as many draws as there
/// are positive-weight rows. The tree sees each drawn row once with its draw
/// count as weight, so scaling every input weight leaves the tree unchanged.
inline std::vector<WeightedSample> weighted_bootstrap(std::span<const std::size_t> rows,
                                                      std::span<const double> cumulative, Rng& rng) {
  const double total = cumulative.back();
  std::vector<std::uint32_t> counts(rows.size(), 0);
  for (std::size_t draw = 0; draw < rows.size(); ++draw) {
    const double u = rng.uniform() * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    auto k = static_cast<std::size_t>(it - cumulative.begin());
    ++counts[std::min(k, rows.size() - 1)];
  }
  std::vector<WeightedSample> samples;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (counts[k] > 0) samples.push_back({rows[k], static_cast<double>(counts[k])});
  }
  return samples;
}

}  // namespace detail

/// Grows `params.trees` trees. Tree t draws from its own stream
/// derive_seed(seed, t), so the forest is identical for any thread count.
inline Forest train_forest(const FeatureTable& table, const ForestParams& params, std::uint64_t seed) {
  params.validate();
  require(!table.empty(), ErrorCategory::kEmptyInput, "cannot train a forest on an empty table");
  require(table.dim() >= 1, ErrorCategory::kShape, "feature dimension must be at least 1");

  std::vector<std::size_t> rows;
  std::vector<double> cumulative;
  double total = 0.0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const double w = table[i].weight;
    if (w > 0.0) {
      rows.push_back(i);
      total += w;
      cumulative.push_back(total);
    }
  }
  require(!rows.empty(), ErrorCategory::kDegenerateWeights, "all training weights are zero");

  std::vector<RegressionTree> trees(params.trees);
  parallel_for(params.trees, params.threads, [&](std::size_t t) {
    Rng rng(derive_seed(seed, t));
    std::vector<detail::WeightedSample> samples;
    if (params.bootstrap) {
      samples = detail::weighted_bootstrap(rows, cumulative, rng);
    } else {
      for (std::size_t i : rows) samples.push_back({i, table[i].weight});
    }
    detail::TreeBuilder builder(table, params, rng);
    trees[t] = builder.build(std::move(samples));
  });
  return Forest(params, table.dim(), seed, std::move(trees));
}

inline double predict_point(const Forest& forest, std::span<const double> x) { return forest.predict_point(x); }

inline std::vector<double> predict_samples(const Forest& forest, std::span<const double> x) {
  return forest.predict_samples(x);
}

}  // namespace medalloc

#endif  // MEDALLOC_FOREST_HPP_
