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

// Independent reference implementations used only by tests. They share no
// code with the library beyond its public types.

#ifndef MEDALLOC_TESTS_ORACLES_HPP_
#define MEDALLOC_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

namespace oracles {

// samples[k][n]
inline double objective(const std::vector<std::vector<double>>& samples, const std::vector<double>& a) {
  double total = 0.0;
  for (const auto& s : samples) {
    for (std::size_t n = 0; n < a.size(); ++n) total += std::max(s[n] - a[n], 0.0);
  }
  return total / static_cast<double>(samples.size());
}

/// Minimum SAA objective over every integer allocation with 0 <= a_n <= cap
/// and sum a_n <= budget, by literal enumeration. Exponential; small N only.
inline double grid_enumerate(const std::vector<std::vector<double>>& samples, int budget, int cap) {
  const std::size_t n = samples.front().size();
  std::vector<double> a(n, 0.0);
  double best = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t, int)> rec = [&](std::size_t i, int left) {
    if (i == n) {
      best = std::min(best, objective(samples, a));
      return;
    }
    for (int v = 0; v <= std::min(cap, left); ++v) {
      a[i] = v;
      rec(i + 1, left - v);
    }
    a[i] = 0.0;
  };
  rec(0, budget);
  return best;
}

/// The same minimum over the same integer grid, computed by dynamic
/// programming over facilities (the objective is separable). Exact for the
/// grid, and fast enough for N = 8 and values up to 20.
inline double grid_dp(const std::vector<std::vector<double>>& samples, int budget, int cap) {
  const std::size_t n = samples.front().size();
  const double k = static_cast<double>(samples.size());
  const int b_max = std::max(0, budget);
  const double inf = std::numeric_limits<double>::infinity();
  // best[b]: minimum over facilities processed so far using at most b units.
  std::vector<double> best(b_max + 1, 0.0);
  for (std::size_t f = 0; f < n; ++f) {
    std::vector<double> cost(cap + 1, 0.0);
    for (int v = 0; v <= cap; ++v) {
      for (const auto& s : samples) cost[v] += std::max(s[f] - v, 0.0);
      cost[v] /= k;
    }
    std::vector<double> next(b_max + 1, inf);
    for (int b = 0; b <= b_max; ++b) {
      for (int v = 0; v <= std::min(cap, b); ++v) next[b] = std::min(next[b], best[b - v] + cost[v]);
    }
    best = std::move(next);
  }
  return best[b_max];
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Weighted sum of squared errors around the weighted mean.
inline double weighted_sse(const std::vector<double>& y, const std::vector<double>& w) {
  double sw = 0.0, swy = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sw += w[i];
    swy += w[i] * y[i];
  }
  if (sw == 0.0) return 0.0;
  const double mean = swy / sw;
  double sse = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) sse += w[i] * (y[i] - mean) * (y[i] - mean);
  return sse;
}

/// Ordinary least squares slope and intercept for one regressor.
inline std::pair<double, double> ols_1d(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  const double slope = sxy / sxx;
  return {my - slope * mx, slope};
}

}  // namespace oracles

#endif  // MEDALLOC_TESTS_ORACLES_HPP_
