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

// Textbook two-phase tableau simplex with Bland's rule. Small and slow on
// purpose: it exists to audit the greedy allocator, not to replace it.

#ifndef MEDALLOC_DENSE_SIMPLEX_HPP_
#define MEDALLOC_DENSE_SIMPLEX_HPP_

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "medalloc/core/error.hpp"

namespace medalloc {

/// minimize c.x subject to A x <= b, x >= 0. Rows of A are dense.
struct LinearProgram {
  std::vector<double> cost;
  std::vector<std::vector<double>> a;
  std::vector<double> b;
};

struct LpSolution {
  std::vector<double> x;
  double value = 0.0;
  std::size_t iterations = 0;
};

namespace detail {

class Tableau {
 public:
  Tableau(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_((rows + 1) * (cols + 1), 0.0) {}

  double& at(std::size_t r, std::size_t c) { return data_[r * (cols_ + 1) + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * (cols_ + 1) + c]; }
  double& rhs(std::size_t r) { return at(r, cols_); }
  // The objective row sits after the constraint rows.
  double& obj(std::size_t c) { return at(rows_, c); }

  void pivot(std::size_t pr, std::size_t pc) {
    const double inv = 1.0 / at(pr, pc);
    for (std::size_t c = 0; c <= cols_; ++c) at(pr, c) *= inv;
    at(pr, pc) = 1.0;
    for (std::size_t r = 0; r <= rows_; ++r) {
      if (r == pr) continue;
      const double f = at(r, pc);
      if (f == 0.0) continue;
      for (std::size_t c = 0; c <= cols_; ++c) at(r, c) -= f * at(pr, c);
      at(r, pc) = 0.0;
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
};

}  // namespace detail

inline LpSolution solve_dense_lp(const LinearProgram& lp, double tolerance = 1e-9,
                                 std::size_t max_iterations = 0) {
  const std::size_t m = lp.a.size();
  const std::size_t n = lp.cost.size();
  require(lp.b.size() == m, ErrorCategory::kShape, "LP right-hand side length mismatch");
  for (const auto& row : lp.a) require(row.size() == n, ErrorCategory::kShape, "LP row length mismatch");

  // Columns: structural [0, n), slacks [n, n+m), artificials after that.
  std::vector<std::size_t> artificial_row;
  for (std::size_t r = 0; r < m; ++r) {
    if (lp.b[r] < 0.0) artificial_row.push_back(r);
  }
  const std::size_t n_art = artificial_row.size();
  const std::size_t first_art = n + m;
  const std::size_t cols = n + m + n_art;
  detail::Tableau t(m, cols);
  std::vector<std::size_t> basis(m);
  std::size_t next_art = first_art;
  for (std::size_t r = 0; r < m; ++r) {
    const double sign = lp.b[r] < 0.0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < n; ++j) t.at(r, j) = sign * lp.a[r][j];
    t.at(r, n + r) = sign;
    t.rhs(r) = sign * lp.b[r];
    if (sign < 0.0) {
      t.at(r, next_art) = 1.0;
      basis[r] = next_art++;
    } else {
      basis[r] = n + r;
    }
  }
  if (max_iterations == 0) max_iterations = 50 * (m + cols) + 1000;
  std::size_t iterations = 0;

  auto run = [&](std::size_t enter_limit) {
    for (;;) {
      std::size_t pc = cols;
      for (std::size_t c = 0; c < enter_limit; ++c) {
        if (t.obj(c) < -tolerance) {
          pc = c;
          break;
        }
      }
      if (pc == cols) return;
      std::size_t pr = m;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < m; ++r) {
        const double v = t.at(r, pc);
        if (v <= tolerance) continue;
        const double ratio = t.rhs(r) / v;
        if (ratio < best - tolerance || (ratio <= best + tolerance && pr < m && basis[r] < basis[pr])) {
          best = ratio;
          pr = r;
        }
      }
      require(pr < m, ErrorCategory::kInvalidInput, "LP is unbounded");
      if (++iterations > max_iterations) {
        fail(ErrorCategory::kIterationLimit, "simplex exceeded " + std::to_string(max_iterations) + " iterations");
      }
      t.pivot(pr, pc);
      basis[pr] = pc;
    }
  };

  // Phase 1: minimize the sum of artificials.
  if (n_art > 0) {
    for (std::size_t r : artificial_row) {
      for (std::size_t c = 0; c <= cols; ++c) t.obj(c) -= t.at(r, c);
    }
    for (std::size_t c = first_art; c < cols; ++c) t.obj(c) = 0.0;
    run(cols);
    require(-t.obj(cols) <= 1e3 * tolerance * (1.0 + m), ErrorCategory::kInvalidInput, "LP is infeasible");
    for (std::size_t r = 0; r < m; ++r) {
      if (basis[r] < first_art) continue;
      for (std::size_t c = 0; c < first_art; ++c) {
        if (std::abs(t.at(r, c)) > tolerance) {
          t.pivot(r, c);
          basis[r] = c;
          break;
        }
      }
    }
  }

  // Phase 2 over structural and slack columns only.
  for (std::size_t c = 0; c <= cols; ++c) t.obj(c) = 0.0;
  for (std::size_t j = 0; j < n; ++j) t.obj(j) = lp.cost[j];
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t bc = basis[r];
    const double f = bc < n ? lp.cost[bc] : 0.0;
    if (f == 0.0) continue;
    for (std::size_t c = 0; c <= cols; ++c) t.obj(c) -= f * t.at(r, c);
  }
  run(first_art);

  LpSolution solution;
  solution.x.assign(n, 0.0);
  for (std::size_t r = 0; r < m; ++r) {
    if (basis[r] < n) solution.x[basis[r]] = t.rhs(r);
  }
  solution.value = 0.0;
  for (std::size_t j = 0; j < n; ++j) solution.value += lp.cost[j] * solution.x[j];
  solution.iterations = iterations;
  return solution;
}

}  // namespace medalloc

#endif  // MEDALLOC_DENSE_SIMPLEX_HPP_
