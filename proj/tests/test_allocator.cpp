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

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "medalloc/allocator.hpp"
#include "medalloc/core/random.hpp"
#include "oracles.hpp"

namespace medalloc {
namespace {

AllocationProblem random_integer_problem(Rng& rng, std::size_t max_n = 8, std::size_t max_k = 5, int max_v = 20) {
  AllocationProblem p;
  const std::size_t n = 1 + rng.index(max_n);
  const std::size_t k = 1 + rng.index(max_k);
  p.samples.assign(k, std::vector<double>(n));
  double total = 0;
  for (auto& s : p.samples) {
    for (double& v : s) {
      v = static_cast<double>(rng.index(max_v + 1));
      total += v;
    }
  }
  p.budget = static_cast<double>(rng.index(static_cast<std::uint64_t>(total / k) + 5));
  return p;
}

TEST(Shortfall, Examples) {
  EXPECT_EQ(shortfall(std::vector<double>{3, 5}, std::vector<double>{3, 5}), 0.0);
  EXPECT_EQ(shortfall(std::vector<double>{0, 0}, std::vector<double>{4, 1}), 5.0);
  EXPECT_EQ(shortfall(std::vector<double>{2, 1}, std::vector<double>{4, 1}), 2.0);
  try {
    shortfall(std::vector<double>{1}, std::vector<double>{1, 2});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kShape);
  }
}

TEST(SaaObjective, Examples) {
  AllocationProblem p{{{4, 0}, {0, 4}}, 4};
  EXPECT_EQ(saa_objective(p, std::vector<double>{2, 2}), 2.0);
  EXPECT_EQ(saa_objective(p, std::vector<double>{4, 0}), 2.0);
  AllocationProblem one{{{4, 1}}, 0};
  EXPECT_EQ(saa_objective(one, std::vector<double>{2, 1}), shortfall(std::vector<double>{2, 1}, one.samples[0]));
}

TEST(SolveGreedy, ZeroBudget) {
  AllocationProblem p{{{4, 1}, {2, 3}}, 0};
  auto r = solve_greedy(p);
  EXPECT_EQ(r.allocation, (std::vector<double>{0, 0}));
  EXPECT_EQ(r.objective, 5.0);
  EXPECT_TRUE(r.fill_trace.empty());
}

TEST(SolveGreedy, WorkedExample) {
  // Facility 0 samples {2, 4}; facility 1 samples {1, 1}; budget 3.
  AllocationProblem p{{{2, 1}, {4, 1}}, 3};
  auto r = solve_greedy(p);
  EXPECT_EQ(r.allocation, (std::vector<double>{2, 1}));
  EXPECT_EQ(r.objective, 1.0);
  EXPECT_EQ(oracles::grid_enumerate(p.samples, 3, 4), 1.0);
  ASSERT_EQ(r.fill_trace.size(), 2u);
  EXPECT_EQ(r.fill_trace[0].facility, 0u);
  EXPECT_EQ(r.fill_trace[0].marginal_value, 1.0);
  EXPECT_EQ(r.fill_trace[1].facility, 1u);
}

TEST(SolveGreedy, SurplusBudgetStaysUnallocated) {
  AllocationProblem p{{{3, 0, 1}, {5, 0, 2}}, 100};
  auto r = solve_greedy(p);
  EXPECT_EQ(r.allocation, (std::vector<double>{5, 0, 2}));
  EXPECT_EQ(r.objective, 0.0);
  EXPECT_EQ(r.total(), 7.0);
}

TEST(SolveGreedy, FractionalLastSegment) {
  AllocationProblem p{{{10, 10}}, 5};
  auto r = solve_greedy(p);
  EXPECT_EQ(r.allocation, (std::vector<double>{5, 0}));  // tie goes to the lower index
  EXPECT_EQ(r.objective, 15.0);
}

TEST(SolveGreedy, RejectsInvalidProblems) {
  EXPECT_THROW(solve_greedy(AllocationProblem{{}, 1}), Error);
  EXPECT_THROW(solve_greedy(AllocationProblem{{{1, 2}, {1}}, 1}), Error);
  EXPECT_THROW(solve_greedy(AllocationProblem{{{-1}}, 1}), Error);
  EXPECT_THROW(solve_greedy(AllocationProblem{{{1}}, -1}), Error);
}

TEST(SolveLp, AgreesOnExamples) {
  AllocationProblem zero{{{4, 1}, {2, 3}}, 0};
  EXPECT_NEAR(solve_lp(zero).objective, 5.0, 1e-9);
  AllocationProblem flat{{{4, 0}, {0, 4}}, 4};
  auto r = solve_lp(flat);
  EXPECT_NEAR(r.objective, 2.0, 1e-9);
  EXPECT_LE(r.total(), 4.0 + 1e-9);
}

TEST(SolveLp, MatchesGreedyAndGridOnRandomInstances) {
  Rng rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    auto p = random_integer_problem(rng);
    const auto greedy = solve_greedy(p);
    const auto lp = solve_lp(p);
    EXPECT_NEAR(greedy.objective, lp.objective, 1e-6);
    EXPECT_NEAR(greedy.objective, oracles::grid_dp(p.samples, static_cast<int>(p.budget), 20), 1e-9);
    EXPECT_LE(lp.total(), p.budget + 1e-9);
  }
}

TEST(GridOracle, DynamicProgramMatchesEnumeration) {
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    auto p = random_integer_problem(rng, 3, 4, 6);
    const int b = static_cast<int>(p.budget);
    EXPECT_DOUBLE_EQ(oracles::grid_dp(p.samples, b, 6), oracles::grid_enumerate(p.samples, b, 6));
  }
}

TEST(Properties, FeasibilityMonotonicityAndCaps) {
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    auto p = random_integer_problem(rng);
    for (auto& s : p.samples) {
      for (double& v : s) v += rng.uniform();  // non-integer too
    }
    const auto r = solve_greedy(p);
    const auto cap = p.max_demand();
    EXPECT_LE(r.total(), p.budget + 1e-9);
    for (std::size_t n = 0; n < r.allocation.size(); ++n) {
      EXPECT_GE(r.allocation[n], 0.0);
      EXPECT_LE(r.allocation[n], cap[n]);
    }
    AllocationProblem more = p;
    more.budget += rng.uniform(0, 10);
    EXPECT_LE(solve_greedy(more).objective, r.objective + 1e-12);
  }
}

TEST(Properties, ScaleEquivariance) {
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    auto p = random_integer_problem(rng);
    const double c = 4.0;  // a power of two keeps the comparison exact
    AllocationProblem scaled = p;
    scaled.budget *= c;
    for (auto& s : scaled.samples) {
      for (double& v : s) v *= c;
    }
    const auto a = solve_greedy(p);
    const auto b = solve_greedy(scaled);
    EXPECT_NEAR(b.objective, c * a.objective, 1e-9);
    for (std::size_t n = 0; n < a.allocation.size(); ++n) EXPECT_NEAR(b.allocation[n], c * a.allocation[n], 1e-9);
  }
}

TEST(Properties, ZeroSampleFacilityGetsNothing) {
  AllocationProblem p{{{0, 3}, {0, 5}}, 100};
  EXPECT_EQ(solve_greedy(p).allocation[0], 0.0);
  EXPECT_EQ(solve_lp(p).allocation[0], 0.0);
}

TEST(Serialization, ProblemAndResultJson) {
  AllocationProblem p{{{2, 1}, {4, 1}}, 3};
  auto back = AllocationProblem::from_json(nlohmann::json::parse(p.to_json().dump()));
  EXPECT_EQ(back.samples, p.samples);
  EXPECT_EQ(back.budget, p.budget);
  auto j = solve_greedy(p).to_json();
  EXPECT_EQ(j["objective"], 1.0);
  EXPECT_EQ(j["fill_trace"].size(), 2u);
  EXPECT_THROW(AllocationProblem::from_json(nlohmann::json::parse(R"({"budget": 1})")), Error);
}

TEST(DenseLp, SolvesTextbookProblem) {
  // maximize 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18.
  LinearProgram lp{{-3, -5}, {{1, 0}, {0, 2}, {3, 2}}, {4, 12, 18}};
  auto s = solve_dense_lp(lp);
  EXPECT_NEAR(s.value, -36.0, 1e-9);
  EXPECT_NEAR(s.x[0], 2.0, 1e-9);
  EXPECT_NEAR(s.x[1], 6.0, 1e-9);
}

TEST(DenseLp, ReportsIterationLimit) {
  LinearProgram lp{{-3, -5}, {{1, 0}, {0, 2}, {3, 2}}, {4, 12, 18}};
  try {
    solve_dense_lp(lp, 1e-9, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kIterationLimit);
  }
}

}  // namespace
}  // namespace medalloc
