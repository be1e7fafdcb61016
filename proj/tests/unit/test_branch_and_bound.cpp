// Copyright 2026 The Epistoch Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <random>

#include "doctest.h"
#include "fixtures.hpp"

using namespace epistoch;

namespace {

struct Knapsack {
  std::vector<double> value, weight;
  double cap = 0.0;
};

LinearModel knapsack_model(const Knapsack& k) {
  LinearModel m;
  std::vector<Term> row;
  for (std::size_t j = 0; j < k.value.size(); ++j) {
    const int v = m.add_variable("x" + std::to_string(j), 0, 1, true, -k.value[j]);
    row.push_back({v, k.weight[j]});
  }
  m.add_constraint("cap", std::move(row), Sense::kLe, k.cap);
  return m;
}

double knapsack_brute_force(const Knapsack& k) {
  const std::size_t n = k.value.size();
  double best = 0.0;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    double v = 0.0, w = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (mask & (1u << j)) {
        v += k.value[j];
        w += k.weight[j];
      }
    }
    if (w <= k.cap) best = std::max(best, v);
  }
  return -best;
}

}  // namespace

TEST_CASE("five-item knapsacks match all 32 subsets") {
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> d(1, 20);
  SolverConfig cfg;
  cfg.gap = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    Knapsack k;
    for (int j = 0; j < 5; ++j) {
      k.value.push_back(d(rng));
      k.weight.push_back(d(rng));
    }
    k.cap = 25.0;
    const SolveResult r = solve_branch_and_bound(knapsack_model(k), cfg);
    REQUIRE(r.status == SolveStatus::kOptimal);
    CHECK(r.objective == doctest::Approx(knapsack_brute_force(k)).epsilon(1e-12));
    CHECK(r.gap <= 1e-9);
    CHECK(check_feasibility(knapsack_model(k), r.values).ok());
  }
}

TEST_CASE("general integers with a fractional LP optimum") {
  // max 5x + 4y s.t. 6x + 4y <= 24, x + 2y <= 6; the LP optimum (3, 1.5) is fractional.
  LinearModel m;
  const int x = m.add_variable("x", 0, kInf, true, -5.0);
  const int y = m.add_variable("y", 0, kInf, true, -4.0);
  m.add_constraint("a", {{x, 6}, {y, 4}}, Sense::kLe, 24);
  m.add_constraint("b", {{x, 1}, {y, 2}}, Sense::kLe, 6);
  SolverConfig cfg;
  cfg.gap = 0.0;
  const SolveResult r = solve_branch_and_bound(m, cfg);
  REQUIRE(r.status == SolveStatus::kOptimal);
  // Brute force over the box 0..6.
  double best = 0.0;
  for (int a = 0; a <= 6; ++a) {
    for (int b = 0; b <= 6; ++b) {
      if (6 * a + 4 * b <= 24 && a + 2 * b <= 6) best = std::min(best, -5.0 * a - 4.0 * b);
    }
  }
  CHECK(r.objective == doctest::Approx(best));
}

TEST_CASE("infeasible and unbounded MIPs") {
  LinearModel m;
  const int x = m.add_variable("x", 0, 10, true);
  m.add_constraint("c", {{x, 2}}, Sense::kEq, 3);  // x = 1.5
  CHECK(solve_branch_and_bound(m, {}).status == SolveStatus::kInfeasible);

  LinearModel u;
  const int a = u.add_variable("a", 0, kInf, true, -1.0);
  u.add_constraint("c", {{a, 1}}, Sense::kGe, 0);
  CHECK(solve_branch_and_bound(u, {}).status == SolveStatus::kUnbounded);
}

TEST_CASE("check_feasibility reports rows, bounds and integrality") {
  LinearModel m;
  const int x = m.add_variable("x", 0, 1, true);
  const int y = m.add_variable("y", 0, 5);
  m.add_constraint("sum", {{x, 1}, {y, 1}}, Sense::kLe, 3);
  const std::vector<double> good{1.0, 2.0};
  CHECK(check_feasibility(m, good).ok());
  const std::vector<double> bad{0.5, 6.0};
  const FeasibilityReport r = check_feasibility(m, bad);
  REQUIRE(r.violations.size() == 3);
  CHECK(r.max_integrality_violation == doctest::Approx(0.5));
  // Bound and row violations are relative: 1 / (1 + 5) and 3.5 / (1 + 6).
  CHECK(r.max_bound_violation == doctest::Approx(1.0 / 6.0));
  CHECK(r.max_row_violation == doctest::Approx(0.5));
  CHECK_FALSE(r.summary().empty());
  // Relative tolerances absorb tiny violations.
  const std::vector<double> near{1.0, 2.0 + 1e-9};
  CHECK(check_feasibility(m, near).ok());
}

TEST_CASE("identical inputs give identical results") {
  const Instance inst = testing::toy_instance();
  const BuildResult b = build_deterministic_equivalent(inst, build_tree(inst, 3, testing::binary_spec()));
  SolverConfig cfg;
  cfg.gap = 0.0;
  const SolveResult r1 = solve_branch_and_bound(b.model, cfg);
  const SolveResult r2 = solve_branch_and_bound(b.model, cfg);
  REQUIRE(r1.status == SolveStatus::kOptimal);
  CHECK(r1.objective == r2.objective);
  CHECK(r1.values == r2.values);
  CHECK(r1.stats.nodes == r2.stats.nodes);
  CHECK(r1.stats.simplex_iterations == r2.stats.simplex_iterations);
}

TEST_CASE("node limit stops the search and keeps a feasible incumbent") {
  const Instance inst = testing::toy_instance();
  const BuildResult b = build_deterministic_equivalent(inst, build_tree(inst, 3, testing::binary_spec()));
  SolverConfig cfg;
  cfg.gap = 0.0;
  cfg.node_limit = 1;
  NodePlan zero = NodePlan::zeros(inst, build_tree(inst, 3, testing::binary_spec()));
  cfg.start = plan_values(inst, build_tree(inst, 3, testing::binary_spec()), b.map, zero);
  const SolveResult r = solve_branch_and_bound(b.model, cfg);
  CHECK((r.status == SolveStatus::kFeasibleGap || r.status == SolveStatus::kOptimal));
  REQUIRE(r.has_solution());
  CHECK(check_feasibility(b.model, r.values).ok());
  CHECK(r.best_bound <= r.objective + 1e-9);

  cfg.start = {1.0, 2.0};
  CHECK_THROWS_AS(solve_branch_and_bound(b.model, cfg), std::invalid_argument);
}

TEST_CASE("backend strings parse") {
  std::string cmd;
  CHECK(SolverConfig::parse_backend("builtin", &cmd) == Backend::kBuiltin);
  CHECK(SolverConfig::parse_backend("external:highs {in} {out}", &cmd) == Backend::kExternal);
  CHECK(cmd == "highs {in} {out}");
  CHECK_THROWS_AS(SolverConfig::parse_backend("cplex", &cmd), std::invalid_argument);
}
