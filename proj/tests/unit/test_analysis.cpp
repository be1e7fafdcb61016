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

#include "doctest.h"
#include "fixtures.hpp"

using namespace epistoch;

namespace {

AnalysisOptions exact() {
  AnalysisOptions opts;
  opts.solver.gap = 0.0;
  opts.solver.time_limit = 120.0;
  return opts;
}

}  // namespace

TEST_CASE("wait-and-see, recourse and expected-value chain on the toy tree") {
  const Instance inst = testing::toy_instance();
  const ScenarioTree tree = build_tree(inst, 3, testing::binary_spec());
  const VssChain c = vss_chain(inst, tree, exact(), 3);
  REQUIRE(c.eev.size() == 3);
  CHECK(c.vss[0] == 0.0);
  CHECK(c.eev[0] == c.rp);
  CHECK(c.ws <= c.rp + 1e-9);
  for (std::size_t t = 1; t < c.eev.size(); ++t) {
    CHECK(c.eev[t] >= c.eev[t - 1] - 1e-9);
    CHECK(c.vss[t] >= -1e-9);
  }
  CHECK(c.diagnostics.empty());
  CHECK_THROWS_AS(vss_chain(inst, tree, exact(), 4), std::invalid_argument);
  CHECK_THROWS_AS(vss_chain(inst, tree, exact(), 0), std::invalid_argument);
}

TEST_CASE("the recourse optimum matches exhaustive enumeration") {
  const Instance inst = testing::toy_instance();
  const ScenarioTree tree = build_tree(inst, 2, testing::binary_spec());
  const TreeSolution sol = solve_tree(inst, tree, exact());
  REQUIRE(sol.result.status == SolveStatus::kOptimal);
  const auto brute = testing::enumerate_plans(inst, tree);
  CHECK(testing::rel_diff(sol.result.objective, brute.best) < 1e-6);
  CHECK(evaluate_policy(inst, tree, sol.plan).expected_objective == doctest::Approx(brute.best).epsilon(1e-7));
}

TEST_CASE("node-compact and scenario-split agree") {
  const Instance inst = testing::random_toy(5);
  const ScenarioTree tree = build_tree(inst, 2, testing::binary_spec());
  AnalysisOptions nc = exact(), ss = exact();
  ss.build.formulation = Formulation::kScenarioSplit;
  const TreeSolution a = solve_tree(inst, tree, nc);
  const TreeSolution b = solve_tree(inst, tree, ss);
  REQUIRE(a.result.status == SolveStatus::kOptimal);
  REQUIRE(b.result.status == SolveStatus::kOptimal);
  CHECK(testing::rel_diff(a.result.objective, b.result.objective) < 1e-6);
  CHECK(a.plan.opens == b.plan.opens);
}

TEST_CASE("equity-constrained optima respect their tolerance") {
  const Instance inst = testing::toy_instance();
  const ScenarioTree tree = build_tree(inst, 2, testing::binary_spec());
  const TreeSolution free = solve_tree(inst, tree, exact());
  REQUIRE(free.result.status == SolveStatus::kOptimal);
  for (auto kind : {EquityKind::kInfection, EquityKind::kPrevalence}) {
    AnalysisOptions opts = exact();
    opts.build.equity = {kind, 0.2};
    const TreeSolution sol = solve_tree(inst, tree, opts);
    if (sol.result.status != SolveStatus::kOptimal) continue;
    CHECK(sol.result.objective >= free.result.objective - 1e-7);
    const EquityReport rep = equity_gaps(inst, sol.build.map, sol.result.values, opts.build.equity);
    const double gap = kind == EquityKind::kInfection ? rep.max_infection_gap : rep.max_prevalence_gap;
    CHECK(gap <= 0.2 + 1e-6);
  }
}

TEST_CASE("one 50-bed ETC at the root costs 598,500 in the first stage") {
  const Instance inst = builtin_west_africa();
  const ScenarioTree tree = build_tree(inst, 2);
  const BuildResult b = build_deterministic_equivalent(inst, tree);
  NodePlan plan = NodePlan::zeros(inst, tree);
  plan.opens[0][0][0] = 1;
  const auto values = plan_values(inst, tree, b.map, plan);
  const AllocationReport rep = allocation_report(inst, b.map, values);
  const double b1 = inst.costs.treatment_cost_per_person;
  CHECK(rep.regions[0].first_stage_budget == doctest::Approx(598500.0 + b1 * inst.initial[0].treated));
  CHECK(rep.regions[0].first_stage_etcs[0] == 1.0);
  CHECK(rep.regions[0].total_etcs[0] == doctest::Approx(1.0));
  REQUIRE(rep.countries.size() == 3);
  CHECK(rep.countries[0].name == "Guinea");
  double total = 0.0;
  for (const auto& c : rep.countries) total += c.total_budget;
  CHECK(rep.total.total_budget == doctest::Approx(total));
  // The worst scenario's spend is what the budget row sees.
  double worst = 0.0;
  for (const auto& t : evaluate_policy(inst, tree, plan).trajectories) worst = std::max(worst, t.spend);
  CHECK(rep.max_scenario_spend == doctest::Approx(worst).epsilon(1e-12));
}

TEST_CASE("with no budget the mean-path problem opens nothing") {
  Instance inst = testing::toy_instance();
  inst.costs.budget = 0.0;
  inst.costs.treatment_cost_per_person = 0.0;
  const ScenarioTree tree = build_tree(inst, 3, testing::binary_spec());
  const ExpectedValueSolution ev = solve_ev(inst, tree, exact());
  REQUIRE(ev.status == SolveStatus::kOptimal);
  CHECK(ev.plan.total_opened() == 0);
  const auto path = scenario_paths(ev.tree).front();
  CHECK(ev.objective == doctest::Approx(simulate_path(inst, CapacityPlan::zeros(inst, 3), path).objective_value));
  const auto fix = ev_fixings(tree, ev.plan, 1);
  CHECK(fix.size() == 3 * inst.region_count() * inst.etc_types.size());  // the root and two children
}

TEST_CASE("wait-and-see is the probability-weighted per-scenario optimum") {
  const Instance inst = testing::toy_instance();
  const ScenarioTree tree = build_tree(inst, 2, testing::binary_spec());
  AnalysisOptions opts = exact();
  opts.workers = 2;
  const WaitAndSee ws = solve_ws(inst, tree, opts);
  const auto paths = scenario_paths(tree);
  REQUIRE(ws.per_scenario.size() == paths.size());
  double total = 0.0;
  for (std::size_t w = 0; w < paths.size(); ++w) {
    CHECK(ws.statuses[w] == SolveStatus::kOptimal);
    total += paths[w].probability * ws.per_scenario[w];
    // Clairvoyant: at least as good as the shared recourse plan on this path.
    const ScenarioTree one = single_path_tree(paths[w].rates);
    const auto brute = testing::enumerate_plans(inst, one);
    CHECK(testing::rel_diff(ws.per_scenario[w], brute.best) < 1e-6);
  }
  CHECK(ws.objective == doctest::Approx(total));
}
