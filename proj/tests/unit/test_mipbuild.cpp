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

// Variable and row counts derived by hand from the model's structure.
struct Counts {
  std::size_t vars = 0, rows = 0;
};

Counts expected_counts(const Instance& inst, const ScenarioTree& tree, Formulation f) {
  const std::size_t R = inst.region_count(), A = inst.etc_types.size();
  const std::size_t per_internal_vars = 7 + 5 + A + 3;  // states, Ibar + flows, y, z/U/W
  const std::size_t per_internal_rows = 1 + 4 + 11 + A;  // cap, migration, min block, y <= I
  std::size_t sites = 0, internal = 0, non_root = 0;
  const auto paths = scenario_paths(tree);
  if (f == Formulation::kNodeCompact) {
    sites = tree.size();
    for (const auto& n : tree.nodes()) internal += n.children.empty() ? 0 : 1;
    non_root = sites - 1;
  } else {
    for (const auto& p : paths) {
      sites += p.nodes.size();
      internal += p.nodes.size() - 1;
      non_root += p.nodes.size() - 1;
    }
  }
  Counts c;
  c.vars = R * (7 * (sites - internal) + per_internal_vars * internal);
  c.rows = R * ((sites - internal) + per_internal_rows * internal + 6 * non_root) + paths.size();
  if (f == Formulation::kScenarioSplit) {
    std::size_t tree_internal = 0;
    for (const auto& n : tree.nodes()) tree_internal += n.children.empty() ? 0 : 1;
    c.vars += R * (A + 2) * tree_internal;
    c.rows += R * (A + 2) * internal;
  }
  return c;
}

// I, C and T fixed, Ibar free, then the min block.
struct MinBlock {
  LinearModel model;
  ModelMap map;
  int ibar = 0;
};

MinBlock min_block(double I, double C, double T, const BigM& bm) {
  MinBlock b;
  auto add = [&](Symbol s, double lb, double ub) {
    const int idx = b.model.add_variable(symbol_name(s), lb, ub);
    b.map.add({s, 0, 0, -1, -1}, idx);
    return idx;
  };
  add(Symbol::I, I, I);
  add(Symbol::C, C, C);
  add(Symbol::T, T, T);
  b.ibar = add(Symbol::Ibar, 0.0, kInf);
  add_capacity_linearization(b.model, b.map, 0, 0, bm);
  return b;
}

}  // namespace

TEST_CASE("model size matches the hand count for the case-study two-stage tree") {
  const Instance inst = builtin_west_africa();
  const ScenarioTree tree = build_tree(inst, 2);
  const BuildResult nc = build_deterministic_equivalent(inst, tree);
  CHECK(nc.model.num_variables() == 786);
  CHECK(nc.model.num_constraints() == 927);
  for (auto f : {Formulation::kNodeCompact, Formulation::kScenarioSplit}) {
    BuildOptions opts;
    opts.formulation = f;
    const BuildResult b = build_deterministic_equivalent(inst, tree, opts);
    const Counts c = expected_counts(inst, tree, f);
    CHECK(b.model.num_variables() == c.vars);
    CHECK(b.model.num_constraints() == c.rows);
    CHECK(b.map.size() == b.model.num_variables());
    CHECK(b.model.validate().empty());
  }
}

TEST_CASE("the min block equals min(I, C - T) for random fixed triples") {
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  BigM bm;
  bm.h_ub = 1000.0;
  bm.i_ub = 1000.0;
  SolverConfig cfg;
  cfg.gap = 0.0;
  int failures = 0;
  for (int i = 0; i < 200; ++i) {
    double I = std::floor(1000.0 * u(rng)), C = std::floor(1000.0 * u(rng));
    double T = std::floor(C * u(rng));
    if (i % 10 == 0) I = C - T;  // tie
    const double want = std::min(I, C - T);
    for (double sign : {1.0, -1.0}) {
      MinBlock b = min_block(I, C, T, bm);
      b.model.variables[static_cast<std::size_t>(b.ibar)].obj = sign;
      const SolveResult res = solve_branch_and_bound(b.model, cfg);
      if (res.status != SolveStatus::kOptimal || std::abs(res.values[static_cast<std::size_t>(b.ibar)] - want) > 1e-7) {
        ++failures;
      }
    }
  }
  CHECK(failures == 0);
}

TEST_CASE("simulated plans satisfy every dynamics row and reproduce the objective") {
  const Instance inst = testing::toy_instance();
  const ScenarioTree tree = build_tree(inst, 3, testing::binary_spec());
  std::mt19937 rng(11);
  for (auto f : {Formulation::kNodeCompact, Formulation::kScenarioSplit}) {
    BuildOptions opts;
    opts.formulation = f;
    const BuildResult b = build_deterministic_equivalent(inst, tree, opts);
    for (int trial = 0; trial < 20; ++trial) {
      NodePlan plan = NodePlan::zeros(inst, tree);
      // At most one ETC on every path keeps the plan within budget.
      const int node = static_cast<int>(rng() % 7);
      if (trial > 0) plan.opens[static_cast<std::size_t>(node)][rng() % 2][0] = 1;
      const PolicyEvaluation ev = evaluate_policy(inst, tree, plan);
      const auto values = plan_values(inst, tree, b.map, plan);
      const FeasibilityReport rep = check_feasibility(b.model, values, 1e-7);
      CHECK_MESSAGE(rep.ok() == ev.all_feasible, rep.summary());
      CHECK(b.model.objective_value(values) == doctest::Approx(ev.expected_objective).epsilon(1e-10));
      const NodePlan back = extract_plan(b.map, tree, values);
      CHECK(back.opens == plan.opens);
    }
  }
}

TEST_CASE("solved states match the simulator along every scenario") {
  const Instance inst = testing::toy_instance();
  const ScenarioTree tree = build_tree(inst, 2, testing::binary_spec());
  const BuildResult b = build_deterministic_equivalent(inst, tree);
  SolverConfig cfg;
  cfg.gap = 0.0;
  const SolveResult res = solve_branch_and_bound(b.model, cfg);
  REQUIRE(res.status == SolveStatus::kOptimal);
  const NodePlan plan = extract_plan(b.map, tree, res.values);
  const auto sim = plan_values(inst, tree, b.map, plan);
  for (std::size_t i = 0; i < b.map.size(); ++i) {
    const Symbol s = b.map.key_of(static_cast<int>(i)).symbol;
    if (s == Symbol::z || s == Symbol::U || s == Symbol::W) continue;
    CHECK(res.values[i] == doctest::Approx(sim[i]).epsilon(1e-6));
  }
  const PolicyEvaluation ev = evaluate_policy(inst, tree, plan);
  CHECK(ev.all_feasible);
  CHECK(res.objective == doctest::Approx(ev.expected_objective).epsilon(1e-7));
}

TEST_CASE("fix_variables pins values and rejects bad keys") {
  const Instance inst = testing::toy_instance();
  const ScenarioTree tree = build_tree(inst, 2, testing::binary_spec());
  BuildResult b = build_deterministic_equivalent(inst, tree);
  const VarKey y{Symbol::y, 0, 1, 0, -1};
  const std::vector<std::pair<VarKey, double>> ok{{y, 1.0}};
  fix_variables(b.model, b.map, ok);
  const auto& v = b.model.variables[static_cast<std::size_t>(b.map.at(y))];
  CHECK(v.lb == 1.0);
  CHECK(v.ub == 1.0);
  const std::vector<std::pair<VarKey, double>> outside{{y, 99.0}};
  CHECK_THROWS_AS(fix_variables(b.model, b.map, outside), std::invalid_argument);
  const std::vector<std::pair<VarKey, double>> unknown{{{Symbol::y, 99, 0, 0, -1}, 0.0}};
  CHECK_THROWS_AS(fix_variables(b.model, b.map, unknown), std::invalid_argument);
  CHECK_THROWS_AS(b.map.at({Symbol::y, 99, 0, 0, -1}), std::out_of_range);
}

TEST_CASE("model map survives a JSON round trip") {
  const Instance inst = testing::toy_instance();
  const ScenarioTree tree = build_tree(inst, 2, testing::binary_spec());
  BuildOptions opts;
  opts.formulation = Formulation::kScenarioSplit;
  const BuildResult b = build_deterministic_equivalent(inst, tree, opts);
  const ModelMap back = ModelMap::from_json(b.map.to_json());
  CHECK(back.size() == b.map.size());
  CHECK(back.formulation == Formulation::kScenarioSplit);
  CHECK(back.scenario_nodes == b.map.scenario_nodes);
  for (std::size_t i = 0; i < back.size(); ++i) CHECK(back.key_of(static_cast<int>(i)) == b.map.key_of(static_cast<int>(i)));
  CHECK(back.to_json() == b.map.to_json());
}

TEST_CASE("equity rows hold exactly when the recomputed gap is within k") {
  const Instance inst = testing::toy_instance();
  const ScenarioTree tree = build_tree(inst, 2, testing::binary_spec());
  for (auto kind : {EquityKind::kInfection, EquityKind::kCapacity, EquityKind::kPrevalence}) {
    BuildOptions opts;
    opts.equity = {kind, 0.1};
    const BuildResult b = build_deterministic_equivalent(inst, tree, opts);
    const BuildResult plain = build_deterministic_equivalent(inst, tree);
    CHECK(b.model.num_constraints() == plain.model.num_constraints() + 2 * inst.region_count());
    NodePlan plan = NodePlan::zeros(inst, tree);
    plan.opens[0][0][0] = 1;
    const auto values = plan_values(inst, tree, b.map, plan);
    const EquityReport rep = equity_gaps(inst, b.map, values);
    const double gap = kind == EquityKind::kInfection  ? rep.max_infection_gap
                       : kind == EquityKind::kCapacity ? rep.max_capacity_gap
                                                       : rep.max_prevalence_gap;
    bool rows_ok = true;
    for (std::size_t i = plain.model.num_constraints(); i < b.model.num_constraints(); ++i) {
      const auto& c = b.model.constraints[i];
      const double act = b.model.activity(i, values);
      if (act < c.lower() - 1e-9 || act > c.upper() + 1e-9) rows_ok = false;
    }
    CHECK(rows_ok == (gap <= 0.1 + 1e-12));
  }
  BuildOptions bad;
  bad.equity = {EquityKind::kCapacity, -0.1};
  CHECK_THROWS_AS(build_deterministic_equivalent(inst, tree, bad), std::invalid_argument);
}

TEST_CASE("default big-M bounds") {
  const Instance inst = builtin_west_africa();
  const BigM m = default_big_m(inst, 0);
  // 24e6 buys at most 22 of the 100-bed type (better beds per dollar).
  CHECK(m.h_ub == inst.initial[0].beds + std::floor(24e6 * 100.0 / 1077300.0));
  CHECK(m.i_ub == inst.total_population());
  BuildOptions opts;
  opts.h_lb = 5.0;
  opts.h_ub = 1.0;
  CHECK_THROWS_AS(default_big_m(inst, 0, opts), std::invalid_argument);
}

TEST_CASE("names parse back") {
  for (int i = 0; i <= static_cast<int>(Symbol::Itilde); ++i) {
    CHECK(parse_symbol(symbol_name(static_cast<Symbol>(i))) == static_cast<Symbol>(i));
  }
  CHECK(parse_formulation("scenario-split") == Formulation::kScenarioSplit);
  CHECK(parse_equity("prevalence") == EquityKind::kPrevalence);
  CHECK_THROWS_AS(parse_equity("fair"), std::invalid_argument);
}
