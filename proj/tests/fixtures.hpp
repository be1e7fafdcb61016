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

// Small instances and brute-force oracles shared by the unit and
// acceptance tests.

#ifndef EPISTOCH_TESTS_FIXTURES_HPP
#define EPISTOCH_TESTS_FIXTURES_HPP

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "epistoch/analysis.hpp"

namespace epistoch::testing {

inline std::string data_path(const std::string& rel) { return std::string(EPISTOCH_TEST_DATA) + "/" + rel; }

inline RegionParams toy_region(std::string id, std::string country, double population, double chi1) {
  RegionParams r;
  r.id = id;
  r.name = "Region " + id;
  r.country = std::move(country);
  r.population = population;
  r.fatality_untreated = 0.1;
  r.fatality_treated = 0.05;
  r.recovery_untreated = 0.2;
  r.recovery_treated = 0.3;
  r.burial_rate = 0.5;
  r.funeral_transmission = 0.1;
  // chi1 stays above lambda1 + lambda3 so full hospitalization never
  // drives I negative.
  r.chi1_mean = chi1;
  r.chi1_sigma = 0.05;
  r.chi1_low = chi1 - 0.05;
  r.chi1_high = chi1 + 0.05;
  r.chi1_range_low = chi1 - 0.2;
  r.chi1_range_high = chi1 + 0.2;
  return r;
}

// Two regions, one ETC type of 10 beds at cost 100, budget 150: each
// scenario can afford at most one ETC.
inline Instance toy_instance() {
  Instance inst;
  inst.name = "toy";
  inst.regions = {toy_region("A", "North", 1000.0, 0.5), toy_region("B", "South", 800.0, 0.6)};
  inst.migration = MigrationMatrix(2);
  inst.migration.set_rate(0, 1, 0.01);
  inst.migration.set_rate(1, 0, 0.02);
  inst.etc_types = {{1, 10.0, 100.0}};
  inst.costs.treatment_cost_per_person = 0.01;
  inst.costs.burial_cost_per_body = 1.0;
  inst.costs.budget = 150.0;
  RegionInitial a, b;
  a.infected = 20.0;
  a.susceptible = 980.0;
  b.infected = 10.0;
  b.susceptible = 790.0;
  inst.initial = {a, b};
  inst.horizon = 3;
  inst.branch_probs = {0.5, 0.5};
  inst.branch_quantiles = {0.25, 0.75};
  return inst;
}

inline TreeSpec binary_spec() {
  TreeSpec spec;
  spec.quantiles = {0.25, 0.75};
  spec.probs = {0.5, 0.5};
  return spec;
}

// Randomized variant: rates, populations, costs and budget vary; the
// budget affords between one and three ETCs.
inline Instance random_toy(unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Instance inst = toy_instance();
  inst.name = "random-toy-" + std::to_string(seed);
  for (std::size_t r = 0; r < 2; ++r) {
    auto& p = inst.regions[r];
    p.population = 500.0 + 1500.0 * u(rng);
    p.fatality_untreated = 0.05 + 0.1 * u(rng);
    p.recovery_untreated = 0.1 + 0.1 * u(rng);
    p.fatality_treated = 0.02 + 0.05 * u(rng);
    p.recovery_treated = 0.2 + 0.2 * u(rng);
    p.burial_rate = 0.3 + 0.5 * u(rng);
    p.funeral_transmission = 0.05 + 0.1 * u(rng);
    p.chi1_mean = 0.45 + 0.2 * u(rng);
    p.chi1_sigma = 0.02 + 0.06 * u(rng);
    p.chi1_low = p.chi1_mean - p.chi1_sigma;
    p.chi1_high = p.chi1_mean + p.chi1_sigma;
    p.chi1_range_low = p.chi1_mean - 0.3;
    p.chi1_range_high = p.chi1_mean + 0.3;
    const double infected = 5.0 + 25.0 * u(rng);
    inst.initial[r] = {};
    inst.initial[r].infected = infected;
    inst.initial[r].susceptible = p.population - infected;
    inst.initial[r].beds = std::floor(5.0 * u(rng));
  }
  inst.migration.set_rate(0, 1, 0.03 * u(rng));
  inst.migration.set_rate(1, 0, 0.03 * u(rng));
  inst.etc_types = {{1, 5.0 + std::floor(10.0 * u(rng)), 100.0}};
  inst.costs.treatment_cost_per_person = 0.5 * u(rng);
  inst.costs.budget = 100.0 + 250.0 * u(rng);
  return inst;
}

struct EnumerationResult {
  double best = std::numeric_limits<double>::infinity();
  NodePlan plan;
  long plans = 0;     // plans visited
  long feasible = 0;  // plans whose every scenario is feasible
};

// Exhaustive search over node plans: every internal node gets any ETC
// count vector whose cumulative fixed cost along each path stays within
// the budget; each complete plan is scored by the simulator.
inline EnumerationResult enumerate_plans(const Instance& inst, const ScenarioTree& tree) {
  EnumerationResult out;
  NodePlan plan = NodePlan::zeros(inst, tree);
  std::vector<int> internal;
  for (const auto& n : tree.nodes()) {
    if (!n.children.empty()) internal.push_back(n.id);
  }
  std::vector<double> spent(tree.size(), 0.0);  // fixed cost through each node
  const std::size_t regions = inst.region_count(), types = inst.etc_types.size();

  std::function<void(std::size_t)> visit_node;
  std::function<void(std::size_t, std::size_t, double)> visit_slot;
  visit_node = [&](std::size_t k) {
    if (k == internal.size()) {
      ++out.plans;
      const PolicyEvaluation ev = evaluate_policy(inst, tree, plan);
      if (!ev.all_feasible) return;
      ++out.feasible;
      if (ev.expected_objective < out.best) {
        out.best = ev.expected_objective;
        out.plan = plan;
      }
      return;
    }
    const auto& n = tree.node(internal[k]);
    const double before = n.parent ? spent[static_cast<std::size_t>(*n.parent)] : 0.0;
    visit_slot(k, 0, before);
  };
  visit_slot = [&](std::size_t k, std::size_t slot, double cost) {
    const int id = internal[k];
    if (slot == regions * types) {
      spent[static_cast<std::size_t>(id)] = cost;
      visit_node(k + 1);
      return;
    }
    const std::size_t r = slot / types, a = slot % types;
    const double g = inst.etc_types[a].fixed_cost;
    int& y = plan.opens[static_cast<std::size_t>(id)][r][a];
    for (y = 0; cost + g * y <= inst.costs.budget + 1e-9; ++y) {
      visit_slot(k, slot + 1, cost + g * y);
      if (g == 0.0) break;
    }
    y = 0;
  };
  visit_node(0);
  return out;
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace epistoch::testing

#endif  // EPISTOCH_TESTS_FIXTURES_HPP
