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

#include "epistoch/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace epistoch {

CompartmentState initial_state(const Instance& inst) {
  CompartmentState out(inst.region_count());
  for (std::size_t r = 0; r < out.size(); ++r) {
    const auto& s = inst.initial[r];
    out[r] = {s.susceptible, s.infected, s.treated, s.recovered, s.funerals, s.buried, s.beds};
  }
  return out;
}

Opens no_opens(const Instance& inst) {
  return Opens(inst.region_count(), std::vector<int>(inst.etc_types.size(), 0));
}

CapacityPlan CapacityPlan::zeros(const Instance& inst, int stages) {
  CapacityPlan plan;
  plan.opens.assign(static_cast<std::size_t>(stages), no_opens(inst));
  return plan;
}

int CapacityPlan::total_opened() const {
  int total = 0;
  for (const auto& stage : opens) {
    for (const auto& region : stage) {
      for (int n : region) total += n;
    }
  }
  return total;
}

NodePlan NodePlan::zeros(const Instance& inst, const ScenarioTree& tree) {
  NodePlan plan;
  plan.opens.assign(tree.size(), no_opens(inst));
  return plan;
}

CapacityPlan NodePlan::along(const ScenarioPath& path) const {
  CapacityPlan plan;
  // The leaf never opens anything.
  for (std::size_t s = 0; s + 1 < path.nodes.size(); ++s) {
    plan.opens.push_back(opens[static_cast<std::size_t>(path.nodes[s])]);
  }
  return plan;
}

double hospitalization(double infected, double capacity, double treated) {
  return std::max(0.0, std::min(infected, capacity - treated));
}

namespace {

void require_finite_nonneg(double v, const char* what, std::size_t region) {
  if (!std::isfinite(v) || v < 0.0) {
    throw std::invalid_argument(fmt::format("step: {} = {} in region {} must be finite and >= 0", what, v, region));
  }
}

double clamp_nonneg(double v, double scale, int& clamped) {
  if (v >= 0.0) return v;
  if (v < -1e-9 * std::max(1.0, scale)) ++clamped;
  return 0.0;
}

}  // namespace

StepResult step(const CompartmentState& state, std::span<const double> community_rates, const Instance& inst,
                const Opens& opens_now) {
  const std::size_t regions = inst.region_count();
  if (state.size() != regions || community_rates.size() != regions || opens_now.size() != regions) {
    throw std::invalid_argument("step: state, rates and opens must cover every region");
  }
  StepResult out;
  out.current = state;
  for (std::size_t r = 0; r < regions; ++r) {
    require_finite_nonneg(community_rates[r], "community rate", r);
    const auto& p = inst.regions[r];
    for (double v : {p.fatality_untreated, p.fatality_treated, p.recovery_untreated, p.recovery_treated,
                     p.burial_rate, p.funeral_transmission}) {
      require_finite_nonneg(v, "transition parameter", r);
    }
    for (std::size_t a = 0; a < inst.etc_types.size(); ++a) {
      if (opens_now[r][a] < 0) throw std::invalid_argument("step: negative ETC count");
      out.current[r].C += inst.etc_types[a].capacity_beds * opens_now[r][a];
    }
  }

  std::vector<double> susceptible(regions), infected(regions);
  for (std::size_t r = 0; r < regions; ++r) {
    susceptible[r] = out.current[r].S;
    infected[r] = out.current[r].I;
  }

  out.next.resize(regions);
  out.new_infections.resize(regions);
  out.hospitalized.resize(regions);
  for (std::size_t r = 0; r < regions; ++r) {
    const auto& p = inst.regions[r];
    const RegionState& s = out.current[r];
    const double s_in = inst.migration.inflow(r, susceptible);
    const double s_out = inst.migration.outflow(r, susceptible);
    const double i_in = inst.migration.inflow(r, infected);
    const double i_out = inst.migration.outflow(r, infected);
    const double infections = community_rates[r] * s.I + p.funeral_transmission * s.F;
    const double admitted = hospitalization(s.I, s.C, s.T);
    out.new_infections[r] = infections;
    out.hospitalized[r] = admitted;

    const double scale = s.population();
    RegionState& n = out.next[r];
    n.S = clamp_nonneg(s.S + s_in - s_out - infections, scale, out.clamped);
    n.I = clamp_nonneg(s.I + i_in - i_out + infections - (p.fatality_untreated + p.recovery_untreated) * s.I -
                           admitted,
                       scale, out.clamped);
    n.T = clamp_nonneg(s.T + admitted - (p.fatality_treated + p.recovery_treated) * s.T, scale, out.clamped);
    n.R = s.R + p.recovery_treated * s.T + p.recovery_untreated * s.I;
    n.F = clamp_nonneg(s.F + p.fatality_untreated * s.I + p.fatality_treated * s.T - p.burial_rate * s.F, scale,
                       out.clamped);
    n.B = s.B + p.burial_rate * s.F;
    n.C = s.C;
  }
  return out;
}

Trajectory simulate_path(const Instance& inst, const CapacityPlan& plan, const ScenarioPath& path) {
  const int stages = static_cast<int>(path.nodes.size()) - 1;
  if (static_cast<int>(plan.opens.size()) > stages) {
    throw std::invalid_argument(
        fmt::format("simulate_path: plan has {} stages but the path only {}", plan.opens.size(), stages));
  }
  const Opens none = no_opens(inst);
  Trajectory traj;
  CompartmentState state = initial_state(inst);
  const double b1 = inst.costs.treatment_cost_per_person;
  for (int j = 0; j < stages; ++j) {
    const Opens& opens = j < static_cast<int>(plan.opens.size()) ? plan.opens[static_cast<std::size_t>(j)] : none;
    for (std::size_t r = 0; r < inst.region_count(); ++r) {
      for (std::size_t a = 0; a < inst.etc_types.size(); ++a) {
        traj.fixed_spend += inst.etc_types[a].fixed_cost * opens[r][a];
        if (opens[r][a] > 0 && static_cast<double>(opens[r][a]) > state[r].I) traj.coupling_ok = false;
      }
    }
    StepResult res = step(state, path.rates[static_cast<std::size_t>(j) + 1], inst, opens);
    traj.clamped += res.clamped;
    for (std::size_t r = 0; r < inst.region_count(); ++r) {
      traj.treatment_spend += b1 * res.current[r].T;
      traj.objective_value += (res.next[r].I - res.current[r].I) + res.next[r].F;
      traj.new_infection_flow += res.new_infections[r];
    }
    traj.states.push_back(std::move(res.current));
    traj.new_infections.push_back(std::move(res.new_infections));
    traj.hospitalized.push_back(std::move(res.hospitalized));
    state = std::move(res.next);
  }
  for (const auto& s : state) traj.treatment_spend += b1 * s.T;
  traj.states.push_back(std::move(state));
  traj.spend = traj.fixed_spend + traj.treatment_spend;
  const double budget = inst.costs.budget;
  traj.within_budget = traj.spend <= budget + 1e-9 * std::max(1.0, budget);
  return traj;
}

PolicyEvaluation evaluate_policy(const Instance& inst, const ScenarioTree& tree, const NodePlan& plan) {
  if (plan.opens.size() != tree.size()) {
    throw std::invalid_argument("evaluate_policy: plan must define every tree node");
  }
  PolicyEvaluation out;
  for (const auto& path : scenario_paths(tree)) {
    Trajectory traj = simulate_path(inst, plan.along(path), path);
    out.expected_objective += path.probability * traj.objective_value;
    out.all_feasible = out.all_feasible && traj.feasible();
    out.trajectories.push_back(std::move(traj));
  }
  return out;
}

}  // namespace epistoch
