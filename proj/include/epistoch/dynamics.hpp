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

#ifndef EPISTOCH_DYNAMICS_HPP
#define EPISTOCH_DYNAMICS_HPP

#include <span>
#include <vector>

#include "epistoch/epidata.hpp"
#include "epistoch/scentree.hpp"

namespace epistoch {

struct RegionState {
  double S = 0.0;  // susceptible
  double I = 0.0;  // infected, in the community
  double T = 0.0;  // in treatment
  double R = 0.0;  // recovered
  double F = 0.0;  // dead, not yet buried
  double B = 0.0;  // buried
  double C = 0.0;  // beds

  double population() const { return S + I + T + R + F + B; }
  bool operator==(const RegionState&) const = default;
};

using CompartmentState = std::vector<RegionState>;

CompartmentState initial_state(const Instance& inst);

/// Number of ETCs opened, indexed [region][etc type].
using Opens = std::vector<std::vector<int>>;

Opens no_opens(const Instance& inst);

/// Stage-indexed plan for one scenario path: opens[stage][region][type].
/// Stages beyond opens.size() open nothing.
struct CapacityPlan {
  std::vector<Opens> opens;

  static CapacityPlan zeros(const Instance& inst, int stages);
  int total_opened() const;
};

/// Per-node plan for a whole tree: opens[node][region][type].
struct NodePlan {
  std::vector<Opens> opens;

  static NodePlan zeros(const Instance& inst, const ScenarioTree& tree);
  CapacityPlan along(const ScenarioPath& path) const;
};

/// min(I, C - T), floored at zero.
double hospitalization(double infected, double capacity, double treated);

struct StepResult {
  // Beds after this stage's openings; the state the transition acted on.
  CompartmentState current;
  CompartmentState next;
  std::vector<double> new_infections;  // chi1*I + chi2*F
  std::vector<double> hospitalized;    // I-bar
  int clamped = 0;                     // compartments floored at zero
};

/// One period. Order: capacity update, migration, new infections,
/// hospitalization min(I, C - T) on beginning-of-period values, balance
/// equations. Throws std::invalid_argument on NaN or negative rates.
StepResult step(const CompartmentState& state, std::span<const double> community_rates, const Instance& inst,
                const Opens& opens_now);

struct Trajectory {
  // states[j] carries beds after stage-j openings; states.back() is the
  // terminal state.
  std::vector<CompartmentState> states;
  std::vector<std::vector<double>> new_infections;  // [j][r]
  std::vector<std::vector<double>> hospitalized;    // [j][r]
  double fixed_spend = 0.0;
  double treatment_spend = 0.0;
  double spend = 0.0;
  double objective_value = 0.0;  // sum_j sum_r (I_{j+1} - I_j) + F_{j+1}
  double new_infection_flow = 0.0;
  int clamped = 0;
  bool within_budget = true;
  // Every opening happened in a region with at least as many infected as
  // ETCs of that type (y <= I).
  bool coupling_ok = true;

  bool feasible() const { return within_budget && coupling_ok && clamped == 0; }
};

/// Rolls `plan` forward along `path`; the stage-j transition uses the rates
/// realized at path stage j + 1.
Trajectory simulate_path(const Instance& inst, const CapacityPlan& plan, const ScenarioPath& path);

struct PolicyEvaluation {
  double expected_objective = 0.0;
  bool all_feasible = true;
  std::vector<Trajectory> trajectories;  // one per scenario path
};

/// Probability-weighted simulate_path over all scenarios using the
/// per-node decisions, which are non-anticipative by construction.
PolicyEvaluation evaluate_policy(const Instance& inst, const ScenarioTree& tree, const NodePlan& plan);

}  // namespace epistoch

#endif  // EPISTOCH_DYNAMICS_HPP
