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

#ifndef EPISTOCH_ANALYSIS_HPP
#define EPISTOCH_ANALYSIS_HPP

#include <span>
#include <string>
#include <vector>

#include "epistoch/dynamics.hpp"
#include "epistoch/epidata.hpp"
#include "epistoch/mipbuild.hpp"
#include "epistoch/scentree.hpp"
#include "epistoch/solve.hpp"

namespace epistoch {

struct AnalysisOptions {
  SolverConfig solver;
  BuildOptions build;  // formulation and equity apply to every model built
  int workers = 1;
};

struct TreeSolution {
  SolveResult result;
  BuildResult build;
  NodePlan plan;
};

/// Builds and solves the deterministic equivalent over `tree`.
TreeSolution solve_tree(const Instance& inst, const ScenarioTree& tree, const AnalysisOptions& opts);

struct WaitAndSee {
  double objective = 0.0;  // +inf when some scenario is infeasible
  std::vector<double> per_scenario;
  std::vector<SolveStatus> statuses;
};

/// Probability-weighted optimum of the single-scenario models, solved
/// concurrently on up to opts.workers threads.
WaitAndSee solve_ws(const Instance& inst, const ScenarioTree& tree, const AnalysisOptions& opts);

struct ExpectedValueSolution {
  double objective = kInf;
  SolveStatus status = SolveStatus::kInfeasible;
  CapacityPlan plan;  // decisions per stage along the mean path
  ScenarioTree tree;  // the mean-path tree that was solved
};

ExpectedValueSolution solve_ev(const Instance& inst, const ScenarioTree& tree, const AnalysisOptions& opts);

/// EV decisions for tree stages 0..last_stage applied to every node of
/// those stages, as fix_variables assignments on y.
std::vector<std::pair<VarKey, double>> ev_fixings(const ScenarioTree& tree, const CapacityPlan& ev_plan,
                                                   int last_stage);

struct VssChain {
  double rp = kInf;
  double ws = kInf;
  double ev = kInf;
  std::vector<double> eev;  // eev[t - 1] = EEV_t, t = 1..T
  std::vector<double> vss;  // vss[t - 1] = EEV_t - RP
  std::vector<std::string> diagnostics;
};

/// RP from the full model, WS, EV and EEV_t for t = 1..T where EEV_t fixes
/// the EV openings through tree stage t - 2 (so EEV_1 = RP). An infeasible
/// EEV_t is +inf with a diagnostic. Throws std::invalid_argument when T is
/// outside 1..tree.stages().
VssChain vss_chain(const Instance& inst, const ScenarioTree& tree, const AnalysisOptions& opts, int T);

struct RegionEquity {
  std::string region;
  double expected_infections = 0.0;
  double expected_capacity = 0.0;
  double infection_gap = 0.0;
  double capacity_gap = 0.0;
  double prevalence_gap = 0.0;
};

struct EquityReport {
  std::vector<RegionEquity> regions;
  EquitySpec thresholds;
  double max_infection_gap = 0.0;
  double max_capacity_gap = 0.0;
  double max_prevalence_gap = 0.0;
};

/// Recomputes the three equity left-hand sides from solution values.
EquityReport equity_gaps(const Instance& inst, const ModelMap& map, std::span<const double> values,
                         EquitySpec thresholds = {});

struct AllocationEntry {
  std::string name;  // region or country
  double first_stage_budget = 0.0;
  double total_budget = 0.0;  // expectation over scenarios
  std::vector<double> first_stage_etcs;  // per ETC type
  std::vector<double> total_etcs;        // expected count per ETC type
};

struct AllocationReport {
  std::vector<AllocationEntry> regions;
  std::vector<AllocationEntry> countries;
  AllocationEntry total;
  double max_scenario_spend = 0.0;
};

/// Budgets from the solution: fixed costs of openings plus b1 * T, the
/// first stage being the root node.
AllocationReport allocation_report(const Instance& inst, const ModelMap& map, std::span<const double> values);

struct TTestResult {
  double t_stat = 0.0;
  double p_value = 1.0;
  int df = 0;
  bool degenerate = false;  // zero-variance differences with nonzero mean
};

/// Two-tailed paired t-test on a - b. Throws std::invalid_argument for
/// unequal lengths or fewer than two pairs.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

/// Regularized incomplete beta I_x(a, b).
double regularized_incomplete_beta(double x, double a, double b);

/// Two-tailed p-value of Student's t with df degrees of freedom.
double student_t_two_tailed(double t, double df);

}  // namespace epistoch

#endif  // EPISTOCH_ANALYSIS_HPP
