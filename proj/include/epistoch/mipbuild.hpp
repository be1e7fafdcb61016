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

#ifndef EPISTOCH_MIPBUILD_HPP
#define EPISTOCH_MIPBUILD_HPP

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "epistoch/dynamics.hpp"
#include "epistoch/epidata.hpp"
#include "epistoch/linear_model.hpp"
#include "epistoch/scentree.hpp"

namespace epistoch {

enum class Symbol { S, I, T, R, F, B, C, Ibar, y, z, U, W, Shat, Stilde, Ihat, Itilde };

std::string symbol_name(Symbol s);
Symbol parse_symbol(const std::string& text);

/// Identifies one model variable. In node-compact models `node` is a tree
/// node id and `scenario` is -1. In scenario-split models per-scenario
/// copies carry `scenario` = path index and `node` = stage; the shared
/// anchors x_n carry `scenario` = -1 and `node` = tree node id.
struct VarKey {
  Symbol symbol = Symbol::S;
  int node = 0;
  int region = 0;
  int etc = -1;
  int scenario = -1;

  auto operator<=>(const VarKey&) const = default;
  std::string to_string() const;
};

enum class Formulation { kNodeCompact, kScenarioSplit };

std::string formulation_name(Formulation f);
Formulation parse_formulation(const std::string& text);

class ModelMap {
 public:
  void add(const VarKey& key, int index);
  bool contains(const VarKey& key) const { return forward_.count(key) != 0; }
  /// Throws std::out_of_range for unknown keys.
  int at(const VarKey& key) const;
  std::optional<int> find(const VarKey& key) const;
  const VarKey& key_of(int index) const { return reverse_.at(static_cast<std::size_t>(index)); }
  std::size_t size() const { return reverse_.size(); }

  /// JSON document: formulation, stages, regions and one entry per variable.
  std::string to_json() const;
  static ModelMap from_json(const std::string& text);

  // Context recorded by the builder so the equity and extraction helpers
  // can work from the map alone.
  Formulation formulation = Formulation::kNodeCompact;
  int stages = 0;
  int regions = 0;
  int etc_types = 0;
  std::vector<double> node_prob;           // node-compact weights
  std::vector<double> scenario_prob;       // scenario-split weights
  std::vector<std::vector<int>> scenario_nodes;  // node ids along each path
  std::vector<double> region_population;

 private:
  std::map<VarKey, int> forward_;
  std::vector<VarKey> reverse_;
};

/// Bounds used by the min(I, C - T) linearization.
struct BigM {
  double h_lb = 0.0;
  double h_ub = 0.0;
  double i_lb = 0.0;
  double i_ub = 0.0;
};

enum class EquityKind { kNone, kInfection, kCapacity, kPrevalence };

std::string equity_name(EquityKind k);
EquityKind parse_equity(const std::string& text);

struct EquitySpec {
  EquityKind kind = EquityKind::kNone;
  double k = 0.0;
};

struct BuildOptions {
  Formulation formulation = Formulation::kNodeCompact;
  EquitySpec equity;
  std::vector<std::pair<VarKey, double>> fixed;
  // Overrides; when unset the defaults are H_LB = 0, H_UB = C0 + the beds
  // the budget can buy, I_LB = 0, I_UB = total population.
  std::optional<double> h_lb, h_ub, i_lb, i_ub;
};

struct BuildResult {
  LinearModel model;
  ModelMap map;
};

/// Default big-M bounds for one region.
BigM default_big_m(const Instance& inst, int region, const BuildOptions& opts = {});

/// Deterministic equivalent of the multi-stage model over `tree`. Throws
/// std::invalid_argument when the tree and instance disagree on regions or
/// when an equity tolerance is negative.
BuildResult build_deterministic_equivalent(const Instance& inst, const ScenarioTree& tree,
                                           const BuildOptions& opts = {});

/// Adds z, U, W and the rows forcing Ibar = min(I, C - T) at one site.
/// `scenario` = -1 addresses a node-compact node; otherwise `node` is the
/// stage of that scenario's copy.
void add_capacity_linearization(LinearModel& model, ModelMap& map, int node, int region, const BigM& bounds,
                                int scenario = -1);

void add_infection_equity(LinearModel& model, const ModelMap& map, double k);
void add_capacity_equity(LinearModel& model, const ModelMap& map, double k);
void add_prevalence_equity(LinearModel& model, const ModelMap& map, double k);

/// Sets lb = ub = value. Throws std::invalid_argument when the value lies
/// outside the current bounds or the key is unknown.
void fix_variables(LinearModel& model, const ModelMap& map, std::span<const std::pair<VarKey, double>> assignments);

/// Per-node ETC openings read from a solution (rounded to integers).
NodePlan extract_plan(const ModelMap& map, const ScenarioTree& tree, std::span<const double> values);

/// Full variable vector for the built model obtained by simulating `plan`
/// node by node: states, migration flows, I-bar and the z/U/W split of the
/// min block. The result satisfies every dynamics row when no compartment
/// clamps; budget, coupling and equity rows are not enforced.
std::vector<double> plan_values(const Instance& inst, const ScenarioTree& tree, const ModelMap& map,
                                const NodePlan& plan);

/// Probability-weighted per-region sums of a state symbol over every stage,
/// sum_n P(n) x_{n,r}.
std::vector<double> expected_totals(const ModelMap& map, Symbol symbol, std::span<const double> values);

/// Value of (symbol, stage, region) on scenario path `scenario`.
double scenario_value(const ModelMap& map, Symbol symbol, int scenario, int stage, int region,
                      std::span<const double> values);

}  // namespace epistoch

#endif  // EPISTOCH_MIPBUILD_HPP
