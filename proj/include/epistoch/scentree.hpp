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

#ifndef EPISTOCH_SCENTREE_HPP
#define EPISTOCH_SCENTREE_HPP

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "epistoch/epidata.hpp"

namespace epistoch {

/// Standard normal quantile. Throws std::domain_error unless 0 < p < 1.
double inverse_normal_cdf(double p);

/// Standard normal CDF.
double normal_cdf(double x);

/// mean + sigma * inverse_normal_cdf(q) for each quantile, floored at
/// `floor`. Throws std::invalid_argument if sigma <= 0.
std::vector<double> node_realizations(double mean, double sigma, std::span<const double> quantiles,
                                      double floor = 1e-6);

struct SigmaRule {
  enum class Kind { kConstant, kStageScale };
  Kind kind = Kind::kConstant;
  // kStageScale: sigma at stage s is sigma_r * factor^s.
  double factor = 1.0;

  /// "constant" or "scale:<factor>".
  static SigmaRule parse(const std::string& text);
  std::string to_string() const;
};

struct TreeSpec {
  std::vector<double> quantiles{0.15, 0.50, 0.85};
  std::vector<double> probs{0.3, 0.4, 0.3};
  SigmaRule sigma_rule;
  double rate_floor = 1e-6;

  /// Branching taken from the instance file.
  static TreeSpec from_instance(const Instance& inst);
};

struct ScenarioNode {
  int id = 0;
  int stage = 0;
  std::optional<int> parent;
  int branch_index = 0;
  std::string branch_label;
  double branch_prob = 1.0;
  // Product of branch probabilities from the root.
  double path_prob = 1.0;
  std::vector<double> mean;   // per region
  std::vector<double> sigma;  // per region
  std::vector<double> rate;   // realized community transmission per region
  std::vector<int> children;
};

/// Complete b-ary tree stored breadth-first: node ids increase by stage and,
/// within a stage, by parent then branch index.
class ScenarioTree {
 public:
  ScenarioTree(std::vector<ScenarioNode> nodes, int stages, TreeSpec spec);

  int stages() const { return stages_; }
  std::size_t size() const { return nodes_.size(); }
  std::size_t region_count() const { return nodes_.front().rate.size(); }
  const ScenarioNode& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  const ScenarioNode& root() const { return nodes_.front(); }
  const std::vector<ScenarioNode>& nodes() const { return nodes_; }
  const TreeSpec& spec() const { return spec_; }

  bool is_leaf(int id) const { return node(id).children.empty(); }
  std::vector<int> leaves() const;
  std::vector<int> nodes_at_stage(int stage) const;
  /// Root-to-node id sequence.
  std::vector<int> path_to(int id) const;
  /// Leaves below (or equal to) the node.
  std::vector<int> leaves_under(int id) const;

 private:
  std::vector<ScenarioNode> nodes_;
  int stages_;
  TreeSpec spec_;
};

/// Builds the tree from each region's (chi1_mean, chi1_sigma). A child's
/// mean is its parent's realization at the child's quantile and the node's
/// rate equals its mean. Throws std::invalid_argument if stages < 1.
ScenarioTree build_tree(const Instance& inst, int stages, const TreeSpec& spec);
ScenarioTree build_tree(const Instance& inst, int stages);

/// One-branch tree whose stage-s rates are `rates[s]` (rates[0] is the root).
ScenarioTree single_path_tree(const std::vector<std::vector<double>>& rates);

struct ScenarioPath {
  int leaf = 0;
  std::vector<int> nodes;  // root -> leaf
  double probability = 1.0;
  std::vector<std::vector<double>> rates;  // [stage][region]
  std::vector<std::string> labels;         // branch label per stage >= 1
};

/// One path per leaf, in leaf-id order.
std::vector<ScenarioPath> scenario_paths(const ScenarioTree& tree);

/// Per-stage, per-region expected rate: sum over stage nodes of
/// path probability times rate.
std::vector<std::vector<double>> expected_value_path(const ScenarioTree& tree);

}  // namespace epistoch

#endif  // EPISTOCH_SCENTREE_HPP
