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

#include "epistoch/scentree.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

namespace epistoch {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Acklam's rational approximation (relative error ~1.2e-9) followed by one
// Newton step on Phi(x) - p.
double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::domain_error(fmt::format("inverse_normal_cdf: p = {} outside (0,1)", p));
  }
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  constexpr double p_high = 1.0 - p_low;

  double x = 0.0;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= p_high) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p == 0.5) return 0.0;

  // Refine against the upper tail for p > 0.5 so Phi(x) - p keeps precision.
  const double density = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  const double residual = p <= 0.5 ? normal_cdf(x) - p : (1.0 - p) - 0.5 * std::erfc(x / std::numbers::sqrt2);
  x -= residual / density;
  return x;
}

std::vector<double> node_realizations(double mean, double sigma, std::span<const double> quantiles, double floor) {
  if (!(sigma > 0.0)) throw std::invalid_argument(fmt::format("node_realizations: sigma = {} must be > 0", sigma));
  std::vector<double> out;
  out.reserve(quantiles.size());
  for (double q : quantiles) out.push_back(std::max(floor, mean + sigma * inverse_normal_cdf(q)));
  return out;
}

SigmaRule SigmaRule::parse(const std::string& text) {
  if (text == "constant") return {};
  if (text.rfind("scale:", 0) == 0) {
    SigmaRule rule;
    rule.kind = Kind::kStageScale;
    try {
      rule.factor = std::stod(text.substr(6));
    } catch (const std::exception&) {
      throw std::invalid_argument(fmt::format("bad sigma rule '{}'", text));
    }
    if (!(rule.factor > 0.0)) throw std::invalid_argument("sigma scale factor must be > 0");
    return rule;
  }
  throw std::invalid_argument(fmt::format("unknown sigma rule '{}' (use constant or scale:<f>)", text));
}

std::string SigmaRule::to_string() const {
  return kind == Kind::kConstant ? std::string("constant") : fmt::format("scale:{}", factor);
}

TreeSpec TreeSpec::from_instance(const Instance& inst) {
  TreeSpec spec;
  spec.quantiles = inst.branch_quantiles;
  spec.probs = inst.branch_probs;
  return spec;
}

ScenarioTree::ScenarioTree(std::vector<ScenarioNode> nodes, int stages, TreeSpec spec)
    : nodes_(std::move(nodes)), stages_(stages), spec_(std::move(spec)) {}

std::vector<int> ScenarioTree::leaves() const { return nodes_at_stage(stages_); }

std::vector<int> ScenarioTree::nodes_at_stage(int stage) const {
  std::vector<int> out;
  for (const auto& n : nodes_) {
    if (n.stage == stage) out.push_back(n.id);
  }
  return out;
}

std::vector<int> ScenarioTree::path_to(int id) const {
  std::vector<int> out;
  std::optional<int> cur = id;
  while (cur) {
    out.push_back(*cur);
    cur = node(*cur).parent;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::vector<int> ScenarioTree::leaves_under(int id) const {
  std::vector<int> out;
  std::vector<int> stack{id};
  while (!stack.empty()) {
    const int cur = stack.back();
    stack.pop_back();
    const auto& n = node(cur);
    if (n.children.empty()) {
      out.push_back(cur);
    } else {
      for (auto it = n.children.rbegin(); it != n.children.rend(); ++it) stack.push_back(*it);
    }
  }
  return out;
}

namespace {

std::string branch_label(std::size_t index, std::size_t branching) {
  if (branching == 1) return "medium";
  if (branching == 2) return index == 0 ? "low" : "high";
  if (branching == 3) {
    static const char* names[] = {"low", "medium", "high"};
    return names[index];
  }
  return fmt::format("b{}", index);
}

}  // namespace

ScenarioTree build_tree(const Instance& inst, int stages, const TreeSpec& spec) {
  if (stages < 1) throw std::invalid_argument(fmt::format("build_tree: stages = {} must be >= 1", stages));
  if (spec.quantiles.empty() || spec.quantiles.size() != spec.probs.size()) {
    throw std::invalid_argument("build_tree: quantiles and probs must be non-empty and of equal length");
  }
  const std::size_t regions = inst.region_count();
  const std::size_t b = spec.quantiles.size();

  std::size_t total = 0, level = 1;
  for (int s = 0; s <= stages; ++s) {
    total += level;
    level *= b;
  }

  std::vector<ScenarioNode> nodes;
  nodes.reserve(total);
  ScenarioNode root;
  root.branch_label = "root";
  root.mean.resize(regions);
  root.sigma.resize(regions);
  for (std::size_t r = 0; r < regions; ++r) {
    root.mean[r] = inst.regions[r].chi1_mean;
    root.sigma[r] = inst.regions[r].chi1_sigma;
  }
  root.rate = root.mean;
  nodes.push_back(std::move(root));

  std::vector<std::vector<double>> realizations(regions);
  for (std::size_t idx = 0; idx < nodes.size(); ++idx) {
    if (nodes[idx].stage == stages) continue;
    const int child_stage = nodes[idx].stage + 1;
    for (std::size_t r = 0; r < regions; ++r) {
      realizations[r] = node_realizations(nodes[idx].mean[r], nodes[idx].sigma[r], spec.quantiles, spec.rate_floor);
    }
    for (std::size_t k = 0; k < b; ++k) {
      ScenarioNode child;
      child.id = static_cast<int>(nodes.size());
      child.stage = child_stage;
      child.parent = static_cast<int>(idx);
      child.branch_index = static_cast<int>(k);
      child.branch_label = branch_label(k, b);
      child.branch_prob = spec.probs[k];
      child.path_prob = nodes[idx].path_prob * spec.probs[k];
      child.mean.resize(regions);
      child.sigma.resize(regions);
      for (std::size_t r = 0; r < regions; ++r) {
        child.mean[r] = realizations[r][k];
        child.sigma[r] = spec.sigma_rule.kind == SigmaRule::Kind::kConstant
                             ? inst.regions[r].chi1_sigma
                             : inst.regions[r].chi1_sigma * std::pow(spec.sigma_rule.factor, child_stage);
      }
      child.rate = child.mean;
      nodes[idx].children.push_back(child.id);
      nodes.push_back(std::move(child));
    }
  }
  return ScenarioTree(std::move(nodes), stages, spec);
}

ScenarioTree build_tree(const Instance& inst, int stages) {
  return build_tree(inst, stages, TreeSpec::from_instance(inst));
}

ScenarioTree single_path_tree(const std::vector<std::vector<double>>& rates) {
  if (rates.size() < 2) throw std::invalid_argument("single_path_tree: need a root and at least one stage");
  TreeSpec spec;
  spec.quantiles = {0.5};
  spec.probs = {1.0};
  std::vector<ScenarioNode> nodes;
  for (std::size_t s = 0; s < rates.size(); ++s) {
    ScenarioNode n;
    n.id = static_cast<int>(s);
    n.stage = static_cast<int>(s);
    n.branch_label = s == 0 ? "root" : "path";
    if (s > 0) n.parent = static_cast<int>(s - 1);
    if (s + 1 < rates.size()) n.children.push_back(static_cast<int>(s + 1));
    n.mean = rates[s];
    n.rate = rates[s];
    n.sigma.assign(rates[s].size(), 0.0);
    nodes.push_back(std::move(n));
  }
  return ScenarioTree(std::move(nodes), static_cast<int>(rates.size()) - 1, spec);
}

std::vector<ScenarioPath> scenario_paths(const ScenarioTree& tree) {
  std::vector<ScenarioPath> out;
  for (int leaf : tree.leaves()) {
    ScenarioPath p;
    p.leaf = leaf;
    p.nodes = tree.path_to(leaf);
    p.probability = 1.0;
    for (int id : p.nodes) {
      const auto& n = tree.node(id);
      p.probability *= n.branch_prob;
      p.rates.push_back(n.rate);
      if (n.parent) p.labels.push_back(n.branch_label);
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<std::vector<double>> expected_value_path(const ScenarioTree& tree) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(tree.stages()) + 1,
                                       std::vector<double>(tree.region_count(), 0.0));
  for (const auto& n : tree.nodes()) {
    auto& row = out[static_cast<std::size_t>(n.stage)];
    for (std::size_t r = 0; r < row.size(); ++r) row[r] += n.path_prob * n.rate[r];
  }
  return out;
}

}  // namespace epistoch
