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

#include "epistoch/mipbuild.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>
#include <json.hpp>

namespace epistoch {

namespace {

constexpr Symbol kStateSymbols[] = {Symbol::S, Symbol::I, Symbol::T, Symbol::R, Symbol::F, Symbol::B, Symbol::C};

const char* symbol_text(Symbol s) {
  switch (s) {
    case Symbol::S: return "S";
    case Symbol::I: return "I";
    case Symbol::T: return "T";
    case Symbol::R: return "R";
    case Symbol::F: return "F";
    case Symbol::B: return "B";
    case Symbol::C: return "C";
    case Symbol::Ibar: return "Ibar";
    case Symbol::y: return "y";
    case Symbol::z: return "z";
    case Symbol::U: return "U";
    case Symbol::W: return "W";
    case Symbol::Shat: return "Shat";
    case Symbol::Stilde: return "Stilde";
    case Symbol::Ihat: return "Ihat";
    case Symbol::Itilde: return "Itilde";
  }
  return "?";
}

// Accumulates a sparse row, merging repeated variables and dropping exact
// zeros; terms come out sorted by variable index.
class RowBuilder {
 public:
  RowBuilder& add(int var, double coef) {
    if (coef != 0.0) terms_.push_back({var, coef});
    return *this;
  }
  std::vector<Term> take() {
    std::sort(terms_.begin(), terms_.end(), [](const Term& a, const Term& b) { return a.var < b.var; });
    std::vector<Term> out;
    for (const auto& t : terms_) {
      if (!out.empty() && out.back().var == t.var) {
        out.back().coef += t.coef;
      } else {
        out.push_back(t);
      }
    }
    std::erase_if(out, [](const Term& t) { return t.coef == 0.0; });
    terms_.clear();
    return out;
  }

 private:
  std::vector<Term> terms_;
};

// A place where one copy of the per-period state lives: a tree node in the
// node-compact form, a (scenario, stage) pair in the scenario-split form.
struct Site {
  int node = 0;       // VarKey::node
  int scenario = -1;  // VarKey::scenario
  int tree_node = 0;
  int stage = 0;
  int parent = -1;  // site index
  bool internal = false;
};

std::string site_label(const Site& s) {
  return s.scenario < 0 ? fmt::format("n{}", s.node) : fmt::format("w{},j{}", s.scenario, s.node);
}

class Builder {
 public:
  Builder(const Instance& inst, const ScenarioTree& tree, const BuildOptions& opts)
      : inst_(inst), tree_(tree), opts_(opts) {}

  BuildResult run();

 private:
  int var(Symbol s, const Site& site, int r, int a = -1) const {
    return map_.at({s, site.node, r, a, site.scenario});
  }
  int new_var(Symbol s, const Site& site, int r, int a, double lb, double ub, bool integer = false) {
    const VarKey key{s, site.node, r, a, site.scenario};
    const std::string name = a < 0 ? fmt::format("{}[{},r{}]", symbol_text(s), site_label(site), r)
                                   : fmt::format("{}[{},r{},a{}]", symbol_text(s), site_label(site), r, a);
    const int idx = model_.add_variable(name, lb, ub, integer);
    map_.add(key, idx);
    return idx;
  }

  void make_sites();
  void make_variables();
  void make_dynamics_rows();
  void make_objective_and_budget();
  void make_nonanticipativity();

  const Instance& inst_;
  const ScenarioTree& tree_;
  const BuildOptions& opts_;
  std::vector<ScenarioPath> paths_;
  std::vector<Site> sites_;
  std::vector<std::vector<int>> scenario_sites_;  // site indices per scenario, by stage
  std::vector<BigM> big_m_;
  LinearModel model_;
  ModelMap map_;
};

void Builder::make_sites() {
  paths_ = scenario_paths(tree_);
  if (opts_.formulation == Formulation::kNodeCompact) {
    for (const auto& n : tree_.nodes()) {
      Site s;
      s.node = n.id;
      s.tree_node = n.id;
      s.stage = n.stage;
      s.parent = n.parent ? *n.parent : -1;
      s.internal = !n.children.empty();
      sites_.push_back(s);
    }
    for (const auto& p : paths_) scenario_sites_.push_back(p.nodes);
  } else {
    for (std::size_t w = 0; w < paths_.size(); ++w) {
      std::vector<int> chain;
      for (std::size_t j = 0; j < paths_[w].nodes.size(); ++j) {
        Site s;
        s.node = static_cast<int>(j);
        s.scenario = static_cast<int>(w);
        s.tree_node = paths_[w].nodes[j];
        s.stage = static_cast<int>(j);
        s.parent = j == 0 ? -1 : chain.back();
        s.internal = j + 1 < paths_[w].nodes.size();
        chain.push_back(static_cast<int>(sites_.size()));
        sites_.push_back(s);
      }
      scenario_sites_.push_back(std::move(chain));
    }
  }
}

void Builder::make_variables() {
  const int regions = static_cast<int>(inst_.region_count());
  const int types = static_cast<int>(inst_.etc_types.size());
  const double budget = inst_.costs.budget;
  for (const auto& site : sites_) {
    for (int r = 0; r < regions; ++r) {
      const auto& init = inst_.initial[static_cast<std::size_t>(r)];
      const double fixed_vals[] = {init.susceptible, init.infected, init.treated,
                                   init.recovered,   init.funerals, init.buried};
      for (std::size_t k = 0; k < std::size(kStateSymbols); ++k) {
        const Symbol s = kStateSymbols[k];
        if (site.parent < 0 && s != Symbol::C) {
          new_var(s, site, r, -1, fixed_vals[k], fixed_vals[k]);
        } else {
          new_var(s, site, r, -1, 0.0, kInf);
        }
      }
      if (!site.internal) continue;
      const BigM& m = big_m_[static_cast<std::size_t>(r)];
      new_var(Symbol::Ibar, site, r, -1, 0.0, kInf);
      new_var(Symbol::Shat, site, r, -1, 0.0, kInf);
      new_var(Symbol::Stilde, site, r, -1, 0.0, kInf);
      new_var(Symbol::Ihat, site, r, -1, 0.0, kInf);
      new_var(Symbol::Itilde, site, r, -1, 0.0, kInf);
      for (int a = 0; a < types; ++a) {
        const double g = inst_.etc_types[static_cast<std::size_t>(a)].fixed_cost;
        double ub = std::floor(m.i_ub);
        if (g > 0.0) ub = std::min(ub, std::floor(budget / g + 1e-9));
        new_var(Symbol::y, site, r, a, 0.0, std::max(0.0, ub), true);
      }
    }
  }
}

void Builder::make_dynamics_rows() {
  const int regions = static_cast<int>(inst_.region_count());
  const int types = static_cast<int>(inst_.etc_types.size());
  RowBuilder row;
  for (const auto& site : sites_) {
    const std::string label = site_label(site);
    for (int r = 0; r < regions; ++r) {
      const auto ru = static_cast<std::size_t>(r);
      const auto& p = inst_.regions[ru];
      // Capacity accumulation.
      row.add(var(Symbol::C, site, r), 1.0);
      if (site.internal) {
        for (int a = 0; a < types; ++a) {
          row.add(var(Symbol::y, site, r, a), -inst_.etc_types[static_cast<std::size_t>(a)].capacity_beds);
        }
      }
      double rhs = 0.0;
      if (site.parent < 0) {
        rhs = inst_.initial[ru].beds;
      } else {
        row.add(var(Symbol::C, sites_[static_cast<std::size_t>(site.parent)], r), -1.0);
      }
      model_.add_constraint(fmt::format("cap[{},r{}]", label, r), row.take(), Sense::kEq, rhs);

      if (site.parent >= 0) {
        const Site& par = sites_[static_cast<std::size_t>(site.parent)];
        const double chi1 = tree_.node(site.tree_node).rate[ru];
        const double chi2 = p.funeral_transmission;
        const int S0 = var(Symbol::S, par, r), I0 = var(Symbol::I, par, r), T0 = var(Symbol::T, par, r);
        const int F0 = var(Symbol::F, par, r), R0 = var(Symbol::R, par, r), B0 = var(Symbol::B, par, r);
        const int Ib = var(Symbol::Ibar, par, r);

        row.add(var(Symbol::S, site, r), 1.0).add(S0, -1.0).add(var(Symbol::Shat, par, r), -1.0);
        row.add(var(Symbol::Stilde, par, r), 1.0).add(I0, chi1).add(F0, chi2);
        model_.add_constraint(fmt::format("bal_S[{},r{}]", label, r), row.take(), Sense::kEq, 0.0);

        row.add(var(Symbol::I, site, r), 1.0).add(I0, -1.0).add(var(Symbol::Ihat, par, r), -1.0);
        row.add(var(Symbol::Itilde, par, r), 1.0).add(I0, -chi1).add(F0, -chi2);
        row.add(I0, p.fatality_untreated + p.recovery_untreated).add(Ib, 1.0);
        model_.add_constraint(fmt::format("bal_I[{},r{}]", label, r), row.take(), Sense::kEq, 0.0);

        row.add(var(Symbol::T, site, r), 1.0).add(T0, -1.0).add(Ib, -1.0);
        row.add(T0, p.fatality_treated + p.recovery_treated);
        model_.add_constraint(fmt::format("bal_T[{},r{}]", label, r), row.take(), Sense::kEq, 0.0);

        row.add(var(Symbol::R, site, r), 1.0).add(R0, -1.0).add(T0, -p.recovery_treated);
        row.add(I0, -p.recovery_untreated);
        model_.add_constraint(fmt::format("bal_R[{},r{}]", label, r), row.take(), Sense::kEq, 0.0);

        row.add(var(Symbol::F, site, r), 1.0).add(F0, -1.0).add(I0, -p.fatality_untreated);
        row.add(T0, -p.fatality_treated).add(F0, p.burial_rate);
        model_.add_constraint(fmt::format("bal_F[{},r{}]", label, r), row.take(), Sense::kEq, 0.0);

        row.add(var(Symbol::B, site, r), 1.0).add(B0, -1.0).add(F0, -p.burial_rate);
        model_.add_constraint(fmt::format("bal_B[{},r{}]", label, r), row.take(), Sense::kEq, 0.0);
      }

      if (!site.internal) continue;
      // Migration flow definitions.
      const struct {
        Symbol in, out, base;
        const char* tag;
      } flows[] = {{Symbol::Shat, Symbol::Stilde, Symbol::S, "S"}, {Symbol::Ihat, Symbol::Itilde, Symbol::I, "I"}};
      for (const auto& f : flows) {
        row.add(var(f.in, site, r), 1.0);
        for (int l = 0; l < regions; ++l) {
          if (l != r) row.add(var(f.base, site, l), -inst_.migration.rate(static_cast<std::size_t>(l), ru));
        }
        model_.add_constraint(fmt::format("mig_in_{}[{},r{}]", f.tag, label, r), row.take(), Sense::kEq, 0.0);
        row.add(var(f.out, site, r), 1.0).add(var(f.base, site, r), -inst_.migration.out_rate(ru));
        model_.add_constraint(fmt::format("mig_out_{}[{},r{}]", f.tag, label, r), row.take(), Sense::kEq, 0.0);
      }

      add_capacity_linearization(model_, map_, site.node, r, big_m_[ru], site.scenario);

      for (int a = 0; a < types; ++a) {
        row.add(var(Symbol::y, site, r, a), 1.0).add(var(Symbol::I, site, r), -1.0);
        model_.add_constraint(fmt::format("etc_inf[{},r{},a{}]", label, r, a), row.take(), Sense::kLe, 0.0);
      }
    }
  }
}

void Builder::make_objective_and_budget() {
  const int regions = static_cast<int>(inst_.region_count());
  const int types = static_cast<int>(inst_.etc_types.size());
  const double b1 = inst_.costs.treatment_cost_per_person;
  for (std::size_t w = 0; w < paths_.size(); ++w) {
    const double prob = paths_[w].probability;
    const auto& chain = scenario_sites_[w];
    const Site& first = sites_[static_cast<std::size_t>(chain.front())];
    const Site& last = sites_[static_cast<std::size_t>(chain.back())];
    for (int r = 0; r < regions; ++r) {
      model_.variables[static_cast<std::size_t>(var(Symbol::I, last, r))].obj += prob;
      model_.variables[static_cast<std::size_t>(var(Symbol::I, first, r))].obj -= prob;
      for (std::size_t j = 1; j < chain.size(); ++j) {
        model_.variables[static_cast<std::size_t>(var(Symbol::F, sites_[static_cast<std::size_t>(chain[j])], r))].obj +=
            prob;
      }
    }
    RowBuilder row;
    for (int idx : chain) {
      const Site& site = sites_[static_cast<std::size_t>(idx)];
      for (int r = 0; r < regions; ++r) {
        row.add(var(Symbol::T, site, r), b1);
        if (!site.internal) continue;
        for (int a = 0; a < types; ++a) {
          row.add(var(Symbol::y, site, r, a), inst_.etc_types[static_cast<std::size_t>(a)].fixed_cost);
        }
      }
    }
    model_.add_constraint(fmt::format("budget[w{}]", w), row.take(), Sense::kLe, inst_.costs.budget);
  }
}

void Builder::make_nonanticipativity() {
  const int regions = static_cast<int>(inst_.region_count());
  const int types = static_cast<int>(inst_.etc_types.size());
  RowBuilder row;
  std::vector<bool> anchored(tree_.size(), false);
  for (const auto& site : sites_) {
    if (!site.internal) continue;
    const auto& tn = tree_.node(site.tree_node);
    Site anchor;
    anchor.node = tn.id;
    anchor.scenario = -1;
    if (!anchored[static_cast<std::size_t>(tn.id)]) {
      anchored[static_cast<std::size_t>(tn.id)] = true;
      for (int r = 0; r < regions; ++r) {
        for (int a = 0; a < types; ++a) {
          const auto& copy = model_.variables[static_cast<std::size_t>(var(Symbol::y, site, r, a))];
          new_var(Symbol::y, anchor, r, a, copy.lb, copy.ub, true);
        }
        new_var(Symbol::Ibar, anchor, r, -1, 0.0, kInf);
        new_var(Symbol::C, anchor, r, -1, 0.0, kInf);
      }
    }
    for (int r = 0; r < regions; ++r) {
      std::vector<std::pair<int, int>> pairs;
      for (int a = 0; a < types; ++a) pairs.emplace_back(var(Symbol::y, site, r, a), var(Symbol::y, anchor, r, a));
      pairs.emplace_back(var(Symbol::Ibar, site, r), var(Symbol::Ibar, anchor, r));
      pairs.emplace_back(var(Symbol::C, site, r), var(Symbol::C, anchor, r));
      for (const auto& [copy, shared] : pairs) {
        row.add(copy, 1.0).add(shared, -1.0);
        model_.add_constraint(fmt::format("nonant[{}~{}]", model_.variables[static_cast<std::size_t>(copy)].name,
                                          model_.variables[static_cast<std::size_t>(shared)].name),
                              row.take(), Sense::kEq, 0.0);
      }
    }
  }
}

BuildResult Builder::run() {
  if (tree_.region_count() != inst_.region_count()) {
    throw std::invalid_argument(fmt::format("tree has {} regions but the instance has {}", tree_.region_count(),
                                            inst_.region_count()));
  }
  if (opts_.equity.kind != EquityKind::kNone && !(opts_.equity.k >= 0.0)) {
    throw std::invalid_argument(fmt::format("equity tolerance k = {} must be >= 0", opts_.equity.k));
  }
  model_.name = inst_.name.empty() ? "epistoch" : inst_.name;
  for (std::size_t r = 0; r < inst_.region_count(); ++r) {
    big_m_.push_back(default_big_m(inst_, static_cast<int>(r), opts_));
  }
  make_sites();

  map_.formulation = opts_.formulation;
  map_.stages = tree_.stages();
  map_.regions = static_cast<int>(inst_.region_count());
  map_.etc_types = static_cast<int>(inst_.etc_types.size());
  for (const auto& n : tree_.nodes()) map_.node_prob.push_back(n.path_prob);
  for (const auto& p : paths_) {
    map_.scenario_prob.push_back(p.probability);
    map_.scenario_nodes.push_back(p.nodes);
  }
  for (const auto& reg : inst_.regions) map_.region_population.push_back(reg.population);

  make_variables();
  make_dynamics_rows();
  make_objective_and_budget();
  if (opts_.formulation == Formulation::kScenarioSplit) make_nonanticipativity();

  switch (opts_.equity.kind) {
    case EquityKind::kNone:
      break;
    case EquityKind::kInfection:
      add_infection_equity(model_, map_, opts_.equity.k);
      break;
    case EquityKind::kCapacity:
      add_capacity_equity(model_, map_, opts_.equity.k);
      break;
    case EquityKind::kPrevalence:
      add_prevalence_equity(model_, map_, opts_.equity.k);
      break;
  }
  if (!opts_.fixed.empty()) fix_variables(model_, map_, opts_.fixed);
  return {std::move(model_), std::move(map_)};
}

// Terms of sum_n P(n) x_{n,r} (or its scenario-split counterpart) for every
// region, keyed by region.
std::vector<std::vector<Term>> expectation_terms(const ModelMap& map, Symbol symbol) {
  std::vector<std::vector<Term>> out(static_cast<std::size_t>(map.regions));
  for (int r = 0; r < map.regions; ++r) {
    auto& terms = out[static_cast<std::size_t>(r)];
    if (map.formulation == Formulation::kNodeCompact) {
      for (std::size_t n = 0; n < map.node_prob.size(); ++n) {
        terms.push_back({map.at({symbol, static_cast<int>(n), r, -1, -1}), map.node_prob[n]});
      }
    } else {
      for (std::size_t w = 0; w < map.scenario_prob.size(); ++w) {
        for (int j = 0; j <= map.stages; ++j) {
          terms.push_back({map.at({symbol, j, r, -1, static_cast<int>(w)}), map.scenario_prob[w]});
        }
      }
    }
  }
  return out;
}

// Rows E_r - share_r * E - k * E <= 0 and E_r - share_r * E + k * E >= 0
// (ratio form), or E_r - share_r * E within +-k * u_r (prevalence form).
void add_equity_rows(LinearModel& model, const ModelMap& map, Symbol symbol, double k, bool prevalence,
                     const char* tag) {
  if (!(k >= 0.0)) throw std::invalid_argument(fmt::format("equity tolerance k = {} must be >= 0", k));
  const auto terms = expectation_terms(map, symbol);
  double total_pop = 0.0;
  for (double u : map.region_population) total_pop += u;
  for (int r = 0; r < map.regions; ++r) {
    const double share = map.region_population[static_cast<std::size_t>(r)] / total_pop;
    for (int side = 0; side < 2; ++side) {
      const double sign = side == 0 ? -1.0 : 1.0;  // -k on the upper row, +k on the lower row
      RowBuilder row;
      for (int l = 0; l < map.regions; ++l) {
        const double base = (l == r ? 1.0 : 0.0) - share + (prevalence ? 0.0 : sign * k);
        for (const auto& t : terms[static_cast<std::size_t>(l)]) row.add(t.var, base * t.coef);
      }
      const double rhs = prevalence ? -sign * k * map.region_population[static_cast<std::size_t>(r)] : 0.0;
      model.add_constraint(fmt::format("{}_{}[r{}]", tag, side == 0 ? "hi" : "lo", r), row.take(),
                           side == 0 ? Sense::kLe : Sense::kGe, rhs);
    }
  }
}

}  // namespace

std::string symbol_name(Symbol s) { return symbol_text(s); }

Symbol parse_symbol(const std::string& text) {
  for (int i = 0; i <= static_cast<int>(Symbol::Itilde); ++i) {
    if (text == symbol_text(static_cast<Symbol>(i))) return static_cast<Symbol>(i);
  }
  throw std::invalid_argument(fmt::format("unknown symbol '{}'", text));
}

std::string VarKey::to_string() const {
  return fmt::format("{}(node={},region={},etc={},scenario={})", symbol_text(symbol), node, region, etc, scenario);
}

std::string formulation_name(Formulation f) {
  return f == Formulation::kNodeCompact ? "node-compact" : "scenario-split";
}

Formulation parse_formulation(const std::string& text) {
  if (text == "node-compact") return Formulation::kNodeCompact;
  if (text == "scenario-split") return Formulation::kScenarioSplit;
  throw std::invalid_argument(fmt::format("unknown formulation '{}' (node-compact | scenario-split)", text));
}

std::string equity_name(EquityKind k) {
  switch (k) {
    case EquityKind::kNone: return "none";
    case EquityKind::kInfection: return "infection";
    case EquityKind::kCapacity: return "capacity";
    case EquityKind::kPrevalence: return "prevalence";
  }
  return "none";
}

EquityKind parse_equity(const std::string& text) {
  for (auto k : {EquityKind::kNone, EquityKind::kInfection, EquityKind::kCapacity, EquityKind::kPrevalence}) {
    if (text == equity_name(k)) return k;
  }
  throw std::invalid_argument(fmt::format("unknown equity kind '{}'", text));
}

void ModelMap::add(const VarKey& key, int index) {
  if (index != static_cast<int>(reverse_.size())) {
    throw std::logic_error("ModelMap::add: indices must be registered in creation order");
  }
  if (!forward_.emplace(key, index).second) {
    throw std::logic_error(fmt::format("ModelMap::add: duplicate key {}", key.to_string()));
  }
  reverse_.push_back(key);
}

int ModelMap::at(const VarKey& key) const {
  auto it = forward_.find(key);
  if (it == forward_.end()) throw std::out_of_range(fmt::format("no variable for {}", key.to_string()));
  return it->second;
}

std::optional<int> ModelMap::find(const VarKey& key) const {
  auto it = forward_.find(key);
  if (it == forward_.end()) return std::nullopt;
  return it->second;
}

std::string ModelMap::to_json() const {
  nlohmann::ordered_json j;
  j["formulation"] = formulation_name(formulation);
  j["stages"] = stages;
  j["regions"] = regions;
  j["etc_types"] = etc_types;
  j["node_prob"] = node_prob;
  j["scenario_prob"] = scenario_prob;
  j["scenario_nodes"] = scenario_nodes;
  j["region_population"] = region_population;
  auto vars = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < reverse_.size(); ++i) {
    const auto& k = reverse_[i];
    vars.push_back({{"index", i},
                    {"symbol", symbol_text(k.symbol)},
                    {"node", k.node},
                    {"region", k.region},
                    {"etc", k.etc},
                    {"scenario", k.scenario}});
  }
  j["variables"] = std::move(vars);
  return j.dump(1);
}

ModelMap ModelMap::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ModelMap m;
  m.formulation = parse_formulation(j.at("formulation").get<std::string>());
  m.stages = j.at("stages").get<int>();
  m.regions = j.at("regions").get<int>();
  m.etc_types = j.at("etc_types").get<int>();
  m.node_prob = j.at("node_prob").get<std::vector<double>>();
  m.scenario_prob = j.at("scenario_prob").get<std::vector<double>>();
  m.scenario_nodes = j.at("scenario_nodes").get<std::vector<std::vector<int>>>();
  m.region_population = j.at("region_population").get<std::vector<double>>();
  for (const auto& v : j.at("variables")) {
    m.add({parse_symbol(v.at("symbol").get<std::string>()), v.at("node").get<int>(), v.at("region").get<int>(),
           v.at("etc").get<int>(), v.at("scenario").get<int>()},
          v.at("index").get<int>());
  }
  return m;
}

BigM default_big_m(const Instance& inst, int region, const BuildOptions& opts) {
  BigM m;
  const auto r = static_cast<std::size_t>(region);
  const double budget = inst.costs.budget;
  double beds = 0.0;
  bool all_priced = !inst.etc_types.empty();
  double best_ratio = 0.0;
  for (const auto& e : inst.etc_types) {
    if (e.fixed_cost > 0.0) {
      best_ratio = std::max(best_ratio, e.capacity_beds / e.fixed_cost);
    } else {
      all_priced = false;
    }
  }
  const double population = inst.total_population();
  if (all_priced) {
    beds = std::floor(budget * best_ratio + 1e-9);
  } else {
    // Free ETCs are limited only by the y <= I coupling.
    double max_k = 0.0;
    for (const auto& e : inst.etc_types) max_k = std::max(max_k, e.capacity_beds);
    beds = max_k * std::floor(population) * std::max(1, inst.horizon) * static_cast<double>(inst.etc_types.size());
  }
  m.h_lb = opts.h_lb.value_or(0.0);
  m.h_ub = opts.h_ub.value_or(inst.initial[r].beds + beds);
  m.i_lb = opts.i_lb.value_or(0.0);
  m.i_ub = opts.i_ub.value_or(population);
  if (m.h_lb > m.h_ub || m.i_lb > m.i_ub) {
    throw std::invalid_argument(fmt::format("inconsistent big-M bounds H=[{}, {}] I=[{}, {}]", m.h_lb, m.h_ub,
                                            m.i_lb, m.i_ub));
  }
  return m;
}

BuildResult build_deterministic_equivalent(const Instance& inst, const ScenarioTree& tree, const BuildOptions& opts) {
  return Builder(inst, tree, opts).run();
}

void add_capacity_linearization(LinearModel& model, ModelMap& map, int node, int region, const BigM& bm,
                                int scenario) {
  if (bm.h_lb > bm.h_ub || bm.i_lb > bm.i_ub) throw std::invalid_argument("inconsistent big-M bounds");
  auto key = [&](Symbol s) { return VarKey{s, node, region, -1, scenario}; };
  const std::string label =
      scenario < 0 ? fmt::format("n{},r{}", node, region) : fmt::format("w{},j{},r{}", scenario, node, region);
  const int ib = map.at(key(Symbol::Ibar));
  const int I = map.at(key(Symbol::I));
  const int C = map.at(key(Symbol::C));
  const int T = map.at(key(Symbol::T));
  auto add_var = [&](Symbol s, double lb, double ub, bool integer) {
    const int idx = model.add_variable(fmt::format("{}[{}]", symbol_text(s), label), lb, ub, integer);
    map.add(key(s), idx);
    return idx;
  };
  const int z = add_var(Symbol::z, 0.0, 1.0, true);
  const int U = add_var(Symbol::U, std::min(0.0, bm.h_lb), bm.h_ub, false);
  const int W = add_var(Symbol::W, std::min(0.0, bm.i_lb), bm.i_ub, false);

  auto row = [&](const char* tag, std::vector<Term> terms, Sense sense, double rhs) {
    std::erase_if(terms, [](const Term& t) { return t.coef == 0.0; });
    model.add_constraint(fmt::format("{}[{}]", tag, label), std::move(terms), sense, rhs);
  };
  row("hosp_sum", {{ib, 1.0}, {U, -1.0}, {W, -1.0}}, Sense::kEq, 0.0);
  row("hosp_beds", {{ib, 1.0}, {C, -1.0}, {T, 1.0}}, Sense::kLe, 0.0);
  row("hosp_inf", {{ib, 1.0}, {I, -1.0}}, Sense::kLe, 0.0);
  // U = (C - T) when z = 1, else 0.
  row("u_ub", {{U, 1.0}, {z, -bm.h_ub}}, Sense::kLe, 0.0);
  row("u_lb", {{U, 1.0}, {z, -bm.h_lb}}, Sense::kGe, 0.0);
  row("u_gap_ub", {{U, 1.0}, {C, -1.0}, {T, 1.0}, {z, -bm.h_lb}}, Sense::kLe, -bm.h_lb);
  row("u_gap_lb", {{U, 1.0}, {C, -1.0}, {T, 1.0}, {z, -bm.h_ub}}, Sense::kGe, -bm.h_ub);
  // W = I when z = 0, else 0.
  row("w_ub", {{W, 1.0}, {z, bm.i_ub}}, Sense::kLe, bm.i_ub);
  row("w_lb", {{W, 1.0}, {z, bm.i_lb}}, Sense::kGe, bm.i_lb);
  row("w_inf_ub", {{W, 1.0}, {I, -1.0}, {z, bm.i_lb}}, Sense::kLe, 0.0);
  row("w_inf_lb", {{W, 1.0}, {I, -1.0}, {z, bm.i_ub}}, Sense::kGe, 0.0);
}

void add_infection_equity(LinearModel& model, const ModelMap& map, double k) {
  add_equity_rows(model, map, Symbol::I, k, false, "eq_inf");
}

void add_capacity_equity(LinearModel& model, const ModelMap& map, double k) {
  add_equity_rows(model, map, Symbol::C, k, false, "eq_cap");
}

void add_prevalence_equity(LinearModel& model, const ModelMap& map, double k) {
  add_equity_rows(model, map, Symbol::I, k, true, "eq_prev");
}

void fix_variables(LinearModel& model, const ModelMap& map, std::span<const std::pair<VarKey, double>> assignments) {
  for (const auto& [key, value] : assignments) {
    const auto idx = map.find(key);
    if (!idx) throw std::invalid_argument(fmt::format("fix_variables: unknown variable {}", key.to_string()));
    auto& v = model.variables[static_cast<std::size_t>(*idx)];
    if (!(value >= v.lb - 1e-9 && value <= v.ub + 1e-9)) {
      throw std::invalid_argument(
          fmt::format("fix_variables: {} = {} outside bounds [{}, {}]", v.name, value, v.lb, v.ub));
    }
    v.lb = value;
    v.ub = value;
  }
}

NodePlan extract_plan(const ModelMap& map, const ScenarioTree& tree, std::span<const double> values) {
  NodePlan plan;
  plan.opens.assign(tree.size(), Opens(static_cast<std::size_t>(map.regions),
                                       std::vector<int>(static_cast<std::size_t>(map.etc_types), 0)));
  for (const auto& n : tree.nodes()) {
    if (n.children.empty()) continue;
    for (int r = 0; r < map.regions; ++r) {
      for (int a = 0; a < map.etc_types; ++a) {
        const int idx = map.at({Symbol::y, n.id, r, a, -1});
        plan.opens[static_cast<std::size_t>(n.id)][static_cast<std::size_t>(r)][static_cast<std::size_t>(a)] =
            static_cast<int>(std::llround(values[static_cast<std::size_t>(idx)]));
      }
    }
  }
  return plan;
}

std::vector<double> plan_values(const Instance& inst, const ScenarioTree& tree, const ModelMap& map,
                                const NodePlan& plan) {
  if (plan.opens.size() != tree.size()) throw std::invalid_argument("plan_values: plan does not cover the tree");
  const std::size_t regions = inst.region_count();
  struct NodeData {
    CompartmentState state;  // beds after this node's openings
    std::vector<double> ibar, s_in, s_out, i_in, i_out;
  };
  std::vector<NodeData> data(tree.size());
  std::vector<CompartmentState> arrival(tree.size());  // before openings
  arrival[0] = initial_state(inst);
  // Node ids are breadth-first, so parents come first.
  for (const auto& n : tree.nodes()) {
    auto& d = data[static_cast<std::size_t>(n.id)];
    const auto& opens = plan.opens[static_cast<std::size_t>(n.id)];
    if (n.children.empty()) {
      d.state = arrival[static_cast<std::size_t>(n.id)];
      continue;
    }
    StepResult res;
    for (int c : n.children) {
      res = step(arrival[static_cast<std::size_t>(n.id)], tree.node(c).rate, inst, opens);
      arrival[static_cast<std::size_t>(c)] = res.next;
    }
    d.state = res.current;
    d.ibar = res.hospitalized;
    std::vector<double> sus(regions), inf(regions);
    for (std::size_t r = 0; r < regions; ++r) {
      sus[r] = d.state[r].S;
      inf[r] = d.state[r].I;
    }
    for (std::size_t r = 0; r < regions; ++r) {
      d.s_in.push_back(inst.migration.inflow(r, sus));
      d.s_out.push_back(inst.migration.outflow(r, sus));
      d.i_in.push_back(inst.migration.inflow(r, inf));
      d.i_out.push_back(inst.migration.outflow(r, inf));
    }
  }

  std::vector<double> values(map.size(), 0.0);
  for (std::size_t idx = 0; idx < map.size(); ++idx) {
    const VarKey& key = map.key_of(static_cast<int>(idx));
    const int node = key.scenario < 0
                         ? key.node
                         : map.scenario_nodes[static_cast<std::size_t>(key.scenario)][static_cast<std::size_t>(key.node)];
    const auto& d = data[static_cast<std::size_t>(node)];
    const auto r = static_cast<std::size_t>(key.region);
    const RegionState& st = d.state[r];
    double v = 0.0;
    switch (key.symbol) {
      case Symbol::S: v = st.S; break;
      case Symbol::I: v = st.I; break;
      case Symbol::T: v = st.T; break;
      case Symbol::R: v = st.R; break;
      case Symbol::F: v = st.F; break;
      case Symbol::B: v = st.B; break;
      case Symbol::C: v = st.C; break;
      case Symbol::Ibar: v = d.ibar[r]; break;
      case Symbol::Shat: v = d.s_in[r]; break;
      case Symbol::Stilde: v = d.s_out[r]; break;
      case Symbol::Ihat: v = d.i_in[r]; break;
      case Symbol::Itilde: v = d.i_out[r]; break;
      case Symbol::y:
        v = plan.opens[static_cast<std::size_t>(node)][r][static_cast<std::size_t>(key.etc)];
        break;
      // z = 1 selects the free-bed branch of the min block.
      case Symbol::z: v = st.C - st.T <= st.I ? 1.0 : 0.0; break;
      case Symbol::U: v = st.C - st.T <= st.I ? st.C - st.T : 0.0; break;
      case Symbol::W: v = st.C - st.T <= st.I ? 0.0 : st.I; break;
    }
    values[idx] = v;
  }
  return values;
}

std::vector<double> expected_totals(const ModelMap& map, Symbol symbol, std::span<const double> values) {
  const auto terms = expectation_terms(map, symbol);
  std::vector<double> out;
  for (const auto& region_terms : terms) {
    double total = 0.0;
    for (const auto& t : region_terms) total += t.coef * values[static_cast<std::size_t>(t.var)];
    out.push_back(total);
  }
  return out;
}

double scenario_value(const ModelMap& map, Symbol symbol, int scenario, int stage, int region,
                      std::span<const double> values) {
  const int idx =
      map.formulation == Formulation::kNodeCompact
          ? map.at({symbol,
                    map.scenario_nodes[static_cast<std::size_t>(scenario)][static_cast<std::size_t>(stage)], region,
                    -1, -1})
          : map.at({symbol, stage, region, -1, scenario});
  return values[static_cast<std::size_t>(idx)];
}

}  // namespace epistoch
