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

#include "epistoch/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>

#include <fmt/format.h>

namespace epistoch {

namespace {

// Runs body(0..count-1) on up to `workers` threads; the first exception is
// rethrown after all threads have joined.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& body) {
  const std::size_t threads = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, workers)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

bool solved(const SolveResult& r) {
  return r.has_solution() && (r.status == SolveStatus::kOptimal || r.status == SolveStatus::kFeasibleGap ||
                              r.status == SolveStatus::kTimeLimit);
}

double y_value(const ModelMap& map, int scenario, int stage, int region, int type, std::span<const double> values) {
  const int idx =
      map.formulation == Formulation::kNodeCompact
          ? map.at({Symbol::y, map.scenario_nodes[static_cast<std::size_t>(scenario)][static_cast<std::size_t>(stage)],
                    region, type, -1})
          : map.at({Symbol::y, stage, region, type, scenario});
  return values[static_cast<std::size_t>(idx)];
}

// Node plan read from y values (rounded down), respecting fixed y.
NodePlan floor_plan(const ScenarioTree& tree, const BuildResult& b, std::span<const double> values) {
  NodePlan plan;
  plan.opens.assign(tree.size(), Opens(static_cast<std::size_t>(b.map.regions),
                                       std::vector<int>(static_cast<std::size_t>(b.map.etc_types), 0)));
  for (const auto& n : tree.nodes()) {
    if (n.children.empty()) continue;
    for (int r = 0; r < b.map.regions; ++r) {
      for (int a = 0; a < b.map.etc_types; ++a) {
        const auto& v = b.model.variables[static_cast<std::size_t>(b.map.at({Symbol::y, n.id, r, a, -1}))];
        double y = values.empty() ? 0.0 : std::floor(values[static_cast<std::size_t>(b.map.at({Symbol::y, n.id, r, a, -1}))] + 1e-6);
        y = std::clamp(y, v.lb, v.ub);
        plan.opens[static_cast<std::size_t>(n.id)][static_cast<std::size_t>(r)][static_cast<std::size_t>(a)] =
            static_cast<int>(y);
      }
    }
  }
  return plan;
}

// Drops one ETC at a time, deepest stage first, until every scenario is
// budget and coupling feasible under the simulator. Fixed openings stay.
bool repair_plan(const Instance& inst, const ScenarioTree& tree, const BuildResult& b, NodePlan& plan) {
  while (!evaluate_policy(inst, tree, plan).all_feasible) {
    bool dropped = false;
    for (auto it = tree.nodes().rbegin(); it != tree.nodes().rend() && !dropped; ++it) {
      if (it->children.empty()) continue;
      for (int r = 0; r < b.map.regions && !dropped; ++r) {
        for (int a = 0; a < b.map.etc_types && !dropped; ++a) {
          int& y = plan.opens[static_cast<std::size_t>(it->id)][static_cast<std::size_t>(r)][static_cast<std::size_t>(a)];
          const auto& v = b.model.variables[static_cast<std::size_t>(b.map.at({Symbol::y, it->id, r, a, -1}))];
          if (y > 0 && y - 1 >= v.lb) {
            --y;
            dropped = true;
          }
        }
      }
    }
    if (!dropped) return false;
  }
  return true;
}

// Model objective of a simulated plan, +inf when the simulated point
// violates any row of the model (budget, coupling, equity, fixings).
double plan_score(const Instance& inst, const ScenarioTree& tree, const BuildResult& b, const NodePlan& plan) {
  const auto values = plan_values(inst, tree, b.map, plan);
  if (!check_feasibility(b.model, values, 1e-7).ok()) return kInf;
  return b.model.objective_value(values);
}

// First-improvement local search over single +-1 changes and one-for-one
// transfers of the opening counts, capped at `max_evals` evaluations.
double improve_plan(const Instance& inst, const ScenarioTree& tree, const BuildResult& b, NodePlan& plan,
                    long max_evals) {
  struct Slot {
    std::size_t node, r, a;
    double lb, ub;
  };
  std::vector<Slot> slots;
  for (const auto& n : tree.nodes()) {
    if (n.children.empty()) continue;
    for (int r = 0; r < b.map.regions; ++r) {
      for (int a = 0; a < b.map.etc_types; ++a) {
        const auto& v = b.model.variables[static_cast<std::size_t>(b.map.at({Symbol::y, n.id, r, a, -1}))];
        if (v.lb < v.ub) {
          slots.push_back({static_cast<std::size_t>(n.id), static_cast<std::size_t>(r), static_cast<std::size_t>(a),
                           v.lb, v.ub});
        }
      }
    }
  }
  auto at = [&](const Slot& s) -> int& { return plan.opens[s.node][s.r][s.a]; };
  double best = plan_score(inst, tree, b, plan);
  if (!std::isfinite(best)) return best;
  long evals = 0;
  auto try_move = [&](const Slot& s1, int d1, const Slot* s2, int d2) {
    const int v1 = at(s1) + d1;
    if (v1 < s1.lb || v1 > s1.ub) return false;
    if (s2 && (at(*s2) + d2 < s2->lb || at(*s2) + d2 > s2->ub)) return false;
    at(s1) += d1;
    if (s2) at(*s2) += d2;
    ++evals;
    const double score = plan_score(inst, tree, b, plan);
    if (score < best - 1e-9 * std::max(1.0, std::abs(best))) {
      best = score;
      return true;
    }
    at(s1) -= d1;
    if (s2) at(*s2) -= d2;
    return false;
  };
  bool improved = true;
  while (improved && evals < max_evals) {
    improved = false;
    for (const auto& s : slots) {
      if (evals >= max_evals) break;
      improved = try_move(s, 1, nullptr, 0) || try_move(s, -1, nullptr, 0) || improved;
    }
    if (improved) continue;
    for (std::size_t i = 0; i < slots.size() && evals < max_evals; ++i) {
      if (at(slots[i]) <= slots[i].lb) continue;
      for (std::size_t k = 0; k < slots.size() && evals < max_evals; ++k) {
        if (k != i && try_move(slots[i], -1, &slots[k], 1)) improved = true;
      }
    }
  }
  return best;
}

// Best simulated candidate among the zero plan and the rounded-down LP
// relaxation after local search, as a full variable vector; empty when no
// candidate is feasible.
std::vector<double> simulated_start(const Instance& inst, const ScenarioTree& tree, const BuildResult& b) {
  constexpr long kMaxEvals = 20000;
  const LpResult lp = simplex_lp(b.model);
  NodePlan best_plan;
  double best_obj = kInf;
  for (int pass = 0; pass < 2; ++pass) {
    if (pass == 1 && lp.status != LpStatus::kOptimal) break;
    NodePlan plan = floor_plan(tree, b, pass == 0 ? std::span<const double>{} : std::span<const double>(lp.values));
    if (!repair_plan(inst, tree, b, plan)) continue;
    const double obj = improve_plan(inst, tree, b, plan, kMaxEvals);
    if (obj < best_obj) {
      best_obj = obj;
      best_plan = std::move(plan);
    }
  }
  if (!std::isfinite(best_obj)) return {};
  return plan_values(inst, tree, b.map, best_plan);
}

}  // namespace

TreeSolution solve_tree(const Instance& inst, const ScenarioTree& tree, const AnalysisOptions& opts) {
  TreeSolution out;
  out.build = build_deterministic_equivalent(inst, tree, opts.build);
  SolverConfig cfg = opts.solver;
  if (cfg.backend == Backend::kBuiltin && cfg.start.empty()) cfg.start = simulated_start(inst, tree, out.build);
  out.result = solve_model(out.build.model, cfg);
  if (out.result.has_solution()) out.plan = extract_plan(out.build.map, tree, out.result.values);
  return out;
}

WaitAndSee solve_ws(const Instance& inst, const ScenarioTree& tree, const AnalysisOptions& opts) {
  const auto paths = scenario_paths(tree);
  WaitAndSee ws;
  ws.per_scenario.assign(paths.size(), kInf);
  ws.statuses.assign(paths.size(), SolveStatus::kInfeasible);
  AnalysisOptions single = opts;
  single.build.formulation = Formulation::kNodeCompact;
  single.build.fixed.clear();
  parallel_for(paths.size(), opts.workers, [&](std::size_t w) {
    const ScenarioTree path_tree = single_path_tree(paths[w].rates);
    const TreeSolution sol = solve_tree(inst, path_tree, single);
    ws.statuses[w] = sol.result.status;
    if (solved(sol.result)) ws.per_scenario[w] = sol.result.objective;
  });
  ws.objective = 0.0;
  for (std::size_t w = 0; w < paths.size(); ++w) ws.objective += paths[w].probability * ws.per_scenario[w];
  return ws;
}

ExpectedValueSolution solve_ev(const Instance& inst, const ScenarioTree& tree, const AnalysisOptions& opts) {
  AnalysisOptions single = opts;
  single.build.formulation = Formulation::kNodeCompact;
  single.build.fixed.clear();
  ExpectedValueSolution ev{kInf, SolveStatus::kInfeasible, {}, single_path_tree(expected_value_path(tree))};
  const TreeSolution sol = solve_tree(inst, ev.tree, single);
  ev.status = sol.result.status;
  if (!solved(sol.result)) return ev;
  ev.objective = sol.result.objective;
  // Node ids of a single-path tree equal their stage.
  for (int s = 0; s < ev.tree.stages(); ++s) ev.plan.opens.push_back(sol.plan.opens[static_cast<std::size_t>(s)]);
  return ev;
}

std::vector<std::pair<VarKey, double>> ev_fixings(const ScenarioTree& tree, const CapacityPlan& ev_plan,
                                                   int last_stage) {
  std::vector<std::pair<VarKey, double>> out;
  for (const auto& n : tree.nodes()) {
    if (n.stage > last_stage || n.children.empty()) continue;
    if (n.stage >= static_cast<int>(ev_plan.opens.size())) continue;
    const auto& opens = ev_plan.opens[static_cast<std::size_t>(n.stage)];
    for (std::size_t r = 0; r < opens.size(); ++r) {
      for (std::size_t a = 0; a < opens[r].size(); ++a) {
        out.push_back({{Symbol::y, n.id, static_cast<int>(r), static_cast<int>(a), -1}, opens[r][a]});
      }
    }
  }
  return out;
}

VssChain vss_chain(const Instance& inst, const ScenarioTree& tree, const AnalysisOptions& opts, int T) {
  if (T < 1 || T > tree.stages()) {
    throw std::invalid_argument(fmt::format("vss_chain: T = {} must lie in 1..{}", T, tree.stages()));
  }
  VssChain chain;
  AnalysisOptions base = opts;
  base.build.fixed.clear();
  const TreeSolution rp = solve_tree(inst, tree, base);
  if (!solved(rp.result)) {
    chain.diagnostics.push_back(fmt::format("RP solve ended {}", status_name(rp.result.status)));
  } else {
    chain.rp = rp.result.objective;
  }
  chain.ws = solve_ws(inst, tree, opts).objective;
  const ExpectedValueSolution ev = solve_ev(inst, tree, opts);
  chain.ev = ev.objective;
  if (ev.status != SolveStatus::kOptimal && ev.status != SolveStatus::kFeasibleGap) {
    chain.diagnostics.push_back(fmt::format("EV solve ended {}", status_name(ev.status)));
  }

  chain.eev.assign(static_cast<std::size_t>(T), kInf);
  chain.eev[0] = chain.rp;
  if (T > 1 && !ev.plan.opens.empty()) {
    parallel_for(static_cast<std::size_t>(T - 1), opts.workers, [&](std::size_t k) {
      const int t = static_cast<int>(k) + 2;
      AnalysisOptions fixed = base;
      fixed.build.fixed = ev_fixings(tree, ev.plan, t - 2);
      try {
        const TreeSolution sol = solve_tree(inst, tree, fixed);
        if (solved(sol.result)) chain.eev[static_cast<std::size_t>(t - 1)] = sol.result.objective;
      } catch (const std::invalid_argument&) {
        // A fixing outside the variable bounds makes EEV_t infeasible.
      }
    });
  }
  for (int t = 2; t <= T; ++t) {
    if (std::isinf(chain.eev[static_cast<std::size_t>(t - 1)])) {
      chain.diagnostics.push_back(fmt::format("EEV_{} infeasible: the EV openings through stage {} violate some "
                                              "scenario's constraints",
                                              t, t - 2));
    }
  }
  for (double e : chain.eev) chain.vss.push_back(e - chain.rp);
  chain.vss[0] = 0.0;
  return chain;
}

EquityReport equity_gaps(const Instance& inst, const ModelMap& map, std::span<const double> values,
                         EquitySpec thresholds) {
  EquityReport rep;
  rep.thresholds = thresholds;
  const auto inf = expected_totals(map, Symbol::I, values);
  const auto cap = expected_totals(map, Symbol::C, values);
  double total_inf = 0.0, total_cap = 0.0, total_pop = 0.0;
  for (std::size_t r = 0; r < inf.size(); ++r) {
    total_inf += inf[r];
    total_cap += cap[r];
    total_pop += inst.regions[r].population;
  }
  for (std::size_t r = 0; r < inf.size(); ++r) {
    RegionEquity e;
    e.region = inst.regions[r].id;
    e.expected_infections = inf[r];
    e.expected_capacity = cap[r];
    const double share = inst.regions[r].population / total_pop;
    e.infection_gap = total_inf > 0.0 ? std::abs(inf[r] / total_inf - share) : 0.0;
    e.capacity_gap = total_cap > 0.0 ? std::abs(cap[r] / total_cap - share) : 0.0;
    e.prevalence_gap = std::abs(inf[r] / inst.regions[r].population - total_inf / total_pop);
    rep.max_infection_gap = std::max(rep.max_infection_gap, e.infection_gap);
    rep.max_capacity_gap = std::max(rep.max_capacity_gap, e.capacity_gap);
    rep.max_prevalence_gap = std::max(rep.max_prevalence_gap, e.prevalence_gap);
    rep.regions.push_back(std::move(e));
  }
  return rep;
}

AllocationReport allocation_report(const Instance& inst, const ModelMap& map, std::span<const double> values) {
  const std::size_t types = inst.etc_types.size();
  const double b1 = inst.costs.treatment_cost_per_person;
  auto blank = [&](std::string name) {
    AllocationEntry e;
    e.name = std::move(name);
    e.first_stage_etcs.assign(types, 0.0);
    e.total_etcs.assign(types, 0.0);
    return e;
  };
  AllocationReport rep;
  for (const auto& reg : inst.regions) rep.regions.push_back(blank(reg.id));

  for (std::size_t w = 0; w < map.scenario_prob.size(); ++w) {
    const double p = map.scenario_prob[w];
    double spend = 0.0;
    for (int r = 0; r < map.regions; ++r) {
      auto& e = rep.regions[static_cast<std::size_t>(r)];
      for (int j = 0; j <= map.stages; ++j) {
        double cost = b1 * scenario_value(map, Symbol::T, static_cast<int>(w), j, r, values);
        if (j < map.stages) {
          for (std::size_t a = 0; a < types; ++a) {
            const double y = std::round(y_value(map, static_cast<int>(w), j, r, static_cast<int>(a), values));
            cost += inst.etc_types[a].fixed_cost * y;
            e.total_etcs[a] += p * y;
            if (j == 0 && w == 0) e.first_stage_etcs[a] = y;
          }
        }
        if (j == 0 && w == 0) e.first_stage_budget = cost;
        e.total_budget += p * cost;
        spend += cost;
      }
    }
    rep.max_scenario_spend = std::max(rep.max_scenario_spend, spend);
  }

  auto accumulate = [&](AllocationEntry& into, const AllocationEntry& from) {
    into.first_stage_budget += from.first_stage_budget;
    into.total_budget += from.total_budget;
    for (std::size_t a = 0; a < types; ++a) {
      into.first_stage_etcs[a] += from.first_stage_etcs[a];
      into.total_etcs[a] += from.total_etcs[a];
    }
  };
  rep.total = blank("total");
  for (const auto& country : inst.countries()) {
    AllocationEntry c = blank(country);
    for (std::size_t r = 0; r < inst.region_count(); ++r) {
      if (inst.regions[r].country == country) accumulate(c, rep.regions[r]);
    }
    rep.countries.push_back(std::move(c));
  }
  for (const auto& e : rep.regions) accumulate(rep.total, e);
  return rep;
}

}  // namespace epistoch
