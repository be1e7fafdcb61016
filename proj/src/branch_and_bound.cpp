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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "epistoch/solve.hpp"

namespace epistoch {

std::string status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::kOptimal: return "optimal";
    case SolveStatus::kFeasibleGap: return "feasible-gap";
    case SolveStatus::kInfeasible: return "infeasible";
    case SolveStatus::kUnbounded: return "unbounded";
    case SolveStatus::kTimeLimit: return "time-limit";
  }
  return "?";
}

Backend SolverConfig::parse_backend(const std::string& text, std::string* command) {
  if (text == "builtin") return Backend::kBuiltin;
  const std::string prefix = "external:";
  if (text.rfind(prefix, 0) == 0) {
    std::string cmd = text.substr(prefix.size());
    if (cmd.size() >= 2 && cmd.front() == '"' && cmd.back() == '"') cmd = cmd.substr(1, cmd.size() - 2);
    if (cmd.find("{in}") == std::string::npos || cmd.find("{out}") == std::string::npos) {
      throw std::invalid_argument("external backend command must contain {in} and {out}");
    }
    if (command) *command = cmd;
    return Backend::kExternal;
  }
  throw std::invalid_argument(fmt::format("unknown backend '{}' (builtin | external:\"cmd {{in}} {{out}}\")", text));
}

namespace {

struct Node {
  long id = 0;
  int depth = 0;
  double bound = -kInf;
  std::vector<double> lb, ub;  // integer variables only
};

struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound < b.bound;
    if (a.depth != b.depth) return a.depth > b.depth;
    return a.id < b.id;
  }
};

double rel_gap(double incumbent, double bound) {
  if (!std::isfinite(incumbent)) return kInf;
  return std::max(0.0, incumbent - bound) / std::max(std::abs(incumbent), 1.0);
}

}  // namespace

SolveResult solve_branch_and_bound(const LinearModel& model, const SolverConfig& cfg) {
  const auto problems = model.validate();
  if (!problems.empty()) throw std::invalid_argument("invalid model: " + problems.front());
  if (!(cfg.gap >= 0.0) || !(cfg.int_tol > 0.0) || !(cfg.time_limit > 0.0)) {
    throw std::invalid_argument("solver tolerances and time limit must be positive");
  }
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

  std::vector<int> ints;
  for (std::size_t j = 0; j < model.variables.size(); ++j) {
    if (model.variables[j].integer) ints.push_back(static_cast<int>(j));
  }

  SolveResult out;
  SimplexEngine engine(model);
  Node root;
  for (int j : ints) {
    const auto& v = model.variables[static_cast<std::size_t>(j)];
    root.lb.push_back(std::isfinite(v.lb) ? std::ceil(v.lb - cfg.int_tol) : v.lb);
    root.ub.push_back(std::isfinite(v.ub) ? std::floor(v.ub + cfg.int_tol) : v.ub);
  }

  std::set<Node, NodeOrder> open;
  open.insert(std::move(root));
  long next_id = 1;
  double incumbent = kInf;
  std::vector<double> best;
  bool hit_limit = false;
  bool limit_is_time = false;
  double bound_at_stop = kInf;

  auto apply = [&](const std::vector<double>& lbs, const std::vector<double>& ubs) {
    for (std::size_t k = 0; k < ints.size(); ++k) engine.set_bounds(ints[k], lbs[k], ubs[k]);
  };

  // Offers an integral LP point: the integers are pinned to their rounded
  // values and the continuous part re-solved.
  auto offer = [&](const LpResult& lp) {
    std::vector<double> pin(ints.size());
    for (std::size_t k = 0; k < ints.size(); ++k) pin[k] = std::round(lp.values[static_cast<std::size_t>(ints[k])]);
    apply(pin, pin);
    const LpResult pol = engine.solve();
    std::vector<double> values = pol.status == LpStatus::kOptimal ? pol.values : lp.values;
    for (std::size_t k = 0; k < ints.size(); ++k) values[static_cast<std::size_t>(ints[k])] = pin[k];
    const double value = model.objective_value(values);
    if (value < incumbent) {
      incumbent = value;
      best = std::move(values);
    }
  };

  auto fractional = [&](const LpResult& lp) {
    int pick = -1;
    double score = 0.0;
    for (std::size_t k = 0; k < ints.size(); ++k) {
      const double v = lp.values[static_cast<std::size_t>(ints[k])];
      const double frac = v - std::floor(v);
      const double dist = std::min(frac, 1.0 - frac);
      if (dist <= cfg.int_tol) continue;
      if (dist > score) {
        score = dist;
        pick = static_cast<int>(k);
      }
    }
    return pick;
  };

  // Fractional diving: round one integer at a time and re-solve until the
  // LP point is integral. Wide-domain integers go first (least fractional
  // among them), then binaries; a dead end flips the latest rounding, up to
  // a fixed number of backtracks. Only used to find incumbents.
  auto dive_pick = [&](const LpResult& lp, const std::vector<double>& lb, const std::vector<double>& ub) {
    int pick = -1;
    bool pick_wide = false;
    double score = 1.0;
    for (std::size_t k = 0; k < ints.size(); ++k) {
      const double v = lp.values[static_cast<std::size_t>(ints[k])];
      const double frac = v - std::floor(v);
      const double dist = std::min(frac, 1.0 - frac);
      if (dist <= cfg.int_tol) continue;
      const bool wide = ub[k] - lb[k] > 1.0;
      if ((wide && !pick_wide) || (wide == pick_wide && dist < score)) {
        score = dist;
        pick = static_cast<int>(k);
        pick_wide = wide;
      }
    }
    return pick;
  };
  auto dive = [&](const Node& from, LpResult lp) {
    struct Step {
      std::size_t k;
      double old_lb, old_ub, v, target;
      bool flipped;
      LpResult before;
    };
    std::vector<double> lb = from.lb, ub = from.ub;
    std::vector<Step> trail;
    int backtracks = 0;
    constexpr int kMaxBacktracks = 8;
    auto set_toward = [&](std::size_t k, double v, double target) {
      if (target > v) {
        lb[k] = target;
      } else {
        ub[k] = target;
      }
    };
    const std::size_t max_steps = 4 * ints.size() + 20;
    for (std::size_t steps = 0; steps < max_steps; ++steps) {
      if (std::isfinite(incumbent) && lp.objective >= incumbent) return;
      const int pick = dive_pick(lp, lb, ub);
      if (pick < 0) {
        offer(lp);
        return;
      }
      const auto k = static_cast<std::size_t>(pick);
      const double v = lp.values[static_cast<std::size_t>(ints[k])];
      trail.push_back({k, lb[k], ub[k], v, ub[k] - lb[k] > 1.0 ? std::floor(v) : std::round(v), false, lp});
      while (true) {
        Step& st = trail.back();
        set_toward(st.k, st.v, st.target);
        apply(lb, ub);
        LpResult next = engine.solve();
        if (next.status == LpStatus::kOptimal) {
          lp = std::move(next);
          break;
        }
        // Undo this rounding; flip it, or backtrack to the latest unflipped one.
        while (!trail.empty()) {
          Step& top = trail.back();
          lb[top.k] = top.old_lb;
          ub[top.k] = top.old_ub;
          if (!top.flipped) break;
          trail.pop_back();
        }
        if (trail.empty() || ++backtracks > kMaxBacktracks) return;
        Step& top = trail.back();
        top.flipped = true;
        top.target = top.target > top.v ? std::floor(top.v) : std::ceil(top.v);
      }
    }
  };
  if (!cfg.start.empty()) {
    if (cfg.start.size() != model.num_variables()) {
      throw std::invalid_argument(fmt::format("start has {} values for {} variables", cfg.start.size(),
                                              model.num_variables()));
    }
    if (check_feasibility(model, cfg.start, 1e-6).ok()) {
      LpResult seed;
      seed.values = cfg.start;
      offer(seed);
      if (!std::isfinite(incumbent) || incumbent > model.objective_value(cfg.start)) {
        incumbent = model.objective_value(cfg.start);
        best = cfg.start;
        for (int j : ints) best[static_cast<std::size_t>(j)] = std::round(best[static_cast<std::size_t>(j)]);
      }
    }
  }
  constexpr long kDiveInterval = 500;
  long last_dive = -kDiveInterval;

  while (!open.empty()) {
    if (elapsed() > cfg.time_limit || (cfg.node_limit >= 0 && out.stats.nodes >= cfg.node_limit)) {
      hit_limit = true;
      limit_is_time = elapsed() > cfg.time_limit;
      break;
    }
    Node node = std::move(open.extract(open.begin()).value());
    if (std::isfinite(incumbent) && rel_gap(incumbent, node.bound) <= cfg.gap) {
      bound_at_stop = node.bound;
      open.clear();
      break;
    }

    apply(node.lb, node.ub);
    const LpResult lp = engine.solve();
    ++out.stats.nodes;
    if (lp.status == LpStatus::kUnbounded) {
      if (node.depth == 0) {
        out.status = SolveStatus::kUnbounded;
        out.message = "LP relaxation is unbounded";
        out.stats.simplex_iterations = engine.total_iterations();
        out.stats.wall_time = elapsed();
        return out;
      }
      continue;
    }
    if (lp.status != LpStatus::kOptimal) continue;
    const double obj = lp.objective;
    if (std::isfinite(incumbent) && (obj >= incumbent || rel_gap(incumbent, obj) <= cfg.gap)) continue;

    const int branch = fractional(lp);
    if (branch < 0) {
      offer(lp);
      continue;
    }
    const long dive_every = std::isfinite(incumbent) ? 4 * kDiveInterval : kDiveInterval;
    if (out.stats.nodes - last_dive >= dive_every) {
      last_dive = out.stats.nodes;
      dive(node, lp);
      if (std::isfinite(incumbent) && (obj >= incumbent || rel_gap(incumbent, obj) <= cfg.gap)) continue;
    }

    const double v = lp.values[static_cast<std::size_t>(ints[static_cast<std::size_t>(branch)])];
    Node down{next_id++, node.depth + 1, obj, node.lb, node.ub};
    down.ub[static_cast<std::size_t>(branch)] = std::floor(v);
    Node up{next_id++, node.depth + 1, obj, std::move(node.lb), std::move(node.ub)};
    up.lb[static_cast<std::size_t>(branch)] = std::ceil(v);
    open.insert(std::move(down));
    open.insert(std::move(up));
  }

  double bound = incumbent;
  if (hit_limit) {
    for (const auto& nd : open) bound = std::min(bound, nd.bound);
  } else if (std::isfinite(bound_at_stop)) {
    bound = std::min(bound, bound_at_stop);
  }

  out.stats.simplex_iterations = engine.total_iterations();
  out.stats.wall_time = elapsed();
  if (!std::isfinite(incumbent)) {
    out.status = hit_limit ? (limit_is_time ? SolveStatus::kTimeLimit : SolveStatus::kFeasibleGap)
                           : SolveStatus::kInfeasible;
    if (hit_limit) out.message = "limit reached without an incumbent";
    out.best_bound = bound;
    return out;
  }
  out.objective = incumbent;
  out.best_bound = std::min(bound, incumbent);
  out.gap = rel_gap(incumbent, out.best_bound);
  out.values = std::move(best);
  if (hit_limit && out.gap > cfg.gap) {
    out.status = limit_is_time ? SolveStatus::kTimeLimit : SolveStatus::kFeasibleGap;
  } else {
    out.status = SolveStatus::kOptimal;
  }
  return out;
}

SolveResult solve_model(const LinearModel& model, const SolverConfig& cfg) {
  return cfg.backend == Backend::kExternal ? solve_external(model, cfg) : solve_branch_and_bound(model, cfg);
}

FeasibilityReport check_feasibility(const LinearModel& model, std::span<const double> values, double tol) {
  if (values.size() != model.num_variables()) {
    throw std::invalid_argument(fmt::format("check_feasibility: {} values for {} variables", values.size(),
                                            model.num_variables()));
  }
  FeasibilityReport rep;
  for (std::size_t j = 0; j < model.variables.size(); ++j) {
    const auto& v = model.variables[j];
    const double x = values[j];
    double viol = 0.0;
    if (x < v.lb) viol = (v.lb - x) / (1.0 + std::abs(v.lb));
    if (x > v.ub) viol = (x - v.ub) / (1.0 + std::abs(v.ub));
    if (std::isnan(x)) viol = kInf;
    rep.max_bound_violation = std::max(rep.max_bound_violation, viol);
    if (viol > tol) rep.violations.push_back({Violation::Kind::kBound, static_cast<int>(j), v.name, viol});
    if (v.integer) {
      const double frac = std::abs(x - std::round(x));
      rep.max_integrality_violation = std::max(rep.max_integrality_violation, frac);
      if (frac > tol) rep.violations.push_back({Violation::Kind::kIntegrality, static_cast<int>(j), v.name, frac});
    }
  }
  for (std::size_t i = 0; i < model.constraints.size(); ++i) {
    const auto& c = model.constraints[i];
    double act = 0.0, scale = 0.0;
    for (const auto& t : c.terms) {
      const double v = t.coef * values[static_cast<std::size_t>(t.var)];
      act += v;
      scale = std::max(scale, std::abs(v));
    }
    double viol = 0.0;
    const double lo = c.lower(), hi = c.upper();
    if (act < lo) viol = lo - act;
    if (act > hi) viol = act - hi;
    viol /= 1.0 + scale;
    if (std::isnan(act)) viol = kInf;
    rep.max_row_violation = std::max(rep.max_row_violation, viol);
    if (viol > tol) rep.violations.push_back({Violation::Kind::kRow, static_cast<int>(i), c.name, viol});
  }
  return rep;
}

std::string FeasibilityReport::summary() const {
  if (violations.empty()) return "feasible";
  std::string out = fmt::format("{} violation(s)", violations.size());
  for (std::size_t k = 0; k < std::min<std::size_t>(violations.size(), 10); ++k) {
    const auto& v = violations[k];
    const char* kind = v.kind == Violation::Kind::kRow ? "row" : v.kind == Violation::Kind::kBound ? "bound" : "integer";
    out += fmt::format("; {} {} ({}) by {:.3g}", kind, v.index, v.name, v.amount);
  }
  return out;
}

}  // namespace epistoch
