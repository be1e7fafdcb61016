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

// epistoch command-line driver. One subcommand per run; every run that
// writes files also writes <out>.manifest.json describing them.
//
// Exit codes: 0 ok, 1 usage, 2 data or validation error, 3 solver failure.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "epistoch/analysis.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace epistoch;

#ifndef EPISTOCH_VERSION
#define EPISTOCH_VERSION "0.0.0"
#endif

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitSolver = 3;

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SolverFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex_digest(std::string_view bytes) { return fmt::format("fnv1a64:{:016x}", fnv1a64(bytes)); }

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Infinite values have no JSON spelling.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// Shortest round-trip text for CSV cells.
std::string cell(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{}", v);
}

fs::path sibling(const fs::path& out, const std::string& suffix) {
  return out.parent_path() / (out.stem().string() + suffix);
}

// Flags shared by every subcommand.
struct Common {
  std::string instance = "builtin";
  int stages = 0;  // 0: instance horizon
  std::string budget;
  std::string sigma_rule = "constant";
  std::string out;
  bool deterministic = false;
  int workers = 1;
};

struct SolveFlags {
  double gap = 1e-3;
  double time_limit = 7200.0;
  std::string backend = "builtin";
  std::string mps_out;
  std::string formulation = "node-compact";
  std::string equity = "none";
  double k = 0.0;
};

void add_common(CLI::App* app, Common& c, bool needs_out) {
  app->add_option("--instance", c.instance, "builtin | builtin-countries | path to an instance file")
      ->capture_default_str();
  app->add_option("--stages", c.stages, "Tree depth (default: the instance horizon)")->check(CLI::Range(1, 12));
  app->add_option("--budget", c.budget, "Budget override, scientific notation accepted (e.g. 24e6)");
  app->add_option("--sigma-rule", c.sigma_rule, "constant | scale:<factor>")->capture_default_str();
  auto* out = app->add_option("--out", c.out, "Primary output path");
  if (needs_out) out->required();
  app->add_flag("--deterministic", c.deterministic, "Omit timestamps and timings from every output");
  app->add_option("--workers", c.workers, "Concurrent solves for WS and EEV")->check(CLI::Range(1, 256));
}

void add_solve(CLI::App* app, SolveFlags& s) {
  app->add_option("--gap", s.gap, "Relative optimality gap")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  app->add_option("--time-limit", s.time_limit, "Seconds per MIP solve")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--backend", s.backend, "builtin | external:\"<command {in} {out}>\"")->capture_default_str();
  app->add_option("--mps-out", s.mps_out, "Also write the model as fixed MPS");
  app->add_option("--formulation", s.formulation, "node-compact | scenario-split")
      ->check(CLI::IsMember({"node-compact", "scenario-split"}))
      ->capture_default_str();
  app->add_option("--equity", s.equity, "none | infection | capacity | prevalence")
      ->check(CLI::IsMember({"none", "infection", "capacity", "prevalence"}))
      ->capture_default_str();
  app->add_option("--k", s.k, "Equity tolerance")->check(CLI::NonNegativeNumber);
}

double parse_budget(const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || !std::isfinite(v) || v < 0.0) {
    throw CLI::ValidationError("--budget", "'" + text + "' is not a nonnegative number");
  }
  return v;
}

// Everything a subcommand needs after flag validation.
struct Context {
  std::string command;
  std::vector<std::string> argv;
  Common common;
  Instance inst;
  int stages = 0;
  std::string started;
  std::vector<fs::path> outputs;
  json config = json::object();
};

Context load_context(const std::string& command, const std::vector<std::string>& argv, const Common& c) {
  Context ctx;
  ctx.command = command;
  ctx.argv = argv;
  ctx.common = c;
  ctx.started = utc_now();
  try {
    ctx.inst = instance_from_spec(c.instance);
  } catch (const ParseError& e) {
    throw DataError(e.what());
  } catch (const ValidationError& e) {
    std::string msg = "instance is invalid:";
    for (const auto& v : e.violations()) msg += "\n  " + v;
    throw DataError(msg);
  }
  if (!c.budget.empty()) ctx.inst.costs.budget = parse_budget(c.budget);
  const auto problems = validate_instance(ctx.inst);
  if (!problems.empty()) {
    std::string msg = "instance is invalid:";
    for (const auto& v : problems) msg += "\n  " + v;
    throw DataError(msg);
  }
  ctx.stages = c.stages > 0 ? c.stages : ctx.inst.horizon;
  ctx.config["instance"] = c.instance;
  ctx.config["stages"] = ctx.stages;
  ctx.config["budget"] = std::llround(ctx.inst.costs.budget);
  ctx.config["sigma_rule"] = c.sigma_rule;
  ctx.config["workers"] = c.workers;
  return ctx;
}

ScenarioTree make_tree(const Context& ctx) {
  TreeSpec spec = TreeSpec::from_instance(ctx.inst);
  try {
    spec.sigma_rule = SigmaRule::parse(ctx.common.sigma_rule);
  } catch (const std::invalid_argument& e) {
    throw CLI::ValidationError("--sigma-rule", e.what());
  }
  return build_tree(ctx.inst, ctx.stages, spec);
}

AnalysisOptions analysis_options(Context& ctx, const SolveFlags& s) {
  AnalysisOptions opts;
  opts.solver.gap = s.gap;
  opts.solver.time_limit = s.time_limit;
  try {
    opts.solver.backend = SolverConfig::parse_backend(s.backend, &opts.solver.external_command);
  } catch (const std::invalid_argument& e) {
    throw CLI::ValidationError("--backend", e.what());
  }
  opts.build.formulation = parse_formulation(s.formulation);
  opts.build.equity = {parse_equity(s.equity), s.k};
  opts.workers = ctx.common.workers;
  ctx.config["gap"] = s.gap;
  ctx.config["time_limit"] = s.time_limit;
  ctx.config["backend"] = s.backend;
  ctx.config["formulation"] = s.formulation;
  ctx.config["equity"] = s.equity;
  ctx.config["k"] = s.k;
  return opts;
}

void write_file(Context& ctx, const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw std::runtime_error("cannot write " + path.string());
  ctx.outputs.push_back(path);
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot read " + path.string());
  std::stringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

void write_manifest(Context& ctx) {
  if (ctx.common.out.empty()) return;
  json m;
  m["schema"] = "epistoch.manifest/1";
  m["tool_version"] = EPISTOCH_VERSION;
  m["command"] = ctx.command;
  m["arguments"] = ctx.argv;
  m["config"] = ctx.config;
  m["config_digest"] = hex_digest(ctx.config.dump());
  m["instance_digest"] = hex_digest(save_instance(ctx.inst));
  m["budget"] = fmt::format("{}", std::llround(ctx.inst.costs.budget));
  m["determinism"] =
      "no random numbers are drawn; identical inputs and flags give identical outputs unless a time limit "
      "interrupts a solve";
  if (ctx.common.deterministic) {
    m["timestamps"] = nullptr;
  } else {
    m["timestamps"] = {{"started", ctx.started}, {"finished", utc_now()}};
  }
  auto files = json::array();
  for (const auto& p : ctx.outputs) files.push_back({{"path", p.string()}, {"digest", hex_digest(read_text(p))}});
  m["outputs"] = std::move(files);
  const fs::path path = fs::path(ctx.common.out).string() + ".manifest.json";
  std::ofstream f(path, std::ios::binary);
  f << m.dump(2) << "\n";
}

json solve_json(const Context& ctx, const TreeSolution& sol, const ScenarioTree& tree) {
  json j;
  j["schema"] = "epistoch.solve/1";
  j["status"] = status_name(sol.result.status);
  j["objective"] = num(sol.result.objective);
  j["best_bound"] = num(sol.result.best_bound);
  j["gap"] = num(sol.result.gap);
  j["nodes"] = sol.result.stats.nodes;
  j["simplex_iterations"] = sol.result.stats.simplex_iterations;
  if (!ctx.common.deterministic) j["wall_time"] = sol.result.stats.wall_time;
  j["message"] = sol.result.message;
  j["model"] = {{"name", sol.build.model.name},
                {"formulation", formulation_name(sol.build.map.formulation)},
                {"variables", sol.build.model.num_variables()},
                {"constraints", sol.build.model.num_constraints()},
                {"nonzeros", sol.build.model.num_nonzeros()},
                {"integers", sol.build.model.num_integer()},
                {"stages", tree.stages()},
                {"scenarios", tree.leaves().size()}};
  auto plan = json::array();
  if (sol.result.has_solution()) {
    for (const auto& n : tree.nodes()) {
      if (n.children.empty()) continue;
      for (std::size_t r = 0; r < ctx.inst.region_count(); ++r) {
        for (std::size_t a = 0; a < ctx.inst.etc_types.size(); ++a) {
          const int count = sol.plan.opens[static_cast<std::size_t>(n.id)][r][a];
          if (count == 0) continue;
          plan.push_back({{"node", n.id},
                          {"stage", n.stage},
                          {"region", ctx.inst.regions[r].id},
                          {"etc_type", ctx.inst.etc_types[a].id},
                          {"count", count}});
        }
      }
    }
  }
  j["plan"] = std::move(plan);
  return j;
}

std::string plan_csv(const Context& ctx, const TreeSolution& sol, const ScenarioTree& tree) {
  std::string out = "node,stage,region,etc_type,count\n";
  if (!sol.result.has_solution()) return out;
  for (const auto& n : tree.nodes()) {
    if (n.children.empty()) continue;
    for (std::size_t r = 0; r < ctx.inst.region_count(); ++r) {
      for (std::size_t a = 0; a < ctx.inst.etc_types.size(); ++a) {
        out += fmt::format("{},{},{},{},{}\n", n.id, n.stage, ctx.inst.regions[r].id, ctx.inst.etc_types[a].id,
                           sol.plan.opens[static_cast<std::size_t>(n.id)][r][a]);
      }
    }
  }
  return out;
}

// Reads the "plan" array of a solve JSON into per-node openings.
NodePlan read_plan(const Context& ctx, const ScenarioTree& tree, const fs::path& path) {
  NodePlan plan = NodePlan::zeros(ctx.inst, tree);
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw DataError(fmt::format("{}: {}", path.string(), e.what()));
  }
  if (!j.contains("plan") || !j["plan"].is_array()) throw DataError(path.string() + ": no \"plan\" array");
  for (const auto& e : j["plan"]) {
    try {
      const int node = e.at("node").get<int>();
      const std::size_t r = ctx.inst.region_index(e.at("region").get<std::string>());
      const int type = e.at("etc_type").get<int>();
      std::size_t a = ctx.inst.etc_types.size();
      for (std::size_t t = 0; t < ctx.inst.etc_types.size(); ++t) {
        if (ctx.inst.etc_types[t].id == type) a = t;
      }
      if (node < 0 || node >= static_cast<int>(tree.size()) || tree.is_leaf(node) || a == ctx.inst.etc_types.size()) {
        throw DataError(fmt::format("{}: plan entry {} does not fit this tree and instance", path.string(), e.dump()));
      }
      plan.opens[static_cast<std::size_t>(node)][r][a] = e.at("count").get<int>();
    } catch (const json::exception& ex) {
      throw DataError(fmt::format("{}: bad plan entry {}: {}", path.string(), e.dump(), ex.what()));
    } catch (const std::out_of_range& ex) {
      throw DataError(fmt::format("{}: {}", path.string(), ex.what()));
    }
  }
  return plan;
}

TreeSolution run_solve(Context& ctx, const ScenarioTree& tree, const AnalysisOptions& opts, const SolveFlags& s) {
  TreeSolution sol;
  try {
    if (!s.mps_out.empty()) {
      const BuildResult b = build_deterministic_equivalent(ctx.inst, tree, opts.build);
      write_file(ctx, s.mps_out, emit_mps(b.model));
      write_file(ctx, sibling(s.mps_out, ".names.tsv"), MpsNames::for_model(b.model).table(b.model));
    }
    sol = solve_tree(ctx.inst, tree, opts);
  } catch (const ExternalSolverError& e) {
    throw SolverFailure(e.what());
  }
  return sol;
}

void require_solution(const TreeSolution& sol) {
  if (!sol.result.has_solution()) {
    throw SolverFailure(fmt::format("no feasible solution: {} {}", status_name(sol.result.status), sol.result.message));
  }
}

// --- subcommands -----------------------------------------------------------

int cmd_tree(Context& ctx) {
  const ScenarioTree tree = make_tree(ctx);
  json j;
  j["schema"] = "epistoch.tree/1";
  j["stages"] = tree.stages();
  auto regions = json::array();
  for (const auto& r : ctx.inst.regions) regions.push_back(r.id);
  j["regions"] = regions;
  j["quantiles"] = tree.spec().quantiles;
  j["probs"] = tree.spec().probs;
  j["sigma_rule"] = tree.spec().sigma_rule.to_string();
  auto nodes = json::array();
  auto edges = json::array();
  for (const auto& n : tree.nodes()) {
    nodes.push_back({{"id", n.id},
                     {"stage", n.stage},
                     {"parent", n.parent ? json(*n.parent) : json(nullptr)},
                     {"branch", n.branch_label},
                     {"branch_prob", n.branch_prob},
                     {"path_prob", n.path_prob},
                     {"mean", n.mean},
                     {"sigma", n.sigma},
                     {"rate", n.rate}});
    if (n.parent) edges.push_back({*n.parent, n.id});
  }
  j["nodes"] = std::move(nodes);
  j["edges"] = std::move(edges);
  write_file(ctx, ctx.common.out, j.dump(1) + "\n");

  std::string csv = "scenario,leaf,probability,stage,node,label";
  for (const auto& r : ctx.inst.regions) csv += ",rate_" + r.id;
  csv += "\n";
  const auto paths = scenario_paths(tree);
  for (std::size_t w = 0; w < paths.size(); ++w) {
    for (std::size_t s = 0; s < paths[w].nodes.size(); ++s) {
      csv += fmt::format("{},{},{},{},{},{}", w, paths[w].leaf, cell(paths[w].probability), s, paths[w].nodes[s],
                         s == 0 ? "root" : paths[w].labels[s - 1]);
      for (double v : paths[w].rates[s]) csv += "," + cell(v);
      csv += "\n";
    }
  }
  write_file(ctx, sibling(ctx.common.out, ".paths.csv"), csv);
  return kExitOk;
}

int cmd_build(Context& ctx, const SolveFlags& s) {
  const ScenarioTree tree = make_tree(ctx);
  const AnalysisOptions opts = analysis_options(ctx, s);
  const BuildResult b = build_deterministic_equivalent(ctx.inst, tree, opts.build);
  const auto issues = b.model.validate();
  json j;
  j["schema"] = "epistoch.build/1";
  j["model"] = {{"name", b.model.name},
                {"formulation", formulation_name(b.map.formulation)},
                {"variables", b.model.num_variables()},
                {"constraints", b.model.num_constraints()},
                {"nonzeros", b.model.num_nonzeros()},
                {"integers", b.model.num_integer()}};
  j["issues"] = issues;
  j["map"] = json::parse(b.map.to_json());
  write_file(ctx, ctx.common.out, j.dump(1) + "\n");
  if (!s.mps_out.empty()) {
    write_file(ctx, s.mps_out, emit_mps(b.model));
    write_file(ctx, sibling(s.mps_out, ".names.tsv"), MpsNames::for_model(b.model).table(b.model));
  }
  return issues.empty() ? kExitOk : kExitData;
}

int cmd_solve(Context& ctx, const SolveFlags& s) {
  const ScenarioTree tree = make_tree(ctx);
  const AnalysisOptions opts = analysis_options(ctx, s);
  const TreeSolution sol = run_solve(ctx, tree, opts, s);
  write_file(ctx, ctx.common.out, solve_json(ctx, sol, tree).dump(1) + "\n");
  write_file(ctx, sibling(ctx.common.out, ".plan.csv"), plan_csv(ctx, sol, tree));
  require_solution(sol);
  return kExitOk;
}

int cmd_simulate(Context& ctx, const std::string& plan_path, int scenario) {
  const ScenarioTree tree = make_tree(ctx);
  const NodePlan plan = plan_path.empty() ? NodePlan::zeros(ctx.inst, tree) : read_plan(ctx, tree, plan_path);
  const auto paths = scenario_paths(tree);
  if (scenario >= static_cast<int>(paths.size())) {
    throw CLI::ValidationError("--scenario", fmt::format("must be below {}", paths.size()));
  }
  const double b1 = ctx.inst.costs.treatment_cost_per_person;
  std::string csv = "scenario,probability,stage,region,S,I,T,R,F,B,C,Ibar,spend\n";
  json summary = json::array();
  for (std::size_t w = 0; w < paths.size(); ++w) {
    if (scenario >= 0 && static_cast<int>(w) != scenario) continue;
    const CapacityPlan along = plan.along(paths[w]);
    const Trajectory t = simulate_path(ctx.inst, along, paths[w]);
    for (std::size_t j = 0; j < t.states.size(); ++j) {
      for (std::size_t r = 0; r < ctx.inst.region_count(); ++r) {
        const RegionState& st = t.states[j][r];
        double spend = b1 * st.T;
        if (j < along.opens.size()) {
          for (std::size_t a = 0; a < ctx.inst.etc_types.size(); ++a) {
            spend += ctx.inst.etc_types[a].fixed_cost * along.opens[j][r][a];
          }
        }
        const double ibar = j < t.hospitalized.size() ? t.hospitalized[j][r] : 0.0;
        csv += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", w, cell(paths[w].probability), j,
                           ctx.inst.regions[r].id, cell(st.S), cell(st.I), cell(st.T), cell(st.R), cell(st.F),
                           cell(st.B), cell(st.C), cell(ibar), cell(spend));
      }
    }
    summary.push_back({{"scenario", w},
                       {"objective", t.objective_value},
                       {"spend", t.spend},
                       {"within_budget", t.within_budget},
                       {"coupling_ok", t.coupling_ok},
                       {"clamped", t.clamped}});
  }
  write_file(ctx, ctx.common.out, csv);
  json j;
  j["schema"] = "epistoch.simulate/1";
  j["scenarios"] = std::move(summary);
  if (scenario < 0) {
    const PolicyEvaluation ev = evaluate_policy(ctx.inst, tree, plan);
    j["expected_objective"] = ev.expected_objective;
    j["all_feasible"] = ev.all_feasible;
  }
  write_file(ctx, sibling(ctx.common.out, ".summary.json"), j.dump(1) + "\n");
  return kExitOk;
}

int cmd_vss(Context& ctx, const SolveFlags& s, int T) {
  const ScenarioTree tree = make_tree(ctx);
  const AnalysisOptions opts = analysis_options(ctx, s);
  const int last = T > 0 ? T : tree.stages();
  if (last > tree.stages()) throw CLI::ValidationError("--T", fmt::format("must not exceed --stages ({})", tree.stages()));
  ctx.config["T"] = last;
  VssChain chain;
  try {
    chain = vss_chain(ctx.inst, tree, opts, last);
  } catch (const ExternalSolverError& e) {
    throw SolverFailure(e.what());
  }
  std::string csv = "t,eev,vss\n";
  for (std::size_t t = 0; t < chain.eev.size(); ++t) {
    csv += fmt::format("{},{},{}\n", t + 1, cell(chain.eev[t]), cell(chain.vss[t]));
  }
  write_file(ctx, ctx.common.out, csv);
  json j;
  j["schema"] = "epistoch.vss/1";
  j["rp"] = num(chain.rp);
  j["ws"] = num(chain.ws);
  j["ev"] = num(chain.ev);
  auto eev = json::array(), vss = json::array();
  for (double v : chain.eev) eev.push_back(num(v));
  for (double v : chain.vss) vss.push_back(num(v));
  j["eev"] = std::move(eev);
  j["vss"] = std::move(vss);
  j["diagnostics"] = chain.diagnostics;
  write_file(ctx, sibling(ctx.common.out, ".summary.json"), j.dump(1) + "\n");
  if (!std::isfinite(chain.rp)) throw SolverFailure("the recourse problem was not solved");
  return kExitOk;
}

int cmd_equity(Context& ctx, SolveFlags s) {
  if (s.equity == "none") throw CLI::ValidationError("--equity", "equity-report needs an equity kind");
  const ScenarioTree tree = make_tree(ctx);
  const AnalysisOptions opts = analysis_options(ctx, s);
  const TreeSolution sol = run_solve(ctx, tree, opts, s);
  json j;
  j["schema"] = "epistoch.equity/1";
  j["status"] = status_name(sol.result.status);
  j["objective"] = num(sol.result.objective);
  j["kind"] = s.equity;
  j["k"] = s.k;
  std::string csv = "region,expected_infections,expected_capacity,infection_gap,capacity_gap,prevalence_gap\n";
  if (sol.result.has_solution()) {
    const EquityReport rep = equity_gaps(ctx.inst, sol.build.map, sol.result.values, opts.build.equity);
    auto regions = json::array();
    for (const auto& e : rep.regions) {
      regions.push_back({{"region", e.region},
                         {"expected_infections", e.expected_infections},
                         {"expected_capacity", e.expected_capacity},
                         {"infection_gap", e.infection_gap},
                         {"capacity_gap", e.capacity_gap},
                         {"prevalence_gap", e.prevalence_gap}});
      csv += fmt::format("{},{},{},{},{},{}\n", e.region, cell(e.expected_infections), cell(e.expected_capacity),
                         cell(e.infection_gap), cell(e.capacity_gap), cell(e.prevalence_gap));
    }
    j["regions"] = std::move(regions);
    j["max_gap"] = {{"infection", rep.max_infection_gap},
                    {"capacity", rep.max_capacity_gap},
                    {"prevalence", rep.max_prevalence_gap}};
  }
  write_file(ctx, ctx.common.out, j.dump(1) + "\n");
  write_file(ctx, sibling(ctx.common.out, ".regions.csv"), csv);
  require_solution(sol);
  return kExitOk;
}

// Observed cases per stage: CSV with a header and columns stage,observed.
std::map<int, double> read_observed(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  std::map<int, double> out;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line_no == 1) continue;
    const auto comma = line.find(',');
    try {
      if (comma == std::string::npos) throw std::invalid_argument("missing comma");
      out[std::stoi(line.substr(0, comma))] = std::stod(line.substr(comma + 1));
    } catch (const std::exception&) {
      throw DataError(fmt::format("{}:{}: expected 'stage,observed'", path.string(), line_no));
    }
  }
  return out;
}

json allocation_entry(const AllocationEntry& e) {
  return {{"name", e.name},
          {"first_stage_budget", e.first_stage_budget},
          {"total_budget", e.total_budget},
          {"first_stage_etcs", e.first_stage_etcs},
          {"total_etcs", e.total_etcs}};
}

std::string allocation_csv(const std::vector<AllocationEntry>& rows, std::size_t types) {
  std::string csv = "name,first_stage_budget,total_budget";
  for (std::size_t a = 0; a < types; ++a) csv += fmt::format(",first_stage_etcs_{0},total_etcs_{0}", a);
  csv += "\n";
  for (const auto& e : rows) {
    csv += fmt::format("{},{},{}", e.name, cell(e.first_stage_budget), cell(e.total_budget));
    for (std::size_t a = 0; a < types; ++a) csv += "," + cell(e.first_stage_etcs[a]) + "," + cell(e.total_etcs[a]);
    csv += "\n";
  }
  return csv;
}

int cmd_report(Context& ctx, const SolveFlags& s, const std::string& observed_path) {
  const std::map<int, double> observed = observed_path.empty() ? std::map<int, double>{} : read_observed(observed_path);
  const ScenarioTree tree = make_tree(ctx);
  const AnalysisOptions opts = analysis_options(ctx, s);
  const TreeSolution sol = run_solve(ctx, tree, opts, s);
  require_solution(sol);
  const AllocationReport rep = allocation_report(ctx.inst, sol.build.map, sol.result.values);
  json j;
  j["schema"] = "epistoch.report/1";
  j["status"] = status_name(sol.result.status);
  j["objective"] = num(sol.result.objective);
  j["budget"] = ctx.inst.costs.budget;
  j["max_scenario_spend"] = rep.max_scenario_spend;
  auto regions = json::array(), countries = json::array();
  for (const auto& e : rep.regions) regions.push_back(allocation_entry(e));
  for (const auto& e : rep.countries) countries.push_back(allocation_entry(e));
  j["regions"] = std::move(regions);
  j["countries"] = std::move(countries);
  j["total"] = allocation_entry(rep.total);

  // Expected new infections per stage under the solved plan, the quantity
  // compared against observed case counts.
  const PolicyEvaluation ev = evaluate_policy(ctx.inst, tree, sol.plan);
  const auto paths = scenario_paths(tree);
  std::vector<double> predicted(static_cast<std::size_t>(tree.stages()), 0.0);
  for (std::size_t w = 0; w < paths.size(); ++w) {
    for (std::size_t st = 0; st < predicted.size(); ++st) {
      for (double v : ev.trajectories[w].new_infections[st]) predicted[st] += paths[w].probability * v;
    }
  }
  std::string vcsv = "stage,predicted,observed\n";
  std::vector<double> a, b;
  for (std::size_t st = 0; st < predicted.size(); ++st) {
    const auto it = observed.find(static_cast<int>(st));
    vcsv += fmt::format("{},{},{}\n", st, cell(predicted[st]), it == observed.end() ? "" : cell(it->second));
    if (it != observed.end()) {
      a.push_back(predicted[st]);
      b.push_back(it->second);
    }
  }
  if (!observed.empty()) {
    if (a.size() < 2) throw DataError("--observed needs at least two stages that the tree covers");
    const TTestResult t = paired_t_test(a, b);
    j["validation"] = {{"pairs", a.size()},
                       {"t_stat", num(t.t_stat)},
                       {"p_value", t.p_value},
                       {"df", t.df},
                       {"degenerate", t.degenerate}};
  }
  write_file(ctx, ctx.common.out, j.dump(1) + "\n");
  write_file(ctx, sibling(ctx.common.out, ".regions.csv"), allocation_csv(rep.regions, ctx.inst.etc_types.size()));
  write_file(ctx, sibling(ctx.common.out, ".countries.csv"), allocation_csv(rep.countries, ctx.inst.etc_types.size()));
  write_file(ctx, sibling(ctx.common.out, ".validation.csv"), vcsv);
  return kExitOk;
}

int cmd_validate(Context& ctx) {
  // load_context already threw on violations.
  std::cout << fmt::format("{}: ok ({} regions, {} ETC types, horizon {})\n", ctx.inst.name,
                           ctx.inst.region_count(), ctx.inst.etc_types.size(), ctx.inst.horizon);
  if (!ctx.common.out.empty()) {
    json j;
    j["schema"] = "epistoch.validate/1";
    j["instance"] = ctx.inst.name;
    j["valid"] = true;
    j["canonical_digest"] = hex_digest(save_instance(ctx.inst));
    write_file(ctx, ctx.common.out, j.dump(1) + "\n");
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-stage stochastic ETC capacity planning"};
  app.set_version_flag("--version", EPISTOCH_VERSION);
  app.require_subcommand(1);

  Common common;
  SolveFlags solve;
  std::string plan_path;
  std::string observed_path;
  int scenario = -1;
  int vss_T = 0;

  auto* tree = app.add_subcommand("tree", "Scenario tree as JSON plus paths as CSV");
  add_common(tree, common, true);
  auto* build = app.add_subcommand("build", "Deterministic equivalent: size summary, variable map, MPS");
  add_common(build, common, true);
  add_solve(build, solve);
  auto* solve_cmd = app.add_subcommand("solve", "Solve the recourse problem");
  add_common(solve_cmd, common, true);
  add_solve(solve_cmd, solve);
  auto* simulate = app.add_subcommand("simulate", "Roll a plan forward through the dynamics; CSV per stage");
  add_common(simulate, common, true);
  simulate->add_option("--plan", plan_path, "Solve JSON whose plan to simulate (default: open nothing)")
      ->check(CLI::ExistingFile);
  simulate->add_option("--scenario", scenario, "Single scenario index (default: all)")->check(CLI::NonNegativeNumber);
  auto* vss = app.add_subcommand("vss", "RP, WS, EV and the EEV_t / VSS_t chain");
  add_common(vss, common, true);
  add_solve(vss, solve);
  vss->add_option("--T", vss_T, "Last t of the chain (default: --stages)")->check(CLI::PositiveNumber);
  auto* equity = app.add_subcommand("equity-report", "Solve with an equity constraint and recompute the gaps");
  add_common(equity, common, true);
  add_solve(equity, solve);
  auto* report = app.add_subcommand("report", "Allocation report and optional validation against observations");
  add_common(report, common, true);
  add_solve(report, solve);
  report->add_option("--observed", observed_path, "CSV with columns stage,observed")->check(CLI::ExistingFile);
  auto* validate = app.add_subcommand("validate", "Check an instance");
  add_common(validate, common, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    Context ctx = load_context(sub->get_name(), args, common);
    int code = kExitOk;
    try {
      if (sub == tree) code = cmd_tree(ctx);
      else if (sub == build) code = cmd_build(ctx, solve);
      else if (sub == solve_cmd) code = cmd_solve(ctx, solve);
      else if (sub == simulate) code = cmd_simulate(ctx, plan_path, scenario);
      else if (sub == vss) code = cmd_vss(ctx, solve, vss_T);
      else if (sub == equity) code = cmd_equity(ctx, solve);
      else if (sub == report) code = cmd_report(ctx, solve, observed_path);
      else code = cmd_validate(ctx);
    } catch (const SolverFailure&) {
      write_manifest(ctx);
      throw;
    }
    write_manifest(ctx);
    return code;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << "\n" << sub->help();
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const SolverFailure& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kExitSolver;
  } catch (const std::invalid_argument& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}
