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

#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "fixtures.hpp"

using namespace epistoch;
namespace fs = std::filesystem;

namespace {

bool have_highspy() {
  const std::string cmd = std::string(EPISTOCH_PYTHON) + " -c 'import highspy' >/dev/null 2>&1";
  return std::system(cmd.c_str()) == 0;
}

std::string highs_command() {
  return std::string(EPISTOCH_PYTHON) + " " + testing::data_path("../tools/highs_solve.py") + " {in} {out}";
}

fs::path write_script(const std::string& name, const std::string& body) {
  const fs::path p = fs::temp_directory_path() / name;
  std::ofstream(p) << "#!/bin/sh\n" << body;
  fs::permissions(p, fs::perms::owner_all);
  return p;
}

LinearModel two_var() {
  LinearModel m;
  const int x = m.add_variable("x", 0, 3, true, -1.0);
  const int y = m.add_variable("y", 0, 2, false, -2.0);
  m.add_constraint("c", {{x, 1}, {y, 1}}, Sense::kLe, 4);
  return m;
}

}  // namespace

TEST_CASE("HiGHS solution files parse") {
  const char* text =
      "Model status\nOptimal\n\n# Primal solution values\nFeasible\nObjective -6\n# Columns 2\n"
      "C0000001 2\nC0000002 2\n# Rows 1\nR0000001 4\n\n# Dual solution values\nNone\n";
  const ExternalSolution s = parse_highs_solution(text);
  CHECK(s.model_status == "Optimal");
  CHECK(s.has_primal);
  CHECK(s.objective == -6.0);
  REQUIRE(s.columns.size() == 2);
  CHECK(s.columns[1].first == "C0000002");
  CHECK_THROWS_AS(parse_highs_solution("nothing here\n"), ExternalSolverError);
  CHECK_THROWS_AS(parse_highs_solution("Model status\nOptimal\n\n# Primal solution values\nFeasible\n"
                                       "Objective 1\n# Columns 3\nC0000001 1\n"),
                  ExternalSolverError);
}

TEST_CASE("a stub solver script is mapped back by column name") {
  const fs::path script = write_script("epistoch_stub.sh",
                                       "cat > \"$2\" <<'EOS'\nModel status\nOptimal\n\n# Primal solution values\n"
                                       "Feasible\nObjective -6\n# Columns 2\nC0000002 2\nC0000001 2\nEOS\n");
  SolverConfig cfg;
  cfg.backend = Backend::kExternal;
  cfg.external_command = script.string() + " {in} {out}";
  const SolveResult r = solve_model(two_var(), cfg);
  CHECK(r.status == SolveStatus::kOptimal);
  CHECK(r.values == std::vector<double>{2.0, 2.0});
  CHECK(r.objective == -6.0);
}

TEST_CASE("external failures are reported") {
  SolverConfig cfg;
  cfg.backend = Backend::kExternal;
  cfg.external_command = "true";
  CHECK_THROWS_AS(solve_model(two_var(), cfg), ExternalSolverError);  // no placeholders
  cfg.external_command = "false {in} {out}";
  CHECK_THROWS_AS(solve_model(two_var(), cfg), ExternalSolverError);
  cfg.external_command = "true {in} {out}";
  CHECK_THROWS_AS(solve_model(two_var(), cfg), ExternalSolverError);  // no solution file
  const fs::path infeasible = write_script("epistoch_stub_inf.sh",
                                           "printf 'Model status\\nInfeasible\\n\\n# Primal solution values\\nNone\\n' > \"$2\"\n");
  cfg.external_command = infeasible.string() + " {in} {out}";
  CHECK(solve_model(two_var(), cfg).status == SolveStatus::kInfeasible);
}

TEST_CASE("a hung solver is killed at the time limit") {
  SolverConfig cfg;
  cfg.backend = Backend::kExternal;
  cfg.external_command = "sleep 30; echo {in} {out}";
  cfg.time_limit = 0.3;
  const SolveResult r = solve_model(two_var(), cfg);
  CHECK(r.status == SolveStatus::kTimeLimit);
  CHECK(r.stats.wall_time < 5.0);
}

TEST_CASE("highspy agrees with the builtin solver on the toy model") {
  if (!have_highspy()) {
    MESSAGE("highspy not importable; cross-check skipped");
    return;
  }
  const Instance inst = testing::toy_instance();
  const BuildResult b = build_deterministic_equivalent(inst, build_tree(inst, 2, testing::binary_spec()));
  SolverConfig builtin;
  builtin.gap = 0.0;
  SolverConfig ext = builtin;
  ext.backend = Backend::kExternal;
  ext.external_command = highs_command();
  const SolveResult a = solve_model(b.model, builtin);
  const SolveResult h = solve_model(b.model, ext);
  REQUIRE(a.status == SolveStatus::kOptimal);
  REQUIRE(h.status == SolveStatus::kOptimal);
  CHECK(std::abs(a.objective - h.objective) <= 1e-6 * std::max(1.0, std::abs(a.objective)));
  CHECK(check_feasibility(b.model, h.values, 1e-6).ok());
}
