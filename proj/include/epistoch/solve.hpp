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

#ifndef EPISTOCH_SOLVE_HPP
#define EPISTOCH_SOLVE_HPP

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "epistoch/linear_model.hpp"

namespace epistoch {

enum class SolveStatus { kOptimal, kFeasibleGap, kInfeasible, kUnbounded, kTimeLimit };

std::string status_name(SolveStatus s);

enum class Backend { kBuiltin, kExternal };

struct SolverConfig {
  double gap = 1e-3;         // relative
  double time_limit = 7200;  // seconds
  double int_tol = 1e-6;
  Backend backend = Backend::kBuiltin;
  // Shell command with {in} (MPS path) and {out} (solution path).
  std::string external_command;
  long node_limit = -1;  // < 0: unlimited
  // Optional starting incumbent (one value per variable); ignored unless it
  // passes check_feasibility.
  std::vector<double> start;

  /// "builtin" or "external:<command template>".
  static Backend parse_backend(const std::string& text, std::string* command);
};

struct SolveStats {
  long simplex_iterations = 0;
  long nodes = 0;
  double wall_time = 0.0;
};

struct SolveResult {
  SolveStatus status = SolveStatus::kInfeasible;
  double objective = kInf;
  double best_bound = -kInf;
  double gap = kInf;
  std::vector<double> values;
  SolveStats stats;
  std::string message;

  bool has_solution() const { return !values.empty(); }
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded, kIterationLimit };

std::string lp_status_name(LpStatus s);

struct LpOptions {
  double primal_tol = 1e-9;
  double dual_tol = 1e-9;
  double pivot_tol = 1e-9;
  long iteration_limit = 1'000'000;
  int refactor_interval = 100;
  bool scale = true;
};

struct LpResult {
  LpStatus status = LpStatus::kInfeasible;
  double objective = kInf;
  std::vector<double> values;
  std::vector<double> row_activity;
  long iterations = 0;
};

/// Bounded-variable simplex over the explicit basis inverse. Dual simplex
/// from a slack basis, then a primal pass; integrality is ignored.
class SimplexEngine {
 public:
  SimplexEngine(const LinearModel& model, LpOptions opts = {});
  ~SimplexEngine();
  SimplexEngine(const SimplexEngine&) = delete;
  SimplexEngine& operator=(const SimplexEngine&) = delete;

  /// Overrides structural bounds (original units); the basis is kept.
  void set_bounds(int var, double lb, double ub);
  double lower(int var) const;
  double upper(int var) const;

  /// Warm-started re-solve from the current basis.
  LpResult solve();
  long total_iterations() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

LpResult simplex_lp(const LinearModel& model, const LpOptions& opts = {});

/// Best-bound branch-and-bound; deterministic for identical inputs.
SolveResult solve_branch_and_bound(const LinearModel& model, const SolverConfig& cfg);

/// Dispatches on cfg.backend.
SolveResult solve_model(const LinearModel& model, const SolverConfig& cfg);

struct Violation {
  enum class Kind { kRow, kBound, kIntegrality };
  Kind kind = Kind::kRow;
  int index = 0;  // row or variable
  std::string name;
  double amount = 0.0;
};

struct FeasibilityReport {
  std::vector<Violation> violations;
  double max_row_violation = 0.0;
  double max_bound_violation = 0.0;
  double max_integrality_violation = 0.0;

  bool ok() const { return violations.empty(); }
  std::string summary() const;
};

/// Rows are checked against tol * (1 + max_j |a_ij x_j|), bounds against
/// tol * (1 + |bound|), integrality against tol.
FeasibilityReport check_feasibility(const LinearModel& model, std::span<const double> values, double tol = 1e-6);

// --- MPS -----------------------------------------------------------------

/// Short names used in the MPS file plus the original names they stand for.
struct MpsNames {
  std::vector<std::string> columns;
  std::vector<std::string> rows;

  static MpsNames for_model(const LinearModel& model);
  /// Tab-separated "kind mangled original" lines.
  std::string table(const LinearModel& model) const;
};

/// Fixed-format MPS using mangled eight-character names.
std::string emit_mps(const LinearModel& model);

/// Reads fixed or free MPS. Names are taken verbatim from the file.
LinearModel parse_mps(const std::string& text);

class ExternalSolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Values from a solution file in the HiGHS text dialect, keyed by column
/// name, plus model status and objective.
struct ExternalSolution {
  std::string model_status;
  bool has_primal = false;
  double objective = 0.0;
  std::vector<std::pair<std::string, double>> columns;
};

ExternalSolution parse_highs_solution(const std::string& text);

/// Writes the MPS, runs the command template, maps the solution back.
SolveResult solve_external(const LinearModel& model, const SolverConfig& cfg);

}  // namespace epistoch

#endif  // EPISTOCH_SOLVE_HPP
