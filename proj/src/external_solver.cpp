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

#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <fmt/format.h>

#include "epistoch/solve.hpp"

namespace epistoch {

namespace fs = std::filesystem;

namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

std::string replace_all(std::string text, const std::string& from, const std::string& to) {
  for (std::size_t at = text.find(from); at != std::string::npos; at = text.find(from, at + to.size())) {
    text.replace(at, from.size(), to);
  }
  return text;
}

class TempDir {
 public:
  TempDir() {
    std::string pattern = (fs::temp_directory_path() / "epistoch-XXXXXX").string();
    if (!mkdtemp(pattern.data())) throw ExternalSolverError("cannot create a temporary directory");
    path_ = pattern;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

struct RunOutcome {
  bool timed_out = false;
  int exit_code = 0;
};

RunOutcome run_command(const std::string& command, double time_limit) {
  const pid_t pid = fork();
  if (pid < 0) throw ExternalSolverError("fork failed");
  if (pid == 0) {
    setpgid(0, 0);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  setpgid(pid, pid);
  const auto start = std::chrono::steady_clock::now();
  int status = 0;
  while (true) {
    const pid_t done = waitpid(pid, &status, WNOHANG);
    if (done == pid) break;
    if (done < 0) throw ExternalSolverError("waitpid failed");
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (elapsed > time_limit) {
      kill(-pid, SIGKILL);
      waitpid(pid, &status, 0);
      return {true, -1};
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  RunOutcome out;
  out.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  return out;
}

SolveStatus map_status(const std::string& s, bool has_primal) {
  if (s == "Optimal") return SolveStatus::kOptimal;
  if (s == "Infeasible") return SolveStatus::kInfeasible;
  if (s == "Unbounded" || s == "Primal infeasible or unbounded") return SolveStatus::kUnbounded;
  if (s == "Time limit reached") return SolveStatus::kTimeLimit;
  if ((s == "Objective bound" || s == "Solution limit reached" || s == "Iteration limit reached") && has_primal) {
    return SolveStatus::kFeasibleGap;
  }
  throw ExternalSolverError(fmt::format("external solver reported unsupported model status '{}'", s));
}

}  // namespace

ExternalSolution parse_highs_solution(const std::string& text) {
  ExternalSolution sol;
  std::istringstream in(text);
  std::string line;
  enum class Stage { kStart, kStatus, kAfterStatus, kPrimalHeader, kColumns, kDone } stage = Stage::kStart;
  long expected = -1;
  while (stage != Stage::kDone && std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    switch (stage) {
      case Stage::kStart:
        if (line == "Model status") stage = Stage::kStatus;
        break;
      case Stage::kStatus:
        sol.model_status = line;
        stage = Stage::kAfterStatus;
        break;
      case Stage::kAfterStatus:
        if (line == "# Primal solution values") stage = Stage::kPrimalHeader;
        break;
      case Stage::kPrimalHeader: {
        if (line == "Feasible" || line == "Infeasible") {
          sol.has_primal = true;
        } else if (line == "None") {
          sol.has_primal = false;
          stage = Stage::kDone;
        } else if (line.rfind("Objective ", 0) == 0) {
          sol.objective = std::strtod(line.c_str() + 10, nullptr);
        } else if (line.rfind("# Columns ", 0) == 0) {
          expected = std::strtol(line.c_str() + 10, nullptr, 10);
          stage = expected == 0 ? Stage::kDone : Stage::kColumns;
        }
        break;
      }
      case Stage::kColumns: {
        std::istringstream ls(line);
        std::string name, value;
        if (!(ls >> name >> value)) throw ExternalSolverError("unparsable column line: " + line);
        char* end = nullptr;
        const double v = std::strtod(value.c_str(), &end);
        if (end == value.c_str()) throw ExternalSolverError("unparsable column value: " + line);
        sol.columns.emplace_back(name, v);
        if (static_cast<long>(sol.columns.size()) == expected) stage = Stage::kDone;
        break;
      }
      case Stage::kDone:
        break;
    }
  }
  if (sol.model_status.empty()) throw ExternalSolverError("solution file has no 'Model status' block");
  if (stage == Stage::kColumns) {
    throw ExternalSolverError(
        fmt::format("solution file truncated: {} of {} columns", sol.columns.size(), expected));
  }
  return sol;
}

SolveResult solve_external(const LinearModel& model, const SolverConfig& cfg) {
  if (cfg.external_command.find("{in}") == std::string::npos ||
      cfg.external_command.find("{out}") == std::string::npos) {
    throw ExternalSolverError("external command template must contain {in} and {out}");
  }
  const auto start = std::chrono::steady_clock::now();
  TempDir dir;
  const fs::path mps_path = dir.path() / "model.mps";
  const fs::path sol_path = dir.path() / "model.sol";
  const MpsNames names = MpsNames::for_model(model);
  {
    std::ofstream f(mps_path);
    f << emit_mps(model);
    std::ofstream t(dir.path() / "model.names");
    t << names.table(model);
    if (!f || !t) throw ExternalSolverError("cannot write the MPS file");
  }
  std::string cmd = replace_all(cfg.external_command, "{in}", shell_quote(mps_path.string()));
  cmd = replace_all(cmd, "{out}", shell_quote(sol_path.string()));

  SolveResult res;
  const RunOutcome run = run_command(cmd, cfg.time_limit);
  res.stats.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (run.timed_out) {
    res.status = SolveStatus::kTimeLimit;
    res.message = "external solver killed at the time limit";
    return res;
  }
  if (run.exit_code != 0) {
    throw ExternalSolverError(fmt::format("external solver exited with status {}", run.exit_code));
  }
  std::ifstream f(sol_path);
  if (!f) throw ExternalSolverError("external solver wrote no solution file");
  std::stringstream buf;
  buf << f.rdbuf();
  const ExternalSolution sol = parse_highs_solution(buf.str());
  res.status = map_status(sol.model_status, sol.has_primal);
  res.message = "external: " + sol.model_status;
  if (!sol.has_primal || res.status == SolveStatus::kInfeasible || res.status == SolveStatus::kUnbounded) {
    return res;
  }
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t j = 0; j < names.columns.size(); ++j) index[names.columns[j]] = j;
  std::vector<double> values(model.num_variables(), std::nan(""));
  for (const auto& [name, v] : sol.columns) {
    auto it = index.find(name);
    if (it == index.end()) throw ExternalSolverError("solution names unknown column " + name);
    values[it->second] = v;
  }
  for (std::size_t j = 0; j < values.size(); ++j) {
    if (std::isnan(values[j])) {
      throw ExternalSolverError(fmt::format("solution is missing column {} ({})", names.columns[j],
                                            model.variables[j].name));
    }
  }
  res.values = std::move(values);
  res.objective = model.objective_value(res.values);
  // The dialect carries no dual bound; an optimal report is taken at face value.
  res.best_bound = res.status == SolveStatus::kOptimal ? res.objective : -kInf;
  res.gap = res.status == SolveStatus::kOptimal ? 0.0 : kInf;
  return res;
}

}  // namespace epistoch
