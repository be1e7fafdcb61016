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

#include "epistoch/linear_model.hpp"

#include <cmath>

#include <fmt/format.h>

namespace epistoch {

char sense_code(Sense s) {
  switch (s) {
    case Sense::kLe:
      return 'L';
    case Sense::kEq:
      return 'E';
    case Sense::kGe:
      return 'G';
  }
  return '?';
}

double Constraint::lower() const {
  switch (sense) {
    case Sense::kLe:
      return range ? rhs - std::abs(*range) : -kInf;
    case Sense::kGe:
      return rhs;
    case Sense::kEq:
      return range && *range < 0.0 ? rhs + *range : rhs;
  }
  return rhs;
}

double Constraint::upper() const {
  switch (sense) {
    case Sense::kLe:
      return rhs;
    case Sense::kGe:
      return range ? rhs + std::abs(*range) : kInf;
    case Sense::kEq:
      return range && *range > 0.0 ? rhs + *range : rhs;
  }
  return rhs;
}

int LinearModel::add_variable(std::string var_name, double lb, double ub, bool integer, double obj) {
  variables.push_back({std::move(var_name), lb, ub, integer, obj});
  return static_cast<int>(variables.size()) - 1;
}

int LinearModel::add_constraint(std::string row_name, std::vector<Term> terms, Sense sense, double rhs) {
  constraints.push_back({std::move(row_name), std::move(terms), sense, rhs, std::nullopt});
  return static_cast<int>(constraints.size()) - 1;
}

std::size_t LinearModel::num_nonzeros() const {
  std::size_t n = 0;
  for (const auto& c : constraints) n += c.terms.size();
  return n;
}

std::size_t LinearModel::num_integer() const {
  std::size_t n = 0;
  for (const auto& v : variables) n += v.integer ? 1 : 0;
  return n;
}

double LinearModel::objective_value(std::span<const double> x) const {
  double total = objective_constant;
  for (std::size_t j = 0; j < variables.size(); ++j) total += variables[j].obj * x[j];
  return total;
}

double LinearModel::activity(std::size_t row, std::span<const double> x) const {
  double total = 0.0;
  for (const auto& t : constraints[row].terms) total += t.coef * x[static_cast<std::size_t>(t.var)];
  return total;
}

std::vector<std::string> LinearModel::validate() const {
  std::vector<std::string> out;
  const int n = static_cast<int>(variables.size());
  for (int j = 0; j < n; ++j) {
    const auto& v = variables[static_cast<std::size_t>(j)];
    if (std::isnan(v.lb) || std::isnan(v.ub) || v.lb > v.ub) {
      out.push_back(fmt::format("variable {} ({}): bounds [{}, {}]", j, v.name, v.lb, v.ub));
    }
    if (!std::isfinite(v.obj)) out.push_back(fmt::format("variable {} ({}): objective {}", j, v.name, v.obj));
  }
  for (std::size_t i = 0; i < constraints.size(); ++i) {
    const auto& c = constraints[i];
    if (!std::isfinite(c.rhs)) out.push_back(fmt::format("row {} ({}): rhs {}", i, c.name, c.rhs));
    if (c.range && !std::isfinite(*c.range)) out.push_back(fmt::format("row {} ({}): range {}", i, c.name, *c.range));
    for (const auto& t : c.terms) {
      if (t.var < 0 || t.var >= n) {
        out.push_back(fmt::format("row {} ({}): unknown variable index {}", i, c.name, t.var));
      } else if (!std::isfinite(t.coef)) {
        out.push_back(fmt::format("row {} ({}): coefficient {} on variable {}", i, c.name, t.coef, t.var));
      }
    }
  }
  if (!std::isfinite(objective_constant)) out.push_back("objective constant is not finite");
  return out;
}

}  // namespace epistoch
