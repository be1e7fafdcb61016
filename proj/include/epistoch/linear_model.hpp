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

#ifndef EPISTOCH_LINEAR_MODEL_HPP
#define EPISTOCH_LINEAR_MODEL_HPP

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace epistoch {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Sense { kLe, kEq, kGe };

char sense_code(Sense s);  // 'L', 'E', 'G'

struct Variable {
  std::string name;
  double lb = 0.0;
  double ub = kInf;
  bool integer = false;
  double obj = 0.0;

  bool operator==(const Variable&) const = default;
};

struct Term {
  int var = 0;
  double coef = 0.0;

  bool operator==(const Term&) const = default;
};

struct Constraint {
  std::string name;
  std::vector<Term> terms;
  Sense sense = Sense::kLe;
  double rhs = 0.0;
  // MPS-style range: L rows become [rhs - |range|, rhs], G rows
  // [rhs, rhs + |range|], E rows extend toward the sign of range.
  std::optional<double> range;

  /// Row activity interval [lo, hi].
  double lower() const;
  double upper() const;

  bool operator==(const Constraint&) const = default;
};

/// Minimization MIP: min obj'x + objective_constant.
struct LinearModel {
  std::string name = "model";
  std::vector<Variable> variables;
  std::vector<Constraint> constraints;
  double objective_constant = 0.0;

  int add_variable(std::string name, double lb, double ub, bool integer = false, double obj = 0.0);
  int add_constraint(std::string name, std::vector<Term> terms, Sense sense, double rhs);

  std::size_t num_variables() const { return variables.size(); }
  std::size_t num_constraints() const { return constraints.size(); }
  std::size_t num_nonzeros() const;
  std::size_t num_integer() const;

  double objective_value(std::span<const double> x) const;
  double activity(std::size_t row, std::span<const double> x) const;

  /// Structural problems: dangling indices, lb > ub, NaN or infinite
  /// coefficients and right-hand sides.
  std::vector<std::string> validate() const;

  bool operator==(const LinearModel&) const = default;
};

}  // namespace epistoch

#endif  // EPISTOCH_LINEAR_MODEL_HPP
