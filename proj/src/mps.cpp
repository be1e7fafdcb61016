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

#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <fmt/format.h>

#include "epistoch/solve.hpp"

namespace epistoch {

namespace {

constexpr const char* kObjRow = "COST";

std::string num(double v) {
  if (v == 0.0) return "0";
  return fmt::format("{}", v);
}

// Fixed-format line: field 1 in columns 2-3, name fields at 5 and 15, the
// number at 25. Numbers wider than twelve characters spill over.
std::string field_line(const char* code, const std::string& a, const std::string& b, const std::string& value) {
  std::string line = fmt::format(" {:<2} {:<8}  {:<8}", code, a, b);
  if (!value.empty()) line += fmt::format("  {}", value);
  while (!line.empty() && line.back() == ' ') line.pop_back();
  return line + "\n";
}

std::vector<std::string> tokens(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string t;
  while (in >> t) out.push_back(t);
  return out;
}

double parse_number(const std::string& text, int line_no) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw std::runtime_error(fmt::format("MPS line {}: bad number '{}'", line_no, text));
  }
  return v;
}

}  // namespace

MpsNames MpsNames::for_model(const LinearModel& model) {
  MpsNames names;
  for (std::size_t j = 0; j < model.num_variables(); ++j) names.columns.push_back(fmt::format("C{:07d}", j + 1));
  for (std::size_t i = 0; i < model.num_constraints(); ++i) names.rows.push_back(fmt::format("R{:07d}", i + 1));
  return names;
}

std::string MpsNames::table(const LinearModel& model) const {
  std::string out;
  for (std::size_t j = 0; j < columns.size(); ++j) {
    out += fmt::format("column\t{}\t{}\n", columns[j], model.variables[j].name);
  }
  for (std::size_t i = 0; i < rows.size(); ++i) out += fmt::format("row\t{}\t{}\n", rows[i], model.constraints[i].name);
  return out;
}

std::string emit_mps(const LinearModel& model) {
  const MpsNames names = MpsNames::for_model(model);
  std::string out;
  out += fmt::format("NAME          {}\n", model.name.empty() ? "model" : model.name);
  out += "ROWS\n";
  out += fmt::format(" N  {}\n", kObjRow);
  for (std::size_t i = 0; i < model.num_constraints(); ++i) {
    out += fmt::format(" {}  {}\n", sense_code(model.constraints[i].sense), names.rows[i]);
  }

  std::vector<std::vector<std::pair<std::size_t, double>>> cols(model.num_variables());
  for (std::size_t i = 0; i < model.num_constraints(); ++i) {
    for (const auto& t : model.constraints[i].terms) cols[static_cast<std::size_t>(t.var)].emplace_back(i, t.coef);
  }

  out += "COLUMNS\n";
  bool in_int = false;
  int marker = 0;
  for (std::size_t j = 0; j < model.num_variables(); ++j) {
    const auto& v = model.variables[j];
    if (v.integer != in_int) {
      out += fmt::format("    MARKER{:04d}  'MARKER'                 '{}'\n", marker++, v.integer ? "INTORG" : "INTEND");
      in_int = v.integer;
    }
    const std::string& c = names.columns[j];
    if (v.obj != 0.0 || cols[j].empty()) out += field_line("", c, kObjRow, num(v.obj));
    for (const auto& [i, a] : cols[j]) out += field_line("", c, names.rows[i], num(a));
  }
  if (in_int) out += fmt::format("    MARKER{:04d}  'MARKER'                 'INTEND'\n", marker++);

  out += "RHS\n";
  if (model.objective_constant != 0.0) out += field_line("", "RHS", kObjRow, num(-model.objective_constant));
  for (std::size_t i = 0; i < model.num_constraints(); ++i) {
    if (model.constraints[i].rhs != 0.0) out += field_line("", "RHS", names.rows[i], num(model.constraints[i].rhs));
  }

  bool any_range = false;
  for (const auto& c : model.constraints) any_range = any_range || c.range.has_value();
  if (any_range) {
    out += "RANGES\n";
    for (std::size_t i = 0; i < model.num_constraints(); ++i) {
      const auto& r = model.constraints[i].range;
      if (r) out += field_line("", "RNG", names.rows[i], num(*r));
    }
  }

  out += "BOUNDS\n";
  for (std::size_t j = 0; j < model.num_variables(); ++j) {
    const auto& v = model.variables[j];
    const std::string& c = names.columns[j];
    if (v.lb == v.ub) {
      out += field_line("FX", "BND", c, num(v.lb));
      continue;
    }
    if (!std::isfinite(v.lb) && !std::isfinite(v.ub)) {
      out += field_line("FR", "BND", c, "");
      continue;
    }
    if (!std::isfinite(v.lb)) {
      out += field_line("MI", "BND", c, "");
    } else if (v.lb != 0.0 || v.ub < 0.0) {
      out += field_line("LO", "BND", c, num(v.lb));
    }
    if (std::isfinite(v.ub)) {
      out += field_line("UP", "BND", c, num(v.ub));
    } else if (v.integer) {
      out += field_line("PL", "BND", c, "");
    }
  }
  out += "ENDATA\n";
  return out;
}

LinearModel parse_mps(const std::string& text) {
  LinearModel model;
  model.name.clear();
  enum class Section { kNone, kName, kRows, kColumns, kRhs, kRanges, kBounds, kEnd };
  Section sec = Section::kNone;
  std::string obj_name;
  std::unordered_map<std::string, int> row_index, col_index;
  std::unordered_map<std::string, bool> free_rows;
  bool in_int = false;

  auto col_of = [&](const std::string& name, int line_no) {
    auto it = col_index.find(name);
    if (it == col_index.end()) throw std::runtime_error(fmt::format("MPS line {}: unknown column '{}'", line_no, name));
    return it->second;
  };

  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '*') continue;
    auto tok = tokens(line);
    if (tok.empty()) continue;
    if (line[0] != ' ' && line[0] != '\t') {
      const std::string& head = tok[0];
      if (head == "NAME") {
        sec = Section::kName;
        if (tok.size() > 1) model.name = tok[1];
      } else if (head == "ROWS") {
        sec = Section::kRows;
      } else if (head == "COLUMNS") {
        sec = Section::kColumns;
      } else if (head == "RHS") {
        sec = Section::kRhs;
      } else if (head == "RANGES") {
        sec = Section::kRanges;
      } else if (head == "BOUNDS") {
        sec = Section::kBounds;
      } else if (head == "ENDATA") {
        sec = Section::kEnd;
        break;
      } else {
        throw std::runtime_error(fmt::format("MPS line {}: unknown section '{}'", line_no, head));
      }
      continue;
    }
    switch (sec) {
      case Section::kRows: {
        if (tok.size() != 2) throw std::runtime_error(fmt::format("MPS line {}: bad ROWS entry", line_no));
        const std::string& type = tok[0];
        if (type == "N") {
          if (obj_name.empty()) {
            obj_name = tok[1];
          } else {
            free_rows[tok[1]] = true;
          }
          break;
        }
        Sense s;
        if (type == "L") {
          s = Sense::kLe;
        } else if (type == "G") {
          s = Sense::kGe;
        } else if (type == "E") {
          s = Sense::kEq;
        } else {
          throw std::runtime_error(fmt::format("MPS line {}: bad row type '{}'", line_no, type));
        }
        row_index[tok[1]] = model.add_constraint(tok[1], {}, s, 0.0);
        break;
      }
      case Section::kColumns: {
        if (tok.size() >= 3 && tok[1] == "'MARKER'") {
          if (tok[2] == "'INTORG'") {
            in_int = true;
          } else if (tok[2] == "'INTEND'") {
            in_int = false;
          }
          break;
        }
        if (tok.size() != 3 && tok.size() != 5) {
          throw std::runtime_error(fmt::format("MPS line {}: bad COLUMNS entry", line_no));
        }
        int j;
        auto it = col_index.find(tok[0]);
        if (it == col_index.end()) {
          j = model.add_variable(tok[0], 0.0, kInf, in_int);
          col_index[tok[0]] = j;
        } else {
          j = it->second;
        }
        for (std::size_t k = 1; k + 1 < tok.size(); k += 2) {
          const double v = parse_number(tok[k + 1], line_no);
          if (tok[k] == obj_name) {
            model.variables[static_cast<std::size_t>(j)].obj += v;
          } else if (auto r = row_index.find(tok[k]); r != row_index.end()) {
            model.constraints[static_cast<std::size_t>(r->second)].terms.push_back({j, v});
          } else if (!free_rows.count(tok[k])) {
            throw std::runtime_error(fmt::format("MPS line {}: unknown row '{}'", line_no, tok[k]));
          }
        }
        break;
      }
      case Section::kRhs:
      case Section::kRanges: {
        const std::size_t first = tok.size() % 2 == 1 ? 1 : 0;
        for (std::size_t k = first; k + 1 < tok.size(); k += 2) {
          const double v = parse_number(tok[k + 1], line_no);
          if (tok[k] == obj_name) {
            if (sec == Section::kRhs) model.objective_constant = -v;
            continue;
          }
          auto r = row_index.find(tok[k]);
          if (r == row_index.end()) {
            if (free_rows.count(tok[k])) continue;
            throw std::runtime_error(fmt::format("MPS line {}: unknown row '{}'", line_no, tok[k]));
          }
          auto& c = model.constraints[static_cast<std::size_t>(r->second)];
          if (sec == Section::kRhs) {
            c.rhs = v;
          } else {
            c.range = v;
          }
        }
        break;
      }
      case Section::kBounds: {
        const std::string& type = tok[0];
        const bool valued = type == "LO" || type == "UP" || type == "FX" || type == "LI" || type == "UI";
        const std::size_t need = valued ? 3 : 2;
        if (tok.size() != need && tok.size() != need + 1) {
          throw std::runtime_error(fmt::format("MPS line {}: bad BOUNDS entry", line_no));
        }
        const std::size_t at = tok.size() == need + 1 ? 2 : 1;
        auto& v = model.variables[static_cast<std::size_t>(col_of(tok[at], line_no))];
        const double val = valued ? parse_number(tok[at + 1], line_no) : 0.0;
        if (type == "LO" || type == "LI") {
          v.lb = val;
          if (type == "LI") v.integer = true;
        } else if (type == "UP" || type == "UI") {
          v.ub = val;
          if (type == "UI") v.integer = true;
        } else if (type == "FX") {
          v.lb = v.ub = val;
        } else if (type == "FR") {
          v.lb = -kInf;
          v.ub = kInf;
        } else if (type == "MI") {
          v.lb = -kInf;
        } else if (type == "PL") {
          v.ub = kInf;
        } else if (type == "BV") {
          v.lb = 0.0;
          v.ub = 1.0;
          v.integer = true;
        } else {
          throw std::runtime_error(fmt::format("MPS line {}: bad bound type '{}'", line_no, type));
        }
        break;
      }
      default:
        throw std::runtime_error(fmt::format("MPS line {}: data outside a section", line_no));
    }
  }
  if (sec != Section::kEnd) throw std::runtime_error("MPS: missing ENDATA");
  if (model.name.empty()) model.name = "model";
  return model;
}

}  // namespace epistoch
