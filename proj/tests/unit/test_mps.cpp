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

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"

using namespace epistoch;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Structure equality up to names.
void check_same_structure(const LinearModel& a, const LinearModel& b) {
  REQUIRE(a.num_variables() == b.num_variables());
  REQUIRE(a.num_constraints() == b.num_constraints());
  for (std::size_t j = 0; j < a.num_variables(); ++j) {
    CHECK(a.variables[j].lb == b.variables[j].lb);
    CHECK(a.variables[j].ub == b.variables[j].ub);
    CHECK(a.variables[j].obj == b.variables[j].obj);
    CHECK(a.variables[j].integer == b.variables[j].integer);
  }
  for (std::size_t i = 0; i < a.num_constraints(); ++i) {
    CHECK(a.constraints[i].sense == b.constraints[i].sense);
    CHECK(a.constraints[i].rhs == b.constraints[i].rhs);
    CHECK(a.constraints[i].range == b.constraints[i].range);
    auto ta = a.constraints[i].terms, tb = b.constraints[i].terms;
    auto by_var = [](const Term& x, const Term& y) { return x.var < y.var; };
    std::sort(ta.begin(), ta.end(), by_var);
    std::sort(tb.begin(), tb.end(), by_var);
    CHECK(ta == tb);
  }
  CHECK(a.objective_constant == b.objective_constant);
}

LinearModel toy_model() {
  const Instance inst = testing::toy_instance();
  return build_deterministic_equivalent(inst, build_tree(inst, 2, testing::binary_spec())).model;
}

}  // namespace

TEST_CASE("emitted MPS for the toy instance matches the golden file") {
  const std::string text = emit_mps(toy_model());
  const std::string golden = testing::data_path("golden/toy_2stage.mps");
  if (std::getenv("EPISTOCH_REGEN_GOLDEN")) std::ofstream(golden) << text;
  const std::string want = read_file(golden);
  REQUIRE_FALSE(want.empty());
  CHECK(text == want);
}

TEST_CASE("emit then parse keeps every coefficient, bound and marker") {
  const LinearModel m = toy_model();
  const std::string text = emit_mps(m);
  CHECK(text.find("'INTORG'") != std::string::npos);
  CHECK(text.find("'INTEND'") != std::string::npos);
  const LinearModel back = parse_mps(text);
  check_same_structure(m, back);
  CHECK(emit_mps(back) == text);
}

TEST_CASE("ranges, free, negative and fixed bounds survive the round trip") {
  LinearModel m;
  m.name = "edge";
  const int a = m.add_variable("a", -kInf, kInf, false, 1.5);
  const int b = m.add_variable("b", -kInf, 4.0, false, 0.0);
  const int c = m.add_variable("c", -2.0, -1.0, false, -3.25e-7);
  const int d = m.add_variable("d", 3.0, 3.0, true, 1.0);
  const int e = m.add_variable("e", 0.0, kInf, true, 2.0);
  m.add_variable("unused", 1.0, 2.0, false, 0.0);
  m.add_constraint("r1", {{a, 1.0}, {b, -2.0}}, Sense::kLe, 5.0);
  m.constraints.back().range = 3.0;
  m.add_constraint("r2", {{c, 1.0}, {d, 1e10}}, Sense::kGe, -1.0);
  m.add_constraint("r3", {{e, 0.125}, {a, 1.0}}, Sense::kEq, 0.0);
  m.constraints.back().range = -2.0;
  m.objective_constant = 7.0;
  const LinearModel back = parse_mps(emit_mps(m));
  check_same_structure(m, back);
  CHECK(back.name == "edge");
}

TEST_CASE("free-format input with original names") {
  const char* text =
      "NAME demo\n"
      "ROWS\n"
      " N obj\n"
      " L lim\n"
      "COLUMNS\n"
      " MARKER 'MARKER' 'INTORG'\n"
      " x obj -1 lim 1\n"
      " MARKER 'MARKER' 'INTEND'\n"
      " y obj -2 lim 1\n"
      "RHS\n"
      " rhs lim 4\n"
      "BOUNDS\n"
      " UP bnd y 1.5\n"
      "ENDATA\n";
  const LinearModel m = parse_mps(text);
  REQUIRE(m.num_variables() == 2);
  CHECK(m.variables[0].name == "x");
  CHECK(m.variables[0].integer);
  CHECK_FALSE(m.variables[1].integer);
  CHECK(m.variables[1].ub == 1.5);
  CHECK(m.constraints[0].rhs == 4.0);
  CHECK(simplex_lp(m).objective == doctest::Approx(-5.5));
  CHECK_THROWS(parse_mps("ROWS\n N obj\nCOLUMNS\n x nope 1\nENDATA\n"));
}

TEST_CASE("mangled names have a lookup table") {
  const LinearModel m = toy_model();
  const MpsNames names = MpsNames::for_model(m);
  CHECK(names.columns.front() == "C0000001");
  CHECK(names.rows.front() == "R0000001");
  const std::string table = names.table(m);
  CHECK(table.find("column\tC0000001\t" + m.variables[0].name) != std::string::npos);
}
