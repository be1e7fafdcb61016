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

const char* kMinimal = R"(
[instance]
name = "mini"
horizon = 2

[costs]
treatment_cost_per_person = 10
budget = 1e3

[[etc_type]]
id = 1
capacity_beds = 5
fixed_cost = 100

[[region]]
id = "A"
population = 100
lambda1 = 0.1
lambda2 = 0.05
lambda3 = 0.2
lambda4 = 0.3
lambda5 = 0.5
chi2 = 0.1
chi1_low = 0.4
chi1_high = 0.6
chi1_mean = 0.5
chi1_sigma = 0.05
I0 = 4
)";

fs::path temp_file(const std::string& name, const std::string& text) {
  const fs::path p = fs::temp_directory_path() / name;
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST_CASE("builtin west-africa instance is valid and matches its reference data") {
  const Instance inst = builtin_west_africa();
  CHECK(validate_instance(inst).empty());
  REQUIRE(inst.region_count() == 6);
  CHECK(inst.countries() == std::vector<std::string>{"Guinea", "Liberia", "Sierra Leone"});
  REQUIRE(inst.etc_types.size() == 2);
  CHECK(inst.etc_types[0].capacity_beds == 50.0);
  CHECK(inst.etc_types[0].fixed_cost == 598500.0);
  CHECK(inst.etc_types[1].capacity_beds == 100.0);
  CHECK(inst.etc_types[1].fixed_cost == 1077300.0);
  CHECK(inst.costs.treatment_cost_per_person == 13860.0);
  CHECK(inst.costs.budget == 24e6);
  const auto& ug = inst.regions[inst.region_index("UG")];
  CHECK(ug.chi1_mean == doctest::Approx(0.54));
  CHECK(ug.chi1_sigma == doctest::Approx(0.10));
  for (std::size_t r = 0; r < inst.region_count(); ++r) {
    const auto& s = inst.initial[r];
    CHECK(s.susceptible + s.infected + s.treated + s.recovered + s.funerals + s.buried ==
          doctest::Approx(inst.regions[r].population));
  }
}

TEST_CASE("country-level instance is valid") {
  const Instance inst = builtin_west_africa_countries();
  CHECK(validate_instance(inst).empty());
  CHECK(inst.region_count() == 3);
  CHECK(inst.total_population() == doctest::Approx(19.0e6));
}

TEST_CASE("instance_from_spec resolves builtin names") {
  CHECK(instance_from_spec("builtin").name == "west-africa");
  CHECK(instance_from_spec("builtin-countries").region_count() == 3);
  CHECK_THROWS_AS(instance_from_spec("/nonexistent/instance.toml"), ParseError);
}

TEST_CASE("minimal instance parses with defaults") {
  const Instance inst = parse_instance(kMinimal);
  CHECK(inst.name == "mini");
  CHECK(inst.horizon == 2);
  CHECK(inst.costs.budget == 1000.0);
  REQUIRE(inst.region_count() == 1);
  CHECK(inst.initial[0].susceptible == 96.0);
  CHECK(inst.regions[0].country == "A");
  CHECK(inst.migration.size() == 1);
  CHECK(inst.branch_probs == std::vector<double>{0.3, 0.4, 0.3});
}

TEST_CASE("save and parse round-trip is the identity") {
  for (const Instance& inst : {builtin_west_africa(), builtin_west_africa_countries(), testing::toy_instance()}) {
    const std::string text = save_instance(inst);
    const Instance back = parse_instance(text);
    CHECK(back == inst);
    CHECK(save_instance(back) == text);
  }
}

TEST_CASE("parse errors carry line numbers") {
  std::string text = kMinimal;
  text += "bogus_key = 3\n";
  try {
    parse_instance(text);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() > 0);
    CHECK(std::string(e.what()).find("bogus_key") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_instance("[costs]\nbudget = = 3\n"), ParseError);
  CHECK_THROWS_AS(parse_instance("[nope]\n"), ParseError);
  CHECK_THROWS_AS(parse_instance("name = 1\n"), ParseError);
}

TEST_CASE("validation reports every violation") {
  Instance inst = testing::toy_instance();
  inst.regions[0].fatality_untreated = 1.5;
  inst.regions[1].population = -1.0;
  inst.migration.set_rate(0, 0, 0.1);
  inst.branch_probs = {0.5, 0.4};
  const auto v = validate_instance(inst);
  CHECK(v.size() >= 4);
  const std::string text = save_instance(inst);
  CHECK_THROWS_AS(parse_instance(text), ValidationError);
}

TEST_CASE("chi1 mean must lie inside its range") {
  Instance inst = testing::toy_instance();
  inst.regions[0].chi1_mean = inst.regions[0].chi1_range_high + 0.1;
  CHECK_FALSE(validate_instance(inst).empty());
}

TEST_CASE("migration CSV with and without labels") {
  const std::vector<std::string> ids{"A", "B"};
  const auto labelled = temp_file("epistoch_mig_labelled.csv", "from,A,B\nA,0,0.01\nB,0.02,0\n");
  const MigrationMatrix m = read_migration_csv(labelled, ids);
  CHECK(m.rate(0, 1) == 0.01);
  CHECK(m.rate(1, 0) == 0.02);
  const auto bare = temp_file("epistoch_mig_bare.csv", "0,0.01\n0.02,0\n");
  CHECK(read_migration_csv(bare, ids) == m);
  const auto wrong = temp_file("epistoch_mig_wrong.csv", "from,A,C\nA,0,0.01\nC,0.02,0\n");
  CHECK_THROWS_AS(read_migration_csv(wrong, ids), ParseError);
  const auto short_rows = temp_file("epistoch_mig_short.csv", "0,0.01\n");
  CHECK_THROWS_AS(read_migration_csv(short_rows, ids), ParseError);
}

TEST_CASE("instance file may reference a migration CSV next to it") {
  const fs::path dir = fs::temp_directory_path() / "epistoch_inst_csv";
  fs::create_directories(dir);
  Instance inst = testing::toy_instance();
  std::string text = save_instance(inst);
  const auto at = text.find("[migration]");
  text = text.substr(0, at) + "[migration]\ncsv = \"mig.csv\"\n";
  std::ofstream(dir / "mig.csv") << "0,0.01\n0.02,0\n";
  std::ofstream(dir / "inst.toml") << text;
  CHECK(load_instance(dir / "inst.toml") == inst);
}

TEST_CASE("migration helpers") {
  MigrationMatrix m({{0.0, 0.1, 0.2}, {0.3, 0.0, 0.0}, {0.0, 0.5, 0.0}});
  const std::vector<double> pop{10.0, 20.0, 30.0};
  CHECK(m.out_rate(0) == doctest::Approx(0.3));
  CHECK(m.outflow(0, pop) == doctest::Approx(3.0));
  CHECK(m.inflow(1, pop) == doctest::Approx(1.0 + 15.0));
  CHECK(m.inflow(0, pop) == doctest::Approx(6.0));
}
