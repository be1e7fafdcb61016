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

#include "epistoch/epidata.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <fmt/format.h>

namespace epistoch {

MigrationMatrix::MigrationMatrix(std::size_t regions)
    : rates_(regions, std::vector<double>(regions, 0.0)) {}

MigrationMatrix::MigrationMatrix(std::vector<std::vector<double>> rates)
    : rates_(std::move(rates)) {}

double MigrationMatrix::out_rate(std::size_t from) const {
  return std::accumulate(rates_[from].begin(), rates_[from].end(), 0.0);
}

double MigrationMatrix::inflow(std::size_t to, const std::vector<double>& population) const {
  double total = 0.0;
  for (std::size_t from = 0; from < rates_.size(); ++from) {
    total += rates_[from][to] * population[from];
  }
  return total;
}

double MigrationMatrix::outflow(std::size_t from, const std::vector<double>& population) const {
  return out_rate(from) * population[from];
}

double Instance::total_population() const {
  double total = 0.0;
  for (const auto& r : regions) total += r.population;
  return total;
}

std::size_t Instance::region_index(std::string_view id) const {
  for (std::size_t r = 0; r < regions.size(); ++r) {
    if (regions[r].id == id) return r;
  }
  throw std::out_of_range(fmt::format("unknown region '{}'", id));
}

std::vector<std::string> Instance::countries() const {
  std::vector<std::string> out;
  for (const auto& r : regions) {
    if (std::find(out.begin(), out.end(), r.country) == out.end()) out.push_back(r.country);
  }
  return out;
}

ParseError::ParseError(const std::string& message, int line)
    : std::runtime_error(line > 0 ? fmt::format("line {}: {}", line, message) : message),
      line_(line) {}

namespace {

std::string join_violations(const std::vector<std::string>& v) {
  std::string out = fmt::format("instance has {} violation(s)", v.size());
  for (const auto& s : v) out += "\n  - " + s;
  return out;
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> violations)
    : std::runtime_error(join_violations(violations)), violations_(std::move(violations)) {}

std::vector<std::string> validate_instance(const Instance& inst) {
  std::vector<std::string> out;
  auto check = [&out](bool ok, std::string message) {
    if (!ok) out.push_back(std::move(message));
  };
  auto finite_nonneg = [](double v) { return std::isfinite(v) && v >= 0.0; };
  auto is_rate = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };

  const std::size_t regions = inst.regions.size();
  check(regions >= 1, "instance needs at least one region");
  check(inst.horizon >= 1, fmt::format("horizon must be >= 1 (got {})", inst.horizon));

  check(!inst.branch_probs.empty(), "branch_probs must not be empty");
  check(inst.branch_probs.size() == inst.branch_quantiles.size(),
        fmt::format("branch_probs has {} entries but branch_quantiles has {}",
                    inst.branch_probs.size(), inst.branch_quantiles.size()));
  double prob_sum = 0.0;
  for (double p : inst.branch_probs) {
    check(std::isfinite(p) && p > 0.0 && p <= 1.0, fmt::format("branch probability {} not in (0,1]", p));
    prob_sum += p;
  }
  check(std::abs(prob_sum - 1.0) <= 1e-9, fmt::format("branch probabilities sum to {} (expected 1)", prob_sum));
  for (std::size_t i = 0; i < inst.branch_quantiles.size(); ++i) {
    const double q = inst.branch_quantiles[i];
    check(std::isfinite(q) && q > 0.0 && q < 1.0, fmt::format("branch quantile {} not in (0,1)", q));
    if (i > 0) {
      check(q > inst.branch_quantiles[i - 1], "branch quantiles must be strictly increasing");
    }
  }

  std::set<std::string> ids;
  for (const auto& r : inst.regions) {
    const std::string tag = fmt::format("region '{}'", r.id);
    check(!r.id.empty(), "region id must not be empty");
    check(ids.insert(r.id).second, fmt::format("duplicate {}", tag));
    check(std::isfinite(r.population) && r.population > 0.0, fmt::format("{}: population must be > 0", tag));
    check(is_rate(r.fatality_untreated), fmt::format("{}: lambda1 not in [0,1]", tag));
    check(is_rate(r.fatality_treated), fmt::format("{}: lambda2 not in [0,1]", tag));
    check(is_rate(r.recovery_untreated), fmt::format("{}: lambda3 not in [0,1]", tag));
    check(is_rate(r.recovery_treated), fmt::format("{}: lambda4 not in [0,1]", tag));
    check(is_rate(r.burial_rate), fmt::format("{}: lambda5 not in [0,1]", tag));
    check(r.fatality_untreated + r.recovery_untreated <= 1.0,
          fmt::format("{}: lambda1 + lambda3 = {} exceeds 1", tag, r.fatality_untreated + r.recovery_untreated));
    check(r.fatality_treated + r.recovery_treated <= 1.0,
          fmt::format("{}: lambda2 + lambda4 = {} exceeds 1", tag, r.fatality_treated + r.recovery_treated));
    check(finite_nonneg(r.funeral_transmission), fmt::format("{}: chi2 must be >= 0", tag));
    check(finite_nonneg(r.chi1_low) && finite_nonneg(r.chi1_high) && r.chi1_low <= r.chi1_high,
          fmt::format("{}: chi1_low <= chi1_high violated", tag));
    check(std::isfinite(r.chi1_mean) && r.chi1_range_low <= r.chi1_mean && r.chi1_mean <= r.chi1_range_high,
          fmt::format("{}: chi1_range_low <= chi1_mean <= chi1_range_high violated", tag));
    check(std::isfinite(r.chi1_sigma) && r.chi1_sigma > 0.0, fmt::format("{}: chi1_sigma must be > 0", tag));
  }

  if (inst.migration.size() != regions) {
    out.push_back(fmt::format("migration matrix is {}x{} but there are {} regions", inst.migration.size(),
                              inst.migration.size(), regions));
  } else {
    for (std::size_t from = 0; from < regions; ++from) {
      const std::string tag = fmt::format("migration row '{}'", inst.regions[from].id);
      if (inst.migration.rates()[from].size() != regions) {
        out.push_back(fmt::format("{}: expected {} columns", tag, regions));
        continue;
      }
      for (std::size_t to = 0; to < regions; ++to) {
        const double v = inst.migration.rate(from, to);
        check(std::isfinite(v) && v >= 0.0 && v < 1.0, fmt::format("{}: rate {} not in [0,1)", tag, v));
      }
      check(inst.migration.rate(from, from) == 0.0, fmt::format("{}: self-migration must be 0", tag));
      check(inst.migration.out_rate(from) < 1.0,
            fmt::format("{}: row sum {} must be < 1", tag, inst.migration.out_rate(from)));
    }
  }

  for (const auto& e : inst.etc_types) {
    check(std::isfinite(e.capacity_beds) && e.capacity_beds > 0.0,
          fmt::format("ETC type {}: capacity_beds must be > 0", e.id));
    check(finite_nonneg(e.fixed_cost), fmt::format("ETC type {}: fixed_cost must be >= 0", e.id));
  }

  check(finite_nonneg(inst.costs.treatment_cost_per_person), "treatment cost must be >= 0");
  check(finite_nonneg(inst.costs.burial_cost_per_body), "burial cost must be >= 0");
  check(finite_nonneg(inst.costs.budget), "budget must be >= 0");

  if (inst.initial.size() != regions) {
    out.push_back(fmt::format("initial state has {} entries but there are {} regions", inst.initial.size(), regions));
  } else {
    for (std::size_t r = 0; r < regions; ++r) {
      const auto& s = inst.initial[r];
      const std::string tag = fmt::format("initial state of '{}'", inst.regions[r].id);
      for (double v : {s.susceptible, s.infected, s.treated, s.recovered, s.funerals, s.buried, s.beds}) {
        if (!finite_nonneg(v)) {
          out.push_back(fmt::format("{}: compartments must be finite and >= 0", tag));
          break;
        }
      }
      check(s.treated <= s.beds, fmt::format("{}: T0 = {} exceeds C0 = {}", tag, s.treated, s.beds));
    }
  }
  return out;
}

namespace {

struct CountryData {
  const char* country;
  double fatality_untreated, fatality_treated, recovery_untreated, recovery_treated, burial;
  double chi1_low, chi1_high, chi2;
  double range_low, range_high, mean, sigma;
  double initial_infected;
};

// Transition rates and transmission realizations per country; normal
// parameters for the community transmission tree.
constexpr CountryData kGuinea{"Guinea", 0.428, 0.350, 0.240, 0.416, 0.730, 0.660, 0.990, 1.460,
                              0.24,     0.84,  0.54,  0.10,  218.0};
constexpr CountryData kSierraLeone{"Sierra Leone", 0.124, 0.096, 0.242, 0.327, 0.710, 0.632, 0.940, 1.420,
                                   0.24,           0.88,  0.66,  0.07,  604.0};
constexpr CountryData kLiberia{"Liberia", 0.176, 0.128, 0.232, 0.312, 0.740, 0.560, 0.840, 1.480,
                               0.24,      0.64,  0.44,  0.07,  685.0};

RegionParams make_region(std::string id, std::string name, const CountryData& c, double population) {
  RegionParams r;
  r.id = std::move(id);
  r.name = std::move(name);
  r.country = c.country;
  r.population = population;
  r.fatality_untreated = c.fatality_untreated;
  r.fatality_treated = c.fatality_treated;
  r.recovery_untreated = c.recovery_untreated;
  r.recovery_treated = c.recovery_treated;
  r.burial_rate = c.burial;
  r.funeral_transmission = c.chi2;
  r.chi1_low = c.chi1_low;
  r.chi1_high = c.chi1_high;
  r.chi1_range_low = c.range_low;
  r.chi1_range_high = c.range_high;
  r.chi1_mean = c.mean;
  r.chi1_sigma = c.sigma;
  return r;
}

RegionInitial make_initial(double population, double infected) {
  RegionInitial s;
  s.infected = infected;
  s.susceptible = population - infected;
  return s;
}

void set_case_study_costs(Instance& inst) {
  inst.etc_types = {{1, 50.0, 598500.0}, {2, 100.0, 1077300.0}};
  inst.costs.treatment_cost_per_person = 13860.0;
  inst.costs.burial_cost_per_body = 1127.0;
  inst.costs.budget = 24e6;
  inst.horizon = 8;
}

}  // namespace

Instance builtin_west_africa() {
  Instance inst;
  inst.name = "west-africa";

  // Initial infections are per country; regions get a population-ratio share.
  struct RegionSpec {
    const char* id;
    const char* name;
    const CountryData* country;
    double population;
    double share;
  };
  const RegionSpec specs[] = {
      {"UG", "Upper Guinea", &kGuinea, 4.3e6, 0.41},
      {"MG", "Middle Guinea", &kGuinea, 2.7e6, 0.25},
      {"LG", "Lower Guinea", &kGuinea, 3.7e6, 0.34},
      {"NL", "Northern Liberia", &kLiberia, 2.2e6, 0.64},
      {"SL", "Southern Liberia", &kLiberia, 1.2e6, 0.36},
      {"S", "Sierra Leone", &kSierraLeone, 4.9e6, 1.00},
  };
  for (const auto& s : specs) {
    inst.regions.push_back(make_region(s.id, s.name, *s.country, s.population));
    inst.initial.push_back(make_initial(s.population, s.country->initial_infected * s.share));
  }

  inst.migration = MigrationMatrix(6);
  const auto ug = 0, mg = 1, lg = 2, nl = 3, sl = 4;
  inst.migration.set_rate(ug, mg, 0.0032);
  inst.migration.set_rate(ug, lg, 0.0010);
  inst.migration.set_rate(mg, ug, 0.0052);
  inst.migration.set_rate(mg, lg, 0.0025);
  inst.migration.set_rate(lg, ug, 0.0012);
  inst.migration.set_rate(lg, mg, 0.0018);
  inst.migration.set_rate(nl, sl, 0.0007);
  inst.migration.set_rate(sl, nl, 0.0011);

  set_case_study_costs(inst);
  return inst;
}

Instance builtin_west_africa_countries() {
  Instance inst;
  inst.name = "west-africa-countries";
  const std::pair<const CountryData*, double> countries[] = {
      {&kGuinea, 10.7e6}, {&kSierraLeone, 4.9e6}, {&kLiberia, 3.4e6}};
  const char* ids[] = {"GN", "SLE", "LR"};
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& [c, pop] = countries[i];
    inst.regions.push_back(make_region(ids[i], c->country, *c, pop));
    inst.initial.push_back(make_initial(pop, c->initial_infected));
  }
  inst.migration = MigrationMatrix(3);
  set_case_study_costs(inst);
  return inst;
}

Instance instance_from_spec(const std::string& spec) {
  if (spec == "builtin" || spec == "builtin-west-africa") return builtin_west_africa();
  if (spec == "builtin-countries") return builtin_west_africa_countries();
  return load_instance(spec);
}

}  // namespace epistoch
