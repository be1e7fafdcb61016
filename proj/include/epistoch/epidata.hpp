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

#ifndef EPISTOCH_EPIDATA_HPP
#define EPISTOCH_EPIDATA_HPP

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace epistoch {

/// Epidemiological parameters of one region. All rates are per period
/// (one period = two weeks).
struct RegionParams {
  std::string id;
  std::string name;
  std::string country;
  double population = 0.0;

  double fatality_untreated = 0.0;  // lambda1
  double fatality_treated = 0.0;    // lambda2
  double recovery_untreated = 0.0;  // lambda3
  double recovery_treated = 0.0;    // lambda4
  double burial_rate = 0.0;         // lambda5

  double funeral_transmission = 0.0;  // chi2

  // Community transmission (chi1). `low`/`high` are the literature
  // realizations; `range_low`/`range_high` bracket the normal distribution
  // that drives the scenario tree and must contain `mean`.
  double chi1_low = 0.0;
  double chi1_high = 0.0;
  double chi1_range_low = 0.0;
  double chi1_range_high = 0.0;
  double chi1_mean = 0.0;
  double chi1_sigma = 0.0;

  bool operator==(const RegionParams&) const = default;
};

/// Row-major migration fractions: rates[from][to]. The same table drives
/// susceptible and infected flows, so outflow from `from` is inflow to `to`.
class MigrationMatrix {
 public:
  MigrationMatrix() = default;
  explicit MigrationMatrix(std::size_t regions);
  explicit MigrationMatrix(std::vector<std::vector<double>> rates);

  std::size_t size() const { return rates_.size(); }
  double rate(std::size_t from, std::size_t to) const { return rates_[from][to]; }
  void set_rate(std::size_t from, std::size_t to, double value) { rates_[from][to] = value; }
  const std::vector<std::vector<double>>& rates() const { return rates_; }

  /// Sum of rates[from][*].
  double out_rate(std::size_t from) const;

  /// Inflow into `to` given a per-region population vector.
  double inflow(std::size_t to, const std::vector<double>& population) const;
  double outflow(std::size_t from, const std::vector<double>& population) const;

  bool operator==(const MigrationMatrix&) const = default;

 private:
  std::vector<std::vector<double>> rates_;
};

struct EtcType {
  int id = 0;
  double capacity_beds = 0.0;
  double fixed_cost = 0.0;

  bool operator==(const EtcType&) const = default;
};

struct CostTable {
  double treatment_cost_per_person = 0.0;  // per period
  double burial_cost_per_body = 0.0;       // carried, never charged to the budget
  double budget = 0.0;

  bool operator==(const CostTable&) const = default;
};

/// Compartment populations at the start of the horizon for one region.
struct RegionInitial {
  double susceptible = 0.0;
  double infected = 0.0;
  double treated = 0.0;
  double recovered = 0.0;
  double funerals = 0.0;
  double buried = 0.0;
  double beds = 0.0;

  bool operator==(const RegionInitial&) const = default;
};

struct Instance {
  std::string name;
  std::vector<RegionParams> regions;
  MigrationMatrix migration;
  std::vector<EtcType> etc_types;
  CostTable costs;
  std::vector<RegionInitial> initial;
  int horizon = 1;
  std::vector<double> branch_probs{0.3, 0.4, 0.3};
  std::vector<double> branch_quantiles{0.15, 0.50, 0.85};

  std::size_t region_count() const { return regions.size(); }
  double total_population() const;
  /// Index of the region with the given id; throws std::out_of_range.
  std::size_t region_index(std::string_view id) const;
  /// Distinct country names in first-appearance order.
  std::vector<std::string> countries() const;

  bool operator==(const Instance&) const = default;
};

/// Malformed instance text. `line()` is 1-based, 0 when not attributable.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, int line);
  int line() const { return line_; }

 private:
  int line_;
};

/// Instance that parsed but violates one or more invariants.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

/// Every violated invariant, one human-readable line each. Empty iff valid.
std::vector<std::string> validate_instance(const Instance& inst);

/// Parses instance text. Relative `csv` references resolve against
/// `base_dir`. Throws ParseError or ValidationError.
Instance parse_instance(std::string_view text, const std::filesystem::path& base_dir = {});
Instance load_instance(const std::filesystem::path& path);

/// Canonical text form; parse_instance(save_instance(x)) == x.
std::string save_instance(const Instance& inst);
void save_instance(const Instance& inst, const std::filesystem::path& path);

/// Reads a square migration matrix from CSV. The first row and column may
/// carry region ids, in which case they must match `region_ids`.
MigrationMatrix read_migration_csv(const std::filesystem::path& path,
                                   const std::vector<std::string>& region_ids);

/// Six-region Guinea / Liberia / Sierra Leone case study.
Instance builtin_west_africa();

/// The case study with one region per country (regional populations and
/// initial infections summed, intra-country migration dropped).
Instance builtin_west_africa_countries();

/// Resolves "builtin", "builtin-countries" or a file path.
Instance instance_from_spec(const std::string& spec);

}  // namespace epistoch

#endif  // EPISTOCH_EPIDATA_HPP
