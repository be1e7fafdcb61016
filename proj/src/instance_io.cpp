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

// Instance files use a small TOML subset: [table] and [[array-of-tables]]
// headers, `key = value` pairs where a value is a quoted string, a number or
// a (possibly nested, possibly multi-line) array of numbers. `#` starts a
// comment outside strings.

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <variant>

#include <fmt/format.h>

#include "epistoch/epidata.hpp"

namespace epistoch {
namespace {

struct Value;
using Array = std::vector<Value>;

struct Value {
  std::variant<double, std::string, Array> data;
  int line = 0;
};

struct Table {
  std::string header;
  int line = 0;
  std::map<std::string, Value> entries;
  std::map<std::string, bool> used;
};

class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  std::vector<Table> parse() {
    std::vector<Table> tables;
    tables.push_back(Table{"", 0, {}, {}});
    while (!at_end()) {
      skip_blank_and_comments();
      if (at_end()) break;
      if (peek() == '[') {
        tables.push_back(parse_header());
      } else {
        auto [key, value] = parse_pair();
        auto& table = tables.back();
        if (table.entries.count(key)) {
          throw ParseError(fmt::format("duplicate key '{}'", key), value.line);
        }
        table.entries.emplace(key, std::move(value));
      }
    }
    return tables;
  }

 private:
  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return text_[pos_]; }
  char get() {
    const char c = text_[pos_++];
    if (c == '\n') ++line_;
    return c;
  }

  void skip_inline_space() {
    while (!at_end() && (peek() == ' ' || peek() == '\t' || peek() == '\r')) get();
  }

  void skip_comment() {
    while (!at_end() && peek() != '\n') get();
  }

  void skip_blank_and_comments() {
    while (!at_end()) {
      const char c = peek();
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        get();
      } else if (c == '#') {
        skip_comment();
      } else {
        break;
      }
    }
  }

  // Whitespace including newlines, used inside arrays.
  void skip_array_space() { skip_blank_and_comments(); }

  void expect_line_end() {
    skip_inline_space();
    if (at_end()) return;
    if (peek() == '#') {
      skip_comment();
      return;
    }
    if (peek() != '\n') throw ParseError(fmt::format("unexpected character '{}'", peek()), line_);
    get();
  }

  Table parse_header() {
    const int line = line_;
    get();  // '['
    bool array = false;
    if (!at_end() && peek() == '[') {
      get();
      array = true;
    }
    std::string name;
    while (!at_end() && peek() != ']' && peek() != '\n') name += get();
    if (at_end() || peek() != ']') throw ParseError("unterminated table header", line);
    get();
    if (array) {
      if (at_end() || peek() != ']') throw ParseError("unterminated array-of-tables header", line);
      get();
    }
    expect_line_end();
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    return Table{(array ? "[[" : "[") + trim(name) + (array ? "]]" : "]"), line, {}, {}};
  }

  std::pair<std::string, Value> parse_pair() {
    const int line = line_;
    std::string key;
    while (!at_end()) {
      const char c = peek();
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-') {
        key += get();
      } else {
        break;
      }
    }
    if (key.empty()) throw ParseError(fmt::format("expected a key, found '{}'", peek()), line);
    skip_inline_space();
    if (at_end() || peek() != '=') throw ParseError(fmt::format("expected '=' after key '{}'", key), line);
    get();
    skip_inline_space();
    Value value = parse_value();
    expect_line_end();
    return {key, std::move(value)};
  }

  Value parse_value() {
    const int line = line_;
    if (at_end()) throw ParseError("missing value", line);
    const char c = peek();
    if (c == '"') return Value{parse_string(), line};
    if (c == '[') return Value{parse_array(), line};
    return Value{parse_number(), line};
  }

  std::string parse_string() {
    const int line = line_;
    get();  // opening quote
    std::string out;
    while (true) {
      if (at_end() || peek() == '\n') throw ParseError("unterminated string", line);
      char c = get();
      if (c == '"') break;
      if (c == '\\') {
        if (at_end()) throw ParseError("unterminated escape", line);
        const char e = get();
        switch (e) {
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          default: throw ParseError(fmt::format("unsupported escape '\\{}'", e), line);
        }
        continue;
      }
      out += c;
    }
    return out;
  }

  double parse_number() {
    const int line = line_;
    const std::size_t start = pos_;
    while (!at_end()) {
      const char c = peek();
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '+' || c == 'e' ||
          c == 'E' || c == '_') {
        get();
      } else {
        break;
      }
    }
    std::string token(text_.substr(start, pos_ - start));
    std::erase(token, '_');
    if (token.empty()) throw ParseError("expected a number", line);
    const char* first = token.data();
    if (*first == '+') ++first;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(first, token.data() + token.size(), v);
    if (ec != std::errc{} || ptr != token.data() + token.size()) {
      throw ParseError(fmt::format("malformed number '{}'", token), line);
    }
    return v;
  }

  Array parse_array() {
    const int line = line_;
    get();  // '['
    Array out;
    while (true) {
      skip_array_space();
      if (at_end()) throw ParseError("unterminated array", line);
      if (peek() == ']') {
        get();
        return out;
      }
      out.push_back(parse_value());
      skip_array_space();
      if (at_end()) throw ParseError("unterminated array", line);
      if (peek() == ',') {
        get();
      } else if (peek() != ']') {
        throw ParseError(fmt::format("expected ',' or ']' in array, found '{}'", peek()), line_);
      }
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
};

class TableView {
 public:
  explicit TableView(Table& t) : t_(t) {}

  const Value* find(const std::string& key) {
    auto it = t_.entries.find(key);
    if (it == t_.entries.end()) return nullptr;
    t_.used[key] = true;
    return &it->second;
  }

  double number(const std::string& key) {
    const Value* v = find(key);
    if (!v) throw ParseError(fmt::format("{}: missing required key '{}'", t_.header, key), t_.line);
    return as_number(*v, key);
  }

  double number_or(const std::string& key, double fallback) {
    const Value* v = find(key);
    return v ? as_number(*v, key) : fallback;
  }

  std::optional<double> maybe_number(const std::string& key) {
    const Value* v = find(key);
    if (!v) return std::nullopt;
    return as_number(*v, key);
  }

  std::string string(const std::string& key) {
    const Value* v = find(key);
    if (!v) throw ParseError(fmt::format("{}: missing required key '{}'", t_.header, key), t_.line);
    return as_string(*v, key);
  }

  std::string string_or(const std::string& key, const std::string& fallback) {
    const Value* v = find(key);
    return v ? as_string(*v, key) : fallback;
  }

  std::vector<double> numbers_or(const std::string& key, std::vector<double> fallback) {
    const Value* v = find(key);
    if (!v) return fallback;
    return as_numbers(*v, key);
  }

  void reject_unknown() const {
    for (const auto& [key, value] : t_.entries) {
      if (!t_.used.count(key)) {
        throw ParseError(fmt::format("{}: unknown key '{}'", t_.header.empty() ? "top level" : t_.header, key),
                         value.line);
      }
    }
  }

  static double as_number(const Value& v, const std::string& key) {
    if (const double* d = std::get_if<double>(&v.data)) return *d;
    throw ParseError(fmt::format("'{}' must be a number", key), v.line);
  }

  static std::string as_string(const Value& v, const std::string& key) {
    if (const std::string* s = std::get_if<std::string>(&v.data)) return *s;
    throw ParseError(fmt::format("'{}' must be a string", key), v.line);
  }

  static std::vector<double> as_numbers(const Value& v, const std::string& key) {
    const Array* a = std::get_if<Array>(&v.data);
    if (!a) throw ParseError(fmt::format("'{}' must be an array", key), v.line);
    std::vector<double> out;
    for (const auto& item : *a) out.push_back(as_number(item, key));
    return out;
  }

 private:
  Table& t_;
};

int as_int(double v, const std::string& key, int line) {
  if (v != std::floor(v) || std::abs(v) > 1e9) {
    throw ParseError(fmt::format("'{}' must be an integer", key), line);
  }
  return static_cast<int>(v);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
  }
  return out;
}

bool parse_double(const std::string& s, double& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace

MigrationMatrix read_migration_csv(const std::filesystem::path& path, const std::vector<std::string>& region_ids) {
  std::ifstream in(path);
  if (!in) throw ParseError(fmt::format("cannot open migration CSV '{}'", path.string()), 0);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    rows.push_back(split_csv_line(line));
  }
  const std::size_t n = region_ids.size();
  std::size_t first_row = 0;
  bool labelled = false;
  double probe = 0.0;
  if (!rows.empty() && !rows[0].empty() && !parse_double(rows[0].back(), probe)) {
    first_row = 1;
    labelled = true;
    const auto& header = rows[0];
    if (header.size() != n + 1) {
      throw ParseError(fmt::format("migration CSV header has {} columns, expected {}", header.size(), n + 1), 1);
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (header[i + 1] != region_ids[i]) {
        throw ParseError(fmt::format("migration CSV column {} is '{}', expected '{}'", i + 1, header[i + 1],
                                     region_ids[i]),
                         1);
      }
    }
  }
  if (rows.size() - first_row != n) {
    throw ParseError(fmt::format("migration CSV has {} data rows, expected {}", rows.size() - first_row, n), 0);
  }
  MigrationMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = rows[first_row + i];
    const std::size_t offset = labelled ? 1 : 0;
    if (row.size() != n + offset) {
      throw ParseError(fmt::format("migration CSV row {} has {} cells", i + 1, row.size()),
                       static_cast<int>(first_row + i + 1));
    }
    if (labelled && row[0] != region_ids[i]) {
      throw ParseError(fmt::format("migration CSV row label '{}', expected '{}'", row[0], region_ids[i]),
                       static_cast<int>(first_row + i + 1));
    }
    for (std::size_t j = 0; j < n; ++j) {
      double v = 0.0;
      const std::string& cell = row[j + offset];
      if (!cell.empty() && !parse_double(cell, v)) {
        throw ParseError(fmt::format("migration CSV: malformed number '{}'", cell),
                         static_cast<int>(first_row + i + 1));
      }
      m.set_rate(i, j, v);
    }
  }
  return m;
}

Instance parse_instance(std::string_view text, const std::filesystem::path& base_dir) {
  Reader reader(text);
  std::vector<Table> tables = reader.parse();

  Instance inst;
  bool seen_instance = false, seen_costs = false, seen_migration = false;
  std::optional<std::vector<std::vector<double>>> inline_rates;
  std::optional<std::filesystem::path> csv_path;
  int migration_line = 0;

  if (!tables[0].entries.empty()) {
    const auto& [key, value] = *tables[0].entries.begin();
    throw ParseError(fmt::format("key '{}' outside of any table", key), value.line);
  }

  for (std::size_t ti = 1; ti < tables.size(); ++ti) {
    Table& table = tables[ti];
    TableView t(table);
    if (table.header == "[instance]") {
      if (seen_instance) throw ParseError("duplicate [instance] table", table.line);
      seen_instance = true;
      inst.name = t.string_or("name", "");
      inst.horizon = as_int(t.number_or("horizon", 1), "horizon", table.line);
      inst.branch_probs = t.numbers_or("branch_probs", inst.branch_probs);
      inst.branch_quantiles = t.numbers_or("branch_quantiles", inst.branch_quantiles);
    } else if (table.header == "[costs]") {
      if (seen_costs) throw ParseError("duplicate [costs] table", table.line);
      seen_costs = true;
      inst.costs.treatment_cost_per_person = t.number("treatment_cost_per_person");
      inst.costs.burial_cost_per_body = t.number_or("burial_cost_per_body", 0.0);
      inst.costs.budget = t.number("budget");
    } else if (table.header == "[[etc_type]]") {
      EtcType e;
      e.id = as_int(t.number("id"), "id", table.line);
      e.capacity_beds = t.number("capacity_beds");
      e.fixed_cost = t.number("fixed_cost");
      inst.etc_types.push_back(e);
    } else if (table.header == "[[region]]") {
      RegionParams r;
      r.id = t.string("id");
      r.name = t.string_or("name", r.id);
      r.country = t.string_or("country", r.id);
      r.population = t.number("population");
      r.fatality_untreated = t.number("lambda1");
      r.fatality_treated = t.number("lambda2");
      r.recovery_untreated = t.number("lambda3");
      r.recovery_treated = t.number("lambda4");
      r.burial_rate = t.number("lambda5");
      r.funeral_transmission = t.number("chi2");
      r.chi1_low = t.number("chi1_low");
      r.chi1_high = t.number("chi1_high");
      r.chi1_range_low = t.number_or("chi1_range_low", r.chi1_low);
      r.chi1_range_high = t.number_or("chi1_range_high", r.chi1_high);
      r.chi1_mean = t.number("chi1_mean");
      r.chi1_sigma = t.number("chi1_sigma");

      RegionInitial s;
      s.infected = t.number("I0");
      s.treated = t.number_or("T0", 0.0);
      s.recovered = t.number_or("R0", 0.0);
      s.funerals = t.number_or("F0", 0.0);
      s.buried = t.number_or("B0", 0.0);
      s.beds = t.number_or("C0", 0.0);
      s.susceptible = t.number_or("S0", r.population - s.infected - s.treated - s.recovered - s.funerals - s.buried);
      inst.regions.push_back(std::move(r));
      inst.initial.push_back(s);
    } else if (table.header == "[migration]") {
      if (seen_migration) throw ParseError("duplicate [migration] table", table.line);
      seen_migration = true;
      migration_line = table.line;
      if (const Value* v = t.find("rates")) {
        const Array* rows = std::get_if<Array>(&v->data);
        if (!rows) throw ParseError("'rates' must be an array of arrays", v->line);
        std::vector<std::vector<double>> m;
        for (const auto& row : *rows) m.push_back(TableView::as_numbers(row, "rates"));
        inline_rates = std::move(m);
      }
      if (const Value* v = t.find("csv")) {
        csv_path = base_dir / TableView::as_string(*v, "csv");
      }
      if (inline_rates && csv_path) throw ParseError("[migration]: give either 'rates' or 'csv'", table.line);
    } else {
      throw ParseError(fmt::format("unknown table {}", table.header), table.line);
    }
    t.reject_unknown();
  }

  if (!seen_costs) throw ParseError("missing [costs] table", 0);

  const std::size_t n = inst.regions.size();
  if (inline_rates) {
    if (inline_rates->size() != n) {
      throw ParseError(fmt::format("[migration] rates has {} rows, expected {}", inline_rates->size(), n),
                       migration_line);
    }
    inst.migration = MigrationMatrix(std::move(*inline_rates));
  } else if (csv_path) {
    std::vector<std::string> ids;
    for (const auto& r : inst.regions) ids.push_back(r.id);
    inst.migration = read_migration_csv(*csv_path, ids);
  } else {
    inst.migration = MigrationMatrix(n);
  }

  auto violations = validate_instance(inst);
  if (!violations.empty()) throw ValidationError(std::move(violations));
  return inst;
}

Instance load_instance(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(fmt::format("cannot open instance file '{}'", path.string()), 0);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_instance(buffer.str(), path.parent_path());
}

namespace {

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

std::string number_list(const std::vector<double>& v) {
  return fmt::format("[{}]", fmt::join(v, ", "));
}

}  // namespace

std::string save_instance(const Instance& inst) {
  std::string out;
  auto line = [&out](std::string_view f, auto&&... args) {
    out += fmt::vformat(f, fmt::make_format_args(args...));
    out += '\n';
  };
  line("# epistoch instance, all rates per two-week period");
  line("[instance]");
  line("name = {}", quote(inst.name));
  line("horizon = {}", inst.horizon);
  line("branch_probs = {}", number_list(inst.branch_probs));
  line("branch_quantiles = {}", number_list(inst.branch_quantiles));
  line("");
  line("[costs]");
  line("treatment_cost_per_person = {}", inst.costs.treatment_cost_per_person);
  line("burial_cost_per_body = {}", inst.costs.burial_cost_per_body);
  line("budget = {}", inst.costs.budget);
  for (const auto& e : inst.etc_types) {
    line("");
    line("[[etc_type]]");
    line("id = {}", e.id);
    line("capacity_beds = {}", e.capacity_beds);
    line("fixed_cost = {}", e.fixed_cost);
  }
  for (std::size_t r = 0; r < inst.regions.size(); ++r) {
    const auto& p = inst.regions[r];
    const auto& s = inst.initial[r];
    line("");
    line("[[region]]");
    line("id = {}", quote(p.id));
    line("name = {}", quote(p.name));
    line("country = {}", quote(p.country));
    line("population = {}", p.population);
    line("lambda1 = {}", p.fatality_untreated);
    line("lambda2 = {}", p.fatality_treated);
    line("lambda3 = {}", p.recovery_untreated);
    line("lambda4 = {}", p.recovery_treated);
    line("lambda5 = {}", p.burial_rate);
    line("chi2 = {}", p.funeral_transmission);
    line("chi1_low = {}", p.chi1_low);
    line("chi1_high = {}", p.chi1_high);
    line("chi1_range_low = {}", p.chi1_range_low);
    line("chi1_range_high = {}", p.chi1_range_high);
    line("chi1_mean = {}", p.chi1_mean);
    line("chi1_sigma = {}", p.chi1_sigma);
    line("S0 = {}", s.susceptible);
    line("I0 = {}", s.infected);
    line("T0 = {}", s.treated);
    line("R0 = {}", s.recovered);
    line("F0 = {}", s.funerals);
    line("B0 = {}", s.buried);
    line("C0 = {}", s.beds);
  }
  line("");
  line("[migration]");
  line("# rates[from][to], region order as listed above");
  line("rates = [");
  for (const auto& row : inst.migration.rates()) line("  {},", number_list(row));
  line("]");
  return out;
}

void save_instance(const Instance& inst, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  out << save_instance(inst);
}

}  // namespace epistoch
