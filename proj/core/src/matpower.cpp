#include "grid_islander/matpower.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "grid_islander/error.hpp"
#include "grid_islander/serialization.hpp"

namespace grid_islander {

namespace {

namespace col = matpower_col;

/// Position of the first '%' that is not inside a single-quoted string.
std::size_t comment_start(std::string_view line) {
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    if (line[k] == '\'') quoted = !quoted;
    if (line[k] == '%' && !quoted) return k;
  }
  return std::string_view::npos;
}

double parse_number(std::string_view token, std::size_t line, std::size_t column) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw ParseError(line, column, "malformed number '" + std::string(token) + "'");
  }
  if (!std::isfinite(value)) {
    throw ParseError(line, column, "non-finite number '" + std::string(token) + "'");
  }
  return value;
}

struct MatrixReader {
  std::vector<RawCase::Row>* rows = nullptr;  // null: skip contents
  RawCase::Row current;

  void flush() {
    if (rows && !current.values.empty()) rows->push_back(std::move(current));
    current = {};
  }

  /// Consumes one line of matrix text; returns true once ']' closes it.
  bool feed(std::string_view text, std::size_t line, std::size_t column_offset) {
    std::size_t k = 0;
    while (k < text.size()) {
      const char c = text[k];
      if (c == ']') {
        flush();
        return true;
      }
      if (c == ';') {
        flush();
        ++k;
        continue;
      }
      if (c == ' ' || c == '\t' || c == ',' || c == '\r') {
        ++k;
        continue;
      }
      if (c == '.' && text.substr(k, 3) == "...") return false;  // row continues on the next line
      std::size_t end = k;
      while (end < text.size() && std::string_view(" \t,;]\r").find(text[end]) == std::string_view::npos) {
        ++end;
      }
      if (rows) {
        if (current.values.empty()) current.line = line;
        current.values.push_back(parse_number(text.substr(k, end - k), line, column_offset + k + 1));
      }
      k = end;
    }
    flush();  // newline terminates a row
    return false;
  }
};

void check_columns(const std::vector<RawCase::Row>& rows, std::size_t min_columns, std::string_view name) {
  for (const auto& row : rows) {
    if (row.values.size() < min_columns) {
      throw Error(ErrorKind::SchemaError, std::string(name) + " row at line " + std::to_string(row.line) +
                                              " has " + std::to_string(row.values.size()) +
                                              " columns, expected at least " + std::to_string(min_columns));
    }
  }
}

BusId as_bus_id(double value, std::size_t line) {
  if (value != std::floor(value) || value < 0 || value > 2147483647.0) {
    throw Error(ErrorKind::SchemaError,
                "bus id " + std::to_string(value) + " at line " + std::to_string(line) + " is not an integer");
  }
  return static_cast<BusId>(value);
}

}  // namespace

void ScenarioConfig::validate() const {
  if (initial_islands.size() < 2) {
    throw Error(ErrorKind::ConfigError, "at least two initial islands are required");
  }
  if (n_mu != static_cast<int>(initial_islands.size())) {
    throw Error(ErrorKind::ConfigError, "n_mu = " + std::to_string(n_mu) + " but " +
                                            std::to_string(initial_islands.size()) + " initial islands given");
  }
  for (const auto& island : initial_islands) {
    if (island.empty()) throw Error(ErrorKind::ConfigError, "initial island is empty");
  }
  if (!(dt > 0.0) || !(dt < t_max)) {
    throw Error(ErrorKind::ConfigError, "require 0 < dt < t_max");
  }
  if (!(rho_threshold > 0.0) || !(rho_threshold < 1.0)) {
    throw Error(ErrorKind::ConfigError, "require 0 < rho_threshold < 1");
  }
  if (ensemble_size < 1) throw Error(ErrorKind::ConfigError, "ensemble_size must be >= 1");
  if (!(freq_epsilon > 0.0) || !(sync_tolerance > 0.0) || !(degeneracy_tolerance > 0.0)) {
    throw Error(ErrorKind::ConfigError, "tolerances must be positive");
  }
  if (max_idle_rounds < 1) throw Error(ErrorKind::ConfigError, "max_idle_rounds must be >= 1");
}

RawCase parse_case(std::string_view text) {
  static const std::regex assignment(R"(^\s*(?:mpc\.)?([A-Za-z_]\w*)\s*=\s*(.*)$)");

  RawCase raw;
  bool have_base = false;
  std::set<std::string> seen;
  std::optional<MatrixReader> reader;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (const std::size_t c = comment_start(line); c != std::string_view::npos) line = line.substr(0, c);

    if (reader) {
      if (reader->feed(line, line_no, 0)) reader.reset();
      continue;
    }

    std::cmatch m;
    if (!std::regex_match(line.data(), line.data() + line.size(), m, assignment)) continue;
    const std::string name = m[1].str();
    const std::size_t rhs_offset = static_cast<std::size_t>(m.position(2));
    std::string_view rhs = line.substr(rhs_offset);

    if (name == "baseMVA") {
      const std::size_t semi = rhs.find(';');
      std::string_view number = rhs.substr(0, semi);
      while (!number.empty() && (number.back() == ' ' || number.back() == '\t' || number.back() == '\r')) {
        number.remove_suffix(1);
      }
      raw.base_mva = parse_number(number, line_no, rhs_offset + 1);
      have_base = true;
      continue;
    }
    const std::size_t open = rhs.find('[');
    if (open == std::string_view::npos) continue;

    MatrixReader r;
    if (name == "bus") r.rows = &raw.bus_table;
    if (name == "gen") r.rows = &raw.gen_table;
    if (name == "branch") r.rows = &raw.branch_table;
    if (r.rows) seen.insert(name);
    if (!r.feed(rhs.substr(open + 1), line_no, rhs_offset + open + 1)) reader = std::move(r);
  }

  if (reader) throw ParseError(line_no, 1, "unterminated matrix");
  if (!have_base) throw Error(ErrorKind::MissingSection, "baseMVA");
  for (const char* required : {"bus", "gen", "branch"}) {
    if (!seen.contains(required)) throw Error(ErrorKind::MissingSection, required);
  }
  check_columns(raw.bus_table, col::kBusMinColumns, "bus");
  check_columns(raw.gen_table, col::kGenMinColumns, "gen");
  check_columns(raw.branch_table, col::kBranchMinColumns, "branch");
  return raw;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

RawCase parse_case_file(const std::filesystem::path& path) { return parse_case(read_text_file(path)); }

PowerNetwork build_network(const RawCase& raw_case, const std::vector<BusId>& generator_set) {
  std::vector<Bus> buses;
  std::map<BusId, std::size_t> index;
  std::map<BusId, int> bus_type;
  for (const auto& row : raw_case.bus_table) {
    const auto& v = row.values;
    Bus b;
    b.id = as_bus_id(v[col::kBusId], row.line);
    b.p_demand = v[col::kPd];
    b.q_demand = v[col::kQd];
    b.shunt_g = v[col::kGs];
    b.shunt_b = v[col::kBs];
    b.voltage_setpoint = v[col::kVm];
    b.base_kv = v[col::kBaseKv];
    bus_type[b.id] = static_cast<int>(v[col::kBusType]);
    index[b.id] = buses.size();
    buses.push_back(b);
  }

  std::set<BusId> dispatched;
  for (const auto& row : raw_case.gen_table) {
    const auto& v = row.values;
    const BusId id = as_bus_id(v[col::kGenBus], row.line);
    const auto it = index.find(id);
    if (it == index.end()) {
      throw Error(ErrorKind::NotFound,
                  "generator at line " + std::to_string(row.line) + " references unknown bus " + std::to_string(id));
    }
    if (v[col::kGenStatus] <= 0) continue;
    Bus& b = buses[it->second];
    b.p_gen_scheduled += v[col::kPg];
    b.q_gen_scheduled += v[col::kQg];
    const int type = bus_type[id];
    if ((type == 2 || type == 3) && !b.voltage_controlled) {
      b.voltage_controlled = true;
      b.voltage_setpoint = v[col::kVg];
    }
    if (v[col::kPg] > 0.0) dispatched.insert(id);
  }

  std::set<BusId> generators;
  if (generator_set.empty()) {
    generators = dispatched;
  } else {
    for (BusId id : generator_set) {
      if (!index.contains(id)) {
        throw Error(ErrorKind::ConfigError, "generator set names unknown bus " + std::to_string(id));
      }
      generators.insert(id);
    }
  }
  for (Bus& b : buses) {
    if (generators.contains(b.id)) b.kind = BusKind::Generator;
  }

  std::vector<Branch> branches;
  for (const auto& row : raw_case.branch_table) {
    const auto& v = row.values;
    if (v[col::kBrStatus] <= 0) continue;
    Branch br;
    br.from_bus = as_bus_id(v[col::kFbus], row.line);
    br.to_bus = as_bus_id(v[col::kTbus], row.line);
    br.resistance = v[col::kR];
    br.reactance = v[col::kX];
    br.charging = v[col::kB];
    br.tap_ratio = v[col::kRatio] == 0.0 ? 1.0 : v[col::kRatio];
    br.phase_shift_deg = v[col::kAngle];
    br.in_service = true;
    branches.push_back(br);
  }

  PowerNetwork network(std::move(buses), std::move(branches), raw_case.base_mva);
  if (!network.is_connected()) {
    spdlog::warn("network built from case is not connected");
  }
  return network;
}

PowerNetwork build_network(const RawCase& raw_case, const ScenarioConfig& config) {
  return build_network(raw_case, config.generator_set);
}

PowerNetwork load_scenario_network(const ScenarioConfig& config) {
  PowerNetwork network = build_network(parse_case_file(config.case_path), config);
  for (const auto& fault : config.fault_branches) network = apply_fault(network, fault);
  if (!network.is_connected()) {
    spdlog::warn("grid is split after applying {} fault(s)", config.fault_branches.size());
  }
  return network;
}

ScenarioConfig load_scenario_config(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::ConfigError, path.string() + ": " + e.what());
  }
  ScenarioConfig config = scenario_config_from_json(doc);
  if (config.case_path.is_relative()) config.case_path = path.parent_path() / config.case_path;
  return config;
}

}  // namespace grid_islander
