#include "grid_islander/serialization.hpp"

#include <fstream>

#include "grid_islander/error.hpp"

namespace grid_islander {

namespace {

using nlohmann::json;

constexpr int kNetworkSchemaVersion = 1;

void check_schema(const json& doc, int expected, const char* what) {
  if (!doc.is_object() || !doc.contains("schema_version")) {
    throw Error(ErrorKind::SchemaError, std::string(what) + " document lacks schema_version");
  }
  if (doc.at("schema_version").get<int>() != expected) {
    throw Error(ErrorKind::SchemaError, std::string(what) + " schema_version " +
                                            doc.at("schema_version").dump() + " is not supported");
  }
}

template <typename T>
T get_or(const json& doc, const char* key, T fallback) {
  return doc.contains(key) ? doc.at(key).get<T>() : fallback;
}

std::string_view algorithm_name(Algorithm a) {
  return a == Algorithm::Centralized ? "centralized" : "decentralized";
}

std::string_view mode_name(FrequencyMode m) { return m == FrequencyMode::Analytic ? "analytic" : "simulated"; }

}  // namespace

json network_to_json(const PowerNetwork& network) {
  json buses = json::array();
  for (const Bus& b : network.buses()) {
    buses.push_back({{"id", b.id},
                     {"kind", b.kind == BusKind::Generator ? "generator" : "load"},
                     {"p_demand", b.p_demand},
                     {"q_demand", b.q_demand},
                     {"p_gen_scheduled", b.p_gen_scheduled},
                     {"q_gen_scheduled", b.q_gen_scheduled},
                     {"base_kv", b.base_kv},
                     {"voltage_setpoint", b.voltage_setpoint},
                     {"shunt_g", b.shunt_g},
                     {"shunt_b", b.shunt_b},
                     {"voltage_controlled", b.voltage_controlled}});
  }
  json branches = json::array();
  for (const Branch& br : network.branches()) {
    branches.push_back({{"from_bus", br.from_bus},
                        {"to_bus", br.to_bus},
                        {"resistance", br.resistance},
                        {"reactance", br.reactance},
                        {"charging", br.charging},
                        {"tap_ratio", br.tap_ratio},
                        {"phase_shift_deg", br.phase_shift_deg},
                        {"in_service", br.in_service}});
  }
  return {{"schema_version", kNetworkSchemaVersion},
          {"base_mva", network.base_mva()},
          {"generator_set", network.generator_set()},
          {"buses", std::move(buses)},
          {"branches", std::move(branches)}};
}

PowerNetwork network_from_json(const json& doc) {
  check_schema(doc, kNetworkSchemaVersion, "network");
  try {
    std::vector<Bus> buses;
    for (const json& j : doc.at("buses")) {
      Bus b;
      b.id = j.at("id").get<BusId>();
      const std::string kind = j.at("kind").get<std::string>();
      if (kind != "generator" && kind != "load") {
        throw Error(ErrorKind::SchemaError, "bus kind '" + kind + "' is not generator or load");
      }
      b.kind = kind == "generator" ? BusKind::Generator : BusKind::Load;
      b.p_demand = j.at("p_demand").get<double>();
      b.q_demand = j.at("q_demand").get<double>();
      b.p_gen_scheduled = j.at("p_gen_scheduled").get<double>();
      b.q_gen_scheduled = j.at("q_gen_scheduled").get<double>();
      b.base_kv = j.at("base_kv").get<double>();
      b.voltage_setpoint = j.at("voltage_setpoint").get<double>();
      b.shunt_g = j.at("shunt_g").get<double>();
      b.shunt_b = j.at("shunt_b").get<double>();
      b.voltage_controlled = j.at("voltage_controlled").get<bool>();
      buses.push_back(b);
    }
    std::vector<Branch> branches;
    for (const json& j : doc.at("branches")) {
      Branch br;
      br.from_bus = j.at("from_bus").get<BusId>();
      br.to_bus = j.at("to_bus").get<BusId>();
      br.resistance = j.at("resistance").get<double>();
      br.reactance = j.at("reactance").get<double>();
      br.charging = j.at("charging").get<double>();
      br.tap_ratio = j.at("tap_ratio").get<double>();
      br.phase_shift_deg = j.at("phase_shift_deg").get<double>();
      br.in_service = j.at("in_service").get<bool>();
      branches.push_back(br);
    }
    return PowerNetwork(std::move(buses), std::move(branches), doc.at("base_mva").get<double>());
  } catch (const json::exception& e) {
    throw Error(ErrorKind::SchemaError, std::string("network document: ") + e.what());
  }
}

json partition_to_json(const Partition& partition) {
  json islands = json::array();
  for (const Island& island : partition.islands) {
    islands.push_back({{"label", island.label}, {"nodes", island.nodes}});
  }
  json cut = json::array();
  for (const BranchRef& ref : partition.cut_set) cut.push_back({ref.from_bus, ref.to_bus});
  return {{"islands", std::move(islands)}, {"cut_set", std::move(cut)}};
}

Partition partition_from_json(const json& doc, const PowerNetwork& network) {
  try {
    std::vector<Island> islands;
    for (const json& j : doc.at("islands")) {
      Island island;
      island.label = j.at("label").get<int>();
      for (const json& n : j.at("nodes")) island.nodes.insert(n.get<BusId>());
      islands.push_back(std::move(island));
    }
    return make_partition(network, std::move(islands));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::SchemaError, std::string("partition document: ") + e.what());
  }
}

json validity_to_json(const ValidityReport& report) {
  json cut = json::array();
  for (const BranchRef& ref : report.cut_set) cut.push_back({ref.from_bus, ref.to_bus});
  return {{"ok", report.ok()},
          {"covers", report.covers},
          {"missing", report.missing},
          {"disjoint", report.disjoint},
          {"overlapping", report.overlapping},
          {"unknown", report.unknown},
          {"connected", report.connected},
          {"has_generator", report.has_generator},
          {"cut_set", std::move(cut)}};
}

json scenario_config_to_json(const ScenarioConfig& c) {
  json faults = json::array();
  for (const auto& [a, b] : c.fault_branches) faults.push_back({a, b});
  return {{"schema_version", ScenarioConfig::kSchemaVersion},
          {"case_path", c.case_path.generic_string()},
          {"generator_set", c.generator_set},
          {"initial_islands", c.initial_islands},
          {"fault_branches", std::move(faults)},
          {"n_mu", c.n_mu},
          {"seed", c.seed},
          {"ensemble_size", c.ensemble_size},
          {"t_max", c.t_max},
          {"dt", c.dt},
          {"rho_threshold", c.rho_threshold},
          {"freq_epsilon", c.freq_epsilon},
          {"sync_tolerance", c.sync_tolerance},
          {"degeneracy_tolerance", c.degeneracy_tolerance},
          {"max_idle_rounds", c.max_idle_rounds},
          {"allow_fallback", c.allow_fallback},
          {"shuffle_schedule", c.shuffle_schedule},
          {"algorithm", algorithm_name(c.algorithm)},
          {"mode", mode_name(c.mode)}};
}

ScenarioConfig scenario_config_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("schema_version")) {
    throw Error(ErrorKind::ConfigError, "scenario config lacks schema_version");
  }
  if (doc.at("schema_version") != ScenarioConfig::kSchemaVersion) {
    throw Error(ErrorKind::ConfigError, "unsupported scenario schema_version " + doc.at("schema_version").dump());
  }
  ScenarioConfig c;
  try {
    c.case_path = doc.at("case_path").get<std::string>();
    c.generator_set = get_or(doc, "generator_set", std::vector<BusId>{});
    c.initial_islands = doc.at("initial_islands").get<std::vector<std::vector<BusId>>>();
    if (doc.contains("fault_branches")) {
      for (const json& f : doc.at("fault_branches")) {
        const auto pair = f.get<std::vector<BusId>>();
        if (pair.size() != 2) throw Error(ErrorKind::ConfigError, "fault branch must be [from, to]");
        c.fault_branches.emplace_back(pair[0], pair[1]);
      }
    }
    c.n_mu = get_or(doc, "n_mu", static_cast<int>(c.initial_islands.size()));
    c.seed = get_or(doc, "seed", c.seed);
    c.ensemble_size = get_or(doc, "ensemble_size", c.ensemble_size);
    c.t_max = get_or(doc, "t_max", c.t_max);
    c.dt = get_or(doc, "dt", c.dt);
    c.rho_threshold = get_or(doc, "rho_threshold", c.rho_threshold);
    c.freq_epsilon = get_or(doc, "freq_epsilon", c.freq_epsilon);
    c.sync_tolerance = get_or(doc, "sync_tolerance", c.sync_tolerance);
    c.degeneracy_tolerance = get_or(doc, "degeneracy_tolerance", c.degeneracy_tolerance);
    c.max_idle_rounds = get_or(doc, "max_idle_rounds", c.max_idle_rounds);
    c.allow_fallback = get_or(doc, "allow_fallback", c.allow_fallback);
    c.shuffle_schedule = get_or(doc, "shuffle_schedule", c.shuffle_schedule);
    const std::string algorithm = get_or(doc, "algorithm", std::string(algorithm_name(c.algorithm)));
    if (algorithm == "centralized") {
      c.algorithm = Algorithm::Centralized;
    } else if (algorithm == "decentralized") {
      c.algorithm = Algorithm::Decentralized;
    } else {
      throw Error(ErrorKind::ConfigError, "unknown algorithm '" + algorithm + "'");
    }
    const std::string mode = get_or(doc, "mode", std::string(mode_name(c.mode)));
    if (mode == "analytic") {
      c.mode = FrequencyMode::Analytic;
    } else if (mode == "simulated") {
      c.mode = FrequencyMode::Simulated;
    } else {
      throw Error(ErrorKind::ConfigError, "unknown mode '" + mode + "'");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("scenario config: ") + e.what());
  }
  c.validate();
  return c;
}

void write_json_file(const std::filesystem::path& path, const json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::SchemaError, path.string() + ": " + e.what());
  }
}

}  // namespace grid_islander
