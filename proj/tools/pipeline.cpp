#include "pipeline.hpp"

#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include <array>
#include <chrono>
#include <cstdio>
#include <set>

#include "grid_islander/centralized.hpp"
#include "grid_islander/decentralized.hpp"
#include "grid_islander/serialization.hpp"

namespace grid_islander::cli {

std::vector<Island> complete_seed_sets(const PowerNetwork& network, const ScenarioConfig& config) {
  std::vector<Island> islands;
  int label = 1;
  for (const auto& seeds : config.initial_islands) {
    islands.push_back(complete_island(network, NodeSet(seeds.begin(), seeds.end()), label++));
  }
  return islands;
}

Scenario load_scenario(const std::filesystem::path& config_path, const Overrides& overrides) {
  std::string bytes = read_text_file(config_path);
  ScenarioConfig config = load_scenario_config(config_path);
  if (overrides.seed) config.seed = *overrides.seed;
  if (overrides.algorithm) config.algorithm = *overrides.algorithm;
  if (overrides.mode) config.mode = *overrides.mode;
  PowerNetwork network = load_scenario_network(config);
  std::vector<Island> initial = complete_seed_sets(network, config);
  return Scenario{config_path, std::move(bytes), std::move(config), std::move(network), std::move(initial)};
}

std::vector<std::pair<BusId, BusId>> graph_edges(const PowerNetwork& network) {
  std::set<std::pair<BusId, BusId>> pairs;
  for (const Branch& br : network.branches()) {
    if (!br.in_service) continue;
    pairs.emplace(std::min(br.from_bus, br.to_bus), std::max(br.from_bus, br.to_bus));
  }
  return {pairs.begin(), pairs.end()};
}

SyncTimeTable compute_sync_times(const Scenario& scenario) {
  const CyberLayer layer = build_layer(scenario.network, scenario.network.all_nodes(), "grid");
  EnsembleOptions opts;
  opts.n_runs = scenario.config.ensemble_size;
  opts.seed = scenario.config.seed;
  opts.t_max = scenario.config.t_max;
  opts.dt = scenario.config.dt;
  return ensemble_sync_times(layer, graph_edges(scenario.network), opts, scenario.config.rho_threshold);
}

PartitionRun run_partition(const Scenario& scenario) {
  const auto start = std::chrono::steady_clock::now();
  PartitionRun run;
  if (scenario.config.algorithm == Algorithm::Centralized) {
    run.sync_times = compute_sync_times(scenario);
    CentralizedResult result = centralized_partition(scenario.network, scenario.initial, *run.sync_times);
    run.partition = std::move(result.partition);
    run.log = growth_log_to_json(result.steps);
    run.log_name = "growth_log.json";
  } else {
    DecentralizedResult result =
        decentralized_partition(scenario.network, scenario.initial, DecentralizedOptions::from_config(scenario.config));
    run.partition = std::move(result.partition);
    run.log = {{"rounds", result.rounds},
               {"fallback_fired", result.fallback_fired},
               {"layers_per_round", result.layers_per_round},
               {"events", event_log_to_json(result.events)}};
    run.log_name = "event_log.json";
  }
  run.validity = validate_partition(scenario.network, run.partition);
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  spdlog::info("partition finished in {:.2f} s, {} islands", run.seconds, run.partition.n_islands());
  return run;
}

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::Io, "SHA-256 digest failed");
  }
  std::string hex;
  hex.reserve(2 * len);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NumericalDivergence:
    case ErrorKind::NotSynchronized:
    case ErrorKind::Stalled:
    case ErrorKind::DegenerateEstimate:
    case ErrorKind::UndefinedSize:
    case ErrorKind::SingularSystem:
    case ErrorKind::NotConverged:
      return 3;
    case ErrorKind::NoGenerator:
    case ErrorKind::ValidationFailed:
      return 4;
    default:
      return 2;
  }
}

nlohmann::json error_to_json(const std::exception& e) {
  nlohmann::json err = {{"message", e.what()}};
  if (const auto* ge = dynamic_cast<const Error*>(&e)) {
    err["kind"] = to_string(ge->kind());
    err["exit_code"] = exit_code_for(ge->kind());
    if (const auto* pe = dynamic_cast<const ParseError*>(&e)) {
      err["line"] = pe->line();
      err["column"] = pe->column();
    }
    if (const auto* se = dynamic_cast<const StalledError*>(&e)) {
      err["round"] = se->round();
      err["blocked"] = se->blocked();
    }
  } else {
    err["kind"] = "Internal";
    err["exit_code"] = 1;
  }
  return {{"error", err}};
}

}  // namespace grid_islander::cli
