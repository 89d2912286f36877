#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "grid_islander/error.hpp"
#include "grid_islander/grid_model.hpp"
#include "grid_islander/kuramoto.hpp"
#include "grid_islander/matpower.hpp"

namespace grid_islander::cli {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<Algorithm> algorithm;
  std::optional<FrequencyMode> mode;
};

struct Scenario {
  std::filesystem::path config_path;
  std::string config_bytes;
  ScenarioConfig config;
  PowerNetwork network;
  std::vector<Island> initial;  // completed seed sets, labels 1..n
};

/// Reads the config, applies flag overrides, loads and faults the network
/// and completes the seed sets.
Scenario load_scenario(const std::filesystem::path& config_path, const Overrides& overrides = {});

std::vector<Island> complete_seed_sets(const PowerNetwork& network, const ScenarioConfig& config);

/// Every distinct in-service edge as an ordered (low, high) pair.
std::vector<std::pair<BusId, BusId>> graph_edges(const PowerNetwork& network);

/// Ensemble sync times over the whole cyberlayer.
SyncTimeTable compute_sync_times(const Scenario& scenario);

struct PartitionRun {
  Partition partition;
  ValidityReport validity;
  nlohmann::json log;  // growth steps or agent events
  std::string log_name;
  std::optional<SyncTimeTable> sync_times;
  double seconds = 0.0;
};

PartitionRun run_partition(const Scenario& scenario);

/// SHA-256 of the bytes, lowercase hex.
std::string sha256_hex(std::string_view bytes);

/// Process exit code for an error kind: 2 input, 3 numerical, 4 validation.
int exit_code_for(ErrorKind kind);

nlohmann::json error_to_json(const std::exception& e);

}  // namespace grid_islander::cli
