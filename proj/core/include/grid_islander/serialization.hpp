#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "grid_islander/grid_model.hpp"
#include "grid_islander/matpower.hpp"

namespace grid_islander {

// Network and scenario documents carry a "schema_version" field; loaders
// reject versions they do not know.

nlohmann::json network_to_json(const PowerNetwork& network);
PowerNetwork network_from_json(const nlohmann::json& doc);

/// {"islands":[{"label":1,"nodes":[...]}],"cut_set":[[i,j],...]}
nlohmann::json partition_to_json(const Partition& partition);
/// The cut-set is recomputed against the network rather than trusted.
Partition partition_from_json(const nlohmann::json& doc, const PowerNetwork& network);

nlohmann::json validity_to_json(const ValidityReport& report);

nlohmann::json scenario_config_to_json(const ScenarioConfig& config);
ScenarioConfig scenario_config_from_json(const nlohmann::json& doc);

void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace grid_islander
