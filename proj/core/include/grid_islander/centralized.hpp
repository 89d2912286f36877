#pragma once

#include <cstddef>
#include <vector>

#include <nlohmann/json.hpp>

#include "grid_islander/grid_model.hpp"
#include "grid_islander/kuramoto.hpp"

namespace grid_islander {

/// Sum of per-unit injections over the island.
double island_imbalance(const PowerNetwork& network, const Island& island);

struct GrowthStep {
  std::size_t step = 0;
  int island_label = 0;  // i*
  BusId node = 0;        // l*
  double sync_time = 0.0;
  std::vector<double> imbalances;  // ΔP(M_i) before the attachment, island order

  friend bool operator==(const GrowthStep&, const GrowthStep&) = default;
};

struct CentralizedResult {
  Partition partition;
  std::vector<GrowthStep> steps;
};

/// Greedy growth driven by synchronization times: the island with the
/// largest imbalance absorbs the unassigned neighbour that synchronizes
/// fastest with it, until every node is assigned.
///
/// Ties: lowest island position, then lowest node id. A node's key is the
/// minimum sync time over its edges into the island. When the leading
/// island has no unassigned neighbour the next one in imbalance order grows
/// instead.
///
/// Throws InitialIslandsOverlap, NotFound (unknown node or missing edge
/// time), ConfigError (disconnected initial island) and StalledError.
CentralizedResult centralized_partition(const PowerNetwork& network, const std::vector<Island>& initial,
                                        const SyncTimeTable& times);

nlohmann::json growth_log_to_json(const std::vector<GrowthStep>& steps);

}  // namespace grid_islander
