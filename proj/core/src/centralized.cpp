#include "grid_islander/centralized.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "grid_islander/error.hpp"

namespace grid_islander {

double island_imbalance(const PowerNetwork& network, const Island& island) {
  double sum = 0.0;
  for (BusId id : island.nodes) sum += net_injection(network, id);
  return sum;
}

CentralizedResult centralized_partition(const PowerNetwork& network, const std::vector<Island>& initial,
                                        const SyncTimeTable& times) {
  std::unordered_map<BusId, std::size_t> owner;
  for (std::size_t k = 0; k < initial.size(); ++k) {
    for (BusId id : initial[k].nodes) {
      network.index_of(id);
      if (!owner.emplace(id, k).second) {
        throw Error(ErrorKind::InitialIslandsOverlap, "bus " + std::to_string(id) + " is in two initial islands");
      }
    }
    if (!is_connected_subset(network, initial[k].nodes)) {
      throw Error(ErrorKind::ConfigError, "initial island " + std::to_string(initial[k].label) + " is not connected");
    }
  }

  std::vector<Island> islands = initial;
  std::vector<double> imbalance(islands.size());
  CentralizedResult result;
  const std::size_t n = network.size();
  std::vector<std::size_t> order(islands.size());
  while (owner.size() < n) {
    for (std::size_t k = 0; k < islands.size(); ++k) imbalance[k] = island_imbalance(network, islands[k]);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return imbalance[a] > imbalance[b]; });

    bool attached = false;
    for (std::size_t k : order) {
      BusId best_node = 0;
      double best_time = std::numeric_limits<double>::quiet_NaN();
      // Candidates: unassigned neighbours of island k, keyed by the fastest
      // edge into the island. std::set iteration keeps node ids ascending.
      std::unordered_map<BusId, double> key;
      for (BusId member : islands[k].nodes) {
        for (BusId v : network.neighbors(member)) {
          if (owner.contains(v)) continue;
          const double t = times.at(member, v);
          auto [it, inserted] = key.emplace(v, t);
          if (!inserted) it->second = std::min(it->second, t);
        }
      }
      if (key.empty()) continue;
      for (const auto& [node, t] : key) {
        const bool better = std::isnan(best_time) || t < best_time || (t == best_time && node < best_node);
        if (better) {
          best_node = node;
          best_time = t;
        }
      }

      GrowthStep step;
      step.step = result.steps.size();
      step.island_label = islands[k].label;
      step.node = best_node;
      step.sync_time = best_time;
      step.imbalances = imbalance;
      result.steps.push_back(std::move(step));

      islands[k].nodes.insert(best_node);
      owner.emplace(best_node, k);
      attached = true;
      break;
    }
    if (!attached) {
      std::vector<BusId> blocked;
      for (BusId id : network.bus_ids()) {
        if (!owner.contains(id)) blocked.push_back(id);
      }
      throw StalledError(result.steps.size(), std::move(blocked),
                         "no island borders an unassigned node; the grid is disconnected");
    }
  }

  result.partition = make_partition(network, std::move(islands));
  return result;
}

nlohmann::json growth_log_to_json(const std::vector<GrowthStep>& steps) {
  nlohmann::json out = nlohmann::json::array();
  for (const GrowthStep& s : steps) {
    nlohmann::json record{{"step", s.step}, {"island", s.island_label}, {"node", s.node}, {"imbalances", s.imbalances}};
    if (std::isinf(s.sync_time)) {
      record["sync_time"] = "inf";
    } else {
      record["sync_time"] = s.sync_time;
    }
    out.push_back(std::move(record));
  }
  return out;
}

}  // namespace grid_islander
