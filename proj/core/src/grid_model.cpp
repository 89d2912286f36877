#include "grid_islander/grid_model.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>

#include "grid_islander/error.hpp"

namespace grid_islander {

namespace {

std::string edge_name(BusId a, BusId b) {
  return std::to_string(a) + "-" + std::to_string(b);
}

}  // namespace

PowerNetwork::PowerNetwork(std::vector<Bus> buses, std::vector<Branch> branches, double base_mva)
    : buses_(std::move(buses)), branches_(std::move(branches)), base_mva_(base_mva) {
  if (!(base_mva_ > 0.0) || !std::isfinite(base_mva_)) {
    throw Error(ErrorKind::SchemaError, "base MVA must be positive");
  }
  index_.reserve(buses_.size());
  for (std::size_t k = 0; k < buses_.size(); ++k) {
    const Bus& b = buses_[k];
    if (!index_.emplace(b.id, k).second) {
      throw Error(ErrorKind::SchemaError, "duplicate bus id " + std::to_string(b.id));
    }
    if (b.p_demand < 0.0) {
      throw Error(ErrorKind::SchemaError, "negative active demand at bus " + std::to_string(b.id));
    }
  }

  neighbors_.assign(buses_.size(), {});
  incident_.assign(buses_.size(), {});
  for (std::size_t k = 0; k < branches_.size(); ++k) {
    const Branch& br = branches_[k];
    if (br.from_bus == br.to_bus) {
      throw Error(ErrorKind::SchemaError, "branch " + edge_name(br.from_bus, br.to_bus) + " is a self loop");
    }
    const auto from = index_.find(br.from_bus);
    const auto to = index_.find(br.to_bus);
    if (from == index_.end() || to == index_.end()) {
      throw Error(ErrorKind::NotFound,
                  "branch " + edge_name(br.from_bus, br.to_bus) + " references an unknown bus");
    }
    if (br.reactance == 0.0) {
      throw Error(ErrorKind::DegenerateBranch,
                  "branch " + edge_name(br.from_bus, br.to_bus) + " has zero reactance");
    }
    if (!br.in_service) continue;
    neighbors_[from->second].push_back(br.to_bus);
    neighbors_[to->second].push_back(br.from_bus);
    incident_[from->second].push_back(k);
    incident_[to->second].push_back(k);
  }
  for (auto& n : neighbors_) {
    std::sort(n.begin(), n.end());
    n.erase(std::unique(n.begin(), n.end()), n.end());
  }
}

const Bus& PowerNetwork::bus(BusId id) const { return buses_[index_of(id)]; }

std::size_t PowerNetwork::index_of(BusId id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) {
    throw Error(ErrorKind::NotFound, "unknown bus " + std::to_string(id));
  }
  return it->second;
}

std::vector<BusId> PowerNetwork::bus_ids() const {
  std::vector<BusId> ids;
  ids.reserve(buses_.size());
  for (const Bus& b : buses_) ids.push_back(b.id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

NodeSet PowerNetwork::all_nodes() const {
  NodeSet out;
  for (const Bus& b : buses_) out.insert(b.id);
  return out;
}

NodeSet PowerNetwork::generator_set() const {
  NodeSet out;
  for (const Bus& b : buses_) {
    if (b.kind == BusKind::Generator) out.insert(b.id);
  }
  return out;
}

const std::vector<BusId>& PowerNetwork::neighbors(BusId id) const { return neighbors_[index_of(id)]; }

const std::vector<std::size_t>& PowerNetwork::incident_branches(BusId id) const {
  return incident_[index_of(id)];
}

std::size_t PowerNetwork::in_service_branch_count() const {
  return static_cast<std::size_t>(
      std::count_if(branches_.begin(), branches_.end(), [](const Branch& b) { return b.in_service; }));
}

bool PowerNetwork::is_connected() const { return is_connected_subset(*this, all_nodes()); }

std::optional<int> Partition::island_of(BusId id) const {
  for (const Island& island : islands) {
    if (island.contains(id)) return island.label;
  }
  return std::nullopt;
}

double net_injection(const PowerNetwork& network, BusId bus) {
  const Bus& b = network.bus(bus);
  return (b.p_gen_scheduled - b.p_demand) / network.base_mva();
}

double coupling_susceptance(const Branch& branch) {
  const double r = branch.resistance;
  const double x = branch.reactance;
  const double denom = r * r + x * x;
  if (denom == 0.0) {
    throw Error(ErrorKind::DegenerateBranch,
                "branch " + edge_name(branch.from_bus, branch.to_bus) + " has zero impedance");
  }
  return std::abs(x) / denom;
}

std::vector<BusId> shortest_path(const PowerNetwork& network, BusId source, BusId target) {
  const std::size_t src = network.index_of(source);
  const std::size_t dst = network.index_of(target);
  if (src == dst) return {source};

  // Distances to the target; walking greedily from the source to the smallest
  // neighbour one hop closer yields the lexicographically smallest path.
  constexpr std::size_t kUnseen = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> dist(network.size(), kUnseen);
  std::deque<BusId> queue{target};
  dist[dst] = 0;
  while (!queue.empty()) {
    const BusId u = queue.front();
    queue.pop_front();
    const std::size_t du = dist[network.index_of(u)];
    for (BusId v : network.neighbors(u)) {
      std::size_t& dv = dist[network.index_of(v)];
      if (dv == kUnseen) {
        dv = du + 1;
        queue.push_back(v);
      }
    }
  }
  if (dist[src] == kUnseen) {
    throw Error(ErrorKind::Unreachable,
                "no path between buses " + std::to_string(source) + " and " + std::to_string(target));
  }

  std::vector<BusId> path{source};
  BusId current = source;
  while (current != target) {
    const std::size_t dc = dist[network.index_of(current)];
    for (BusId v : network.neighbors(current)) {
      if (dist[network.index_of(v)] + 1 == dc) {
        current = v;
        break;
      }
    }
    path.push_back(current);
  }
  return path;
}

bool is_connected_subset(const PowerNetwork& network, const NodeSet& nodes) {
  if (nodes.empty()) return false;
  for (BusId id : nodes) {
    if (!network.has_bus(id)) return false;
  }
  NodeSet seen{*nodes.begin()};
  std::vector<BusId> stack{*nodes.begin()};
  while (!stack.empty()) {
    const BusId u = stack.back();
    stack.pop_back();
    for (BusId v : network.neighbors(u)) {
      if (nodes.contains(v) && seen.insert(v).second) stack.push_back(v);
    }
  }
  return seen.size() == nodes.size();
}

Island complete_island(const PowerNetwork& network, const NodeSet& seeds, int label) {
  if (seeds.empty()) {
    throw Error(ErrorKind::ConfigError, "island seed set is empty");
  }
  for (BusId id : seeds) network.index_of(id);

  Island island{seeds, label};
  if (is_connected_subset(network, seeds)) return island;

  const std::vector<BusId> ordered(seeds.begin(), seeds.end());
  for (std::size_t a = 0; a < ordered.size(); ++a) {
    for (std::size_t b = a + 1; b < ordered.size(); ++b) {
      for (BusId id : shortest_path(network, ordered[a], ordered[b])) island.nodes.insert(id);
    }
  }
  return island;
}

PowerNetwork apply_fault(const PowerNetwork& network, std::pair<BusId, BusId> branch) {
  std::vector<Branch> branches = network.branches();
  const auto it = std::find_if(branches.begin(), branches.end(), [&](const Branch& b) {
    return b.in_service && b.connects(branch.first, branch.second);
  });
  if (it == branches.end()) {
    throw Error(ErrorKind::NotFound,
                "no in-service branch " + edge_name(branch.first, branch.second));
  }
  it->in_service = false;
  return PowerNetwork(network.buses(), std::move(branches), network.base_mva());
}

std::vector<BranchRef> compute_cut_set(const PowerNetwork& network, const std::vector<Island>& islands) {
  std::unordered_map<BusId, std::size_t> owner;
  for (std::size_t k = 0; k < islands.size(); ++k) {
    for (BusId id : islands[k].nodes) owner.emplace(id, k);
  }
  std::vector<BranchRef> cut;
  const auto& branches = network.branches();
  for (std::size_t k = 0; k < branches.size(); ++k) {
    const Branch& b = branches[k];
    if (!b.in_service) continue;
    const auto from = owner.find(b.from_bus);
    const auto to = owner.find(b.to_bus);
    if (from == owner.end() || to == owner.end()) continue;
    if (from->second != to->second) cut.push_back({k, b.from_bus, b.to_bus});
  }
  return cut;
}

std::vector<std::size_t> internal_branches(const PowerNetwork& network, const NodeSet& nodes) {
  std::vector<std::size_t> out;
  const auto& branches = network.branches();
  for (std::size_t k = 0; k < branches.size(); ++k) {
    const Branch& b = branches[k];
    if (b.in_service && nodes.contains(b.from_bus) && nodes.contains(b.to_bus)) out.push_back(k);
  }
  return out;
}

Partition make_partition(const PowerNetwork& network, std::vector<Island> islands) {
  Partition p;
  p.cut_set = compute_cut_set(network, islands);
  p.islands = std::move(islands);
  return p;
}

bool ValidityReport::all_connected() const {
  return std::all_of(connected.begin(), connected.end(), [](bool b) { return b; });
}

bool ValidityReport::all_have_generator() const {
  return std::all_of(has_generator.begin(), has_generator.end(), [](bool b) { return b; });
}

bool ValidityReport::ok() const {
  return covers && disjoint && unknown.empty() && all_connected() && all_have_generator();
}

ValidityReport validate_partition(const PowerNetwork& network, const Partition& partition) {
  ValidityReport report;
  std::unordered_map<BusId, int> seen;
  for (const Island& island : partition.islands) {
    bool gen = false;
    for (BusId id : island.nodes) {
      if (!network.has_bus(id)) {
        report.unknown.push_back(id);
        continue;
      }
      if (++seen[id] == 2) report.overlapping.push_back(id);
      gen = gen || network.is_generator(id);
    }
    report.connected.push_back(is_connected_subset(network, island.nodes));
    report.has_generator.push_back(gen);
  }
  for (BusId id : network.bus_ids()) {
    if (!seen.contains(id)) report.missing.push_back(id);
  }
  std::sort(report.overlapping.begin(), report.overlapping.end());
  std::sort(report.unknown.begin(), report.unknown.end());
  report.covers = report.missing.empty();
  report.disjoint = report.overlapping.empty();
  report.cut_set = compute_cut_set(network, partition.islands);
  return report;
}

}  // namespace grid_islander
