#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <unordered_map>
#include <utility>
#include <vector>

namespace grid_islander {

using BusId = int;
using NodeSet = std::set<BusId>;

enum class BusKind { Generator, Load };

struct Bus {
  BusId id = 0;
  BusKind kind = BusKind::Load;
  double p_demand = 0.0;         // MW
  double q_demand = 0.0;         // MVAr
  double p_gen_scheduled = 0.0;  // MW, summed over in-service machines
  double q_gen_scheduled = 0.0;  // MVAr
  double base_kv = 0.0;
  double voltage_setpoint = 1.0;  // pu
  double shunt_g = 0.0;           // MW demanded at V = 1 pu
  double shunt_b = 0.0;           // MVAr injected at V = 1 pu
  bool voltage_controlled = false;

  friend bool operator==(const Bus&, const Bus&) = default;
};

struct Branch {
  BusId from_bus = 0;
  BusId to_bus = 0;
  double resistance = 0.0;  // pu
  double reactance = 0.0;   // pu
  double charging = 0.0;    // pu, total line charging susceptance
  double tap_ratio = 1.0;
  double phase_shift_deg = 0.0;
  bool in_service = true;

  bool connects(BusId a, BusId b) const noexcept {
    return (from_bus == a && to_bus == b) || (from_bus == b && to_bus == a);
  }

  friend bool operator==(const Branch&, const Branch&) = default;
};

/// Immutable grid: buses, branches and the generator set V_gen. Adjacency is
/// derived from in-service branches at construction.
class PowerNetwork {
 public:
  PowerNetwork(std::vector<Bus> buses, std::vector<Branch> branches, double base_mva);

  const std::vector<Bus>& buses() const noexcept { return buses_; }
  const std::vector<Branch>& branches() const noexcept { return branches_; }
  double base_mva() const noexcept { return base_mva_; }

  std::size_t size() const noexcept { return buses_.size(); }
  bool has_bus(BusId id) const noexcept { return index_.contains(id); }
  /// Throws NotFound for unknown ids.
  const Bus& bus(BusId id) const;
  std::size_t index_of(BusId id) const;

  /// Sorted ascending.
  std::vector<BusId> bus_ids() const;
  NodeSet all_nodes() const;
  NodeSet generator_set() const;
  bool is_generator(BusId id) const { return bus(id).kind == BusKind::Generator; }

  /// In-service neighbours, sorted ascending, without duplicates.
  const std::vector<BusId>& neighbors(BusId id) const;
  /// Indices of in-service branches touching the bus.
  const std::vector<std::size_t>& incident_branches(BusId id) const;

  std::size_t in_service_branch_count() const;
  bool is_connected() const;

  friend bool operator==(const PowerNetwork& a, const PowerNetwork& b) {
    return a.base_mva_ == b.base_mva_ && a.buses_ == b.buses_ && a.branches_ == b.branches_;
  }

 private:
  std::vector<Bus> buses_;
  std::vector<Branch> branches_;
  double base_mva_;
  std::unordered_map<BusId, std::size_t> index_;
  std::vector<std::vector<BusId>> neighbors_;
  std::vector<std::vector<std::size_t>> incident_;
};

struct Island {
  NodeSet nodes;
  int label = 0;

  bool contains(BusId id) const { return nodes.contains(id); }
  friend bool operator==(const Island&, const Island&) = default;
};

struct BranchRef {
  std::size_t index = 0;
  BusId from_bus = 0;
  BusId to_bus = 0;

  friend bool operator==(const BranchRef&, const BranchRef&) = default;
};

struct Partition {
  std::vector<Island> islands;
  std::vector<BranchRef> cut_set;

  std::size_t n_islands() const noexcept { return islands.size(); }
  /// Label of the island holding the node, if any.
  std::optional<int> island_of(BusId id) const;

  friend bool operator==(const Partition&, const Partition&) = default;
};

/// Per-unit net injection (generation minus demand).
double net_injection(const PowerNetwork& network, BusId bus);

/// |Im(1/(r + jx))|; throws DegenerateBranch when r = x = 0.
double coupling_susceptance(const Branch& branch);

/// Minimum-hop path over in-service branches. Among equal-length paths the
/// lexicographically smallest id sequence wins. Throws Unreachable.
std::vector<BusId> shortest_path(const PowerNetwork& network, BusId source, BusId target);

/// Adds to the seeds every node crossed by the pairwise shortest paths.
/// Pairs are visited in ascending (id, id) order.
Island complete_island(const PowerNetwork& network, const NodeSet& seeds, int label = 0);

/// Copy of the network with one in-service branch between the endpoints
/// switched off. Throws NotFound when none exists.
PowerNetwork apply_fault(const PowerNetwork& network, std::pair<BusId, BusId> branch);

/// True when the subgraph induced by `nodes` over in-service branches is
/// connected. Empty sets are not connected.
bool is_connected_subset(const PowerNetwork& network, const NodeSet& nodes);

/// In-service branches whose endpoints sit in different islands. Nodes
/// outside every island are ignored.
std::vector<BranchRef> compute_cut_set(const PowerNetwork& network, const std::vector<Island>& islands);

/// In-service branches with both endpoints in the given node set.
std::vector<std::size_t> internal_branches(const PowerNetwork& network, const NodeSet& nodes);

/// Builds a partition and fills its cut-set.
Partition make_partition(const PowerNetwork& network, std::vector<Island> islands);

struct ValidityReport {
  bool covers = true;
  std::vector<BusId> missing;
  bool disjoint = true;
  std::vector<BusId> overlapping;
  std::vector<BusId> unknown;
  std::vector<bool> connected;
  std::vector<bool> has_generator;
  std::vector<BranchRef> cut_set;

  bool all_connected() const;
  bool all_have_generator() const;
  bool ok() const;
};

ValidityReport validate_partition(const PowerNetwork& network, const Partition& partition);

}  // namespace grid_islander
