#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "grid_islander/grid_model.hpp"
#include "grid_islander/kuramoto.hpp"
#include "grid_islander/matpower.hpp"

namespace grid_islander {

struct IslandEstimate {
  double power = 0.0;  // P(l), per-unit
  double size = 0.0;   // |M_l|
};

/// Recovers an island's imbalance and size from its synchronized frequency
/// and the frequency of the same island augmented with node j:
///
///   P(l) = ω_l (ω_l^j − P_j) / (ω_l − ω_l^j),   |M_l| = P(l) / ω_l.
///
/// Throws DegenerateEstimate when |ω_l − ω_l^j| <= tolerance and
/// UndefinedSize when ω_l = 0.
IslandEstimate estimate_island_power(double omega_l, double omega_aug, double p_j, double tolerance = 1e-9);

/// P(l) only. A balanced island (ω_l = 0) yields 0 instead of throwing.
double estimate_island_imbalance(double omega_l, double omega_aug, double p_j, double tolerance = 1e-9);

struct FrequencySnapshot {
  double omega = 0.0;
  double time = 0.0;
};

/// What one unassigned node knows: its own injection, the labels of the
/// islands it borders, the augmented layers it simulates and the island
/// frequencies it received from its neighbours.
struct NodeAgent {
  BusId node_id = 0;
  double injection = 0.0;
  std::set<int> neighbor_islands;
  /// Set when every neighbour lies in the same island.
  std::optional<int> enclosing_island;
  std::map<int, CyberLayer> local_layers;
  std::map<int, FrequencySnapshot> snapshot_freqs;
  std::map<int, double> augmented_freqs;
  std::map<int, double> agreement_times;  // t_l^j
  double watch_horizon = 0.0;             // t^j
  std::optional<int> decision;
  double watched_omega = 0.0;  // ω̃
};

struct IslandRegistry {
  std::vector<Island> islands;
  /// Published ω_l per island label; missing when the island did not lock.
  std::map<int, double> island_freq;
  /// Per-node frequencies of each island layer at the end of its run.
  std::map<int, std::map<BusId, double>> node_freq;
  std::size_t round = 0;

  const Island& island(int label) const;
  Island& island(int label);
};

/// Load (negative injection): join the island with the largest positive
/// estimate, otherwise wait. Generator: join the smallest estimate. The
/// enclosure rule comes first. Ties go to the lowest label.
std::optional<int> agent_decide(const NodeAgent& agent, const std::map<int, double>& estimates);

enum class Freshness { Fresh, Stale };

/// Stale when any bordering island's published frequency moved by at least
/// epsilon since the agent's snapshot, or is no longer published.
Freshness staleness_check(const NodeAgent& agent, const IslandRegistry& registry, double epsilon);

struct DecentralizedOptions {
  FrequencyMode mode = FrequencyMode::Analytic;
  double t_max = 100.0;
  double dt = 0.01;
  double sync_tolerance = 1e-4;
  double freq_epsilon = 1e-3;
  double degeneracy_tolerance = 1e-9;
  int max_idle_rounds = 3;
  bool allow_fallback = true;
  bool shuffle_schedule = false;
  std::uint64_t seed = 1;

  static DecentralizedOptions from_config(const ScenarioConfig& config);
};

/// Memoized layer simulations keyed by node set (and, for augmented
/// layers, the joining node).
class LayerCache {
 public:
  struct Entry {
    std::optional<FrequencyLock> lock;
    double agreement_time = 0.0;
  };

  const Entry* find(const NodeSet& nodes, BusId joining) const;
  const Entry& store(const NodeSet& nodes, BusId joining, Entry entry);
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::map<std::pair<NodeSet, BusId>, Entry> entries_;
};

struct AgentEvaluation {
  NodeAgent agent;
  std::map<int, double> estimates;
  std::map<int, IslandEstimate> full_estimates;  // when the size is recoverable
  std::vector<int> unusable;                      // islands without a usable estimate
  std::size_t layers_evaluated = 0;
};

/// Publishes ω_l for every island of the registry.
void publish_island_frequencies(const PowerNetwork& network, IslandRegistry& registry,
                                const DecentralizedOptions& options, LayerCache& cache);

/// Runs one agent's local procedure against the published registry. Only the
/// islands bordering `node` are read.
AgentEvaluation evaluate_agent(const PowerNetwork& network, const IslandRegistry& registry, BusId node,
                               const DecentralizedOptions& options, LayerCache& cache);

struct AgentEvent {
  std::size_t round = 0;
  BusId node = 0;
  std::string action;  // snapshot | estimate | join | wait | stale
  nlohmann::json payload;
};

/// Estimate next to the ground truth the agent could not see.
struct EstimateAudit {
  std::size_t round = 0;
  BusId node = 0;
  int island = 0;
  double estimated_power = 0.0;
  std::optional<double> estimated_size;
  double true_power = 0.0;
  double true_size = 0.0;
};

struct DecentralizedResult {
  Partition partition;
  std::vector<AgentEvent> events;
  std::vector<EstimateAudit> audits;
  std::vector<std::size_t> layers_per_round;
  std::size_t rounds = 0;
  bool fallback_fired = false;
};

/// Round-based, deterministic execution of the self-organizing procedure.
/// Each round every unassigned node bordering an island evaluates; joins are
/// committed in schedule order after a staleness re-check. Throws
/// InitialIslandsOverlap, ConfigError and StalledError.
DecentralizedResult decentralized_partition(const PowerNetwork& network, const std::vector<Island>& initial,
                                            const DecentralizedOptions& options);

nlohmann::json event_log_to_json(const std::vector<AgentEvent>& events);

}  // namespace grid_islander
