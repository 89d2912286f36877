#include "grid_islander/decentralized.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "grid_islander/centralized.hpp"
#include "grid_islander/error.hpp"

namespace grid_islander {

namespace {

// Joining-node key for plain island layers in the cache.
constexpr BusId kNoJoin = std::numeric_limits<BusId>::min();

std::string layer_label(int island, std::optional<BusId> joining) {
  std::string label = "G_" + std::to_string(island);
  if (joining) label += "^" + std::to_string(*joining);
  return label;
}

std::optional<int> owner_of(const IslandRegistry& registry, BusId id) {
  for (const Island& island : registry.islands) {
    if (island.contains(id)) return island.label;
  }
  return std::nullopt;
}

void publish_one(const PowerNetwork& network, IslandRegistry& registry, const Island& island,
                 const DecentralizedOptions& options, LayerCache& cache) {
  registry.island_freq.erase(island.label);
  registry.node_freq.erase(island.label);
  const CyberLayer layer = build_layer(network, island.nodes, layer_label(island.label, std::nullopt));
  if (options.mode == FrequencyMode::Analytic) {
    const double omega = sync_frequency(layer);
    registry.island_freq[island.label] = omega;
    for (BusId id : island.nodes) registry.node_freq[island.label][id] = omega;
    return;
  }
  const LayerCache::Entry* entry = cache.find(island.nodes, kNoJoin);
  if (!entry) {
    LayerCache::Entry fresh;
    try {
      fresh.lock = measure_sync_frequency(layer, options.t_max, options.dt, options.sync_tolerance);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NotSynchronized) throw;
    }
    entry = &cache.store(island.nodes, kNoJoin, std::move(fresh));
  }
  if (!entry->lock) return;
  registry.island_freq[island.label] = entry->lock->frequency;
  const auto& ids = layer.node_ids();
  for (std::size_t k = 0; k < ids.size(); ++k) {
    registry.node_freq[island.label][ids[k]] = entry->lock->node_frequencies[k];
  }
}

std::string decision_rule(const NodeAgent& agent) {
  if (agent.enclosing_island) return "enclosure";
  return agent.injection < 0.0 ? "load" : "generator";
}

void check_initial(const PowerNetwork& network, const std::vector<Island>& initial) {
  std::set<BusId> seen;
  std::set<int> labels;
  for (const Island& island : initial) {
    if (!labels.insert(island.label).second) {
      throw Error(ErrorKind::ConfigError, "duplicate island label " + std::to_string(island.label));
    }
    for (BusId id : island.nodes) {
      network.index_of(id);
      if (!seen.insert(id).second) {
        throw Error(ErrorKind::InitialIslandsOverlap, "bus " + std::to_string(id) + " is in two initial islands");
      }
    }
    if (!is_connected_subset(network, island.nodes)) {
      throw Error(ErrorKind::ConfigError, "initial island " + std::to_string(island.label) + " is not connected");
    }
  }
}

}  // namespace

IslandEstimate estimate_island_power(double omega_l, double omega_aug, double p_j, double tolerance) {
  const double gap = omega_l - omega_aug;
  if (std::abs(gap) <= tolerance) {
    throw Error(ErrorKind::DegenerateEstimate, "island frequency does not move when the node joins");
  }
  if (omega_l == 0.0) {
    throw Error(ErrorKind::UndefinedSize, "balanced island: size cannot be recovered from a zero frequency");
  }
  IslandEstimate est;
  est.power = omega_l * (omega_aug - p_j) / gap;
  est.size = est.power / omega_l;
  return est;
}

double estimate_island_imbalance(double omega_l, double omega_aug, double p_j, double tolerance) {
  const double gap = omega_l - omega_aug;
  if (std::abs(gap) <= tolerance) {
    throw Error(ErrorKind::DegenerateEstimate, "island frequency does not move when the node joins");
  }
  return omega_l * (omega_aug - p_j) / gap;
}

const Island& IslandRegistry::island(int label) const {
  for (const Island& i : islands) {
    if (i.label == label) return i;
  }
  throw Error(ErrorKind::NotFound, "no island labelled " + std::to_string(label));
}

Island& IslandRegistry::island(int label) {
  return const_cast<Island&>(static_cast<const IslandRegistry&>(*this).island(label));
}

std::optional<int> agent_decide(const NodeAgent& agent, const std::map<int, double>& estimates) {
  if (agent.enclosing_island) return agent.enclosing_island;
  std::optional<int> best;
  double best_value = 0.0;
  const bool load = agent.injection < 0.0;
  for (const auto& [label, power] : estimates) {
    if (!agent.neighbor_islands.contains(label)) continue;
    // Map iteration is label-ascending, so strict comparison keeps the lowest label on ties.
    const bool better = !best || (load ? power > best_value : power < best_value);
    if (better) {
      best = label;
      best_value = power;
    }
  }
  if (load && best && !(best_value > 0.0)) return std::nullopt;
  return best;
}

Freshness staleness_check(const NodeAgent& agent, const IslandRegistry& registry, double epsilon) {
  for (int label : agent.neighbor_islands) {
    const auto snap = agent.snapshot_freqs.find(label);
    if (snap == agent.snapshot_freqs.end()) continue;
    const auto now = registry.island_freq.find(label);
    if (now == registry.island_freq.end()) return Freshness::Stale;
    if (std::abs(now->second - snap->second.omega) >= epsilon) return Freshness::Stale;
  }
  return Freshness::Fresh;
}

DecentralizedOptions DecentralizedOptions::from_config(const ScenarioConfig& config) {
  DecentralizedOptions o;
  o.mode = config.mode;
  o.t_max = config.t_max;
  o.dt = config.dt;
  o.sync_tolerance = config.sync_tolerance;
  o.freq_epsilon = config.freq_epsilon;
  o.degeneracy_tolerance = config.degeneracy_tolerance;
  o.max_idle_rounds = config.max_idle_rounds;
  o.allow_fallback = config.allow_fallback;
  o.shuffle_schedule = config.shuffle_schedule;
  o.seed = config.seed;
  return o;
}

const LayerCache::Entry* LayerCache::find(const NodeSet& nodes, BusId joining) const {
  const auto it = entries_.find({nodes, joining});
  return it == entries_.end() ? nullptr : &it->second;
}

const LayerCache::Entry& LayerCache::store(const NodeSet& nodes, BusId joining, Entry entry) {
  return entries_.insert_or_assign({nodes, joining}, std::move(entry)).first->second;
}

void publish_island_frequencies(const PowerNetwork& network, IslandRegistry& registry,
                                const DecentralizedOptions& options, LayerCache& cache) {
  for (const Island& island : registry.islands) publish_one(network, registry, island, options, cache);
}

AgentEvaluation evaluate_agent(const PowerNetwork& network, const IslandRegistry& registry, BusId node,
                               const DecentralizedOptions& options, LayerCache& cache) {
  AgentEvaluation ev;
  NodeAgent& agent = ev.agent;
  agent.node_id = node;
  agent.injection = net_injection(network, node);

  const auto& neighbors = network.neighbors(node);
  std::map<int, std::vector<BusId>> contacts;  // island -> bordering neighbours
  bool all_assigned = true;
  for (BusId v : neighbors) {
    if (const auto label = owner_of(registry, v)) {
      agent.neighbor_islands.insert(*label);
      contacts[*label].push_back(v);
    } else {
      all_assigned = false;
    }
  }
  if (all_assigned && agent.neighbor_islands.size() == 1) agent.enclosing_island = *agent.neighbor_islands.begin();

  for (int label : agent.neighbor_islands) {
    const auto published = registry.island_freq.find(label);
    if (published == registry.island_freq.end()) {
      ev.unusable.push_back(label);
      continue;
    }
    // The frequency received is the one observed at the nearest (lowest id)
    // bordering neighbour.
    double omega = published->second;
    if (const auto nf = registry.node_freq.find(label); nf != registry.node_freq.end()) {
      if (const auto at = nf->second.find(contacts[label].front()); at != nf->second.end()) omega = at->second;
    }
    agent.snapshot_freqs[label] = {omega, static_cast<double>(registry.round)};

    NodeSet augmented = registry.island(label).nodes;
    augmented.insert(node);
    CyberLayer layer = build_layer(network, augmented, layer_label(label, node));
    ++ev.layers_evaluated;

    std::optional<double> omega_aug;
    double agreement = 0.0;
    if (options.mode == FrequencyMode::Analytic) {
      omega_aug = sync_frequency(layer);
    } else {
      const LayerCache::Entry* entry = cache.find(augmented, node);
      if (!entry) {
        LayerCache::Entry fresh;
        const std::size_t self = *layer.index_of(node);
        std::vector<std::size_t> watch;
        for (BusId v : contacts[label]) watch.push_back(*layer.index_of(v));
        double last_violation = -1.0;
        try {
          fresh.lock = measure_sync_frequency(
              layer, options.t_max, options.dt, options.sync_tolerance, [&](const PhaseState& s) {
                for (std::size_t w : watch) {
                  if (std::abs(s.frequencies[w] - s.frequencies[self]) > options.freq_epsilon) {
                    last_violation = s.time;
                    break;
                  }
                }
              });
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::NotSynchronized) throw;
        }
        fresh.agreement_time = last_violation < 0.0 ? 0.0 : last_violation + options.dt;
        entry = &cache.store(augmented, node, std::move(fresh));
      }
      if (entry->lock) {
        omega_aug = entry->lock->node_frequencies[*layer.index_of(node)];
        agreement = entry->agreement_time;
      }
    }
    agent.local_layers.emplace(label, std::move(layer));
    if (!omega_aug) {
      ev.unusable.push_back(label);
      continue;
    }
    agent.augmented_freqs[label] = *omega_aug;
    agent.agreement_times[label] = agreement;
    agent.watch_horizon = std::max(agent.watch_horizon, agreement);

    try {
      ev.estimates[label] = estimate_island_imbalance(omega, *omega_aug, agent.injection, options.degeneracy_tolerance);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateEstimate) throw;
      ev.unusable.push_back(label);
      continue;
    }
    try {
      ev.full_estimates[label] = estimate_island_power(omega, *omega_aug, agent.injection, options.degeneracy_tolerance);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::UndefinedSize) throw;
    }
  }

  agent.decision = agent_decide(agent, ev.estimates);
  if (agent.decision) {
    const auto snap = agent.snapshot_freqs.find(*agent.decision);
    if (snap != agent.snapshot_freqs.end()) agent.watched_omega = snap->second.omega;
  }
  return ev;
}

DecentralizedResult decentralized_partition(const PowerNetwork& network, const std::vector<Island>& initial,
                                            const DecentralizedOptions& options) {
  check_initial(network, initial);
  if (options.max_idle_rounds < 1) throw Error(ErrorKind::ConfigError, "max_idle_rounds must be >= 1");

  DecentralizedResult result;
  IslandRegistry registry;
  registry.islands = initial;
  LayerCache cache;
  publish_island_frequencies(network, registry, options, cache);

  std::set<BusId> assigned;
  for (const Island& island : initial) assigned.insert(island.nodes.begin(), island.nodes.end());

  const std::size_t n = network.size();
  int idle_rounds = 0;
  auto log = [&](BusId node, std::string action, nlohmann::json payload) {
    result.events.push_back({registry.round, node, std::move(action), std::move(payload)});
  };

  while (assigned.size() < n) {
    ++registry.round;
    std::vector<BusId> frontier;
    for (BusId id : network.bus_ids()) {
      if (assigned.contains(id)) continue;
      const auto& nb = network.neighbors(id);
      if (std::any_of(nb.begin(), nb.end(), [&](BusId v) { return assigned.contains(v); })) frontier.push_back(id);
    }
    if (frontier.empty()) {
      std::vector<BusId> blocked;
      for (BusId id : network.bus_ids()) {
        if (!assigned.contains(id)) blocked.push_back(id);
      }
      throw StalledError(registry.round, std::move(blocked),
                         "no island borders an unassigned node; the grid is disconnected");
    }
    if (options.shuffle_schedule) {
      std::seed_seq seq{static_cast<std::uint32_t>(options.seed), static_cast<std::uint32_t>(options.seed >> 32),
                        static_cast<std::uint32_t>(registry.round)};
      std::mt19937_64 rng(seq);
      std::shuffle(frontier.begin(), frontier.end(), rng);
    }

    std::size_t layers = registry.islands.size();
    std::vector<AgentEvaluation> evaluations;
    evaluations.reserve(frontier.size());
    for (BusId j : frontier) {
      AgentEvaluation ev = evaluate_agent(network, registry, j, options, cache);
      layers += ev.layers_evaluated;
      for (const auto& [label, snap] : ev.agent.snapshot_freqs) {
        log(j, "snapshot", {{"island", label}, {"omega", snap.omega}});
      }
      for (const auto& [label, power] : ev.estimates) {
        nlohmann::json payload{{"island", label},
                               {"omega_aug", ev.agent.augmented_freqs.at(label)},
                               {"power", power},
                               {"agreement_time", ev.agent.agreement_times.at(label)}};
        EstimateAudit audit{registry.round, j, label, power, std::nullopt, 0.0, 0.0};
        if (const auto full = ev.full_estimates.find(label); full != ev.full_estimates.end()) {
          payload["size"] = full->second.size;
          audit.estimated_size = full->second.size;
        } else {
          payload["size"] = nullptr;
        }
        const Island& island = registry.island(label);
        audit.true_power = island_imbalance(network, island);
        audit.true_size = static_cast<double>(island.nodes.size());
        result.audits.push_back(audit);
        log(j, "estimate", std::move(payload));
      }
      if (!ev.agent.decision) {
        log(j, "wait",
            {{"reason", ev.estimates.empty() ? "no usable estimate" : "no neighbouring island in surplus"},
             {"unusable", ev.unusable}});
      }
      evaluations.push_back(std::move(ev));
    }
    result.layers_per_round.push_back(layers);

    bool progress = false;
    for (const AgentEvaluation& ev : evaluations) {
      const NodeAgent& agent = ev.agent;
      if (!agent.decision) continue;
      if (staleness_check(agent, registry, options.freq_epsilon) == Freshness::Stale) {
        log(agent.node_id, "stale", {{"island", *agent.decision}});
        continue;
      }
      Island& island = registry.island(*agent.decision);
      island.nodes.insert(agent.node_id);
      assigned.insert(agent.node_id);
      publish_one(network, registry, island, options, cache);
      nlohmann::json payload{{"island", *agent.decision}, {"rule", decision_rule(agent)}};
      if (agent.snapshot_freqs.contains(*agent.decision)) {
        payload["omega"] = agent.watched_omega;
        payload["watch_horizon"] = agent.watch_horizon;
      }
      log(agent.node_id, "join", std::move(payload));
      progress = true;
    }

    if (progress) {
      idle_rounds = 0;
      continue;
    }
    if (++idle_rounds < options.max_idle_rounds) continue;

    std::vector<BusId> blocked(frontier);
    std::sort(blocked.begin(), blocked.end());
    if (!options.allow_fallback) {
      throw StalledError(registry.round, blocked,
                         "no agent can join: every bordering island is in deficit for the waiting loads");
    }
    // Fallback: the lowest-id blocked node joins the bordering island with
    // the largest imbalance. This is a supervisory step, so it reads the true
    // imbalance rather than the agent's estimates.
    const AgentEvaluation* pick = nullptr;
    for (const AgentEvaluation& ev : evaluations) {
      if (!pick || ev.agent.node_id < pick->agent.node_id) pick = &ev;
    }
    int target = *pick->agent.neighbor_islands.begin();
    double best = -std::numeric_limits<double>::infinity();
    for (int label : pick->agent.neighbor_islands) {
      const double power = island_imbalance(network, registry.island(label));
      if (power > best) {
        best = power;
        target = label;
      }
    }
    spdlog::warn("decentralized partition stalled in round {}; attaching bus {} to island {}", registry.round,
                 pick->agent.node_id, target);
    Island& island = registry.island(target);
    island.nodes.insert(pick->agent.node_id);
    assigned.insert(pick->agent.node_id);
    publish_one(network, registry, island, options, cache);
    log(pick->agent.node_id, "join", {{"island", target}, {"rule", "fallback"}, {"warning", "stalled"}});
    result.fallback_fired = true;
    idle_rounds = 0;
  }

  result.rounds = registry.round;
  result.partition = make_partition(network, registry.islands);
  return result;
}

nlohmann::json event_log_to_json(const std::vector<AgentEvent>& events) {
  nlohmann::json out = nlohmann::json::array();
  for (const AgentEvent& e : events) {
    out.push_back({{"round", e.round}, {"node", e.node}, {"action", e.action}, {"payload", e.payload}});
  }
  return out;
}

}  // namespace grid_islander
