#include <gtest/gtest.h>

#include "expect_error.hpp"
#include "grid_islander/centralized.hpp"
#include "grid_islander/decentralized.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace grid_islander;
using namespace grid_islander::testing;

namespace {

// Islands {1,3} and {2,5}; bus 4 is a load bordering both.
PowerNetwork two_island_instance() {
  return make_network({1.0, 0.6, 0.5, -0.3, -0.2}, {{1, 3}, {2, 5}, {3, 4}, {4, 5}}, {1, 2});
}

NodeAgent agent_with(double injection, std::set<int> islands) {
  NodeAgent a;
  a.node_id = 9;
  a.injection = injection;
  a.neighbor_islands = std::move(islands);
  return a;
}

DecentralizedOptions analytic() { return DecentralizedOptions{}; }

DecentralizedOptions simulated() {
  DecentralizedOptions o;
  o.mode = FrequencyMode::Simulated;
  o.t_max = 60.0;
  return o;
}

struct Instance {
  PowerNetwork network;
  std::vector<Island> initial;
};

// Small connected grids with strong lines and a generator seeding each island.
Instance random_instance(std::mt19937_64& rng, int n, int n_islands) {
  const RandomGraph g = random_connected_graph(rng, n, 0.25);
  std::vector<double> p = uniform_vector(rng, static_cast<std::size_t>(n), -0.5, 0.5);
  std::vector<Island> initial = random_seed_islands(rng, n, n_islands);
  std::set<BusId> gens;
  for (const Island& i : initial) {
    const BusId seed = *i.nodes.begin();
    gens.insert(seed);
    p[static_cast<std::size_t>(seed - 1)] = std::abs(p[static_cast<std::size_t>(seed - 1)]) + 0.5;
  }
  return {network_from_graph(g, p, rng, gens), initial};
}

PowerNetwork with_injections(const PowerNetwork& net, const std::map<BusId, double>& injection_pu) {
  std::vector<Bus> buses = net.buses();
  for (Bus& b : buses) {
    const auto it = injection_pu.find(b.id);
    if (it == injection_pu.end()) continue;
    b.p_gen_scheduled = std::max(it->second, 0.0) * net.base_mva();
    b.p_demand = std::max(-it->second, 0.0) * net.base_mva();
  }
  return PowerNetwork(std::move(buses), net.branches(), net.base_mva());
}

}  // namespace

TEST(EstimateIslandPower, RecoversImbalanceAndSize) {
  const IslandEstimate a = estimate_island_power(0.5, 1.0 / 6.0, -0.5);
  EXPECT_NEAR(a.power, 1.0, 1e-12);
  EXPECT_NEAR(a.size, 2.0, 1e-12);
  const IslandEstimate b = estimate_island_power(1.0, 0.5, -0.5);
  EXPECT_NEAR(b.power, 2.0, 1e-12);
  EXPECT_NEAR(b.size, 2.0, 1e-12);
}

TEST(EstimateIslandPower, DegenerateAndBalancedIslands) {
  EXPECT_ERROR_KIND(estimate_island_power(0.5, 0.5, 0.5), ErrorKind::DegenerateEstimate);
  EXPECT_ERROR_KIND(estimate_island_imbalance(0.5, 0.5 + 1e-12, 0.5), ErrorKind::DegenerateEstimate);
  // Island {1, −1} with a −0.4 load: ω = 0, ω' = −0.4/3.
  EXPECT_ERROR_KIND(estimate_island_power(0.0, -0.4 / 3.0, -0.4), ErrorKind::UndefinedSize);
  EXPECT_DOUBLE_EQ(estimate_island_imbalance(0.0, -0.4 / 3.0, -0.4), 0.0);
}

TEST(EstimateIslandPower, AgreesWithLinearSystemOracle) {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 500; ++trial) {
    const auto n = static_cast<std::size_t>(2 + trial % 11);
    const std::vector<double> p = uniform_vector(rng, n + 1, -2.0, 2.0);
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) total += p[k];
    const double omega = total / static_cast<double>(n);
    const double omega_aug = (total + p[n]) / static_cast<double>(n + 1);
    const auto [power, size] = estimator_oracle(omega, omega_aug, p[n]);
    const IslandEstimate est = estimate_island_power(omega, omega_aug, p[n]);
    EXPECT_NEAR(est.power, power, 1e-9 * std::max(1.0, std::abs(power)));
    EXPECT_NEAR(est.size, size, 1e-9 * size);
  }
}

TEST(AgentDecide, LoadAndGeneratorRules) {
  EXPECT_EQ(agent_decide(agent_with(-0.2, {1, 2}), {{1, 1.0}, {2, 0.3}}), 1);
  EXPECT_EQ(agent_decide(agent_with(-0.2, {1, 2}), {{1, -0.2}, {2, -0.5}}), std::nullopt);
  EXPECT_EQ(agent_decide(agent_with(0.4, {1, 2}), {{1, 1.0}, {2, 0.3}}), 2);
  EXPECT_EQ(agent_decide(agent_with(0.4, {1, 2}), {{1, -1.0}, {2, 0.3}}), 1);
  // Zero injection counts as a generator.
  EXPECT_EQ(agent_decide(agent_with(0.0, {1, 2}), {{1, 1.0}, {2, 0.3}}), 2);
}

TEST(AgentDecide, TiesGoToLowestLabel) {
  EXPECT_EQ(agent_decide(agent_with(-0.2, {1, 2, 3}), {{1, 0.1}, {2, 0.5}, {3, 0.5}}), 2);
  EXPECT_EQ(agent_decide(agent_with(0.2, {1, 2, 3}), {{1, 0.1}, {2, 0.1}, {3, 0.5}}), 1);
}

TEST(AgentDecide, EnclosureBeatsEstimates) {
  NodeAgent a = agent_with(-0.2, {2});
  a.enclosing_island = 2;
  EXPECT_EQ(agent_decide(a, {{2, -5.0}}), 2);
  EXPECT_EQ(agent_decide(a, {}), 2);
}

TEST(AgentDecide, IgnoresEstimatesForIslandsItDoesNotBorder) {
  EXPECT_EQ(agent_decide(agent_with(-0.2, {2}), {{1, 9.0}, {2, 0.3}}), 2);
}

TEST(StalenessCheck, Examples) {
  NodeAgent a = agent_with(-0.2, {1});
  a.snapshot_freqs[1] = {0.5, 0.0};
  IslandRegistry reg;
  reg.island_freq[1] = 0.5004;
  EXPECT_EQ(staleness_check(a, reg, 1e-3), Freshness::Fresh);
  reg.island_freq[1] = 0.6;
  EXPECT_EQ(staleness_check(a, reg, 1e-3), Freshness::Stale);
  reg.island_freq[1] = 0.5;
  EXPECT_EQ(staleness_check(a, reg, 1e-3), Freshness::Fresh);
  reg.island_freq.erase(1);
  EXPECT_EQ(staleness_check(a, reg, 1e-3), Freshness::Stale);
}

TEST(DecentralizedPartition, LoadJoinsIslandWithLargerSurplus) {
  const PowerNetwork net = two_island_instance();
  const std::vector<Island> initial{{{1, 3}, 1}, {{2, 5}, 2}};
  ASSERT_GT(island_imbalance(net, initial[0]), island_imbalance(net, initial[1]));
  ASSERT_GT(island_imbalance(net, initial[1]), 0.0);
  for (const DecentralizedOptions& o : {analytic(), simulated()}) {
    const DecentralizedResult r = decentralized_partition(net, initial, o);
    EXPECT_EQ(r.rounds, 1u);
    EXPECT_FALSE(r.fallback_fired);
    EXPECT_EQ(r.partition.island_of(4), 1);
    EXPECT_TRUE(validate_partition(net, r.partition).ok());
  }
}

TEST(DecentralizedPartition, EnclosedGeneratorJoinsInFirstRound) {
  const PowerNetwork net = make_network({0.5, 0.3}, {{1, 2}}, {1, 2});
  const DecentralizedResult r = decentralized_partition(net, {{{1}, 1}}, analytic());
  EXPECT_EQ(r.rounds, 1u);
  const auto join = std::find_if(r.events.begin(), r.events.end(), [](const AgentEvent& e) { return e.action == "join"; });
  ASSERT_NE(join, r.events.end());
  EXPECT_EQ(join->node, 2);
  EXPECT_EQ(join->round, 1u);
  EXPECT_EQ(join->payload.at("rule"), "enclosure");
}

TEST(DecentralizedPartition, WaitingLoadStallsOrFallsBack) {
  // Island {1} is in deficit, so load 2 keeps waiting.
  const PowerNetwork net = make_network({-0.1, -0.5, 0.2}, {{1, 2}, {2, 3}}, {3});
  DecentralizedOptions o = analytic();
  o.allow_fallback = false;
  try {
    decentralized_partition(net, {{{1}, 1}}, o);
    FAIL() << "expected StalledError";
  } catch (const StalledError& e) {
    EXPECT_EQ(e.round(), 3u);
    EXPECT_EQ(e.blocked(), std::vector<int>{2});
  }
  const DecentralizedResult r = decentralized_partition(net, {{{1}, 1}}, analytic());
  EXPECT_TRUE(r.fallback_fired);
  EXPECT_EQ(r.partition.islands[0].nodes, (NodeSet{1, 2, 3}));
}

TEST(DecentralizedPartition, DisconnectedGridStalls) {
  const PowerNetwork net = make_network({0.5, -0.1, 0.2}, {{1, 2}}, {1, 3});
  EXPECT_ERROR_KIND(decentralized_partition(net, {{{1}, 1}}, analytic()), ErrorKind::Stalled);
}

TEST(DecentralizedPartition, InitialIslandErrors) {
  const PowerNetwork net = two_island_instance();
  EXPECT_ERROR_KIND(decentralized_partition(net, {{{1, 3}, 1}, {{3, 4}, 2}}, analytic()),
                    ErrorKind::InitialIslandsOverlap);
  EXPECT_ERROR_KIND(decentralized_partition(net, {{{1, 4}, 1}, {{2}, 2}}, analytic()), ErrorKind::ConfigError);
  EXPECT_ERROR_KIND(decentralized_partition(net, {{{1}, 1}, {{2}, 1}}, analytic()), ErrorKind::ConfigError);
}

TEST(DecentralizedPartition, EventLogSchema) {
  const DecentralizedResult r = decentralized_partition(two_island_instance(), {{{1, 3}, 1}, {{2, 5}, 2}}, analytic());
  const nlohmann::json log = event_log_to_json(r.events);
  ASSERT_FALSE(log.empty());
  const std::set<std::string> actions{"snapshot", "estimate", "join", "wait", "stale"};
  for (const auto& e : log) {
    EXPECT_TRUE(e.at("round").is_number_unsigned());
    EXPECT_TRUE(e.at("node").is_number_integer());
    EXPECT_TRUE(actions.contains(e.at("action").get<std::string>()));
    EXPECT_TRUE(e.at("payload").is_object());
  }
  EXPECT_EQ(log[0].at("action"), "snapshot");
}

TEST(DecentralizedPartition, ShuffledScheduleIsStillDeterministic) {
  std::mt19937_64 rng(59);
  const Instance inst = random_instance(rng, 10, 2);
  DecentralizedOptions o = analytic();
  o.shuffle_schedule = true;
  o.seed = 5;
  const DecentralizedResult a = decentralized_partition(inst.network, inst.initial, o);
  const DecentralizedResult b = decentralized_partition(inst.network, inst.initial, o);
  EXPECT_EQ(a.partition, b.partition);
  EXPECT_EQ(event_log_to_json(a.events), event_log_to_json(b.events));
}

TEST(DecentralizedProperty, AnalyticEstimatesAreExact) {
  std::mt19937_64 rng(61);
  std::size_t audited = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const Instance inst = random_instance(rng, 5 + trial % 8, 2 + trial % 2);
    const DecentralizedResult r = decentralized_partition(inst.network, inst.initial, analytic());
    for (const EstimateAudit& a : r.audits) {
      EXPECT_NEAR(a.estimated_power, a.true_power, 1e-9 * std::max(1.0, std::abs(a.true_power)));
      if (a.estimated_size) {
        EXPECT_NEAR(*a.estimated_size, a.true_size, 1e-9 * a.true_size);
      }
      ++audited;
    }
  }
  EXPECT_GT(audited, 100u);
}

TEST(DecentralizedProperty, LayersPerRoundBound) {
  std::mt19937_64 rng(67);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 5 + trial % 8;
    const int n_mu = 2 + trial % 2;
    const Instance inst = random_instance(rng, n, n_mu);
    const DecentralizedResult r = decentralized_partition(inst.network, inst.initial, analytic());
    ASSERT_EQ(r.layers_per_round.size(), r.rounds);
    for (std::size_t layers : r.layers_per_round) {
      EXPECT_LE(layers, static_cast<std::size_t>(n_mu + n_mu * (n - n_mu)));
    }
    if (!r.fallback_fired) {
      EXPECT_TRUE(validate_partition(inst.network, r.partition).ok());
    }
  }
}

TEST(DecentralizedProperty, SimulatedEstimatesStayWithinTolerance) {
  std::mt19937_64 rng(71);
  const DecentralizedOptions o = simulated();
  std::size_t audited = 0;
  for (int trial = 0; trial < 12; ++trial) {
    const Instance inst = random_instance(rng, 4 + trial % 5, 2);
    const DecentralizedResult r = decentralized_partition(inst.network, inst.initial, o);
    for (const EstimateAudit& a : r.audits) {
      EXPECT_LE(std::abs(a.estimated_power - a.true_power), 10.0 * o.sync_tolerance * a.true_size)
          << "trial " << trial << " node " << a.node;
      ++audited;
    }
  }
  EXPECT_GT(audited, 20u);
}

TEST(DecentralizedProperty, DecisionsIgnoreNonNeighbourIslands) {
  std::mt19937_64 rng(73);
  std::size_t checked = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const Instance inst = random_instance(rng, 8 + trial % 5, 3);
    IslandRegistry reg;
    reg.islands = inst.initial;
    LayerCache cache;
    publish_island_frequencies(inst.network, reg, analytic(), cache);
    reg.round = 1;

    for (BusId node : inst.network.bus_ids()) {
      if (reg.islands[0].contains(node) || reg.islands[1].contains(node) || reg.islands[2].contains(node)) continue;
      const AgentEvaluation base = evaluate_agent(inst.network, reg, node, analytic(), cache);
      for (const Island& other : reg.islands) {
        if (base.agent.neighbor_islands.contains(other.label)) continue;
        // Scramble the island's injections and its published frequency.
        std::map<BusId, double> scrambled;
        for (BusId v : other.nodes) scrambled[v] = std::uniform_real_distribution<double>(-3.0, 3.0)(rng);
        const PowerNetwork perturbed = with_injections(inst.network, scrambled);
        IslandRegistry reg2 = reg;
        reg2.island_freq[other.label] += 7.0;
        for (auto& [id, w] : reg2.node_freq[other.label]) w -= 3.0;
        LayerCache cache2;
        const AgentEvaluation after = evaluate_agent(perturbed, reg2, node, analytic(), cache2);
        EXPECT_EQ(after.agent.decision, base.agent.decision);
        EXPECT_EQ(after.estimates, base.estimates);
        EXPECT_EQ(staleness_check(after.agent, reg2, 1e-3), staleness_check(base.agent, reg, 1e-3));
        ++checked;
      }
    }
  }
  EXPECT_GT(checked, 50u);
}
