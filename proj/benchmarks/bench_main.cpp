#include <benchmark/benchmark.h>

#include <algorithm>
#include <filesystem>
#include <set>
#include <vector>

#include "grid_islander/centralized.hpp"
#include "grid_islander/decentralized.hpp"
#include "grid_islander/kuramoto.hpp"
#include "grid_islander/matpower.hpp"
#include "grid_islander/powerflow.hpp"

using namespace grid_islander;

namespace {

const std::filesystem::path kScenario = std::filesystem::path(GRID_ISLANDER_DATA_DIR) / "ieee118_scenario.json";

struct Fixture {
  ScenarioConfig config = load_scenario_config(kScenario);
  PowerNetwork network = load_scenario_network(config);
  std::vector<Island> initial;

  Fixture() {
    for (std::size_t k = 0; k < config.initial_islands.size(); ++k) {
      const NodeSet seeds(config.initial_islands[k].begin(), config.initial_islands[k].end());
      initial.push_back(complete_island(network, seeds, static_cast<int>(k + 1)));
    }
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

std::vector<std::pair<BusId, BusId>> edges_of(const PowerNetwork& net) {
  std::set<std::pair<BusId, BusId>> seen;
  for (const Branch& b : net.branches()) {
    if (b.in_service) seen.emplace(std::min(b.from_bus, b.to_bus), std::max(b.from_bus, b.to_bus));
  }
  return {seen.begin(), seen.end()};
}

void BM_Rhs118(benchmark::State& state) {
  const CyberLayer layer = build_layer(fixture().network, fixture().network.all_nodes());
  const std::vector<double> theta = run_initial_conditions(layer.size(), 1, 0);
  std::vector<double> dtheta(layer.size());
  for (auto _ : state) {
    layer.rhs(theta, dtheta);
    benchmark::DoNotOptimize(dtheta.data());
  }
}
BENCHMARK(BM_Rhs118);

void BM_IntegrateOneRun118(benchmark::State& state) {
  const CyberLayer layer = build_layer(fixture().network, fixture().network.all_nodes());
  const std::vector<double> theta = run_initial_conditions(layer.size(), 1, 0);
  for (auto _ : state) {
    double last = 0.0;
    integrate_streaming(layer, theta, 100.0, 0.01, [&](const PhaseState& s) { last = s.phases[0]; });
    benchmark::DoNotOptimize(last);
  }
  state.SetLabel("10000 RK4 steps");
}
BENCHMARK(BM_IntegrateOneRun118)->Unit(benchmark::kMillisecond);

void BM_EnsembleSyncTimes118(benchmark::State& state) {
  const CyberLayer layer = build_layer(fixture().network, fixture().network.all_nodes());
  const auto edges = edges_of(fixture().network);
  EnsembleOptions o;
  o.n_runs = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(ensemble_sync_times(layer, edges, o));
}
BENCHMARK(BM_EnsembleSyncTimes118)->Arg(1)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_AcPowerFlow118(benchmark::State& state) {
  const PowerNetwork& net = fixture().network;
  const NodeSet all = net.all_nodes();
  const BusId slack = select_slack(net, all);
  for (auto _ : state) benchmark::DoNotOptimize(ac_power_flow(net, all, slack));
}
BENCHMARK(BM_AcPowerFlow118)->Unit(benchmark::kMillisecond);

void BM_DcPowerFlow118(benchmark::State& state) {
  const PowerNetwork& net = fixture().network;
  const BusId slack = select_slack(net, net.all_nodes());
  for (auto _ : state) benchmark::DoNotOptimize(dc_power_flow(net, slack));
}
BENCHMARK(BM_DcPowerFlow118)->Unit(benchmark::kMillisecond);

void BM_CentralizedPartition118(benchmark::State& state) {
  const CyberLayer layer = build_layer(fixture().network, fixture().network.all_nodes());
  EnsembleOptions o;
  o.n_runs = 2;
  const SyncTimeTable times = ensemble_sync_times(layer, edges_of(fixture().network), o);
  for (auto _ : state) benchmark::DoNotOptimize(centralized_partition(fixture().network, fixture().initial, times));
}
BENCHMARK(BM_CentralizedPartition118)->Unit(benchmark::kMicrosecond);

void BM_DecentralizedAnalytic118(benchmark::State& state) {
  const DecentralizedOptions o = DecentralizedOptions::from_config(fixture().config);
  for (auto _ : state) benchmark::DoNotOptimize(decentralized_partition(fixture().network, fixture().initial, o));
}
BENCHMARK(BM_DecentralizedAnalytic118)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
