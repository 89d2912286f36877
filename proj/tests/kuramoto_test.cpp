#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "expect_error.hpp"
#include "grid_islander/kuramoto.hpp"
#include "grid_islander/matpower.hpp"
#include "support.hpp"

using namespace grid_islander;
using namespace grid_islander::testing;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

CyberLayer pair_layer(double p, double coupling) { return make_layer({p, -p}, {{0, 1, coupling}}); }

std::vector<double> final_phases(const CyberLayer& layer, const std::vector<double>& initial, double t_max,
                                 double dt) {
  return integrate(layer, initial, t_max, dt).back().phases;
}

EnsembleOptions small_ensemble(double t_max) {
  EnsembleOptions o;
  o.n_runs = 8;
  o.seed = 11;
  o.t_max = t_max;
  o.dt = 0.01;
  return o;
}

}  // namespace

TEST(BuildLayer, Ieee118AfterFault) {
  const ScenarioConfig config = load_scenario_config(data_dir() / "ieee118_scenario.json");
  const PowerNetwork net = load_scenario_network(config);
  const CyberLayer layer = build_layer(net, net.all_nodes());
  EXPECT_EQ(layer.size(), 118u);
  // 185 circuits, seven of which run in parallel to another one.
  EXPECT_EQ(layer.coupling_nonzeros(), 356u);
  double total = 0.0;
  for (double p : layer.natural_frequency()) total += p;
  EXPECT_NEAR(total, (4377.4 - 4242.0) / 100.0, 1e-12);
}

TEST(BuildLayer, InducedSubgraphOnly) {
  const PowerNetwork net = path_graph(3, {1.0, 0.0, -1.0});
  const CyberLayer layer = build_layer(net, {1, 3});
  EXPECT_EQ(layer.size(), 2u);
  EXPECT_TRUE(layer.edges().empty());
  EXPECT_DOUBLE_EQ(layer.coupling(1, 3), 0.0);

  const CyberLayer single = build_layer(net, {2});
  EXPECT_EQ(single.size(), 1u);
  EXPECT_ERROR_KIND(build_layer(net, {}), ErrorKind::EmptyLayer);
}

TEST(BuildLayer, ParallelCircuitsAddUp) {
  const PowerNetwork net = make_network({0.5, -0.5}, {{1, 2, 0.0, 0.1}, {1, 2, 0.0, 0.2}});
  const CyberLayer layer = build_layer(net, net.all_nodes());
  ASSERT_EQ(layer.edges().size(), 1u);
  EXPECT_NEAR(layer.coupling(1, 2), 10.0 + 5.0, 1e-12);
  EXPECT_NEAR(layer.coupling(2, 1), 15.0, 1e-12);
}

TEST(Integrate, TwoNodeLockedPhaseDifference) {
  const CyberLayer layer = pair_layer(0.1, 1.0);
  const std::vector<double> theta = final_phases(layer, {0.0, 0.0}, 50.0, 0.01);
  EXPECT_NEAR(theta[0] - theta[1], std::asin(0.1), 1e-9);
  EXPECT_NEAR(theta[0] - theta[1], 0.10017, 1e-5);
}

TEST(Integrate, EquilibriumStaysPut) {
  const CyberLayer layer = make_layer({0.0, 0.0, 0.0}, {{0, 1, 1.0}, {1, 2, 2.0}});
  const Trajectory traj = integrate(layer, std::vector<double>{0.0, 0.0, 0.0}, 5.0, 0.01);
  EXPECT_EQ(traj.size(), step_count(5.0, 0.01) + 1);
  for (double th : traj.back().phases) EXPECT_EQ(th, 0.0);
}

TEST(Integrate, UncoupledNodeDrifts) {
  const CyberLayer layer = make_layer({0.5}, {});
  const Trajectory traj = integrate(layer, std::vector<double>{0.0}, 2.0, 0.01);
  EXPECT_NEAR(traj.back().time, 2.0, 1e-12);
  EXPECT_NEAR(traj.back().phases[0], 1.0, 1e-12);
  EXPECT_NEAR(traj.back().frequencies[0], 0.5, 1e-15);
}

TEST(Integrate, DivergenceIsReported) {
  const CyberLayer layer = make_layer({1e308, -1e308}, {{0, 1, 1.0}});
  EXPECT_ERROR_KIND(integrate(layer, std::vector<double>{0.0, 0.0}, 10.0, 1.0), ErrorKind::NumericalDivergence);
}

TEST(Integrate, StreamingMatchesStored) {
  const CyberLayer layer = make_layer({0.3, -0.1, -0.2}, {{0, 1, 0.7}, {1, 2, 1.1}});
  const std::vector<double> init{0.4, -0.2, 1.0};
  const Trajectory stored = integrate(layer, init, 3.0, 0.05);
  std::size_t k = 0;
  integrate_streaming(layer, init, 3.0, 0.05, [&](const PhaseState& s) {
    ASSERT_LT(k, stored.size());
    EXPECT_EQ(s.time, stored[k].time);
    EXPECT_EQ(s.phases, stored[k].phases);
    ++k;
  });
  EXPECT_EQ(k, stored.size());
}

TEST(InitialConditions, RangeMeanAndDeterminism) {
  const std::vector<double> theta = sample_initial_conditions(10000, 5);
  for (double t : theta) {
    EXPECT_GT(t, -std::numbers::pi / 2);
    EXPECT_LE(t, std::numbers::pi / 2);
  }
  const double mean = std::accumulate(theta.begin(), theta.end(), 0.0) / 10000.0;
  EXPECT_LT(std::abs(mean), 0.05);
  EXPECT_EQ(sample_initial_conditions(10000, 5), theta);
  EXPECT_NE(sample_initial_conditions(10000, 6), theta);
  EXPECT_EQ(run_initial_conditions(7, 5, 3), run_initial_conditions(7, 5, 3));
  EXPECT_NE(run_initial_conditions(7, 5, 3), run_initial_conditions(7, 5, 4));
}

TEST(OrderParameter, IdenticalAndOpposedPhases) {
  EnsembleResult e;
  e.node_ids = {1, 2, 3};
  e.times = {0.0, 0.5, 1.0};
  e.phases = {{0.0, 0.0, std::numbers::pi, 0, 0, 0, 0, 0, 0}, {1.0, 1.0, 1.0 + std::numbers::pi, 0, 0, 0, 0, 0, 0}};
  EXPECT_NEAR(order_parameter(e, 1, 2, 0.0), 1.0, 1e-15);
  EXPECT_NEAR(order_parameter(e, 1, 3, 0.0), -1.0, 1e-15);
  EXPECT_NEAR(order_parameter(e, 3, 1, 0.0), -1.0, 1e-15);
  EXPECT_ERROR_KIND(order_parameter(e, 1, 2, 0.25), ErrorKind::GridError);
  EXPECT_ERROR_KIND(order_parameter(e, 1, 9, 0.0), ErrorKind::NotFound);
}

TEST(OrderParameter, SingleRunIsCosineOfDifference) {
  const CyberLayer layer = make_layer({0.2, -0.1, -0.1}, {{0, 1, 0.5}, {1, 2, 0.5}});
  EnsembleOptions o = small_ensemble(2.0);
  o.n_runs = 1;
  const EnsembleResult e = run_ensemble(layer, o);
  for (std::size_t step : {std::size_t{0}, std::size_t{77}, std::size_t{200}}) {
    const double t = e.times[step];
    EXPECT_EQ(order_parameter(e, 1, 3, t), std::cos(e.phase(0, step, 0) - e.phase(0, step, 2)));
  }
}

TEST(SyncTimes, LockedPairWithSmallPhaseGap) {
  const EnsembleResult e = run_ensemble(pair_layer(0.1, 1.0), small_ensemble(30.0));
  const SyncTimeTable table = sync_times(e, {{1, 2}}, 0.99);
  const double t = table.at(1, 2);
  EXPECT_TRUE(std::isfinite(t));
  EXPECT_GT(t, 0.0);
  // The definition: above threshold from t onward, not at the step before.
  EXPECT_GT(order_parameter(e, 1, 2, t), 0.99);
  EXPECT_LE(order_parameter(e, 1, 2, t - 0.01), 0.99);
  EXPECT_EQ(table.at(2, 1), t);
}

TEST(SyncTimes, LockedButTooFarApartNeverCounts) {
  // Locks at Δθ = π/6, where cos Δθ ≈ 0.866 stays below the threshold.
  const EnsembleResult e = run_ensemble(pair_layer(0.5, 1.0), small_ensemble(30.0));
  EXPECT_EQ(sync_times(e, {{1, 2}}).at(1, 2), kInf);
}

TEST(SyncTimes, StrongerCouplingSynchronizesSooner) {
  const double slow = sync_times(run_ensemble(pair_layer(0.0, 1.0), small_ensemble(30.0)), {{1, 2}}).at(1, 2);
  const double fast = sync_times(run_ensemble(pair_layer(0.0, 10.0), small_ensemble(30.0)), {{1, 2}}).at(1, 2);
  EXPECT_TRUE(std::isfinite(slow));
  EXPECT_LT(fast, slow);
}

TEST(SyncTimes, StreamingEnsembleAgreesWithStoredEnsemble) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const RandomGraph g = random_connected_graph(rng, 6, 0.3);
    std::vector<double> p = uniform_vector(rng, 6, -0.3, 0.3);
    const PowerNetwork net = network_from_graph(g, p, rng);
    const CyberLayer layer = build_layer(net, net.all_nodes());
    const EnsembleOptions o = small_ensemble(10.0);
    EXPECT_EQ(ensemble_sync_times(layer, g.edges, o), sync_times(run_ensemble(layer, o), g.edges)) << trial;
  }
}

TEST(SyncTimes, UnknownEdgeLookup) {
  SyncTimeTable table;
  table.set(2, 1, 3.0);
  EXPECT_TRUE(table.contains(1, 2));
  EXPECT_EQ(table.at(1, 2), 3.0);
  EXPECT_ERROR_KIND(table.at(1, 3), ErrorKind::NotFound);
}

TEST(SyncFrequency, MeanNaturalFrequency) {
  EXPECT_DOUBLE_EQ(sync_frequency(make_layer({0.1, -0.1}, {{0, 1, 1.0}})), 0.0);
  EXPECT_DOUBLE_EQ(sync_frequency(make_layer({1.5, -0.5}, {{0, 1, 50.0}})), 0.5);
  EXPECT_DOUBLE_EQ(sync_frequency(make_layer({0.3}, {})), 0.3);
}

TEST(MeasureSyncFrequency, LockedAndDriftingPairs) {
  const FrequencyLock zero = measure_sync_frequency(pair_layer(0.1, 1.0), 50.0, 0.01, 1e-4);
  EXPECT_NEAR(zero.frequency, 0.0, 1e-9);
  EXPECT_LT(zero.lock_time, 45.0);

  const FrequencyLock half = measure_sync_frequency(make_layer({1.5, -0.5}, {{0, 1, 50.0}}), 20.0, 0.01, 1e-4);
  EXPECT_NEAR(half.frequency, 0.5, 1e-6);
  ASSERT_EQ(half.node_frequencies.size(), 2u);
  EXPECT_NEAR(half.node_frequencies[0], 0.5, 1e-4);

  // |P1 − P2| = 6 exceeds 2B: the pair keeps slipping.
  EXPECT_ERROR_KIND(measure_sync_frequency(pair_layer(3.0, 1.0), 50.0, 0.01, 1e-4), ErrorKind::NotSynchronized);
}

TEST(KuramotoProperty, MeanPhaseAdvancesAtMeanFrequency) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 3 + trial % 6;
    const RandomGraph g = random_connected_graph(rng, n, 0.4);
    const PowerNetwork net = network_from_graph(g, uniform_vector(rng, static_cast<std::size_t>(n), -1.0, 1.0), rng);
    const CyberLayer layer = build_layer(net, net.all_nodes());
    const std::vector<double> init = uniform_vector(rng, static_cast<std::size_t>(n), -1.5, 1.5);
    const double t_max = 5.0;
    const std::vector<double> theta = final_phases(layer, init, t_max, 0.01);
    const double mean0 = std::accumulate(init.begin(), init.end(), 0.0) / n;
    const double mean1 = std::accumulate(theta.begin(), theta.end(), 0.0) / n;
    EXPECT_NEAR(mean1, mean0 + sync_frequency(layer) * t_max, 1e-11) << trial;
  }
}

TEST(KuramotoProperty, RotationalInvariance) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 7;
    const RandomGraph g = random_connected_graph(rng, n, 0.5);
    const PowerNetwork net = network_from_graph(g, uniform_vector(rng, static_cast<std::size_t>(n), -1.0, 1.0), rng);
    const CyberLayer layer = build_layer(net, net.all_nodes());
    std::vector<double> init = uniform_vector(rng, static_cast<std::size_t>(n), -1.5, 1.5);
    const double shift = std::uniform_real_distribution<double>(-3.0, 3.0)(rng);
    std::vector<double> shifted = init;
    for (double& x : shifted) x += shift;
    const std::vector<double> a = final_phases(layer, init, 3.0, 0.01);
    const std::vector<double> b = final_phases(layer, shifted, 3.0, 0.01);
    for (int i = 0; i < n; ++i) EXPECT_NEAR(b[static_cast<std::size_t>(i)], a[static_cast<std::size_t>(i)] + shift, 1e-9);
  }
}

TEST(KuramotoProperty, FourthOrderConvergence) {
  const CyberLayer layer = make_layer({0.8, -0.3, -0.5}, {{0, 1, 1.2}, {1, 2, 0.9}, {0, 2, 0.4}});
  const std::vector<double> init{1.2, -0.7, 0.3};
  const std::vector<double> reference = final_phases(layer, init, 2.0, 0.2 / 64);
  auto error = [&](double dt) {
    const std::vector<double> theta = final_phases(layer, init, 2.0, dt);
    double e = 0.0;
    for (std::size_t i = 0; i < 3; ++i) e = std::max(e, std::abs(theta[i] - reference[i]));
    return e;
  };
  const double ratio = error(0.2) / error(0.1);
  EXPECT_GT(ratio, 8.0);
  EXPECT_LT(ratio, 32.0);
}

TEST(KuramotoProperty, OrderParameterIsSymmetricAndBounded) {
  std::mt19937_64 rng(29);
  const RandomGraph g = random_connected_graph(rng, 5, 0.3);
  const PowerNetwork net = network_from_graph(g, uniform_vector(rng, 5, -0.5, 0.5), rng);
  const EnsembleResult e = run_ensemble(build_layer(net, net.all_nodes()), small_ensemble(4.0));
  for (std::size_t step = 0; step < e.times.size(); step += 37) {
    for (BusId i = 1; i <= 5; ++i) {
      for (BusId j = 1; j <= 5; ++j) {
        const double rho = order_parameter(e, i, j, e.times[step]);
        EXPECT_LE(std::abs(rho), 1.0);
        EXPECT_EQ(rho, order_parameter(e, j, i, e.times[step]));
      }
    }
  }
}

TEST(SyncTimesJson, InfinityIsSpelledOut) {
  SyncTimeTable table;
  table.set(1, 2, 3.25);
  table.set(2, 5, kInf);
  const nlohmann::json doc = sync_times_to_json(table);
  EXPECT_EQ(doc.dump(), R"({"edges":[{"i":1,"j":2,"t_sync":3.25},{"i":2,"j":5,"t_sync":"inf"}]})");
  EXPECT_EQ(sync_times_from_json(doc), table);
  EXPECT_ERROR_KIND(sync_times_from_json(nlohmann::json::parse(R"({"edges":[{"i":1,"j":2,"t_sync":"never"}]})")),
                    ErrorKind::SchemaError);
}

TEST(TrajectoryCsv, HeaderAndRows) {
  const CyberLayer layer = make_layer({0.5}, {});
  std::ostringstream out;
  write_trajectory_csv_header(out);
  PhaseState s{1.5, {0.75}, {0.5}};
  append_trajectory_csv(out, layer, s);
  std::istringstream in(out.str());
  std::string header;
  std::string row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "t,node_id,phase,frequency");
  EXPECT_EQ(row.substr(0, 6), "1.5,1,");
}
