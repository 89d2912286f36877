#pragma once

#include <algorithm>
#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "grid_islander/grid_model.hpp"
#include "grid_islander/kuramoto.hpp"

namespace grid_islander::testing {

inline std::filesystem::path data_dir() { return GRID_ISLANDER_DATA_DIR; }
inline std::filesystem::path fixture_dir() { return GRID_ISLANDER_FIXTURE_DIR; }

struct EdgeSpec {
  BusId a;
  BusId b;
  double r = 0.0;
  double x = 0.1;
};

/// Buses 1..n; injections in per-unit on a 100 MVA base. Positive injections
/// become generation, negative ones demand. `generators` marks V_gen.
inline PowerNetwork make_network(const std::vector<double>& injection_pu, const std::vector<EdgeSpec>& edges,
                                 const std::set<BusId>& generators = {}) {
  std::vector<Bus> buses;
  for (std::size_t k = 0; k < injection_pu.size(); ++k) {
    Bus b;
    b.id = static_cast<BusId>(k + 1);
    const double mw = injection_pu[k] * 100.0;
    if (mw >= 0.0) {
      b.p_gen_scheduled = mw;
    } else {
      b.p_demand = -mw;
    }
    b.kind = generators.contains(b.id) ? BusKind::Generator : BusKind::Load;
    b.voltage_controlled = b.kind == BusKind::Generator;
    buses.push_back(b);
  }
  std::vector<Branch> branches;
  for (const EdgeSpec& e : edges) {
    Branch br;
    br.from_bus = e.a;
    br.to_bus = e.b;
    br.resistance = e.r;
    br.reactance = e.x;
    branches.push_back(br);
  }
  return PowerNetwork(std::move(buses), std::move(branches), 100.0);
}

inline PowerNetwork path_graph(int n, const std::vector<double>& injection_pu = {}) {
  std::vector<EdgeSpec> edges;
  for (int i = 1; i < n; ++i) edges.push_back({i, i + 1});
  std::vector<double> p = injection_pu;
  p.resize(static_cast<std::size_t>(n), 0.0);
  return make_network(p, edges);
}

/// Random connected graph: a random spanning tree plus extra edges.
struct RandomGraph {
  int n = 0;
  std::vector<std::pair<BusId, BusId>> edges;
};

inline RandomGraph random_connected_graph(std::mt19937_64& rng, int n, double extra_edge_probability) {
  RandomGraph g;
  g.n = n;
  std::set<std::pair<BusId, BusId>> seen;
  for (int v = 2; v <= n; ++v) {
    std::uniform_int_distribution<int> parent(1, v - 1);
    const int u = parent(rng);
    seen.emplace(u, v);
  }
  std::bernoulli_distribution extra(extra_edge_probability);
  for (int a = 1; a <= n; ++a) {
    for (int b = a + 1; b <= n; ++b) {
      if (!seen.contains({a, b}) && extra(rng)) seen.emplace(a, b);
    }
  }
  g.edges.assign(seen.begin(), seen.end());
  return g;
}

inline PowerNetwork network_from_graph(const RandomGraph& g, const std::vector<double>& injection_pu,
                                       std::mt19937_64& rng, const std::set<BusId>& generators = {}) {
  std::uniform_real_distribution<double> reactance(0.05, 0.5);
  std::vector<EdgeSpec> edges;
  for (const auto& [a, b] : g.edges) edges.push_back({a, b, 0.0, reactance(rng)});
  return make_network(injection_pu, edges, generators);
}

inline std::vector<double> uniform_vector(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

/// Layer with explicit frequencies and couplings over nodes 1..n.
inline CyberLayer make_layer(const std::vector<double>& freq,
                             const std::vector<std::tuple<std::size_t, std::size_t, double>>& couplings) {
  std::vector<BusId> ids;
  for (std::size_t k = 0; k < freq.size(); ++k) ids.push_back(static_cast<BusId>(k + 1));
  std::vector<CouplingEdge> edges;
  for (const auto& [a, b, w] : couplings) edges.push_back({a, b, w});
  return CyberLayer(ids, freq, edges);
}

}  // namespace grid_islander::testing
