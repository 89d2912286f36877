#include "grid_islander/kuramoto.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>

#include "grid_islander/error.hpp"

namespace grid_islander {

namespace {

constexpr double kInfinity = std::numeric_limits<double>::infinity();

std::pair<BusId, BusId> ordered(BusId i, BusId j) { return i < j ? std::pair{i, j} : std::pair{j, i}; }

std::vector<double> draw_uniform_phases(std::size_t n, std::seed_seq& seq) {
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> out(n);
  for (double& x : out) {
    double u = unit(rng);
    while (u >= 1.0) u = unit(rng);
    // u in [0, 1) maps onto (−π/2, π/2].
    x = std::numbers::pi / 2 - std::numbers::pi * u;
  }
  return out;
}

std::uint32_t lo(std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); }
std::uint32_t hi(std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); }

void check_finite(const std::vector<double>& v, double t) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw Error(ErrorKind::NumericalDivergence, "non-finite phase at t = " + std::to_string(t));
    }
  }
}

/// Per-edge running sums of cos(θ_i − θ_j), one slot per grid step.
class CosineAccumulator {
 public:
  CosineAccumulator(const std::vector<BusId>& node_ids, const std::vector<std::pair<BusId, BusId>>& edges,
                    std::size_t n_samples)
      : edges_(edges), n_samples_(n_samples), sums_(edges.size() * n_samples, 0.0) {
    for (const auto& [i, j] : edges) {
      pairs_.emplace_back(find(node_ids, i), find(node_ids, j));
    }
  }

  void add(std::size_t step, std::span<const double> phases) {
    for (std::size_t e = 0; e < pairs_.size(); ++e) {
      sums_[e * n_samples_ + step] += std::cos(phases[pairs_[e].first] - phases[pairs_[e].second]);
    }
  }

  SyncTimeTable finish(std::size_t n_runs, std::span<const double> times, double threshold) const {
    SyncTimeTable table;
    const double scale = 1.0 / static_cast<double>(n_runs);
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      const double* series = sums_.data() + e * n_samples_;
      // Walk back from the horizon while ρ stays above the threshold.
      std::size_t first = n_samples_;
      while (first > 0 && series[first - 1] * scale > threshold) --first;
      table.set(edges_[e].first, edges_[e].second, first == n_samples_ ? kInfinity : times[first]);
    }
    return table;
  }

 private:
  static std::size_t find(const std::vector<BusId>& ids, BusId id) {
    const auto it = std::find(ids.begin(), ids.end(), id);
    if (it == ids.end()) throw Error(ErrorKind::NotFound, "node " + std::to_string(id) + " not in layer");
    return static_cast<std::size_t>(it - ids.begin());
  }

  std::vector<std::pair<BusId, BusId>> edges_;
  std::vector<std::pair<std::size_t, std::size_t>> pairs_;
  std::size_t n_samples_;
  std::vector<double> sums_;
};

std::vector<double> grid_times(std::size_t steps, double dt) {
  std::vector<double> times(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) times[k] = static_cast<double>(k) * dt;
  return times;
}

}  // namespace

CyberLayer::CyberLayer(std::vector<BusId> node_ids, std::vector<double> natural_frequency,
                       std::vector<CouplingEdge> edges, std::string label)
    : node_ids_(std::move(node_ids)), natural_frequency_(std::move(natural_frequency)), label_(std::move(label)) {
  if (node_ids_.empty()) throw Error(ErrorKind::EmptyLayer, "cyberlayer has no nodes");
  if (natural_frequency_.size() != node_ids_.size()) {
    throw Error(ErrorKind::SchemaError, "one natural frequency per node is required");
  }
  for (std::size_t k = 0; k < node_ids_.size(); ++k) {
    if (!index_.emplace(node_ids_[k], k).second) {
      throw Error(ErrorKind::SchemaError, "duplicate node " + std::to_string(node_ids_[k]) + " in layer");
    }
  }
  std::map<std::pair<std::size_t, std::size_t>, double> merged;
  for (CouplingEdge e : edges) {
    if (e.a == e.b || e.a >= size() || e.b >= size()) {
      throw Error(ErrorKind::SchemaError, "coupling edge out of range or on the diagonal");
    }
    if (!(e.weight >= 0.0) || !std::isfinite(e.weight)) {
      throw Error(ErrorKind::SchemaError, "coupling weights must be finite and nonnegative");
    }
    if (e.a > e.b) std::swap(e.a, e.b);
    merged[{e.a, e.b}] += e.weight;
  }
  for (const auto& [key, w] : merged) {
    if (w > 0.0) edges_.push_back({key.first, key.second, w});
  }
}

std::optional<std::size_t> CyberLayer::index_of(BusId id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

double CyberLayer::coupling(BusId i, BusId j) const {
  const auto a = index_of(i);
  const auto b = index_of(j);
  if (!a || !b) throw Error(ErrorKind::NotFound, "node not in layer");
  const auto [lo_idx, hi_idx] = std::minmax(*a, *b);
  for (const CouplingEdge& e : edges_) {
    if (e.a == lo_idx && e.b == hi_idx) return e.weight;
  }
  return 0.0;
}

std::vector<std::pair<BusId, BusId>> CyberLayer::edge_ids() const {
  std::vector<std::pair<BusId, BusId>> out;
  out.reserve(edges_.size());
  for (const CouplingEdge& e : edges_) out.push_back(ordered(node_ids_[e.a], node_ids_[e.b]));
  std::sort(out.begin(), out.end());
  return out;
}

void CyberLayer::rhs(std::span<const double> phases, std::span<double> frequencies) const {
  std::copy(natural_frequency_.begin(), natural_frequency_.end(), frequencies.begin());
  for (const CouplingEdge& e : edges_) {
    const double s = e.weight * std::sin(phases[e.b] - phases[e.a]);
    frequencies[e.a] += s;
    frequencies[e.b] -= s;
  }
}

CyberLayer build_layer(const PowerNetwork& network, const NodeSet& nodes, std::string label) {
  if (nodes.empty()) throw Error(ErrorKind::EmptyLayer, "cannot build a cyberlayer over no nodes");
  std::vector<BusId> ids(nodes.begin(), nodes.end());
  std::vector<double> freq;
  freq.reserve(ids.size());
  std::map<BusId, std::size_t> local;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    freq.push_back(net_injection(network, ids[k]));
    local[ids[k]] = k;
  }
  std::vector<CouplingEdge> edges;
  for (std::size_t idx : internal_branches(network, nodes)) {
    const Branch& br = network.branches()[idx];
    edges.push_back({local[br.from_bus], local[br.to_bus], coupling_susceptance(br)});
  }
  return CyberLayer(std::move(ids), std::move(freq), std::move(edges), std::move(label));
}

std::size_t step_count(double t_max, double dt) {
  if (!(dt > 0.0) || !(t_max >= dt) || !std::isfinite(t_max)) {
    throw Error(ErrorKind::ConfigError, "integration requires dt > 0 and t_max >= dt");
  }
  return static_cast<std::size_t>(std::llround(t_max / dt));
}

void integrate_streaming(const CyberLayer& layer, std::span<const double> initial, double t_max, double dt,
                         const std::function<void(const PhaseState&)>& observer) {
  const std::size_t n = layer.size();
  if (initial.size() != n) throw Error(ErrorKind::SchemaError, "initial phase vector has the wrong size");
  const std::size_t steps = step_count(t_max, dt);

  PhaseState state;
  state.phases.assign(initial.begin(), initial.end());
  state.frequencies.resize(n);
  std::vector<double> k2(n), k3(n), k4(n), probe(n);

  check_finite(state.phases, 0.0);
  layer.rhs(state.phases, state.frequencies);
  observer(state);
  for (std::size_t step = 1; step <= steps; ++step) {
    const std::vector<double>& k1 = state.frequencies;
    for (std::size_t i = 0; i < n; ++i) probe[i] = state.phases[i] + 0.5 * dt * k1[i];
    layer.rhs(probe, k2);
    for (std::size_t i = 0; i < n; ++i) probe[i] = state.phases[i] + 0.5 * dt * k2[i];
    layer.rhs(probe, k3);
    for (std::size_t i = 0; i < n; ++i) probe[i] = state.phases[i] + dt * k3[i];
    layer.rhs(probe, k4);
    for (std::size_t i = 0; i < n; ++i) {
      state.phases[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    state.time = static_cast<double>(step) * dt;
    check_finite(state.phases, state.time);
    layer.rhs(state.phases, state.frequencies);
    observer(state);
  }
}

Trajectory integrate(const CyberLayer& layer, std::span<const double> initial, double t_max, double dt) {
  Trajectory out;
  out.reserve(step_count(t_max, dt) + 1);
  integrate_streaming(layer, initial, t_max, dt, [&](const PhaseState& s) { out.push_back(s); });
  return out;
}

std::vector<double> sample_initial_conditions(std::size_t n, std::uint64_t seed) {
  std::seed_seq seq{lo(seed), hi(seed)};
  return draw_uniform_phases(n, seq);
}

std::vector<double> run_initial_conditions(std::size_t n, std::uint64_t seed, std::size_t run) {
  const auto r = static_cast<std::uint64_t>(run);
  std::seed_seq seq{lo(seed), hi(seed), lo(r), hi(r)};
  return draw_uniform_phases(n, seq);
}

std::size_t EnsembleResult::step_of(double t) const {
  if (times.size() < 2) throw Error(ErrorKind::GridError, "ensemble has no time grid");
  const double dt = times[1] - times[0];
  const double k = std::round(t / dt);
  if (k < 0 || k >= static_cast<double>(times.size()) || std::abs(k * dt - t) > 1e-9 * dt) {
    throw Error(ErrorKind::GridError, "time " + std::to_string(t) + " is not on the sampling grid");
  }
  return static_cast<std::size_t>(k);
}

std::size_t EnsembleResult::node_index(BusId id) const {
  const auto it = std::find(node_ids.begin(), node_ids.end(), id);
  if (it == node_ids.end()) throw Error(ErrorKind::NotFound, "node " + std::to_string(id) + " not in ensemble");
  return static_cast<std::size_t>(it - node_ids.begin());
}

EnsembleResult run_ensemble(const CyberLayer& layer, const EnsembleOptions& options) {
  if (options.n_runs < 1) throw Error(ErrorKind::ConfigError, "ensemble needs at least one run");
  EnsembleResult result;
  result.node_ids = layer.node_ids();
  result.seed = options.seed;
  const std::size_t steps = step_count(options.t_max, options.dt);
  result.times = grid_times(steps, options.dt);
  for (std::size_t run = 0; run < options.n_runs; ++run) {
    std::vector<double> flat;
    flat.reserve((steps + 1) * layer.size());
    const auto initial = run_initial_conditions(layer.size(), options.seed, run);
    integrate_streaming(layer, initial, options.t_max, options.dt, [&](const PhaseState& s) {
      flat.insert(flat.end(), s.phases.begin(), s.phases.end());
    });
    result.phases.push_back(std::move(flat));
  }
  return result;
}

double order_parameter(const EnsembleResult& ensemble, BusId i, BusId j, double t) {
  const std::size_t step = ensemble.step_of(t);
  const std::size_t a = ensemble.node_index(i);
  const std::size_t b = ensemble.node_index(j);
  double sum = 0.0;
  for (std::size_t run = 0; run < ensemble.n_runs(); ++run) {
    sum += std::cos(ensemble.phase(run, step, a) - ensemble.phase(run, step, b));
  }
  return sum / static_cast<double>(ensemble.n_runs());
}

void SyncTimeTable::set(BusId i, BusId j, double t) { entries_[ordered(i, j)] = t; }

double SyncTimeTable::at(BusId i, BusId j) const {
  const auto it = entries_.find(ordered(i, j));
  if (it == entries_.end()) {
    throw Error(ErrorKind::NotFound, "no sync time for edge " + std::to_string(i) + "-" + std::to_string(j));
  }
  return it->second;
}

bool SyncTimeTable::contains(BusId i, BusId j) const { return entries_.contains(ordered(i, j)); }

SyncTimeTable sync_times(const EnsembleResult& ensemble, const std::vector<std::pair<BusId, BusId>>& edges,
                         double threshold) {
  CosineAccumulator acc(ensemble.node_ids, edges, ensemble.times.size());
  const std::size_t n = ensemble.n_nodes();
  for (std::size_t run = 0; run < ensemble.n_runs(); ++run) {
    for (std::size_t step = 0; step < ensemble.times.size(); ++step) {
      acc.add(step, std::span<const double>(ensemble.phases[run]).subspan(step * n, n));
    }
  }
  return acc.finish(ensemble.n_runs(), ensemble.times, threshold);
}

SyncTimeTable ensemble_sync_times(const CyberLayer& layer, const std::vector<std::pair<BusId, BusId>>& edges,
                                  const EnsembleOptions& options, double threshold) {
  if (options.n_runs < 1) throw Error(ErrorKind::ConfigError, "ensemble needs at least one run");
  const std::size_t steps = step_count(options.t_max, options.dt);
  const auto times = grid_times(steps, options.dt);
  CosineAccumulator acc(layer.node_ids(), edges, times.size());
  for (std::size_t run = 0; run < options.n_runs; ++run) {
    const auto initial = run_initial_conditions(layer.size(), options.seed, run);
    std::size_t step = 0;
    integrate_streaming(layer, initial, options.t_max, options.dt,
                        [&](const PhaseState& s) { acc.add(step++, s.phases); });
  }
  return acc.finish(options.n_runs, times, threshold);
}

double sync_frequency(const CyberLayer& layer) {
  double sum = 0.0;
  for (double p : layer.natural_frequency()) sum += p;
  return sum / static_cast<double>(layer.size());
}

FrequencyLock measure_sync_frequency(const CyberLayer& layer, double t_max, double dt, double tolerance) {
  return measure_sync_frequency(layer, t_max, dt, tolerance, [](const PhaseState&) {});
}

FrequencyLock measure_sync_frequency(const CyberLayer& layer, double t_max, double dt, double tolerance,
                                     const std::function<void(const PhaseState&)>& observer) {
  const std::size_t steps = step_count(t_max, dt);
  const std::size_t window_start = static_cast<std::size_t>(std::ceil(0.9 * static_cast<double>(steps)));
  const std::vector<double> zeros(layer.size(), 0.0);

  FrequencyLock lock;
  bool window_ok = true;
  double last_violation = -1.0;
  std::size_t step = 0;
  integrate_streaming(layer, zeros, t_max, dt, [&](const PhaseState& s) {
    const auto [mn, mx] = std::minmax_element(s.frequencies.begin(), s.frequencies.end());
    const bool locked = *mx - *mn < tolerance;
    if (!locked) {
      last_violation = s.time;
      if (step >= window_start) window_ok = false;
    }
    if (step == steps) lock.node_frequencies = s.frequencies;
    ++step;
    observer(s);
  });
  if (!window_ok) {
    throw Error(ErrorKind::NotSynchronized,
                "layer " + layer.label() + " did not frequency-lock within t_max = " + std::to_string(t_max));
  }
  double sum = 0.0;
  for (double f : lock.node_frequencies) sum += f;
  lock.frequency = sum / static_cast<double>(lock.node_frequencies.size());
  lock.lock_time = last_violation < 0.0 ? 0.0 : last_violation + dt;
  return lock;
}

nlohmann::json sync_times_to_json(const SyncTimeTable& table) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [key, t] : table.entries()) {
    nlohmann::json entry{{"i", key.first}, {"j", key.second}};
    if (std::isinf(t)) {
      entry["t_sync"] = "inf";
    } else {
      entry["t_sync"] = t;
    }
    edges.push_back(std::move(entry));
  }
  return {{"edges", std::move(edges)}};
}

SyncTimeTable sync_times_from_json(const nlohmann::json& doc) {
  SyncTimeTable table;
  try {
    for (const auto& e : doc.at("edges")) {
      const auto& t = e.at("t_sync");
      double value = 0.0;
      if (t.is_string()) {
        if (t.get<std::string>() != "inf") throw Error(ErrorKind::SchemaError, "t_sync must be a number or \"inf\"");
        value = kInfinity;
      } else {
        value = t.get<double>();
      }
      table.set(e.at("i").get<BusId>(), e.at("j").get<BusId>(), value);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SchemaError, std::string("sync-time document: ") + e.what());
  }
  return table;
}

void write_trajectory_csv_header(std::ostream& out) { out << "t,node_id,phase,frequency\n"; }

void append_trajectory_csv(std::ostream& out, const CyberLayer& layer, const PhaseState& state) {
  const auto& ids = layer.node_ids();
  for (std::size_t k = 0; k < ids.size(); ++k) {
    out << state.time << ',' << ids[k] << ',' << state.phases[k] << ',' << state.frequencies[k] << '\n';
  }
}

}  // namespace grid_islander
