#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "grid_islander/grid_model.hpp"

namespace grid_islander {

struct CouplingEdge {
  std::size_t a = 0;  // local node index, a < b
  std::size_t b = 0;
  double weight = 0.0;
};

/// First-order Kuramoto network
///
///   dθ_i/dt = P_i + Σ_j B_ij sin(θ_j − θ_i)
///
/// with natural frequencies P_i and symmetric nonnegative couplings B_ij
/// stored as an edge list over local indices.
class CyberLayer {
 public:
  /// Duplicate (a, b) pairs are merged by summing their weights.
  CyberLayer(std::vector<BusId> node_ids, std::vector<double> natural_frequency, std::vector<CouplingEdge> edges,
             std::string label = {});

  std::size_t size() const noexcept { return node_ids_.size(); }
  const std::vector<BusId>& node_ids() const noexcept { return node_ids_; }
  const std::vector<double>& natural_frequency() const noexcept { return natural_frequency_; }
  const std::vector<CouplingEdge>& edges() const noexcept { return edges_; }
  const std::string& label() const noexcept { return label_; }

  std::optional<std::size_t> index_of(BusId id) const;
  double coupling(BusId i, BusId j) const;
  /// Off-diagonal nonzeros of the symmetric coupling matrix.
  std::size_t coupling_nonzeros() const noexcept { return 2 * edges_.size(); }
  /// Edges as bus-id pairs (smaller id first).
  std::vector<std::pair<BusId, BusId>> edge_ids() const;

  /// Right-hand side of the phase dynamics.
  void rhs(std::span<const double> phases, std::span<double> frequencies) const;

 private:
  std::vector<BusId> node_ids_;
  std::vector<double> natural_frequency_;
  std::vector<CouplingEdge> edges_;
  std::string label_;
  std::map<BusId, std::size_t> index_;
};

struct PhaseState {
  double time = 0.0;
  std::vector<double> phases;       // rad, not wrapped
  std::vector<double> frequencies;  // rad/s, right-hand side at `phases`
};

using Trajectory = std::vector<PhaseState>;

/// Cyberlayer over the subgraph induced by `nodes`; frequencies are per-unit
/// injections and couplings are series susceptances summed over parallel
/// circuits. Throws EmptyLayer.
CyberLayer build_layer(const PowerNetwork& network, const NodeSet& nodes, std::string label = {});

/// Fixed-step classic RK4, sampled at every step from t = 0 to t_max.
/// Throws NumericalDivergence when the state stops being finite.
Trajectory integrate(const CyberLayer& layer, std::span<const double> initial, double t_max, double dt);

/// Same stepping as `integrate` without storing the trajectory. The state
/// passed to the observer is reused between calls.
void integrate_streaming(const CyberLayer& layer, std::span<const double> initial, double t_max, double dt,
                         const std::function<void(const PhaseState&)>& observer);

std::size_t step_count(double t_max, double dt);

/// n i.i.d. phases, uniform on (−π/2, π/2].
std::vector<double> sample_initial_conditions(std::size_t n, std::uint64_t seed);
/// Initial phases of ensemble member `run`, keyed by (seed, run).
std::vector<double> run_initial_conditions(std::size_t n, std::uint64_t seed, std::size_t run);

struct EnsembleOptions {
  std::size_t n_runs = 20;
  std::uint64_t seed = 1;
  double t_max = 100.0;
  double dt = 0.01;
};

struct EnsembleResult {
  std::vector<BusId> node_ids;
  std::vector<double> times;
  /// phases[run][step * n_nodes + node]
  std::vector<std::vector<double>> phases;
  std::uint64_t seed = 0;

  std::size_t n_runs() const noexcept { return phases.size(); }
  std::size_t n_nodes() const noexcept { return node_ids.size(); }
  double phase(std::size_t run, std::size_t step, std::size_t node) const {
    return phases[run][step * node_ids.size() + node];
  }
  /// Step index of a grid time; throws GridError when t is not on the grid.
  std::size_t step_of(double t) const;
  std::size_t node_index(BusId id) const;
};

EnsembleResult run_ensemble(const CyberLayer& layer, const EnsembleOptions& options);

/// ρ_ij(t): ensemble mean of cos(θ_i − θ_j), in [−1, 1].
double order_parameter(const EnsembleResult& ensemble, BusId i, BusId j, double t);

/// Internode synchronization times over undirected edges.
class SyncTimeTable {
 public:
  void set(BusId i, BusId j, double t);
  /// Throws NotFound.
  double at(BusId i, BusId j) const;
  bool contains(BusId i, BusId j) const;
  std::size_t size() const noexcept { return entries_.size(); }
  const std::map<std::pair<BusId, BusId>, double>& entries() const noexcept { return entries_; }

  friend bool operator==(const SyncTimeTable&, const SyncTimeTable&) = default;

 private:
  std::map<std::pair<BusId, BusId>, double> entries_;
};

/// Smallest grid time after which ρ_ij stays above the threshold through
/// the end of the horizon; +infinity when it never does.
SyncTimeTable sync_times(const EnsembleResult& ensemble, const std::vector<std::pair<BusId, BusId>>& edges,
                         double threshold = 0.99);

/// Runs the ensemble one member at a time and accumulates ρ_ij without
/// storing trajectories. Gives the same table as run_ensemble + sync_times.
SyncTimeTable ensemble_sync_times(const CyberLayer& layer, const std::vector<std::pair<BusId, BusId>>& edges,
                                  const EnsembleOptions& options, double threshold = 0.99);

/// Frequency of the synchronous solution: mean natural frequency.
double sync_frequency(const CyberLayer& layer);

struct FrequencyLock {
  double frequency = 0.0;               // mean instantaneous frequency at t_max
  std::vector<double> node_frequencies;  // at t_max
  double lock_time = 0.0;                // spread below tolerance from here on
};

/// Integrates from θ(0) = 0 and checks that the frequency spread stays below
/// `tolerance` over the final 10% of the horizon. Throws NotSynchronized.
FrequencyLock measure_sync_frequency(const CyberLayer& layer, double t_max, double dt, double tolerance);
/// As above; `observer` also sees every sample.
FrequencyLock measure_sync_frequency(const CyberLayer& layer, double t_max, double dt, double tolerance,
                                     const std::function<void(const PhaseState&)>& observer);

nlohmann::json sync_times_to_json(const SyncTimeTable& table);
SyncTimeTable sync_times_from_json(const nlohmann::json& doc);

/// CSV with header "t,node_id,phase,frequency".
void write_trajectory_csv_header(std::ostream& out);
void append_trajectory_csv(std::ostream& out, const CyberLayer& layer, const PhaseState& state);

}  // namespace grid_islander
