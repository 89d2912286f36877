#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "grid_islander/grid_model.hpp"
#include "grid_islander/powerflow.hpp"

namespace grid_islander {

/// Mean |P(l)| over the islands, in MW.
double metric_j1(const PowerNetwork& network, const Partition& partition);
double metric_j1(std::span<const double> imbalances_mw);

/// Mean of 1 − Vmin/Vmax over the island solutions.
double metric_j2(const std::vector<PowerFlowSolution>& island_solutions);

/// Total losses (MW) over the branches inside the islands.
double metric_j3(const std::vector<PowerFlowSolution>& island_solutions);

/// Σ (|P_ij| + |P_ji|)/2 over the cut set, read from the flows of the grid
/// before it was split. Cut branches without a flow entry contribute 0.
double metric_j4(const std::vector<BranchFlow>& pre_partition_flows, const Partition& partition);

struct IslandMetrics {
  int label = 0;
  std::size_t n_nodes = 0;
  double imbalance_mw = 0.0;
  BusId slack = 0;
  double vmin = 0.0;
  double vmax = 0.0;
  double losses_mw = 0.0;
  int iterations = 0;
  std::string failure;  // empty when the island flow converged
};

struct MetricsReport {
  double j1 = 0.0;
  std::optional<double> j2;  // missing when an island flow failed
  std::optional<double> j3;
  double j4 = 0.0;
  std::vector<IslandMetrics> islands;
  std::vector<PowerFlowSolution> island_solutions;  // converged islands only
  std::string j4_flow;  // "ac" or "dc"
  BusId pre_partition_slack = 0;
  int pre_partition_iterations = 0;

  bool complete() const noexcept { return j2.has_value() && j3.has_value(); }
};

/// Scores a validated partition. The intact grid is solved once with AC
/// (DC when Newton-Raphson fails) for J4; each island gets its own AC solve
/// for J2 and J3. An island whose flow does not converge is flagged in its
/// entry and leaves J2 and J3 unset.
MetricsReport evaluate_partition(const PowerNetwork& network, const Partition& partition,
                                 const AcOptions& options = {});

nlohmann::json metrics_report_to_json(const MetricsReport& report);

/// "J1 132.5 MW | J2 0.0312 | J3 87.1 MW | J4 305.0 MW"
std::string metrics_summary_line(const MetricsReport& report);

}  // namespace grid_islander
