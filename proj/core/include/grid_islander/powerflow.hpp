#pragma once

#include <cstddef>
#include <vector>

#include "grid_islander/grid_model.hpp"

namespace grid_islander {

struct BranchFlow {
  std::size_t branch_index = 0;
  BusId from_bus = 0;
  BusId to_bus = 0;
  double p_from_mw = 0.0;  // P_ij, leaving the from bus
  double p_to_mw = 0.0;    // P_ji, leaving the to bus
  double loss_mw = 0.0;    // P_ij + P_ji
};

struct DcFlowResult {
  std::vector<BusId> bus_ids;
  std::vector<double> angles;  // rad, slack at 0
  std::vector<BranchFlow> flows;

  double angle(BusId id) const;
};

/// Lossless linear flow B'θ = P over the in-service branches inside `nodes`,
/// with B_ij the series susceptance and P the scheduled net injections.
/// Throws SingularSystem when the node set is not connected.
DcFlowResult dc_power_flow(const PowerNetwork& network, const NodeSet& nodes, BusId slack);
DcFlowResult dc_power_flow(const PowerNetwork& network, BusId slack);

struct AcOptions {
  double tolerance = 1e-8;  // max |ΔP|, |ΔQ| in per-unit
  int max_iterations = 20;
};

struct PowerFlowSolution {
  std::vector<BusId> bus_ids;
  std::vector<double> vm;  // pu
  std::vector<double> va;  // rad
  std::vector<BranchFlow> flows;
  BusId slack = 0;
  bool converged = false;
  int iterations = 0;
  double mismatch = 0.0;
  std::vector<double> mismatch_history;  // before the first and after every update

  double vm_of(BusId id) const;
  double va_of(BusId id) const;
  double vmin() const;
  double vmax() const;
};

/// Generator of the node set with the largest scheduled output (lowest id on
/// ties). Throws NoGenerator.
BusId select_slack(const PowerNetwork& network, const NodeSet& nodes);

/// Newton-Raphson on the polar mismatch equations with a flat angle start.
/// Voltage-controlled buses hold their setpoint without reactive limits; the
/// slack absorbs the active imbalance. Throws NoGenerator, SingularSystem and
/// NotConverged.
PowerFlowSolution ac_power_flow(const PowerNetwork& network, const NodeSet& nodes, BusId slack,
                                const AcOptions& options = {});

}  // namespace grid_islander
