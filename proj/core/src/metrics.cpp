#include "grid_islander/metrics.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdio>
#include <map>

#include "grid_islander/centralized.hpp"
#include "grid_islander/error.hpp"

namespace grid_islander {

double metric_j1(std::span<const double> imbalances_mw) {
  if (imbalances_mw.empty()) return 0.0;
  double sum = 0.0;
  for (double p : imbalances_mw) sum += std::abs(p);
  return sum / static_cast<double>(imbalances_mw.size());
}

double metric_j1(const PowerNetwork& network, const Partition& partition) {
  std::vector<double> mw;
  mw.reserve(partition.islands.size());
  for (const Island& island : partition.islands) mw.push_back(island_imbalance(network, island) * network.base_mva());
  return metric_j1(mw);
}

double metric_j2(const std::vector<PowerFlowSolution>& island_solutions) {
  if (island_solutions.empty()) return 0.0;
  double sum = 0.0;
  for (const PowerFlowSolution& s : island_solutions) {
    if (!s.converged) throw Error(ErrorKind::NotConverged, "J2 needs converged island solutions");
    sum += 1.0 - s.vmin() / s.vmax();
  }
  return sum / static_cast<double>(island_solutions.size());
}

double metric_j3(const std::vector<PowerFlowSolution>& island_solutions) {
  double sum = 0.0;
  for (const PowerFlowSolution& s : island_solutions) {
    if (!s.converged) throw Error(ErrorKind::NotConverged, "J3 needs converged island solutions");
    for (const BranchFlow& f : s.flows) sum += std::abs(f.loss_mw);
  }
  return sum;
}

double metric_j4(const std::vector<BranchFlow>& pre_partition_flows, const Partition& partition) {
  std::map<std::size_t, const BranchFlow*> by_index;
  for (const BranchFlow& f : pre_partition_flows) by_index.emplace(f.branch_index, &f);
  double sum = 0.0;
  for (const BranchRef& ref : partition.cut_set) {
    const auto it = by_index.find(ref.index);
    if (it == by_index.end()) continue;
    sum += (std::abs(it->second->p_from_mw) + std::abs(it->second->p_to_mw)) / 2.0;
  }
  return sum;
}

MetricsReport evaluate_partition(const PowerNetwork& network, const Partition& partition, const AcOptions& options) {
  MetricsReport report;
  report.j1 = metric_j1(network, partition);

  const NodeSet all = network.all_nodes();
  report.pre_partition_slack = select_slack(network, all);
  std::vector<BranchFlow> pre_flows;
  try {
    PowerFlowSolution full = ac_power_flow(network, all, report.pre_partition_slack, options);
    pre_flows = std::move(full.flows);
    report.pre_partition_iterations = full.iterations;
    report.j4_flow = "ac";
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NotConverged && e.kind() != ErrorKind::SingularSystem) throw;
    spdlog::warn("pre-partition AC flow failed ({}), using DC flows for J4", e.what());
    pre_flows = dc_power_flow(network, all, report.pre_partition_slack).flows;
    report.j4_flow = "dc";
  }
  report.j4 = metric_j4(pre_flows, partition);

  bool all_converged = true;
  for (const Island& island : partition.islands) {
    IslandMetrics m;
    m.label = island.label;
    m.n_nodes = island.nodes.size();
    m.imbalance_mw = island_imbalance(network, island) * network.base_mva();
    m.slack = select_slack(network, island.nodes);
    try {
      PowerFlowSolution sol = ac_power_flow(network, island.nodes, m.slack, options);
      m.vmin = sol.vmin();
      m.vmax = sol.vmax();
      for (const BranchFlow& f : sol.flows) m.losses_mw += f.loss_mw;
      m.iterations = sol.iterations;
      report.island_solutions.push_back(std::move(sol));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NotConverged && e.kind() != ErrorKind::SingularSystem) throw;
      spdlog::warn("island {} power flow failed: {}", island.label, e.what());
      m.failure = e.what();
      all_converged = false;
    }
    report.islands.push_back(std::move(m));
  }
  if (all_converged) {
    report.j2 = metric_j2(report.island_solutions);
    report.j3 = metric_j3(report.island_solutions);
  }
  return report;
}

nlohmann::json metrics_report_to_json(const MetricsReport& report) {
  nlohmann::json islands = nlohmann::json::array();
  for (const IslandMetrics& m : report.islands) {
    nlohmann::json entry{{"label", m.label}, {"n_nodes", m.n_nodes}, {"imbalance_mw", m.imbalance_mw}, {"slack", m.slack}};
    if (m.failure.empty()) {
      entry.update({{"converged", true},
                    {"vmin", m.vmin},
                    {"vmax", m.vmax},
                    {"losses_mw", m.losses_mw},
                    {"iterations", m.iterations}});
    } else {
      entry.update({{"converged", false}, {"failure", m.failure}});
    }
    islands.push_back(std::move(entry));
  }
  auto optional_value = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); };
  return {{"J1", report.j1},
          {"J2", optional_value(report.j2)},
          {"J3", optional_value(report.j3)},
          {"J4", report.j4},
          {"islands", islands},
          {"provenance",
           {{"island_flow", "ac_power_flow"},
            {"dispatch", "scheduled generation, island slack absorbs the imbalance"},
            {"reactive_limits", false},
            {"complete", report.complete()},
            {"j4_flow", report.j4_flow},
            {"pre_partition_slack", report.pre_partition_slack},
            {"pre_partition_iterations", report.pre_partition_iterations},
            {"units", {{"J1", "MW"}, {"J2", "1"}, {"J3", "MW"}, {"J4", "MW"}}}}}};
}

std::string metrics_summary_line(const MetricsReport& report) {
  char j2[32] = "n/a";
  char j3[32] = "n/a";
  if (report.j2) std::snprintf(j2, sizeof j2, "%.4f", *report.j2);
  if (report.j3) std::snprintf(j3, sizeof j3, "%.1f MW", *report.j3);
  char buf[160];
  std::snprintf(buf, sizeof buf, "J1 %.1f MW | J2 %s | J3 %s | J4 %.1f MW", report.j1, j2, j3, report.j4);
  return buf;
}

}  // namespace grid_islander
