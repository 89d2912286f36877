#include "grid_islander/powerflow.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <sstream>

#include "grid_islander/error.hpp"

namespace grid_islander {

namespace {

using Complex = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

std::size_t position(const std::vector<BusId>& ids, BusId id) {
  const auto it = std::lower_bound(ids.begin(), ids.end(), id);
  if (it == ids.end() || *it != id) throw Error(ErrorKind::NotFound, "bus " + std::to_string(id) + " not solved");
  return static_cast<std::size_t>(it - ids.begin());
}

struct BranchAdmittance {
  Complex yff, yft, ytf, ytt;
};

BranchAdmittance branch_admittance(const Branch& br) {
  const Complex ys = 1.0 / Complex(br.resistance, br.reactance);
  const Complex tap = std::polar(br.tap_ratio, br.phase_shift_deg * std::numbers::pi / 180.0);
  const Complex ytt = ys + Complex(0.0, br.charging / 2.0);
  return {ytt / std::norm(tap), -ys / std::conj(tap), -ys / tap, ytt};
}

void require_slack(const NodeSet& nodes, BusId slack) {
  if (!nodes.contains(slack)) {
    throw Error(ErrorKind::NotFound, "slack bus " + std::to_string(slack) + " is outside the solved node set");
  }
}

}  // namespace

double DcFlowResult::angle(BusId id) const { return angles[position(bus_ids, id)]; }

double PowerFlowSolution::vm_of(BusId id) const { return vm[position(bus_ids, id)]; }
double PowerFlowSolution::va_of(BusId id) const { return va[position(bus_ids, id)]; }
double PowerFlowSolution::vmin() const { return *std::min_element(vm.begin(), vm.end()); }
double PowerFlowSolution::vmax() const { return *std::max_element(vm.begin(), vm.end()); }

DcFlowResult dc_power_flow(const PowerNetwork& network, const NodeSet& nodes, BusId slack) {
  require_slack(nodes, slack);
  if (!is_connected_subset(network, nodes)) {
    throw Error(ErrorKind::SingularSystem, "DC power flow over a disconnected node set");
  }
  DcFlowResult out;
  out.bus_ids.assign(nodes.begin(), nodes.end());
  const std::size_t n = out.bus_ids.size();
  const std::size_t s = position(out.bus_ids, slack);
  const auto branches = internal_branches(network, nodes);

  MatrixXd b = MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  VectorXd p(static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < n; ++k) p(static_cast<Eigen::Index>(k)) = net_injection(network, out.bus_ids[k]);
  for (std::size_t idx : branches) {
    const Branch& br = network.branches()[idx];
    const auto i = static_cast<Eigen::Index>(position(out.bus_ids, br.from_bus));
    const auto j = static_cast<Eigen::Index>(position(out.bus_ids, br.to_bus));
    const double w = coupling_susceptance(br);
    b(i, i) += w;
    b(j, j) += w;
    b(i, j) -= w;
    b(j, i) -= w;
  }

  out.angles.assign(n, 0.0);
  if (n > 1) {
    std::vector<Eigen::Index> keep;
    for (std::size_t k = 0; k < n; ++k) {
      if (k != s) keep.push_back(static_cast<Eigen::Index>(k));
    }
    const auto m = static_cast<Eigen::Index>(keep.size());
    MatrixXd reduced(m, m);
    VectorXd rhs(m);
    for (Eigen::Index r = 0; r < m; ++r) {
      rhs(r) = p(keep[static_cast<std::size_t>(r)]);
      for (Eigen::Index c = 0; c < m; ++c) reduced(r, c) = b(keep[static_cast<std::size_t>(r)], keep[static_cast<std::size_t>(c)]);
    }
    const Eigen::FullPivLU<MatrixXd> lu(reduced);
    if (!lu.isInvertible()) throw Error(ErrorKind::SingularSystem, "reduced susceptance matrix is singular");
    const VectorXd theta = lu.solve(rhs);
    for (Eigen::Index r = 0; r < m; ++r) out.angles[static_cast<std::size_t>(keep[static_cast<std::size_t>(r)])] = theta(r);
  }

  for (std::size_t idx : branches) {
    const Branch& br = network.branches()[idx];
    const double flow = coupling_susceptance(br) *
                        (out.angles[position(out.bus_ids, br.from_bus)] - out.angles[position(out.bus_ids, br.to_bus)]) *
                        network.base_mva();
    out.flows.push_back({idx, br.from_bus, br.to_bus, flow, -flow, 0.0});
  }
  return out;
}

DcFlowResult dc_power_flow(const PowerNetwork& network, BusId slack) {
  return dc_power_flow(network, network.all_nodes(), slack);
}

BusId select_slack(const PowerNetwork& network, const NodeSet& nodes) {
  std::optional<BusId> best;
  for (BusId id : nodes) {
    const Bus& b = network.bus(id);
    if (b.kind != BusKind::Generator) continue;
    if (!best || b.p_gen_scheduled > network.bus(*best).p_gen_scheduled) best = id;
  }
  if (!best) throw Error(ErrorKind::NoGenerator, "island has no generator bus to act as slack");
  return *best;
}

PowerFlowSolution ac_power_flow(const PowerNetwork& network, const NodeSet& nodes, BusId slack,
                                const AcOptions& options) {
  if (std::none_of(nodes.begin(), nodes.end(), [&](BusId id) { return network.is_generator(id); })) {
    throw Error(ErrorKind::NoGenerator, "island has no generator bus");
  }
  require_slack(nodes, slack);
  if (!network.is_generator(slack)) {
    throw Error(ErrorKind::ConfigError, "slack bus " + std::to_string(slack) + " is not a generator");
  }
  if (!is_connected_subset(network, nodes)) {
    throw Error(ErrorKind::SingularSystem, "AC power flow over a disconnected node set");
  }

  PowerFlowSolution sol;
  sol.slack = slack;
  sol.bus_ids.assign(nodes.begin(), nodes.end());
  const std::size_t n = sol.bus_ids.size();
  const auto en = static_cast<Eigen::Index>(n);
  const double base = network.base_mva();
  const auto branches = internal_branches(network, nodes);

  MatrixXcd ybus = MatrixXcd::Zero(en, en);
  VectorXcd sbus(en);
  VectorXd vm(en);
  std::vector<Eigen::Index> pv, pq;
  const auto s = static_cast<Eigen::Index>(position(sol.bus_ids, slack));
  for (std::size_t k = 0; k < n; ++k) {
    const Bus& b = network.bus(sol.bus_ids[k]);
    const auto i = static_cast<Eigen::Index>(k);
    ybus(i, i) += Complex(b.shunt_g, b.shunt_b) / base;
    sbus(i) = Complex(b.p_gen_scheduled - b.p_demand, b.q_gen_scheduled - b.q_demand) / base;
    if (i == s || b.voltage_controlled) {
      vm(i) = b.voltage_setpoint;
      if (i != s) pv.push_back(i);
    } else {
      vm(i) = 1.0;
      pq.push_back(i);
    }
  }
  for (std::size_t idx : branches) {
    const Branch& br = network.branches()[idx];
    const auto f = static_cast<Eigen::Index>(position(sol.bus_ids, br.from_bus));
    const auto t = static_cast<Eigen::Index>(position(sol.bus_ids, br.to_bus));
    const BranchAdmittance y = branch_admittance(br);
    ybus(f, f) += y.yff;
    ybus(f, t) += y.yft;
    ybus(t, f) += y.ytf;
    ybus(t, t) += y.ytt;
  }

  std::vector<Eigen::Index> pvpq(pv);
  pvpq.insert(pvpq.end(), pq.begin(), pq.end());
  const auto npvpq = static_cast<Eigen::Index>(pvpq.size());
  const auto npq = static_cast<Eigen::Index>(pq.size());

  VectorXd va = VectorXd::Zero(en);
  auto voltage = [&] {
    VectorXcd v(en);
    for (Eigen::Index i = 0; i < en; ++i) v(i) = std::polar(vm(i), va(i));
    return v;
  };
  auto mismatch_vector = [&](const VectorXcd& v) {
    const VectorXcd mis = v.cwiseProduct((ybus * v).conjugate()) - sbus;
    VectorXd f(npvpq + npq);
    for (Eigen::Index r = 0; r < npvpq; ++r) f(r) = mis(pvpq[static_cast<std::size_t>(r)]).real();
    for (Eigen::Index r = 0; r < npq; ++r) f(npvpq + r) = mis(pq[static_cast<std::size_t>(r)]).imag();
    return f;
  };

  VectorXcd v = voltage();
  VectorXd f = mismatch_vector(v);
  double norm = f.size() ? f.cwiseAbs().maxCoeff() : 0.0;
  sol.mismatch_history.push_back(norm);
  while (norm >= options.tolerance && sol.iterations < options.max_iterations) {
    // dS/dVa and dS/dVm in polar form.
    const VectorXcd ibus = ybus * v;
    VectorXcd vnorm(en);
    for (Eigen::Index i = 0; i < en; ++i) vnorm(i) = v(i) / std::abs(v(i));
    const MatrixXcd ds_dva =
        Complex(0.0, 1.0) * v.asDiagonal() * (MatrixXcd(ibus.asDiagonal()) - ybus * v.asDiagonal()).conjugate();
    const MatrixXcd ds_dvm = v.asDiagonal() * (ybus * vnorm.asDiagonal()).conjugate() +
                             MatrixXcd(ibus.conjugate().cwiseProduct(vnorm).asDiagonal());

    MatrixXd jac(npvpq + npq, npvpq + npq);
    for (Eigen::Index r = 0; r < npvpq; ++r) {
      const Eigen::Index row = pvpq[static_cast<std::size_t>(r)];
      for (Eigen::Index c = 0; c < npvpq; ++c) jac(r, c) = ds_dva(row, pvpq[static_cast<std::size_t>(c)]).real();
      for (Eigen::Index c = 0; c < npq; ++c) jac(r, npvpq + c) = ds_dvm(row, pq[static_cast<std::size_t>(c)]).real();
    }
    for (Eigen::Index r = 0; r < npq; ++r) {
      const Eigen::Index row = pq[static_cast<std::size_t>(r)];
      for (Eigen::Index c = 0; c < npvpq; ++c) jac(npvpq + r, c) = ds_dva(row, pvpq[static_cast<std::size_t>(c)]).imag();
      for (Eigen::Index c = 0; c < npq; ++c) jac(npvpq + r, npvpq + c) = ds_dvm(row, pq[static_cast<std::size_t>(c)]).imag();
    }
    const Eigen::PartialPivLU<MatrixXd> lu(jac);
    const VectorXd dx = -lu.solve(f);
    if (!dx.allFinite()) throw Error(ErrorKind::SingularSystem, "singular power-flow Jacobian");
    for (Eigen::Index r = 0; r < npvpq; ++r) va(pvpq[static_cast<std::size_t>(r)]) += dx(r);
    for (Eigen::Index r = 0; r < npq; ++r) vm(pq[static_cast<std::size_t>(r)]) += dx(npvpq + r);

    ++sol.iterations;
    v = voltage();
    f = mismatch_vector(v);
    norm = f.cwiseAbs().maxCoeff();
    sol.mismatch_history.push_back(norm);
  }
  sol.mismatch = norm;
  sol.converged = norm < options.tolerance;
  if (!sol.converged) {
    std::ostringstream msg;
    msg << "Newton-Raphson did not converge after " << sol.iterations << " iterations (mismatch " << norm << " pu)";
    throw Error(ErrorKind::NotConverged, msg.str());
  }

  sol.vm.resize(n);
  sol.va.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    sol.vm[k] = vm(static_cast<Eigen::Index>(k));
    sol.va[k] = va(static_cast<Eigen::Index>(k));
  }
  for (std::size_t idx : branches) {
    const Branch& br = network.branches()[idx];
    const auto fi = static_cast<Eigen::Index>(position(sol.bus_ids, br.from_bus));
    const auto ti = static_cast<Eigen::Index>(position(sol.bus_ids, br.to_bus));
    const BranchAdmittance y = branch_admittance(br);
    const Complex sf = v(fi) * std::conj(y.yff * v(fi) + y.yft * v(ti)) * base;
    const Complex st = v(ti) * std::conj(y.ytf * v(fi) + y.ytt * v(ti)) * base;
    sol.flows.push_back({idx, br.from_bus, br.to_bus, sf.real(), st.real(), sf.real() + st.real()});
  }
  return sol;
}

}  // namespace grid_islander
