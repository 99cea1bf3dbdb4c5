#include "tpopf/powerflow.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/SparseLU>

#include "tpopf/autodiff.hpp"
#include "tpopf/loads.hpp"

namespace tpopf {

double nominal_angle(Phase p) {
  switch (p) {
    case Phase::A: return 0.0;
    case Phase::B: return -2.0 * std::numbers::pi / 3.0;
    case Phase::C: return 2.0 * std::numbers::pi / 3.0;
  }
  return 0.0;
}

Eigen::VectorXcd VoltageState::phasors() const {
  Eigen::VectorXcd v(magnitude.size());
  for (std::size_t k = 0; k < magnitude.size(); ++k) v(k) = phasor(static_cast<int>(k));
  return v;
}

VoltageState VoltageState::flat(const NodeIndex& index) {
  VoltageState s;
  s.magnitude.assign(index.size(), 1.0);
  s.angle.resize(index.size());
  for (int k = 0; k < index.size(); ++k) s.angle[k] = nominal_angle(index.phase(k));
  return s;
}

InjectionSet inverter_injections(const Network& net, const SystemAdmittance& sys, std::span<const double> q_setpoints) {
  InjectionSet inj;
  inj.p_gen = Eigen::VectorXd::Zero(sys.node_count());
  inj.q_gen = Eigen::VectorXd::Zero(sys.node_count());
  if (!q_setpoints.empty() && q_setpoints.size() != net.inverters.size())
    throw std::invalid_argument("one reactive setpoint per inverter required");
  for (std::size_t i = 0; i < net.inverters.size(); ++i) {
    const Inverter& inv = net.inverters[i];
    const int node = sys.index.node(net.bus_index(inv.bus), inv.phase);
    inj.p_gen(node) += inv.p_output;
    if (!q_setpoints.empty()) inj.q_gen(node) += q_setpoints[i];
  }
  return inj;
}

Complex zip_load_power(const ZipLoad& load, double v) {
  if (!(v > 0.0)) throw std::domain_error("load voltage must be positive");
  const LoadPower<double> s = wye_load_power(load.coefficients, v / load_base_voltage(load));
  return {s.p, s.q};
}

Eigen::VectorXcd node_demand(const Network& net, const SystemAdmittance& sys, const VoltageState& state) {
  Eigen::VectorXcd d = Eigen::VectorXcd::Zero(sys.node_count());
  for (const ZipLoad& l : net.loads) {
    const int bus = net.bus_index(l.bus);
    const int p = sys.index.node(bus, l.phase);
    if (l.configuration == LoadConfig::Wye) {
      d(p) += zip_load_power(l, state.magnitude[p]);
    } else {
      const int q = sys.index.node(bus, l.phase2);
      const auto s = delta_load_split<double>(l.coefficients, state.magnitude[p], state.angle[p],
                                              state.magnitude[q], state.angle[q]);
      d(p) += Complex(s.first.p, s.first.q);
      d(q) += Complex(s.second.p, s.second.q);
    }
  }
  return d;
}

std::vector<int> non_slack_nodes(const Network& net, const SystemAdmittance& sys) {
  const int slack = net.slack_index();
  std::vector<int> out;
  for (int k = 0; k < sys.node_count(); ++k)
    if (sys.index.bus(k) != slack) out.push_back(k);
  return out;
}

namespace {

// Complex power leaving each node into the network: V .* conj(Y V).
Eigen::VectorXcd network_injection(const SystemAdmittance& sys, const Eigen::VectorXcd& v) {
  const Eigen::VectorXcd i = sys.y_bus * v;
  return v.cwiseProduct(i.conjugate());
}

}  // namespace

Eigen::VectorXd power_mismatch(const Network& net, const SystemAdmittance& sys, const VoltageState& state,
                               const InjectionSet& inj) {
  const Eigen::VectorXcd v = state.phasors();
  const Eigen::VectorXcd s_net = network_injection(sys, v);
  const Eigen::VectorXcd s_dem = node_demand(net, sys, state);
  const auto ns = non_slack_nodes(net, sys);
  const int k = static_cast<int>(ns.size());
  Eigen::VectorXd r(2 * k);
  for (int i = 0; i < k; ++i) {
    const int n = ns[i];
    const Complex mis = Complex(inj.p_gen(n), inj.q_gen(n)) - s_dem(n) - s_net(n);
    r(i) = mis.real();
    r(k + i) = mis.imag();
  }
  return r;
}

Eigen::SparseMatrix<double> mismatch_jacobian(const Network& net, const SystemAdmittance& sys,
                                              const VoltageState& state) {
  const int n = sys.node_count();
  const Eigen::VectorXcd v = state.phasors();
  const Eigen::VectorXcd ibus = sys.y_bus * v;
  Eigen::VectorXcd vnorm(n);
  for (int k = 0; k < n; ++k) vnorm(k) = v(k) / std::abs(v(k));

  // dS/dVm = diag(V) conj(Y diag(Vnorm)) + conj(diag(I)) diag(Vnorm)
  // dS/dVa = j diag(V) conj(diag(I) - Y diag(V))
  Eigen::SparseMatrix<Complex> y_vn = sys.y_bus * vnorm.asDiagonal();
  Eigen::SparseMatrix<Complex> ds_dvm = v.asDiagonal() * Eigen::SparseMatrix<Complex>(y_vn.conjugate());
  Eigen::SparseMatrix<Complex> y_v = sys.y_bus * v.asDiagonal();
  Eigen::SparseMatrix<Complex> ds_dva = -(v.asDiagonal() * Eigen::SparseMatrix<Complex>(y_v.conjugate()));
  ds_dva = Complex(0.0, 1.0) * ds_dva;
  for (int k = 0; k < n; ++k) {
    ds_dvm.coeffRef(k, k) += std::conj(ibus(k)) * vnorm(k);
    ds_dva.coeffRef(k, k) += Complex(0.0, 1.0) * v(k) * std::conj(ibus(k));
  }

  // Load sensitivities: wye loads depend on their own magnitude, delta loads
  // on both phasors of the pair.
  for (const ZipLoad& l : net.loads) {
    const int bus = net.bus_index(l.bus);
    const int p = sys.index.node(bus, l.phase);
    const ZipCoefficients& c = l.coefficients;
    if (l.configuration == LoadConfig::Wye) {
      const double vm = state.magnitude[p];
      ds_dvm.coeffRef(p, p) += Complex(c.p_i + 2.0 * c.p_z * vm, c.q_i + 2.0 * c.q_z * vm);
    } else {
      const int q = sys.index.node(bus, l.phase2);
      using D = Dual2<4>;
      const auto s = delta_load_split<D>(c, D::variable(state.magnitude[p], 0), D::variable(state.angle[p], 1),
                                         D::variable(state.magnitude[q], 2), D::variable(state.angle[q], 3));
      const int nodes[2] = {p, q};
      const D* out[2][2] = {{&s.first.p, &s.first.q}, {&s.second.p, &s.second.q}};
      for (int r = 0; r < 2; ++r)
        for (int c2 = 0; c2 < 2; ++c2) {
          const int col = nodes[c2];
          ds_dvm.coeffRef(nodes[r], col) += Complex(out[r][0]->g[2 * c2], out[r][1]->g[2 * c2]);
          ds_dva.coeffRef(nodes[r], col) += Complex(out[r][0]->g[2 * c2 + 1], out[r][1]->g[2 * c2 + 1]);
        }
    }
  }

  const auto ns = non_slack_nodes(net, sys);
  const int k = static_cast<int>(ns.size());
  std::vector<int> pos(n, -1);
  for (int i = 0; i < k; ++i) pos[ns[i]] = i;

  std::vector<Eigen::Triplet<double>> trip;
  auto emit = [&](const Eigen::SparseMatrix<Complex>& m, int col_offset) {
    for (int c = 0; c < m.outerSize(); ++c)
      for (Eigen::SparseMatrix<Complex>::InnerIterator it(m, c); it; ++it) {
        const int r = pos[it.row()], cc = pos[it.col()];
        if (r < 0 || cc < 0) continue;
        trip.emplace_back(r, col_offset + cc, -it.value().real());
        trip.emplace_back(k + r, col_offset + cc, -it.value().imag());
      }
  };
  emit(ds_dva, 0);
  emit(ds_dvm, k);
  Eigen::SparseMatrix<double> jac(2 * k, 2 * k);
  jac.setFromTriplets(trip.begin(), trip.end());
  return jac;
}

std::array<Complex, 3> slack_generation(const Network& net, const SystemAdmittance& sys, const VoltageState& state,
                                        const InjectionSet& inj) {
  const Eigen::VectorXcd v = state.phasors();
  const Eigen::VectorXcd s_net = network_injection(sys, v);
  const Eigen::VectorXcd s_dem = node_demand(net, sys, state);
  std::array<Complex, 3> out{};
  const int slack = net.slack_index();
  for (int node : sys.index.nodes_of_bus(slack))
    out[static_cast<int>(sys.index.phase(node))] =
        s_net(node) + s_dem(node) - Complex(inj.p_gen(node), inj.q_gen(node));
  return out;
}

PowerFlowResult solve_powerflow(const Network& net, const SystemAdmittance& sys, const InjectionSet& inj,
                                const PowerFlowOptions& opts, const VoltageState* start) {
  PowerFlowResult res;
  res.state = start ? *start : VoltageState::flat(sys.index);
  const int slack = net.slack_index();
  for (int node : sys.index.nodes_of_bus(slack)) {
    res.state.magnitude[node] = 1.0;
    res.state.angle[node] = nominal_angle(sys.index.phase(node));
  }
  const auto ns = non_slack_nodes(net, sys);
  const int k = static_cast<int>(ns.size());

  Eigen::VectorXd f = power_mismatch(net, sys, res.state, inj);
  double norm = f.size() ? f.cwiseAbs().maxCoeff() : 0.0;
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  int it = 0;
  while (norm > opts.tol) {
    if (it >= opts.max_iter)
      throw PowerFlowError("power flow did not converge in " + std::to_string(it) +
                               " iterations (residual " + std::to_string(norm) + ")",
                           it, norm);
    ++it;
    const Eigen::SparseMatrix<double> jac = mismatch_jacobian(net, sys, res.state);
    lu.compute(jac);
    if (lu.info() != Eigen::Success) throw PowerFlowError("singular power-flow Jacobian", it, norm);
    const Eigen::VectorXd dx = lu.solve(-f);
    if (lu.info() != Eigen::Success || !dx.allFinite())
      throw PowerFlowError("singular power-flow Jacobian", it, norm);

    double step = 1.0;
    VoltageState trial;
    Eigen::VectorXd ft;
    double tnorm = 0.0;
    for (int halving = 0; halving <= 4; ++halving) {
      trial = res.state;
      for (int i = 0; i < k; ++i) {
        trial.angle[ns[i]] += step * dx(i);
        trial.magnitude[ns[i]] += step * dx(k + i);
      }
      bool positive = true;
      for (int i = 0; i < k; ++i) positive = positive && trial.magnitude[ns[i]] > 0.0;
      if (positive) {
        ft = power_mismatch(net, sys, trial, inj);
        tnorm = ft.cwiseAbs().maxCoeff();
        if (tnorm <= norm) break;
      } else {
        tnorm = std::numeric_limits<double>::infinity();
      }
      step *= 0.5;
    }
    if (!std::isfinite(tnorm)) throw PowerFlowError("power flow produced non-positive voltages", it, norm);
    res.state = std::move(trial);
    f = std::move(ft);
    norm = tnorm;
  }
  res.iterations = it;
  res.residual = norm;
  res.slack_power = slack_generation(net, sys, res.state, inj);
  return res;
}

}  // namespace tpopf
