#pragma once

#include <random>

#include "oracles.hpp"
#include "tpopf/opf.hpp"
#include "tpopf/powerflow.hpp"

namespace helpers {

/// A point near the Q = 0 power flow with every coordinate perturbed: angles
/// and magnitudes by up to 0.03, setpoints anywhere in their range and
/// auxiliaries strictly positive. Used for derivative checks.
inline Eigen::VectorXd random_point(const tpopf::OptimizationProblem& prob, std::mt19937& rng) {
  using namespace tpopf;
  const Network& net = prob.network();
  const SystemAdmittance& sys = prob.admittance();
  const VoltageState base = solve_powerflow(net, sys, inverter_injections(net, sys)).state;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  VoltageState s = base;
  const int slack = net.slack_index();
  for (int n = 0; n < sys.node_count(); ++n) {
    if (sys.index.bus(n) == slack) continue;
    s.magnitude[n] += 0.03 * u(rng);
    s.angle[n] += 0.03 * u(rng);
  }
  std::vector<double> q(net.inverters.size());
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = inverter_q_bounds(net.inverters[i]).second * u(rng);
  Eigen::VectorXd x = prob.pack(s, {0.3 * u(rng), 0.3 * u(rng), 0.3 * u(rng)}, {0.1 * u(rng), 0.1 * u(rng), 0.1 * u(rng)}, q);
  const VariableLayout& l = prob.layout();
  auto jitter = [&](int v) {
    if (v >= 0) x(v) = std::abs(x(v)) + 0.01 + 0.02 * std::abs(u(rng));
  };
  for (const BusAuxiliaries& a : l.aux) {
    for (int k = 0; k < 3; ++k) {
      jitter(a.z1p[k]);
      jitter(a.z1l[k]);
    }
    jitter(a.z2p);
    jitter(a.z2l);
    for (int k = 0; k < 3; ++k)
      if (a.vll[k] >= 0) x(a.vll[k]) += 0.02 * u(rng);
  }
  return x;
}

inline tpopf::Network load(const std::string& name) { return tpopf::load_case_file(ref::case_path(name)); }

}  // namespace helpers
