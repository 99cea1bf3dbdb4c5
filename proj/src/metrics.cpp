#include "tpopf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace tpopf::metrics {

Complex rotation_a() { return std::polar(1.0, 2.0 * std::numbers::pi / 3.0); }

SequencePair sequence_components(Complex va, Complex vb, Complex vc) {
  const Complex a = rotation_a();
  const Complex a2 = a * a;
  return {(va + a * vb + a2 * vc) / 3.0, (va + a2 * vb + a * vc) / 3.0};
}

Complex zero_sequence(Complex va, Complex vb, Complex vc) { return (va + vb + vc) / 3.0; }

std::array<Complex, 3> phase_phasors(Complex v0, Complex vp, Complex vn) {
  const Complex a = rotation_a();
  const Complex a2 = a * a;
  return {v0 + vp + vn, v0 + a2 * vp + a * vn, v0 + a * vp + a2 * vn};
}

double vuf(Complex va, Complex vb, Complex vc) {
  const SequencePair s = sequence_components(va, vb, vc);
  const double scale = std::max({std::abs(va), std::abs(vb), std::abs(vc)});
  if (std::abs(s.positive) <= 1e-12 * scale || std::abs(s.positive) == 0.0)
    throw UndefinedMetric("zero positive sequence");
  return std::abs(s.negative) / std::abs(s.positive);
}

std::array<double, 3> line_to_line_magnitudes(const std::array<double, 3>& v, const std::array<double, 3>& theta) {
  std::array<double, 3> out{};
  for (int k = 0; k < 3; ++k) {
    const int m = (k + 1) % 3;
    const double sq = v[k] * v[k] + v[m] * v[m] - 2.0 * v[k] * v[m] * std::cos(theta[k] - theta[m]);
    out[k] = std::sqrt(std::max(sq, 0.0));
  }
  return out;
}

double max_relative_deviation(double x, double y, double z) {
  const double mean = (x + y + z) / 3.0;
  if (!(mean > 0.0)) throw UndefinedMetric("non-positive mean magnitude");
  const double dev = std::max({std::abs(x - mean), std::abs(y - mean), std::abs(z - mean)});
  return dev / mean;
}

std::vector<DeviceLoss> device_losses(const SystemAdmittance& sys, const VoltageState& state, double s_base_kva) {
  std::vector<DeviceLoss> out;
  out.reserve(sys.devices.size());
  auto gather = [&](const std::vector<int>& nodes) {
    Eigen::VectorXcd v(nodes.size());
    for (std::size_t k = 0; k < nodes.size(); ++k) v(k) = state.phasor(nodes[k]);
    return v;
  };
  for (const TwoPort& d : sys.devices) {
    const Eigen::VectorXcd vf = gather(d.from_nodes), vt = gather(d.to_nodes);
    double loss = 0.0;
    if (d.kind == DeviceKind::Line) {
      // Voltage drop across the series element times its conjugate current.
      const Eigen::VectorXcd drop = vf - vt;
      const Eigen::VectorXcd i = d.y_series * drop;
      loss = drop.dot(i).real();  // dot conjugates its first argument: sum conj(drop) i
    } else {
      const Eigen::VectorXcd i_f = d.y_ff * vf + d.y_ft * vt;
      const Eigen::VectorXcd i_t = d.y_tf * vf + d.y_tt * vt;
      loss = (vf.cwiseProduct(i_f.conjugate()).sum() + vt.cwiseProduct(i_t.conjugate()).sum()).real();
    }
    out.push_back({d.name, loss * s_base_kva});
  }
  return out;
}

double network_losses(const SystemAdmittance& sys, const VoltageState& state, double s_base_kva) {
  double total = 0.0;
  for (const auto& d : device_losses(sys, state, s_base_kva)) total += d.kw;
  return total;
}

double substation_power_factor(const std::array<double, 3>& p, const std::array<double, 3>& q) {
  double ps = 0.0, ss = 0.0;
  for (int k = 0; k < 3; ++k) {
    ps += p[k];
    ss += std::hypot(p[k], q[k]);
  }
  if (!(ss > 0.0)) throw UndefinedMetric("zero apparent power at the substation");
  return ps / ss;
}

std::vector<BusUnbalance> bus_unbalance(const Network& net, const SystemAdmittance& sys, const VoltageState& state) {
  std::vector<BusUnbalance> out;
  for (int b = 0; b < net.n_b(); ++b) {
    if (!net.buses[b].phases.is_three_phase()) continue;
    std::array<double, 3> v{}, th{};
    std::array<Complex, 3> ph{};
    for (int k = 0; k < 3; ++k) {
      const int node = sys.index.node(b, static_cast<Phase>(k));
      v[k] = state.magnitude[node];
      th[k] = state.angle[node];
      ph[k] = state.phasor(node);
    }
    const auto ll = line_to_line_magnitudes(v, th);
    BusUnbalance u;
    u.bus = b;
    u.values[static_cast<int>(Metric::VUF)] = vuf(ph[0], ph[1], ph[2]);
    u.values[static_cast<int>(Metric::LVUR)] = lvur(ll[0], ll[1], ll[2]);
    u.values[static_cast<int>(Metric::PVUR)] = pvur(v[0], v[1], v[2]);
    out.push_back(u);
  }
  return out;
}

UnbalanceSummary feeder_unbalance_summary(const Network& net, const SystemAdmittance& sys, const VoltageState& state) {
  const auto per_bus = bus_unbalance(net, sys, state);
  if (per_bus.empty()) throw UndefinedMetric("no three-phase bus in the network");
  UnbalanceSummary s;
  s.three_phase_buses = static_cast<int>(per_bus.size());
  for (int m = 0; m < 3; ++m) {
    double sum = 0.0, best = -1.0;
    for (const auto& u : per_bus) {
      sum += u.values[m];
      if (u.values[m] > best) {
        best = u.values[m];
        s.argmax[m] = net.buses[u.bus].id;
      }
    }
    s.avg[m] = sum / static_cast<double>(per_bus.size());
    s.max[m] = best;
  }
  return s;
}

}  // namespace tpopf::metrics
