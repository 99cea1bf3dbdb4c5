#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "tpopf/admittance.hpp"
#include "tpopf/network.hpp"
#include "tpopf/powerflow.hpp"

namespace tpopf::metrics {

/// Raised when a metric has no finite value, e.g. VUF with |V_p| = 0.
class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct SequencePair {
  Complex positive;
  Complex negative;
};

/// Rotation operator a = 1 at 120 degrees.
Complex rotation_a();

SequencePair sequence_components(Complex va, Complex vb, Complex vc);
Complex zero_sequence(Complex va, Complex vb, Complex vc);
/// Inverse transform from (V_0, V_p, V_n) back to phase phasors.
std::array<Complex, 3> phase_phasors(Complex v0, Complex vp, Complex vn);

/// |V_n| / |V_p| as a fraction. Throws UndefinedMetric("zero positive sequence").
double vuf(Complex va, Complex vb, Complex vc);

std::array<double, 3> line_to_line_magnitudes(const std::array<double, 3>& v, const std::array<double, 3>& theta);

/// Largest deviation from the mean of three magnitudes, relative to the mean.
double max_relative_deviation(double x, double y, double z);
inline double lvur(double v_ab, double v_bc, double v_ca) { return max_relative_deviation(v_ab, v_bc, v_ca); }
inline double pvur(double v_a, double v_b, double v_c) { return max_relative_deviation(v_a, v_b, v_c); }

struct DeviceLoss {
  std::string name;
  double kw = 0.0;
};

/// Real power lost in each device, from its series currents.
std::vector<DeviceLoss> device_losses(const SystemAdmittance& sys, const VoltageState& state, double s_base_kva);
/// Sum of device_losses, kW.
double network_losses(const SystemAdmittance& sys, const VoltageState& state, double s_base_kva);

/// (P_a + P_b + P_c) / (S_a + S_b + S_c). Throws UndefinedMetric for zero
/// apparent power.
double substation_power_factor(const std::array<double, 3>& p, const std::array<double, 3>& q);

enum class Metric { VUF = 0, LVUR = 1, PVUR = 2 };

struct BusUnbalance {
  int bus = -1;
  std::array<double, 3> values{};  // indexed by Metric
};

struct UnbalanceSummary {
  std::array<double, 3> avg{};
  std::array<double, 3> max{};
  std::array<std::string, 3> argmax;
  int three_phase_buses = 0;
};

/// Unbalance at every three-phase bus (the substation included).
std::vector<BusUnbalance> bus_unbalance(const Network& net, const SystemAdmittance& sys, const VoltageState& state);

/// Throws UndefinedMetric when the network has no three-phase bus.
UnbalanceSummary feeder_unbalance_summary(const Network& net, const SystemAdmittance& sys, const VoltageState& state);

}  // namespace tpopf::metrics
