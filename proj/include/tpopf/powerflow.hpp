#pragma once

#include <array>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Sparse>

#include "tpopf/admittance.hpp"
#include "tpopf/network.hpp"

namespace tpopf {

/// Per-node voltage magnitude [pu] and angle [rad], indexed like NodeIndex.
struct VoltageState {
  std::vector<double> magnitude;
  std::vector<double> angle;

  Complex phasor(int node) const { return std::polar(magnitude[node], angle[node]); }
  Eigen::VectorXcd phasors() const;

  /// Magnitudes 1 pu, angles 0 / -120 / +120 degrees by phase.
  static VoltageState flat(const NodeIndex& index);
};

/// Nominal angle of a phase at the substation reference.
double nominal_angle(Phase p);

/// Specified per-node generation (inverters), pu. The slack's substation
/// injection is not part of the set; it follows from the solution.
struct InjectionSet {
  Eigen::VectorXd p_gen;
  Eigen::VectorXd q_gen;
};

/// Inverter active outputs plus the given reactive setpoints (pu, one per
/// inverter, in network order). An empty span means Q = 0 everywhere.
InjectionSet inverter_injections(const Network& net, const SystemAdmittance& sys,
                                 std::span<const double> q_setpoints = {});

/// Complex power of a polynomial load at magnitude v (line-to-ground for wye,
/// line-to-line for delta). Throws std::domain_error for v <= 0.
Complex zip_load_power(const ZipLoad& load, double v);

/// Voltage-dependent demand per node, with delta loads split onto phases.
Eigen::VectorXcd node_demand(const Network& net, const SystemAdmittance& sys, const VoltageState& state);

/// Nodes other than the slack bus's, ascending. Mismatch rows and Newton
/// unknowns follow this order: rows [dP..., dQ...], unknowns [theta..., V...].
std::vector<int> non_slack_nodes(const Network& net, const SystemAdmittance& sys);

/// Specified generation minus voltage-dependent load minus network flow at
/// every non-slack node.
Eigen::VectorXd power_mismatch(const Network& net, const SystemAdmittance& sys, const VoltageState& state,
                               const InjectionSet& inj);

/// Analytic derivative of power_mismatch with respect to [theta; V] of the
/// non-slack nodes.
Eigen::SparseMatrix<double> mismatch_jacobian(const Network& net, const SystemAdmittance& sys,
                                              const VoltageState& state);

/// Substation generation per phase implied by a voltage state.
std::array<Complex, 3> slack_generation(const Network& net, const SystemAdmittance& sys, const VoltageState& state,
                                        const InjectionSet& inj);

struct PowerFlowOptions {
  double tol = 1e-8;
  int max_iter = 50;
};

struct PowerFlowResult {
  VoltageState state;
  int iterations = 0;
  double residual = 0.0;
  std::array<Complex, 3> slack_power{};
};

class PowerFlowError : public std::runtime_error {
 public:
  PowerFlowError(const std::string& what, int iterations, double residual)
      : std::runtime_error(what), iterations_(iterations), residual_(residual) {}
  int iterations() const { return iterations_; }
  double residual() const { return residual_; }

 private:
  int iterations_;
  double residual_;
};

/// Polar Newton-Raphson from a flat start (or `start` when given). Throws
/// PowerFlowError on non-convergence or a singular Jacobian.
PowerFlowResult solve_powerflow(const Network& net, const SystemAdmittance& sys, const InjectionSet& inj,
                                const PowerFlowOptions& opts = {}, const VoltageState* start = nullptr);

}  // namespace tpopf
