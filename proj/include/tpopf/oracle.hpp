#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "tpopf/admittance.hpp"
#include "tpopf/network.hpp"
#include "tpopf/opf.hpp"
#include "tpopf/powerflow.hpp"

namespace tpopf::oracle {

/// Setpoints of one inverter, pu. n_points >= 2 evenly spaced values between
/// the bounds, with 0 added when it lies inside and is not already a point.
struct GridAxis {
  double q_min = 0.0;
  double q_max = 0.0;
  int n_points = 2;
};

struct GridSpec {
  std::vector<GridAxis> axes;  // one per inverter, network order

  /// Full reactive range of every inverter with n_points each.
  static GridSpec full_range(const Network& net, int n_points);
};

std::vector<double> axis_points(const GridAxis& axis);

class GridTooLarge : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr long long kMaxGridPoints = 10'000'000;

struct GridResult {
  std::vector<double> q;  // best setpoints, pu
  double objective = 0.0;
  VoltageState state;
  long long evaluated = 0;
  long long feasible = 0;
  long long diverged = 0;
};

/// Objective of `kind` at a solved state, computed through the metrics module
/// (device losses, VUF squared, LVUR, PVUR) rather than the OPF elements.
double score(const Network& net, const SystemAdmittance& sys, ProblemKind kind, const VoltageState& state);

/// True when the state respects voltage bounds, substation limits and, for
/// P5, the unbalance limits.
bool admissible(const Network& net, const SystemAdmittance& sys, ProblemKind kind, const VoltageState& state,
                const InjectionSet& inj, const UnbalanceLimits& limits);

/// Exhaustive scan of the setpoint grid with one power flow per point.
/// `threads` = 0 uses the hardware concurrency capped by TPOPF_THREADS.
/// Throws GridTooLarge above kMaxGridPoints and std::runtime_error when no
/// point yields an admissible power-flow solution.
GridResult grid_search(const Network& net, ProblemKind kind, const GridSpec& grid, const UnbalanceLimits& limits = {},
                       int threads = 0);

/// Largest entrywise discrepancy between `analytic` and central differences
/// of `fn` at x, each relative to max(1, |analytic|, |numeric|).
double finite_difference_check(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& fn,
                               const Eigen::MatrixXd& analytic, const Eigen::VectorXd& x, double h = 1e-6);

/// Scalar version for gradients.
double finite_difference_check(const std::function<double(const Eigen::VectorXd&)>& fn,
                               const Eigen::VectorXd& analytic, const Eigen::VectorXd& x, double h = 1e-6);

/// Worker count: hardware concurrency, capped by TPOPF_THREADS when set.
int worker_count(int requested = 0);

}  // namespace tpopf::oracle
