#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tpopf/admittance.hpp"
#include "tpopf/metrics.hpp"
#include "tpopf/network.hpp"
#include "tpopf/nlp.hpp"
#include "tpopf/powerflow.hpp"

namespace tpopf {

enum class ProblemKind { P1_Loss, P2_VUF, P3_LVUR, P4_PVUR, P5_LossVU };

/// "P1" .. "P5".
std::string_view problem_code(ProblemKind k);
/// "P1-Loss", "P2-VUF", ...
std::string_view problem_label(ProblemKind k);
std::optional<ProblemKind> problem_from_code(std::string_view code);
inline constexpr std::array<ProblemKind, 5> kAllProblems{ProblemKind::P1_Loss, ProblemKind::P2_VUF,
                                                         ProblemKind::P3_LVUR, ProblemKind::P4_PVUR,
                                                         ProblemKind::P5_LossVU};

/// Unbalance limits as fractions (0.02 means 2 %).
struct UnbalanceLimits {
  double u_vuf = 0.02;
  double u_pvur = 0.02;
  double u_lvur = 0.03;
};

/// Symmetric reactive limits +-sqrt(S^2 - P^2), in the units of the inputs.
/// Throws std::invalid_argument when P > S or either is negative.
std::pair<double, double> inverter_q_bounds(double s_rating, double p_output);
inline std::pair<double, double> inverter_q_bounds(const Inverter& inv) {
  return inverter_q_bounds(inv.s_rating, inv.p_output);
}

/// Polar form of the sequence transform: (V_p^d, V_p^q, V_n^d, V_n^q).
template <class T>
std::array<T, 4> vuf_sequence_decomposition(const T& va, const T& vb, const T& vc, const T& ta, const T& tb,
                                            const T& tc) {
  using std::cos;
  using std::sin;
  constexpr double k = 2.0943951023931957;  // 2 pi / 3
  const double third = 1.0 / 3.0;
  return {third * (va * cos(ta) + vb * cos(tb + k) + vc * cos(tc - k)),
          third * (va * sin(ta) + vb * sin(tb + k) + vc * sin(tc - k)),
          third * (va * cos(ta) + vb * cos(tb - k) + vc * cos(tc + k)),
          third * (va * sin(ta) + vb * sin(tb - k) + vc * sin(tc + k))};
}

/// Auxiliary variables attached to one three-phase bus. Absent blocks hold -1.
struct BusAuxiliaries {
  int bus = -1;
  std::array<int, 3> z1p{-1, -1, -1};
  int z2p = -1;
  std::array<int, 3> vll{-1, -1, -1};
  std::array<int, 3> z1l{-1, -1, -1};
  int z2l = -1;
};

/// Variable positions inside the decision vector.
struct VariableLayout {
  std::vector<int> theta;  // per node, -1 at the slack
  std::vector<int> vmag;   // per node, -1 at the slack
  std::array<int, 3> p_sub{-1, -1, -1};
  std::array<int, 3> q_sub{-1, -1, -1};
  std::vector<int> q_inv;  // per inverter
  std::vector<BusAuxiliaries> aux;
  int size = 0;
  int auxiliary_count = 0;
};

/// Number of rows contributed by each constraint family.
struct ConstraintFamilies {
  int power_balance = 0;
  int vuf = 0;
  int pvur_deviation = 0;
  int pvur_ratio = 0;
  int line_to_line = 0;
  int lvur_deviation = 0;
  int lvur_ratio = 0;
  /// z_2 upper limits (P5), imposed as variable bounds.
  int pvur_limit = 0;
  int lvur_limit = 0;
};

namespace detail {

enum class ElementKind {
  Linear,        // sum c_k x_k
  FlowP,         // V_n V_m (G cos + B sin), inputs (Vn, tn, Vm, tm)
  FlowQ,         // V_n V_m (G sin - B cos)
  WyeLoadP,      // polynomial in V
  WyeLoadQ,
  DeltaLoad,     // one of four outputs of delta_load_split, inputs (Vp, tp, Vq, tq)
  SequenceRatio, // V_n^2 / V_p^2, inputs (Va, Vb, Vc, ta, tb, tc)
  VufLimit,      // V_n^2 - u^2 V_p^2
  LineToLine,    // Vll^2 - (Va^2 + Vb^2 - 2 Va Vb cos(ta - tb)), inputs (Vll, Va, Vb, ta, tb)
  DeviationRatio // z2 (x1 + x2 + x3) / 3 - z1, inputs (z2, z1, x1, x2, x3)
};

struct Input {
  int var = -1;  // decision variable index, or -1 for a constant
  double value = 0.0;
};

struct Element {
  ElementKind kind = ElementKind::Linear;
  int row = -1;  // -1: objective
  int count = 0;
  std::array<Input, 6> in{};
  std::array<double, 6> c{};  // kind-specific coefficients
  double scale = 1.0;
  ZipCoefficients zip;
  int output = 0;  // DeltaLoad: 0..3 = first.p, first.q, second.p, second.q
};

}  // namespace detail

/// One of P1..P5 as a smooth NLP over (theta, V) of the non-slack nodes,
/// substation injections, inverter reactive power and epigraph auxiliaries.
class OptimizationProblem : public nlp::Problem {
 public:
  OptimizationProblem(const Network& net, ProblemKind kind, const UnbalanceLimits& limits);

  int num_variables() const override { return layout_.size; }
  int num_constraints() const override { return static_cast<int>(g_l_.size()); }
  void bounds(Eigen::VectorXd& x_l, Eigen::VectorXd& x_u, Eigen::VectorXd& g_l,
              Eigen::VectorXd& g_u) const override;
  double objective(const Eigen::VectorXd& x) const override;
  void gradient(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const override;
  void constraints(const Eigen::VectorXd& x, Eigen::VectorXd& g) const override;
  void jacobian(const Eigen::VectorXd& x, Eigen::MatrixXd& jac) const override;
  void hessian(const Eigen::VectorXd& x, double sigma, const Eigen::VectorXd& lambda,
               Eigen::MatrixXd& hess) const override;

  ProblemKind kind() const { return kind_; }
  const UnbalanceLimits& limits() const { return limits_; }
  const Network& network() const { return net_; }
  const SystemAdmittance& admittance() const { return sys_; }
  const VariableLayout& layout() const { return layout_; }
  const ConstraintFamilies& families() const { return families_; }
  const std::vector<int>& three_phase_buses() const { return three_phase_; }
  /// Short description per row, for diagnostics.
  const std::vector<std::string>& row_names() const { return row_names_; }

  /// Decision vector matching a voltage state and injections; auxiliaries are
  /// set to their tight values.
  Eigen::VectorXd pack(const VoltageState& state, const std::array<double, 3>& p_sub,
                       const std::array<double, 3>& q_sub, const std::vector<double>& q_inv) const;
  VoltageState unpack_state(const Eigen::VectorXd& x) const;
  /// Replace every auxiliary by the smallest value its constraints allow.
  void tighten_auxiliaries(Eigen::VectorXd& x) const;

 private:
  int add_row(std::string name, double lo, double hi);
  detail::Input node_theta(int node) const;
  detail::Input node_vmag(int node) const;
  void add_power_balance();
  void add_sequence_terms(int bus, bool as_objective);
  void add_pvur(int bus, BusAuxiliaries& aux);
  void add_lvur(int bus, BusAuxiliaries& aux);

  Network net_;
  SystemAdmittance sys_;
  ProblemKind kind_;
  UnbalanceLimits limits_;
  VariableLayout layout_;
  ConstraintFamilies families_;
  std::vector<int> three_phase_;
  Eigen::VectorXd x_l_, x_u_;
  std::vector<double> g_l_, g_u_;
  std::vector<double> row_const_;
  double objective_offset_ = 0.0;
  std::vector<std::string> row_names_;
  std::vector<detail::Element> elements_;
};

/// Throws std::invalid_argument("no three-phase bus") for unbalance kinds on
/// a network without any three-phase bus.
OptimizationProblem build_problem(const Network& net, ProblemKind kind, const UnbalanceLimits& limits = {});

enum class StartPoint { PowerFlow, Flat };

struct SolveOptions {
  double feas_tol = 1e-6;
  double kkt_tol = 1e-6;
  int max_iter = 3000;
  StartPoint start = StartPoint::PowerFlow;
  nlp::Method method = nlp::Method::InteriorPoint;
  bool verbose = false;
};

struct Solution {
  ProblemKind kind = ProblemKind::P1_Loss;
  nlp::Status status = nlp::Status::MaxIter;
  VoltageState state;
  std::array<double, 3> p_sub{};  // pu
  std::array<double, 3> q_sub{};  // pu
  std::vector<double> q_inv;      // pu, per inverter
  Eigen::VectorXd x;
  double objective = 0.0;
  double stationarity = 0.0;
  double primal_infeasibility = 0.0;
  double complementarity = 0.0;
  double kkt_error = 0.0;
  int iterations = 0;
};

Solution solve(const OptimizationProblem& prob, const SolveOptions& opts = {});

/// Objective of `kind` evaluated on a solved voltage state, with tight
/// auxiliaries (so P3 and P4 score the summed LVUR and PVUR).
double objective_value(const OptimizationProblem& prob, const VoltageState& state);

/// Injection set that reproduces a solution when fed to solve_powerflow.
InjectionSet solution_injections(const Network& net, const SystemAdmittance& sys, const Solution& sol);

struct ReportRow {
  std::string problem;
  std::string status;
  double loss_kw = 0.0;
  double power_factor = 0.0;
  double q_avg_kvar = 0.0;
  metrics::UnbalanceSummary unbalance;
};

/// Metrics recomputed from a voltage state and reactive setpoints (pu).
ReportRow evaluate_state(const Network& net, const SystemAdmittance& sys, const VoltageState& state,
                         const std::vector<double>& q_inv, std::string problem, std::string status);
ReportRow evaluate_solution(const Network& net, const SystemAdmittance& sys, const Solution& sol);

}  // namespace tpopf
