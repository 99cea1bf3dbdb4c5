#pragma once

#include <functional>
#include <string>

#include <Eigen/Dense>

namespace tpopf::nlp {

/// Smooth nonlinear program
///   min f(x)  s.t.  g_l <= g(x) <= g_u,  x_l <= x <= x_u.
/// Rows with g_l == g_u are equalities. Infinite bounds are allowed.
class Problem {
 public:
  virtual ~Problem() = default;

  virtual int num_variables() const = 0;
  virtual int num_constraints() const = 0;
  virtual void bounds(Eigen::VectorXd& x_l, Eigen::VectorXd& x_u, Eigen::VectorXd& g_l,
                      Eigen::VectorXd& g_u) const = 0;

  virtual double objective(const Eigen::VectorXd& x) const = 0;
  virtual void gradient(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const = 0;
  virtual void constraints(const Eigen::VectorXd& x, Eigen::VectorXd& g) const = 0;
  /// Dense m x n Jacobian of g.
  virtual void jacobian(const Eigen::VectorXd& x, Eigen::MatrixXd& jac) const = 0;
  /// Dense symmetric sigma * hess f + sum_i lambda_i * hess g_i.
  virtual void hessian(const Eigen::VectorXd& x, double sigma, const Eigen::VectorXd& lambda,
                       Eigen::MatrixXd& hess) const = 0;
};

enum class Status { Optimal, MaxIter, Infeasible };
enum class Method { InteriorPoint, AugmentedLagrangian };

std::string status_name(Status s);

struct Options {
  double kkt_tol = 1e-6;
  double feas_tol = 1e-6;
  int max_iter = 3000;
  double mu_init = 0.1;
  /// Objective multiplier; 0 picks one from the gradient at the start point.
  double obj_scaling = 0.0;
  Method method = Method::InteriorPoint;
  bool verbose = false;
};

struct Result {
  Status status = Status::MaxIter;
  Eigen::VectorXd x;
  Eigen::VectorXd lambda;  // constraint multipliers, unscaled
  Eigen::VectorXd z_l, z_u;
  double objective = 0.0;
  int iterations = 0;
  /// Unscaled first-order residuals at x.
  double stationarity = 0.0;
  double primal_infeasibility = 0.0;
  double complementarity = 0.0;
  /// Scaled optimality error used for the termination test.
  double kkt_error = 0.0;
};

Result solve(const Problem& problem, const Eigen::VectorXd& x0, const Options& opts = {});

/// Unscaled residuals of a candidate primal-dual point.
struct Residuals {
  double stationarity = 0.0;
  double primal_infeasibility = 0.0;
  double complementarity = 0.0;
};
Residuals residuals(const Problem& problem, const Eigen::VectorXd& x, const Eigen::VectorXd& lambda,
                    const Eigen::VectorXd& z_l, const Eigen::VectorXd& z_u);

}  // namespace tpopf::nlp
