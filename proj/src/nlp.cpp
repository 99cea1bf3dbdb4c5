#include "tpopf/nlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <vector>

#include <lapacke.h>

namespace tpopf::nlp {

std::string status_name(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::MaxIter: return "max_iter";
    case Status::Infeasible: return "infeasible";
  }
  return "unknown";
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kBigBound = 1e19;
constexpr double kKappaD = 1e-5;     // damping for one-sided bounds
constexpr double kKappaSigma = 1e10;  // bound multiplier safeguard
constexpr double kGammaTheta = 1e-5;
constexpr double kGammaPhi = 1e-8;
constexpr double kSTheta = 1.1;
constexpr double kSPhi = 2.3;
constexpr double kEta = 1e-8;
constexpr double kDelta = 1.0;
constexpr double kGammaAlpha = 0.05;
constexpr double kKappaMu = 0.2;
constexpr double kThetaMu = 1.5;
constexpr double kKappaEps = 10.0;
constexpr double kSMax = 100.0;

bool finite_bound(double b) { return std::isfinite(b) && std::abs(b) < kBigBound; }

// Bunch-Kaufman LDL^T of a dense symmetric matrix, with the inertia read off
// the 1x1 and 2x2 pivot blocks of D.
class SymmetricFactor {
 public:
  bool factor(const MatrixXd& k) {
    n_ = static_cast<int>(k.rows());
    a_ = k;
    ipiv_.assign(n_, 0);
    const double scale = n_ > 0 ? std::max(1.0, k.cwiseAbs().maxCoeff()) : 1.0;
    const lapack_int info = LAPACKE_dsytrf(LAPACK_COL_MAJOR, 'L', n_, a_.data(), n_, ipiv_.data());
    if (info < 0) return false;
    positive = negative = zero = 0;
    // Relative to the largest entry, which the barrier terms can make huge;
    // anything looser misreads genuine small negative pivots as zero.
    const double tol = 1e-22 * scale;
    for (int i = 0; i < n_;) {
      if (ipiv_[i] > 0) {
        classify(a_(i, i), tol);
        ++i;
      } else {
        const double a = a_(i, i), b = a_(i + 1, i), c = a_(i + 1, i + 1);
        const double mid = 0.5 * (a + c), rad = std::hypot(0.5 * (a - c), b);
        classify(mid + rad, tol);
        classify(mid - rad, tol);
        i += 2;
      }
    }
    return true;
  }

  VectorXd solve(const VectorXd& rhs) const {
    VectorXd x = rhs;
    if (n_ > 0) LAPACKE_dsytrs(LAPACK_COL_MAJOR, 'L', n_, 1, a_.data(), n_, ipiv_.data(), x.data(), n_);
    return x;
  }

  int positive = 0, negative = 0, zero = 0;

 private:
  void classify(double d, double tol) {
    if (std::abs(d) <= tol)
      ++zero;
    else if (d > 0.0)
      ++positive;
    else
      ++negative;
  }

  int n_ = 0;
  MatrixXd a_;
  std::vector<lapack_int> ipiv_;
};

struct FilterEntry {
  double theta, phi;
};

class InteriorPoint {
 public:
  InteriorPoint(const Problem& p, const Options& o) : prob_(p), opt_(o) {}
  Result run(const VectorXd& x0);

 private:
  struct Errors {
    double dual = 0, primal = 0, compl_mu = 0, total = 0;
  };

  void setup(const VectorXd& x0);
  double scaled_objective(const VectorXd& w) const { return obj_scale_ * prob_.objective(w.head(n_)); }
  VectorXd scaled_gradient(const VectorXd& w) const;
  VectorXd residual(const VectorXd& w) const;
  MatrixXd jacobian_w(const VectorXd& w) const;
  void evaluate();

  double barrier(const VectorXd& w, double f) const;
  VectorXd barrier_gradient(const VectorXd& w) const;
  VectorXd sigma() const;
  double max_step(const VectorXd& w, const VectorXd& dw, double tau) const;
  double max_dual_step(const VectorXd& dzl, const VectorXd& dzu, double tau) const;
  void push_interior(VectorXd& w) const;
  Errors optimality_error(double mu) const;

  bool factor_kkt(const MatrixXd& k0, double base_dw);
  MatrixXd kkt_matrix(const MatrixXd& hess_w, const VectorXd& sig) const;
  void least_squares_multipliers();
  bool acceptable_to_filter(double theta, double phi) const;
  void augment_filter(double theta, double phi);
  bool restore();
  void correct_bound_multipliers();
  Result finish(Status status);

  const Problem& prob_;
  Options opt_;
  int n_ = 0, m_ = 0, ns_ = 0, nw_ = 0;
  VectorXd xl_, xu_, gl_, gu_;
  std::vector<int> row_slack_;
  VectorXd wl_, wu_;
  std::vector<char> has_l_, has_u_;
  VectorXd d_;
  double obj_scale_ = 1.0;

  VectorXd w_, y_, zl_, zu_;
  double mu_ = 0.1, tau_ = 0.99;
  double f_ = 0.0;
  VectorXd grad_f_, h_;
  MatrixXd jac_;

  SymmetricFactor kkt_;
  double delta_w_last_ = 0.0;
  double delta_w_ = 0.0, delta_c_ = 0.0;
  std::vector<FilterEntry> filter_;
  double theta_max_ = 0.0, theta_min_ = 0.0;
  int iter_ = 0;
};

void InteriorPoint::setup(const VectorXd& x0) {
  n_ = prob_.num_variables();
  m_ = prob_.num_constraints();
  xl_.resize(n_);
  xu_.resize(n_);
  gl_.resize(m_);
  gu_.resize(m_);
  prob_.bounds(xl_, xu_, gl_, gu_);
  row_slack_.assign(m_, -1);
  ns_ = 0;
  for (int i = 0; i < m_; ++i) {
    const bool equality = finite_bound(gl_(i)) && finite_bound(gu_(i)) && gl_(i) == gu_(i);
    if (!equality) row_slack_[i] = ns_++;
  }
  nw_ = n_ + ns_;

  // Gradient-based row scaling at the starting point.
  MatrixXd j0(m_, n_);
  if (m_ > 0) prob_.jacobian(x0, j0);
  d_ = VectorXd::Ones(m_);
  for (int i = 0; i < m_; ++i) {
    const double g = n_ > 0 ? j0.row(i).cwiseAbs().maxCoeff() : 0.0;
    if (g > 100.0) d_(i) = 100.0 / g;
  }
  if (opt_.obj_scaling > 0.0) {
    obj_scale_ = opt_.obj_scaling;
  } else {
    VectorXd g(n_);
    prob_.gradient(x0, g);
    const double gmax = n_ > 0 ? g.cwiseAbs().maxCoeff() : 0.0;
    obj_scale_ = gmax > 0.0 ? std::clamp(1.0 / gmax, 1e-3, 1e4) : 1.0;
  }

  // Bounds on w, relaxed slightly so that equal bounds still have an interior.
  wl_.setConstant(nw_, -10 * kBigBound);
  wu_.setConstant(nw_, 10 * kBigBound);
  has_l_.assign(nw_, 0);
  has_u_.assign(nw_, 0);
  // The relaxation must stay well inside the feasibility tolerance, which is
  // checked against the original bounds.
  const double relax_factor = std::min(1e-8, 1e-2 * opt_.feas_tol);
  auto relax = [&](double b, double sign) { return b + sign * relax_factor * std::max(1.0, std::abs(b)); };
  for (int k = 0; k < n_; ++k) {
    if (finite_bound(xl_(k))) wl_(k) = xl_(k);
    if (finite_bound(xu_(k))) wu_(k) = xu_(k);
  }
  for (int i = 0; i < m_; ++i) {
    const int j = row_slack_[i];
    if (j < 0) continue;
    if (finite_bound(gl_(i))) wl_(n_ + j) = d_(i) * gl_(i);
    if (finite_bound(gu_(i))) wu_(n_ + j) = d_(i) * gu_(i);
  }
  for (int k = 0; k < nw_; ++k) {
    has_l_[k] = finite_bound(wl_(k));
    has_u_[k] = finite_bound(wu_(k));
    if (has_l_[k]) wl_(k) = relax(wl_(k), -1.0);
    if (has_u_[k]) wu_(k) = relax(wu_(k), 1.0);
  }
}

VectorXd InteriorPoint::scaled_gradient(const VectorXd& w) const {
  VectorXd g = VectorXd::Zero(nw_);
  VectorXd gx(n_);
  prob_.gradient(w.head(n_), gx);
  g.head(n_) = obj_scale_ * gx;
  return g;
}

VectorXd InteriorPoint::residual(const VectorXd& w) const {
  VectorXd g(m_);
  if (m_ > 0) prob_.constraints(w.head(n_), g);
  VectorXd h(m_);
  for (int i = 0; i < m_; ++i) {
    const int j = row_slack_[i];
    h(i) = d_(i) * g(i) - (j < 0 ? d_(i) * gl_(i) : w(n_ + j));
  }
  return h;
}

MatrixXd InteriorPoint::jacobian_w(const VectorXd& w) const {
  MatrixXd j = MatrixXd::Zero(m_, nw_);
  if (m_ == 0) return j;
  MatrixXd jx(m_, n_);
  prob_.jacobian(w.head(n_), jx);
  j.leftCols(n_) = d_.asDiagonal() * jx;
  for (int i = 0; i < m_; ++i)
    if (row_slack_[i] >= 0) j(i, n_ + row_slack_[i]) = -1.0;
  return j;
}

void InteriorPoint::evaluate() {
  f_ = scaled_objective(w_);
  grad_f_ = scaled_gradient(w_);
  h_ = residual(w_);
  jac_ = jacobian_w(w_);
}

double InteriorPoint::barrier(const VectorXd& w, double f) const {
  double phi = f;
  for (int k = 0; k < nw_; ++k) {
    if (has_l_[k]) phi -= mu_ * std::log(w(k) - wl_(k));
    if (has_u_[k]) phi -= mu_ * std::log(wu_(k) - w(k));
    if (has_l_[k] && !has_u_[k]) phi += kKappaD * mu_ * (w(k) - wl_(k));
    if (has_u_[k] && !has_l_[k]) phi += kKappaD * mu_ * (wu_(k) - w(k));
  }
  return phi;
}

VectorXd InteriorPoint::barrier_gradient(const VectorXd& w) const {
  VectorXd g = grad_f_;
  for (int k = 0; k < nw_; ++k) {
    if (has_l_[k]) g(k) -= mu_ / (w(k) - wl_(k));
    if (has_u_[k]) g(k) += mu_ / (wu_(k) - w(k));
    if (has_l_[k] && !has_u_[k]) g(k) += kKappaD * mu_;
    if (has_u_[k] && !has_l_[k]) g(k) -= kKappaD * mu_;
  }
  return g;
}

VectorXd InteriorPoint::sigma() const {
  VectorXd s = VectorXd::Zero(nw_);
  for (int k = 0; k < nw_; ++k) {
    if (has_l_[k]) s(k) += zl_(k) / (w_(k) - wl_(k));
    if (has_u_[k]) s(k) += zu_(k) / (wu_(k) - w_(k));
  }
  return s;
}

double InteriorPoint::max_step(const VectorXd& w, const VectorXd& dw, double tau) const {
  double alpha = 1.0;
  for (int k = 0; k < nw_; ++k) {
    if (has_l_[k] && dw(k) < 0.0) alpha = std::min(alpha, -tau * (w(k) - wl_(k)) / dw(k));
    if (has_u_[k] && dw(k) > 0.0) alpha = std::min(alpha, tau * (wu_(k) - w(k)) / dw(k));
  }
  return alpha;
}

double InteriorPoint::max_dual_step(const VectorXd& dzl, const VectorXd& dzu, double tau) const {
  double alpha = 1.0;
  for (int k = 0; k < nw_; ++k) {
    if (has_l_[k] && dzl(k) < 0.0) alpha = std::min(alpha, -tau * zl_(k) / dzl(k));
    if (has_u_[k] && dzu(k) < 0.0) alpha = std::min(alpha, -tau * zu_(k) / dzu(k));
  }
  return alpha;
}

void InteriorPoint::push_interior(VectorXd& w) const {
  constexpr double k1 = 1e-2, k2 = 1e-2;
  for (int k = 0; k < nw_; ++k) {
    const double lo = wl_(k), hi = wu_(k);
    if (has_l_[k] && has_u_[k]) {
      const double pl = std::min(k1 * std::max(1.0, std::abs(lo)), k2 * (hi - lo));
      const double pu = std::min(k1 * std::max(1.0, std::abs(hi)), k2 * (hi - lo));
      w(k) = std::clamp(w(k), lo + pl, hi - pu);
    } else if (has_l_[k]) {
      w(k) = std::max(w(k), lo + k1 * std::max(1.0, std::abs(lo)));
    } else if (has_u_[k]) {
      w(k) = std::min(w(k), hi - k1 * std::max(1.0, std::abs(hi)));
    }
  }
}

InteriorPoint::Errors InteriorPoint::optimality_error(double mu) const {
  Errors e;
  const VectorXd dual = grad_f_ + jac_.transpose() * y_ - zl_ + zu_;
  e.dual = nw_ > 0 ? dual.cwiseAbs().maxCoeff() : 0.0;
  e.primal = m_ > 0 ? h_.cwiseAbs().maxCoeff() : 0.0;
  double zsum = 0.0;
  int nz = 0;
  for (int k = 0; k < nw_; ++k) {
    if (has_l_[k]) {
      e.compl_mu = std::max(e.compl_mu, std::abs((w_(k) - wl_(k)) * zl_(k) - mu));
      zsum += std::abs(zl_(k));
      ++nz;
    }
    if (has_u_[k]) {
      e.compl_mu = std::max(e.compl_mu, std::abs((wu_(k) - w_(k)) * zu_(k) - mu));
      zsum += std::abs(zu_(k));
      ++nz;
    }
  }
  const double ysum = m_ > 0 ? y_.cwiseAbs().sum() : 0.0;
  const double sd = std::max(kSMax, (ysum + zsum) / std::max(1, m_ + nz)) / kSMax;
  const double sc = std::max(kSMax, zsum / std::max(1, nz)) / kSMax;
  e.total = std::max({e.dual / sd, e.primal, e.compl_mu / sc});
  return e;
}

MatrixXd InteriorPoint::kkt_matrix(const MatrixXd& hess_w, const VectorXd& sig) const {
  MatrixXd k = MatrixXd::Zero(nw_ + m_, nw_ + m_);
  k.topLeftCorner(nw_, nw_) = hess_w;
  k.topLeftCorner(nw_, nw_).diagonal() += sig;
  k.bottomLeftCorner(m_, nw_) = jac_;
  k.topRightCorner(nw_, m_) = jac_.transpose();
  return k;
}

// Inertia correction: the factorization must show nw positive and m negative
// eigenvalues, otherwise the Hessian block is regularized further.
bool InteriorPoint::factor_kkt(const MatrixXd& k0, double base_dw) {
  MatrixXd k = k0;
  delta_w_ = base_dw;
  delta_c_ = 0.0;
  auto attempt = [&]() {
    k = k0;
    k.topLeftCorner(nw_, nw_).diagonal().array() += delta_w_;
    k.bottomRightCorner(m_, m_).diagonal().array() -= delta_c_;
    if (!kkt_.factor(k)) return false;
    return kkt_.positive == nw_ && kkt_.negative == m_ && kkt_.zero == 0;
  };
  if (attempt()) return true;
  if (kkt_.zero > 0) delta_c_ = 1e-8 * std::pow(mu_, 0.25);
  delta_w_ = delta_w_last_ == 0.0 ? std::max(base_dw, 1e-4) : std::max({base_dw, 1e-20, delta_w_last_ / 3.0});
  for (int guard = 0; guard < 80; ++guard) {
    if (attempt()) {
      delta_w_last_ = delta_w_;
      return true;
    }
    delta_w_ *= delta_w_last_ == 0.0 ? 100.0 : 8.0;
    if (delta_w_ > 1e40) return false;
  }
  return false;
}

void InteriorPoint::least_squares_multipliers() {
  y_ = VectorXd::Zero(m_);
  if (m_ == 0) return;
  MatrixXd k = MatrixXd::Zero(nw_ + m_, nw_ + m_);
  k.topLeftCorner(nw_, nw_).setIdentity();
  k.bottomLeftCorner(m_, nw_) = jac_;
  k.topRightCorner(nw_, m_) = jac_.transpose();
  k.bottomRightCorner(m_, m_).diagonal().array() = -1e-10;
  SymmetricFactor f;
  if (!f.factor(k)) return;
  VectorXd rhs = VectorXd::Zero(nw_ + m_);
  rhs.head(nw_) = -(grad_f_ - zl_ + zu_);
  const VectorXd sol = f.solve(rhs);
  const VectorXd y = sol.tail(m_);
  if (y.allFinite() && y.cwiseAbs().maxCoeff() <= 1e3) y_ = y;
}

bool InteriorPoint::acceptable_to_filter(double theta, double phi) const {
  for (const auto& e : filter_)
    if (theta >= e.theta && phi >= e.phi) return false;
  return true;
}

void InteriorPoint::augment_filter(double theta, double phi) {
  filter_.push_back({(1.0 - kGammaTheta) * theta, phi - kGammaPhi * theta});
}

void InteriorPoint::correct_bound_multipliers() {
  for (int k = 0; k < nw_; ++k) {
    if (has_l_[k]) {
      const double s = w_(k) - wl_(k);
      zl_(k) = std::clamp(zl_(k), mu_ / (kKappaSigma * s), kKappaSigma * mu_ / s);
    }
    if (has_u_[k]) {
      const double s = wu_(k) - w_(k);
      zu_(k) = std::clamp(zu_(k), mu_ / (kKappaSigma * s), kKappaSigma * mu_ / s);
    }
  }
}

// Feasibility restoration: weighted minimum-norm Newton steps on h(w) = 0
// that stay strictly inside the bounds. Returns false when no progress is
// possible, which is taken as local infeasibility.
bool InteriorPoint::restore() {
  const double theta_entry = h_.lpNorm<1>();
  const double phi_entry = barrier(w_, f_);
  for (int it = 0; it < 100; ++it) {
    const double theta = h_.lpNorm<1>();
    MatrixXd k = MatrixXd::Zero(nw_ + m_, nw_ + m_);
    VectorXd dk = sigma().array() + 1e-2;
    k.topLeftCorner(nw_, nw_).diagonal() = dk;
    k.bottomLeftCorner(m_, nw_) = jac_;
    k.topRightCorner(nw_, m_) = jac_.transpose();
    k.bottomRightCorner(m_, m_).diagonal().array() = -1e-10;
    SymmetricFactor f;
    if (!f.factor(k)) return false;
    VectorXd rhs = VectorXd::Zero(nw_ + m_);
    rhs.tail(m_) = -h_;
    const VectorXd dw = f.solve(rhs).head(nw_);
    if (!dw.allFinite()) return false;
    double alpha = max_step(w_, dw, tau_);
    bool moved = false;
    for (int ls = 0; ls < 40; ++ls) {
      const VectorXd wt = w_ + alpha * dw;
      const VectorXd ht = residual(wt);
      const double tt = ht.lpNorm<1>();
      if (std::isfinite(tt) && tt <= (1.0 - 1e-4 * alpha) * theta) {
        w_ = wt;
        moved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!moved) return false;
    evaluate();
    for (int q = 0; q < nw_; ++q) {
      if (has_l_[q]) zl_(q) = std::min(zl_(q), kKappaSigma * mu_ / (w_(q) - wl_(q)));
      if (has_u_[q]) zu_(q) = std::min(zu_(q), kKappaSigma * mu_ / (wu_(q) - w_(q)));
    }
    const double theta_new = h_.lpNorm<1>();
    const double phi_new = barrier(w_, f_);
    if (theta_new <= 0.9 * theta_entry && acceptable_to_filter(theta_new, phi_new) &&
        (theta_new < (1.0 - kGammaTheta) * theta_entry || phi_new < phi_entry - kGammaPhi * theta_entry)) {
      least_squares_multipliers();
      return true;
    }
    if (theta_new < 1e-12) {
      least_squares_multipliers();
      return true;
    }
  }
  return false;
}

Result InteriorPoint::finish(Status status) {
  Result r;
  r.status = status;
  r.iterations = iter_;
  r.x = w_.head(n_);
  r.lambda = VectorXd::Zero(m_);
  for (int i = 0; i < m_; ++i) r.lambda(i) = y_(i) * d_(i) / obj_scale_;
  r.z_l = VectorXd::Zero(n_);
  r.z_u = VectorXd::Zero(n_);
  for (int k = 0; k < n_; ++k) {
    if (has_l_[k]) r.z_l(k) = zl_(k) / obj_scale_;
    if (has_u_[k]) r.z_u(k) = zu_(k) / obj_scale_;
  }
  r.objective = prob_.objective(r.x);
  const Residuals res = residuals(prob_, r.x, r.lambda, r.z_l, r.z_u);
  r.stationarity = res.stationarity;
  r.primal_infeasibility = res.primal_infeasibility;
  r.complementarity = res.complementarity;
  r.kkt_error = optimality_error(0.0).total;
  return r;
}

Result InteriorPoint::run(const VectorXd& x0) {
  setup(x0);
  mu_ = opt_.mu_init;
  tau_ = std::max(0.99, 1.0 - mu_);
  const double mu_min = std::min(1e-9, opt_.kkt_tol / 10.0);

  w_.resize(nw_);
  w_.head(n_) = x0;
  {
    VectorXd g(m_);
    if (m_ > 0) prob_.constraints(x0, g);
    for (int i = 0; i < m_; ++i)
      if (row_slack_[i] >= 0) w_(n_ + row_slack_[i]) = d_(i) * g(i);
  }
  push_interior(w_);
  zl_ = VectorXd::Zero(nw_);
  zu_ = VectorXd::Zero(nw_);
  for (int k = 0; k < nw_; ++k) {
    if (has_l_[k]) zl_(k) = 1.0;
    if (has_u_[k]) zu_(k) = 1.0;
  }
  evaluate();
  if (!std::isfinite(f_) || !h_.allFinite()) return finish(Status::Infeasible);
  least_squares_multipliers();

  const double theta0 = h_.lpNorm<1>();
  theta_max_ = 1e4 * std::max(1.0, theta0);
  theta_min_ = 1e-4 * std::max(1.0, theta0);

  auto unscaled_violation = [&]() {
    VectorXd g(m_);
    if (m_ > 0) prob_.constraints(w_.head(n_), g);
    double v = 0.0;
    for (int i = 0; i < m_; ++i) {
      if (finite_bound(gl_(i))) v = std::max(v, gl_(i) - g(i));
      if (finite_bound(gu_(i))) v = std::max(v, g(i) - gu_(i));
    }
    for (int k = 0; k < n_; ++k) {
      if (finite_bound(xl_(k))) v = std::max(v, xl_(k) - w_(k));
      if (finite_bound(xu_(k))) v = std::max(v, w_(k) - xu_(k));
    }
    return v;
  };

  bool force_mu_update = false;
  for (iter_ = 0;; ++iter_) {
    const Errors e0 = optimality_error(0.0);
    if (opt_.verbose)
      std::fprintf(stderr, "it %4d  f %+.8e  inf_pr %.2e  inf_du %.2e  err %.2e  mu %.1e  dw %.1e\n", iter_,
                   f_ / obj_scale_, e0.primal, e0.dual, e0.total, mu_, delta_w_);
    if (e0.total <= opt_.kkt_tol && unscaled_violation() <= opt_.feas_tol) return finish(Status::Optimal);
    if (iter_ >= opt_.max_iter) return finish(Status::MaxIter);

    // Monotone barrier update.
    for (;;) {
      const Errors em = optimality_error(mu_);
      if (!(force_mu_update || em.total <= kKappaEps * mu_) || mu_ <= mu_min) break;
      force_mu_update = false;
      mu_ = std::max(mu_min, std::min(kKappaMu * mu_, std::pow(mu_, kThetaMu)));
      tau_ = std::max(0.99, 1.0 - mu_);
      filter_.clear();
    }
    force_mu_update = false;

    // Newton system.
    MatrixXd hess = MatrixXd::Zero(nw_, nw_);
    {
      MatrixXd hx(n_, n_);
      VectorXd lam(m_);
      for (int i = 0; i < m_; ++i) lam(i) = y_(i) * d_(i);
      prob_.hessian(w_.head(n_), obj_scale_, lam, hx);
      hess.topLeftCorner(n_, n_) = hx;
    }
    const VectorXd sig = sigma();
    const MatrixXd k0 = kkt_matrix(hess, sig);
    if (!factor_kkt(k0, 0.0)) return finish(Status::Infeasible);

    const VectorXd grad_phi = barrier_gradient(w_);
    VectorXd rhs(nw_ + m_);
    rhs.head(nw_) = -(grad_phi + jac_.transpose() * y_);
    rhs.tail(m_) = -h_;
    const VectorXd sol = kkt_.solve(rhs);
    VectorXd dw = sol.head(nw_);
    VectorXd dy = sol.tail(m_);
    if (!dw.allFinite() || !dy.allFinite()) return finish(Status::Infeasible);

    auto bound_dirs = [&](const VectorXd& step, VectorXd& dzl, VectorXd& dzu) {
      dzl = VectorXd::Zero(nw_);
      dzu = VectorXd::Zero(nw_);
      for (int k = 0; k < nw_; ++k) {
        if (has_l_[k]) {
          const double s = w_(k) - wl_(k);
          dzl(k) = mu_ / s - zl_(k) - zl_(k) / s * step(k);
        }
        if (has_u_[k]) {
          const double s = wu_(k) - w_(k);
          dzu(k) = mu_ / s - zu_(k) + zu_(k) / s * step(k);
        }
      }
    };

    // Tiny steps mean the barrier subproblem is solved as well as it can be.
    double rel_step = 0.0;
    for (int k = 0; k < nw_; ++k) rel_step = std::max(rel_step, std::abs(dw(k)) / (1.0 + std::abs(w_(k))));
    const double theta = h_.lpNorm<1>();
    if (rel_step < 10.0 * std::numeric_limits<double>::epsilon() && theta < 1e-8) {
      VectorXd dzl, dzu;
      bound_dirs(dw, dzl, dzu);
      w_ += dw;
      y_ += dy;
      zl_ += dzl;
      zu_ += dzu;
      correct_bound_multipliers();
      evaluate();
      force_mu_update = true;
      continue;
    }

    // Filter line search with second-order correction.
    const double phi = barrier(w_, f_);
    const double dphi = grad_phi.dot(dw);
    const double alpha_max = max_step(w_, dw, tau_);
    double alpha_min = kGammaTheta;
    if (dphi < 0.0)
      alpha_min = std::min({kGammaTheta, kGammaPhi * theta / -dphi,
                            kDelta * std::pow(theta, kSTheta) / std::pow(-dphi, kSPhi)});
    alpha_min *= kGammaAlpha;

    auto switching = [&](double a) {
      return dphi < 0.0 && a * std::pow(-dphi, kSPhi) > kDelta * std::pow(theta, kSTheta);
    };
    // Returns 0 reject, 1 accept by Armijo, 2 accept by filter margin.
    auto test = [&](double a, double theta_t, double phi_t) -> int {
      if (!std::isfinite(theta_t) || !std::isfinite(phi_t)) return 0;
      if (theta_t > theta_max_) return 0;
      if (!acceptable_to_filter(theta_t, phi_t)) return 0;
      if (theta <= theta_min_ && switching(a)) return phi_t <= phi + kEta * a * dphi ? 1 : 0;
      if (theta_t <= (1.0 - kGammaTheta) * theta || phi_t <= phi - kGammaPhi * theta) return 2;
      return 0;
    };

    double alpha = alpha_max;
    int accepted = 0;
    VectorXd step = dw, ystep = dy;
    double alpha_used = alpha;
    bool first = true;
    while (alpha >= alpha_min) {
      const VectorXd wt = w_ + alpha * dw;
      const double ft = scaled_objective(wt);
      const VectorXd ht = residual(wt);
      const double theta_t = ht.lpNorm<1>();
      const double phi_t = std::isfinite(ft) ? barrier(wt, ft) : std::numeric_limits<double>::infinity();
      accepted = test(alpha, theta_t, phi_t);
      if (accepted) {
        alpha_used = alpha;
        break;
      }
      if (first && std::isfinite(theta_t) && theta_t >= theta) {
        // Second-order correction on the constraint residual.
        VectorXd c_soc = alpha * h_ + ht;
        double theta_prev = theta;
        double theta_soc_t = theta_t;
        for (int p = 0; p < 4 && theta_soc_t < std::numeric_limits<double>::infinity(); ++p) {
          if (p > 0 && theta_soc_t > 0.99 * theta_prev) break;
          theta_prev = theta_soc_t;
          VectorXd r(nw_ + m_);
          r.head(nw_) = -(grad_phi + jac_.transpose() * y_);
          r.tail(m_) = -c_soc;
          const VectorXd s2 = kkt_.solve(r);
          const VectorXd dws = s2.head(nw_);
          const double a_soc = max_step(w_, dws, tau_);
          const VectorXd ws = w_ + a_soc * dws;
          const double fs = scaled_objective(ws);
          const VectorXd hs = residual(ws);
          theta_soc_t = hs.lpNorm<1>();
          const double phi_s = std::isfinite(fs) ? barrier(ws, fs) : std::numeric_limits<double>::infinity();
          accepted = test(alpha, theta_soc_t, phi_s);
          if (accepted) {
            step = dws;
            ystep = s2.tail(m_);
            alpha_used = a_soc;
            break;
          }
          c_soc = a_soc * c_soc + hs;
        }
        if (accepted) break;
      }
      first = false;
      alpha *= 0.5;
    }

    if (!accepted) {
      if (theta <= opt_.feas_tol * 1e-2 && optimality_error(0.0).total <= 10.0 * opt_.kkt_tol) {
        // Converged up to what the line search can resolve.
        return finish(Status::Optimal);
      }
      augment_filter(theta, phi);
      if (!restore()) return finish(Status::Infeasible);
      filter_.clear();
      correct_bound_multipliers();
      continue;
    }
    if (accepted == 2 || !(theta <= theta_min_ && switching(alpha_used))) augment_filter(theta, phi);

    VectorXd dzl, dzu;
    bound_dirs(step, dzl, dzu);
    const double alpha_z = max_dual_step(dzl, dzu, tau_);
    w_ += alpha_used * step;
    y_ += alpha_used * ystep;
    zl_ += alpha_z * dzl;
    zu_ += alpha_z * dzu;
    correct_bound_multipliers();
    evaluate();
  }
}

// Augmented Lagrangian wrapper: equality rows move into the objective with
// multiplier estimates y and penalty rho; inequality rows stay explicit.
class AugmentedProblem : public Problem {
 public:
  AugmentedProblem(const Problem& base) : base_(base) {
    n_ = base.num_variables();
    m_ = base.num_constraints();
    xl_.resize(n_);
    xu_.resize(n_);
    gl_.resize(m_);
    gu_.resize(m_);
    base.bounds(xl_, xu_, gl_, gu_);
    for (int i = 0; i < m_; ++i) {
      if (finite_bound(gl_(i)) && gl_(i) == gu_(i))
        eq_.push_back(i);
      else
        ineq_.push_back(i);
    }
    y_ = VectorXd::Zero(static_cast<int>(eq_.size()));
  }

  int num_variables() const override { return n_; }
  int num_constraints() const override { return static_cast<int>(ineq_.size()); }
  void bounds(VectorXd& x_l, VectorXd& x_u, VectorXd& g_l, VectorXd& g_u) const override {
    x_l = xl_;
    x_u = xu_;
    g_l.resize(ineq_.size());
    g_u.resize(ineq_.size());
    for (std::size_t k = 0; k < ineq_.size(); ++k) {
      g_l(k) = gl_(ineq_[k]);
      g_u(k) = gu_(ineq_[k]);
    }
  }
  VectorXd equality_residual(const VectorXd& x) const {
    VectorXd g(m_);
    base_.constraints(x, g);
    VectorXd c(eq_.size());
    for (std::size_t k = 0; k < eq_.size(); ++k) c(k) = g(eq_[k]) - gl_(eq_[k]);
    return c;
  }
  double objective(const VectorXd& x) const override {
    const VectorXd c = equality_residual(x);
    return base_.objective(x) + y_.dot(c) + 0.5 * rho_ * c.squaredNorm();
  }
  void gradient(const VectorXd& x, VectorXd& grad) const override {
    base_.gradient(x, grad);
    const VectorXd c = equality_residual(x);
    MatrixXd j(m_, n_);
    base_.jacobian(x, j);
    for (std::size_t k = 0; k < eq_.size(); ++k) grad += (y_(k) + rho_ * c(k)) * j.row(eq_[k]).transpose();
  }
  void constraints(const VectorXd& x, VectorXd& g) const override {
    VectorXd full(m_);
    base_.constraints(x, full);
    g.resize(ineq_.size());
    for (std::size_t k = 0; k < ineq_.size(); ++k) g(k) = full(ineq_[k]);
  }
  void jacobian(const VectorXd& x, MatrixXd& jac) const override {
    MatrixXd full(m_, n_);
    base_.jacobian(x, full);
    jac.resize(ineq_.size(), n_);
    for (std::size_t k = 0; k < ineq_.size(); ++k) jac.row(k) = full.row(ineq_[k]);
  }
  void hessian(const VectorXd& x, double sigma, const VectorXd& lambda, MatrixXd& hess) const override {
    const VectorXd c = equality_residual(x);
    VectorXd lam = VectorXd::Zero(m_);
    for (std::size_t k = 0; k < eq_.size(); ++k) lam(eq_[k]) = sigma * (y_(k) + rho_ * c(k));
    for (std::size_t k = 0; k < ineq_.size(); ++k) lam(ineq_[k]) = lambda(k);
    base_.hessian(x, sigma, lam, hess);
    MatrixXd j(m_, n_);
    base_.jacobian(x, j);
    for (int e : eq_) hess += sigma * rho_ * j.row(e).transpose() * j.row(e);
  }

  const std::vector<int>& eq_rows() const { return eq_; }
  const std::vector<int>& ineq_rows() const { return ineq_; }
  VectorXd y_;
  double rho_ = 10.0;

 private:
  const Problem& base_;
  int n_ = 0, m_ = 0;
  VectorXd xl_, xu_, gl_, gu_;
  std::vector<int> eq_, ineq_;
};

Result solve_augmented(const Problem& problem, const VectorXd& x0, const Options& opts) {
  AugmentedProblem al(problem);
  Options inner = opts;
  inner.method = Method::InteriorPoint;
  VectorXd x = x0;
  Result r;
  int total_iter = 0;
  double omega = 1e-2;
  double eta = 1e-1;
  for (int outer = 0; outer < 40; ++outer) {
    inner.kkt_tol = std::max(opts.kkt_tol, omega);
    inner.max_iter = std::max(1, opts.max_iter - total_iter);
    // The penalty changes the objective each round, so let scaling adapt.
    r = InteriorPoint(al, inner).run(x);
    total_iter += r.iterations;
    x = r.x;
    const VectorXd c = al.equality_residual(x);
    const double viol = c.size() ? c.cwiseAbs().maxCoeff() : 0.0;
    if (opts.verbose) std::fprintf(stderr, "AL outer %d  viol %.3e  rho %.1e\n", outer, viol, al.rho_);
    if (r.status == Status::Infeasible && viol > opts.feas_tol) break;
    if (viol <= std::max(eta, opts.feas_tol)) {
      al.y_ += al.rho_ * c;
      if (viol <= opts.feas_tol && r.status == Status::Optimal && inner.kkt_tol <= opts.kkt_tol) break;
      omega = std::max(omega / 10.0, opts.kkt_tol);
      eta = std::max(eta / 10.0, opts.feas_tol);
    } else {
      al.rho_ *= 10.0;
      if (al.rho_ > 1e12) break;
    }
    if (total_iter >= opts.max_iter) break;
  }

  Result out;
  out.x = x;
  out.iterations = total_iter;
  out.lambda = VectorXd::Zero(problem.num_constraints());
  const VectorXd c = al.equality_residual(x);
  for (std::size_t k = 0; k < al.eq_rows().size(); ++k) out.lambda(al.eq_rows()[k]) = al.y_(k) + al.rho_ * c(k);
  for (std::size_t k = 0; k < al.ineq_rows().size(); ++k)
    if (k < static_cast<std::size_t>(r.lambda.size())) out.lambda(al.ineq_rows()[k]) = r.lambda(k);
  out.z_l = r.z_l;
  out.z_u = r.z_u;
  out.objective = problem.objective(x);
  const Residuals res = residuals(problem, x, out.lambda, out.z_l, out.z_u);
  out.stationarity = res.stationarity;
  out.primal_infeasibility = res.primal_infeasibility;
  out.complementarity = res.complementarity;
  out.kkt_error = std::max({res.stationarity, res.complementarity});
  if (r.status == Status::Optimal && res.primal_infeasibility <= opts.feas_tol)
    out.status = Status::Optimal;
  else if (total_iter >= opts.max_iter)
    out.status = Status::MaxIter;
  else
    out.status = Status::Infeasible;
  return out;
}

}  // namespace

Residuals residuals(const Problem& problem, const VectorXd& x, const VectorXd& lambda, const VectorXd& z_l,
                    const VectorXd& z_u) {
  const int n = problem.num_variables(), m = problem.num_constraints();
  VectorXd xl(n), xu(n), gl(m), gu(m);
  problem.bounds(xl, xu, gl, gu);
  VectorXd grad(n), g(m);
  MatrixXd jac(m, n);
  problem.gradient(x, grad);
  if (m > 0) {
    problem.constraints(x, g);
    problem.jacobian(x, jac);
  }
  Residuals r;
  const VectorXd stat = grad + (m > 0 ? VectorXd(jac.transpose() * lambda) : VectorXd::Zero(n)) - z_l + z_u;
  r.stationarity = n > 0 ? stat.cwiseAbs().maxCoeff() : 0.0;
  for (int i = 0; i < m; ++i) {
    if (finite_bound(gl(i))) r.primal_infeasibility = std::max(r.primal_infeasibility, gl(i) - g(i));
    if (finite_bound(gu(i))) r.primal_infeasibility = std::max(r.primal_infeasibility, g(i) - gu(i));
    const bool equality = finite_bound(gl(i)) && gl(i) == gu(i);
    if (equality) continue;
    // L = f + lambda'g: a positive multiplier pairs with the upper side.
    const double slack = lambda(i) >= 0.0 ? (finite_bound(gu(i)) ? gu(i) - g(i) : 1.0)
                                          : (finite_bound(gl(i)) ? g(i) - gl(i) : 1.0);
    r.complementarity = std::max(r.complementarity, std::abs(lambda(i) * slack));
  }
  for (int k = 0; k < n; ++k) {
    if (finite_bound(xl(k))) {
      r.primal_infeasibility = std::max(r.primal_infeasibility, xl(k) - x(k));
      r.complementarity = std::max(r.complementarity, std::abs(z_l(k) * (x(k) - xl(k))));
    }
    if (finite_bound(xu(k))) {
      r.primal_infeasibility = std::max(r.primal_infeasibility, x(k) - xu(k));
      r.complementarity = std::max(r.complementarity, std::abs(z_u(k) * (xu(k) - x(k))));
    }
  }
  return r;
}

Result solve(const Problem& problem, const VectorXd& x0, const Options& opts) {
  if (x0.size() != problem.num_variables()) throw std::invalid_argument("starting point has the wrong size");
  if (opts.method == Method::AugmentedLagrangian) return solve_augmented(problem, x0, opts);
  return InteriorPoint(problem, opts).run(x0);
}

}  // namespace tpopf::nlp
