#include "tpopf/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <thread>

#include "tpopf/metrics.hpp"

namespace tpopf::oracle {

GridSpec GridSpec::full_range(const Network& net, int n_points) {
  GridSpec g;
  for (const Inverter& inv : net.inverters) {
    const auto [lo, hi] = inverter_q_bounds(inv);
    g.axes.push_back({lo, hi, n_points});
  }
  return g;
}

std::vector<double> axis_points(const GridAxis& axis) {
  if (axis.n_points < 2) throw std::invalid_argument("a grid axis needs at least two points");
  if (axis.q_min > axis.q_max) throw std::invalid_argument("grid axis bounds are reversed");
  std::vector<double> pts;
  for (int k = 0; k < axis.n_points; ++k) {
    const double t = static_cast<double>(k) / (axis.n_points - 1);
    pts.push_back(k == axis.n_points - 1 ? axis.q_max : axis.q_min + t * (axis.q_max - axis.q_min));
  }
  if (axis.q_min < 0.0 && axis.q_max > 0.0) {
    const double span = axis.q_max - axis.q_min;
    const bool has_zero = std::any_of(pts.begin(), pts.end(), [&](double v) { return std::abs(v) <= 1e-12 * span; });
    if (has_zero) {
      for (double& v : pts)
        if (std::abs(v) <= 1e-12 * span) v = 0.0;
    } else {
      pts.push_back(0.0);
    }
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

double score(const Network& net, const SystemAdmittance& sys, ProblemKind kind, const VoltageState& state) {
  if (kind == ProblemKind::P1_Loss || kind == ProblemKind::P5_LossVU)
    return metrics::network_losses(sys, state, net.s_base_kva) / net.s_base_kva;
  double total = 0.0;
  for (const auto& u : metrics::bus_unbalance(net, sys, state)) {
    switch (kind) {
      case ProblemKind::P2_VUF: {
        const double v = u.values[static_cast<int>(metrics::Metric::VUF)];
        total += v * v;
        break;
      }
      case ProblemKind::P3_LVUR: total += u.values[static_cast<int>(metrics::Metric::LVUR)]; break;
      case ProblemKind::P4_PVUR: total += u.values[static_cast<int>(metrics::Metric::PVUR)]; break;
      default: break;
    }
  }
  return total;
}

bool admissible(const Network& net, const SystemAdmittance& sys, ProblemKind kind, const VoltageState& state,
                const InjectionSet& inj, const UnbalanceLimits& limits) {
  constexpr double tol = 1e-9;
  const int slack = net.slack_index();
  for (int n = 0; n < sys.node_count(); ++n) {
    const int b = sys.index.bus(n);
    if (b == slack) continue;
    const int p = static_cast<int>(sys.index.phase(n));
    const double v = state.magnitude[n];
    if (v < net.buses[b].v_min[p] - tol || v > net.buses[b].v_max[p] + tol) return false;
  }
  const auto sub = slack_generation(net, sys, state, inj);
  const SubstationLimits& sl = net.substation_limits;
  for (int p = 0; p < 3; ++p) {
    if (sub[p].real() < sl.p_min[p] - tol || sub[p].real() > sl.p_max[p] + tol) return false;
    if (sub[p].imag() < sl.q_min[p] - tol || sub[p].imag() > sl.q_max[p] + tol) return false;
  }
  if (kind == ProblemKind::P5_LossVU) {
    for (const auto& u : metrics::bus_unbalance(net, sys, state)) {
      if (u.values[static_cast<int>(metrics::Metric::VUF)] > limits.u_vuf + tol) return false;
      if (u.values[static_cast<int>(metrics::Metric::LVUR)] > limits.u_lvur + tol) return false;
      if (u.values[static_cast<int>(metrics::Metric::PVUR)] > limits.u_pvur + tol) return false;
    }
  }
  return true;
}

int worker_count(int requested) {
  int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  if (n <= 0) n = 1;
  if (const char* env = std::getenv("TPOPF_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, cap);
  }
  return n;
}

namespace {

struct Candidate {
  double objective = std::numeric_limits<double>::infinity();
  long long index = -1;
  VoltageState state;
  long long evaluated = 0, feasible = 0, diverged = 0;

  // Lower objective wins; ties go to the lexicographically smaller setpoint,
  // which is the smaller flat index because every axis is sorted.
  bool better_than(double obj, long long idx) const {
    if (index < 0) return false;
    return objective < obj || (objective == obj && index < idx);
  }
};

}  // namespace

GridResult grid_search(const Network& net, ProblemKind kind, const GridSpec& grid, const UnbalanceLimits& limits,
                       int threads) {
  if (grid.axes.size() != net.inverters.size())
    throw std::invalid_argument("grid needs one axis per inverter");
  std::vector<std::vector<double>> axes;
  long double total = 1.0L;
  for (const GridAxis& a : grid.axes) {
    axes.push_back(axis_points(a));
    total *= static_cast<long double>(axes.back().size());
  }
  if (total > static_cast<long double>(kMaxGridPoints))
    throw GridTooLarge("grid of " + std::to_string(static_cast<double>(total)) + " points exceeds the limit of " +
                       std::to_string(kMaxGridPoints));
  const long long count = static_cast<long long>(total);

  const SystemAdmittance sys = assemble_ybus(net);
  // Every point starts from the same Q = 0 solution so that results do not
  // depend on how points are split across workers.
  VoltageState base_start = VoltageState::flat(sys.index);
  try {
    base_start = solve_powerflow(net, sys, inverter_injections(net, sys)).state;
  } catch (const PowerFlowError&) {
  }

  auto setpoints = [&](long long idx) {
    std::vector<double> q(axes.size());
    for (int k = static_cast<int>(axes.size()) - 1; k >= 0; --k) {
      const long long n = static_cast<long long>(axes[k].size());
      q[k] = axes[k][idx % n];
      idx /= n;
    }
    return q;
  };

  const int workers = static_cast<int>(std::min<long long>(worker_count(threads), std::max<long long>(count, 1)));
  std::vector<Candidate> best(workers);
  auto work = [&](int w) {
    Candidate& c = best[w];
    for (long long idx = w; idx < count; idx += workers) {
      const std::vector<double> q = setpoints(idx);
      const InjectionSet inj = inverter_injections(net, sys, q);
      ++c.evaluated;
      PowerFlowResult pf;
      try {
        pf = solve_powerflow(net, sys, inj, {}, &base_start);
      } catch (const PowerFlowError&) {
        ++c.diverged;
        continue;
      }
      if (!admissible(net, sys, kind, pf.state, inj, limits)) continue;
      ++c.feasible;
      const double obj = score(net, sys, kind, pf.state);
      if (c.index < 0 || obj < c.objective || (obj == c.objective && idx < c.index)) {
        c.objective = obj;
        c.index = idx;
        c.state = pf.state;
      }
    }
  };
  if (workers <= 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }

  GridResult out;
  const Candidate* winner = nullptr;
  for (const Candidate& c : best) {
    out.evaluated += c.evaluated;
    out.feasible += c.feasible;
    out.diverged += c.diverged;
    if (c.index >= 0 && (!winner || c.better_than(winner->objective, winner->index))) winner = &c;
  }
  if (!winner) throw std::runtime_error("no admissible grid point: every power flow diverged or violated limits");
  out.q = setpoints(winner->index);
  out.objective = winner->objective;
  out.state = winner->state;
  return out;
}

double finite_difference_check(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& fn,
                               const Eigen::MatrixXd& analytic, const Eigen::VectorXd& x, double h) {
  double worst = 0.0;
  Eigen::VectorXd xp = x, xm = x;
  for (int j = 0; j < x.size(); ++j) {
    xp(j) = x(j) + h;
    xm(j) = x(j) - h;
    const Eigen::VectorXd d = (fn(xp) - fn(xm)) / (2.0 * h);
    xp(j) = xm(j) = x(j);
    for (int i = 0; i < d.size(); ++i) {
      const double a = analytic(i, j);
      const double scale = std::max({1.0, std::abs(a), std::abs(d(i))});
      worst = std::max(worst, std::abs(a - d(i)) / scale);
    }
  }
  return worst;
}

double finite_difference_check(const std::function<double(const Eigen::VectorXd&)>& fn,
                               const Eigen::VectorXd& analytic, const Eigen::VectorXd& x, double h) {
  Eigen::MatrixXd row = analytic.transpose();
  return finite_difference_check(
      [&](const Eigen::VectorXd& v) {
        Eigen::VectorXd r(1);
        r(0) = fn(v);
        return r;
      },
      row, x, h);
}

}  // namespace tpopf::oracle
