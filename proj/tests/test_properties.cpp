// Randomised invariants. Every generator is seeded so failures reproduce.
#include <doctest.h>

#include <chrono>

#include "helpers.hpp"
#include "oracles.hpp"
#include "tpopf/metrics.hpp"
#include "tpopf/oracle.hpp"

using namespace tpopf;

namespace {

std::array<Complex, 3> random_set(std::mt19937& rng, double mag_dev, double ang_dev_deg) {
  std::uniform_real_distribution<double> m(-mag_dev, mag_dev), a(-ang_dev_deg, ang_dev_deg);
  return {ref::polar_deg(1.0 + m(rng), a(rng)), ref::polar_deg(1.0 + m(rng), -120.0 + a(rng)),
          ref::polar_deg(1.0 + m(rng), 120.0 + a(rng))};
}

}  // namespace

TEST_CASE("sequence transform round trip") {
  std::mt19937 rng(101);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 1000; ++i) {
    const Complex va(u(rng), u(rng)), vb(u(rng), u(rng)), vc(u(rng), u(rng));
    const auto s = metrics::sequence_components(va, vb, vc);
    const auto back = metrics::phase_phasors(metrics::zero_sequence(va, vb, vc), s.positive, s.negative);
    CHECK(std::abs(back[0] - va) < 1e-12);
    CHECK(std::abs(back[1] - vb) < 1e-12);
    CHECK(std::abs(back[2] - vc) < 1e-12);
  }
}

TEST_CASE("metrics are invariant to a common rotation and scaling") {
  std::mt19937 rng(202);
  std::uniform_real_distribution<double> rot(-3.14, 3.14), scale(0.5, 2.0);
  for (int i = 0; i < 1000; ++i) {
    const auto v = random_set(rng, 0.1, 10.0);
    const Complex k = std::polar(scale(rng), rot(rng));
    const double vuf0 = metrics::vuf(v[0], v[1], v[2]);
    CHECK(metrics::vuf(k * v[0], k * v[1], k * v[2]) == doctest::Approx(vuf0).epsilon(1e-9));
    CHECK(ref::lvur(k * v[0], k * v[1], k * v[2]) == doctest::Approx(ref::lvur(v[0], v[1], v[2])).epsilon(1e-9));
    const double p0 = metrics::pvur(std::abs(v[0]), std::abs(v[1]), std::abs(v[2]));
    CHECK(metrics::pvur(std::abs(k * v[0]), std::abs(k * v[1]), std::abs(k * v[2])) ==
          doctest::Approx(p0).epsilon(1e-9));
  }
}

TEST_CASE("LVUR and VUF bound each other on mildly unbalanced sets") {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937 rng(303);
  int violations = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto v = random_set(rng, 0.05, 2.0);
    std::array<double, 3> mag{}, ang{};
    for (int p = 0; p < 3; ++p) {
      mag[p] = std::abs(v[p]);
      ang[p] = std::arg(v[p]);
    }
    const auto ll = metrics::line_to_line_magnitudes(mag, ang);
    const double lvur = metrics::lvur(ll[0], ll[1], ll[2]);
    const double vuf = metrics::vuf(v[0], v[1], v[2]);
    if (!(lvur <= 1.02 * vuf && vuf <= 1.02 * (2.0 / std::sqrt(3.0)) * lvur)) ++violations;
  }
  CHECK(violations == 0);
  CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 5.0);
}

TEST_CASE("power-flow Jacobian matches finite differences") {
  std::mt19937 rng(404);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (const char* name : {"unbal4_2inv.json", "ieee13_mod.json"}) {
    const Network net = helpers::load(name);
    const SystemAdmittance sys = assemble_ybus(net);
    const InjectionSet inj = inverter_injections(net, sys);
    const VoltageState base = solve_powerflow(net, sys, inj).state;
    const std::vector<int> nodes = non_slack_nodes(net, sys);
    const int n = static_cast<int>(nodes.size());
    for (int trial = 0; trial < 20; ++trial) {
      VoltageState s = base;
      for (int node : nodes) {
        s.magnitude[node] += 0.05 * u(rng);
        s.angle[node] += 0.05 * u(rng);
      }
      Eigen::VectorXd x(2 * n);
      for (int k = 0; k < n; ++k) {
        x(k) = s.angle[nodes[k]];
        x(n + k) = s.magnitude[nodes[k]];
      }
      const Eigen::MatrixXd jac = Eigen::MatrixXd(mismatch_jacobian(net, sys, s));
      const double err = oracle::finite_difference_check(
          [&](const Eigen::VectorXd& v) {
            VoltageState t = s;
            for (int k = 0; k < n; ++k) {
              t.angle[nodes[k]] = v(k);
              t.magnitude[nodes[k]] = v(n + k);
            }
            return power_mismatch(net, sys, t, inj);
          },
          jac, x);
      CHECK(err < 1e-5);
    }
  }
}

TEST_CASE("objective gradients match finite differences") {
  std::mt19937 rng(505);
  const Network net = helpers::load("ieee13_mod.json");
  for (ProblemKind kind : {ProblemKind::P1_Loss, ProblemKind::P2_VUF, ProblemKind::P3_LVUR, ProblemKind::P4_PVUR}) {
    CAPTURE(problem_code(kind));
    const OptimizationProblem prob(net, kind, {});
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const Eigen::VectorXd x = helpers::random_point(prob, rng);
      Eigen::VectorXd g;
      prob.gradient(x, g);
      worst = std::max(worst, oracle::finite_difference_check([&](const Eigen::VectorXd& v) { return prob.objective(v); }, g, x));
    }
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("tight epigraph auxiliaries equal the unbalance they bound") {
  std::mt19937 rng(606);
  const Network net = helpers::load("ieee13_mod.json");
  for (ProblemKind kind : {ProblemKind::P3_LVUR, ProblemKind::P4_PVUR}) {
    const OptimizationProblem prob(net, kind, {});
    for (int trial = 0; trial < 10; ++trial) {
      Eigen::VectorXd x = helpers::random_point(prob, rng);
      Eigen::VectorXd g, xl, xu, gl, gu;
      prob.bounds(xl, xu, gl, gu);
      prob.tighten_auxiliaries(x);
      const VoltageState s = prob.unpack_state(x);
      prob.constraints(x, g);
      for (int i = 0; i < g.size(); ++i) {
        const std::string& row = prob.row_names()[i];
        if (row.rfind("pvur", 0) == 0 || row.rfind("lvur", 0) == 0) CHECK(g(i) >= gl(i) - 1e-10);
      }
      double metric_sum = 0.0;
      for (const auto& u : metrics::bus_unbalance(net, prob.admittance(), s))
        metric_sum += u.values[kind == ProblemKind::P3_LVUR ? 1 : 2];
      CHECK(prob.objective(x) == doctest::Approx(metric_sum).epsilon(1e-10));
      // Raising the tightened objective variable keeps every row feasible.
      for (const auto& a : prob.layout().aux) {
        const int z2 = kind == ProblemKind::P3_LVUR ? a.z2l : a.z2p;
        x(z2) += 0.01;
      }
      prob.constraints(x, g);
      for (int i = 0; i < g.size(); ++i) {
        const std::string& row = prob.row_names()[i];
        if (row.find("ratio") != std::string::npos) CHECK(g(i) >= gl(i) - 1e-10);
      }
      CHECK(prob.objective(x) > metric_sum);
    }
  }
}

TEST_CASE("OPF states are power-flow solutions for their setpoints") {
  const Network net = helpers::load("ieee13_mod.json");
  const SystemAdmittance sys = assemble_ybus(net);
  for (ProblemKind kind : kAllProblems) {
    CAPTURE(problem_code(kind));
    const Solution sol = solve(OptimizationProblem(net, kind, {}));
    REQUIRE(sol.status == nlp::Status::Optimal);
    const auto pf = solve_powerflow(net, sys, inverter_injections(net, sys, sol.q_inv));
    double worst = 0.0;
    for (int n = 0; n < sys.node_count(); ++n) worst = std::max(worst, std::abs(pf.state.phasor(n) - sol.state.phasor(n)));
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("looser P5 limits never increase the loss") {
  const Network net = helpers::load("ieee13_mod.json");
  SolveOptions tight;
  tight.kkt_tol = 1e-9;
  double previous = std::numeric_limits<double>::infinity();
  for (double f : {1.0, 1.2, 1.5, 3.0}) {
    const UnbalanceLimits lim{0.02 * f, 0.02 * f, 0.03 * f};
    const Solution sol = solve(OptimizationProblem(net, ProblemKind::P5_LossVU, lim), tight);
    REQUIRE(sol.status == nlp::Status::Optimal);
    // Once the limits go slack the optima coincide up to solver tolerance.
    CHECK(sol.objective <= previous * (1.0 + 1e-7));
    previous = sol.objective;
  }
  const Solution p1 = solve(OptimizationProblem(net, ProblemKind::P1_Loss, {}), tight);
  CHECK(p1.objective <= previous * (1.0 + 1e-7));
}

TEST_CASE("case serialization round trips perturbed networks") {
  std::mt19937 rng(707);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  for (int trial = 0; trial < 20; ++trial) {
    Network net = helpers::load(trial % 2 ? "ieee13_mod.json" : "unbal4_2inv.json");
    for (ZipLoad& l : net.loads) {
      l.coefficients.p_p *= u(rng);
      l.coefficients.q_z *= u(rng);
    }
    for (Branch& b : net.branches) b.z_series *= u(rng);
    for (Inverter& inv : net.inverters) inv.p_output = inv.s_rating * (u(rng) - 0.5);
    CHECK(load_case(save_case(net)) == net);
  }
}

TEST_CASE("identical inputs give identical results") {
  const Network net = helpers::load("unbal4_2inv.json");
  const OptimizationProblem prob(net, ProblemKind::P4_PVUR, {});
  const Solution a = solve(prob), b = solve(prob);
  CHECK(a.x == b.x);
  CHECK(a.iterations == b.iterations);

  const auto grid = oracle::GridSpec::full_range(net, 9);
  const auto g1 = oracle::grid_search(net, ProblemKind::P2_VUF, grid, {}, 1);
  const auto g3 = oracle::grid_search(net, ProblemKind::P2_VUF, grid, {}, 3);
  CHECK(g1.q == g3.q);
  CHECK(g1.objective == g3.objective);
  CHECK(g1.evaluated == g3.evaluated);
}

TEST_CASE("refining a grid never worsens its optimum") {
  const Network net = helpers::load("unbal4_2inv.json");
  for (ProblemKind kind : {ProblemKind::P1_Loss, ProblemKind::P3_LVUR}) {
    double previous = std::numeric_limits<double>::infinity();
    // n -> 2n - 1 halves the spacing and keeps every earlier point.
    for (int n : {3, 5, 9, 17}) {
      const auto g = oracle::grid_search(net, kind, oracle::GridSpec::full_range(net, n));
      CHECK(g.objective <= previous);
      previous = g.objective;
    }
  }
}

TEST_CASE("the squared VUF row has the sign of VUF minus its limit") {
  std::mt19937 rng(808);
  const Network net = helpers::load("ieee13_mod.json");
  const UnbalanceLimits lim{0.012, 0.02, 0.03};
  const OptimizationProblem prob(net, ProblemKind::P5_LossVU, lim);
  Eigen::VectorXd xl, xu, gl, gu, g;
  prob.bounds(xl, xu, gl, gu);
  int checked = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const Eigen::VectorXd x = helpers::random_point(prob, rng);
    const VoltageState s = prob.unpack_state(x);
    prob.constraints(x, g);
    for (int i = 0; i < g.size(); ++i) {
      const std::string& row = prob.row_names()[i];
      if (row.rfind("vuf.", 0) != 0) continue;
      const int bus = net.bus_index(row.substr(4));
      std::array<Complex, 3> v;
      for (int p = 0; p < 3; ++p) v[p] = s.phasor(prob.admittance().index.node(bus, static_cast<Phase>(p)));
      const double vuf = metrics::vuf(v[0], v[1], v[2]);
      if (std::abs(vuf - lim.u_vuf) < 1e-9) continue;
      CHECK((g(i) <= gu(i)) == (vuf <= lim.u_vuf));
      ++checked;
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("epigraph variables are tight at the P3 and P4 optima") {
  const Network net = helpers::load("ieee13_mod.json");
  for (ProblemKind kind : {ProblemKind::P3_LVUR, ProblemKind::P4_PVUR}) {
    const OptimizationProblem prob(net, kind, {});
    const Solution sol = solve(prob);
    REQUIRE(sol.status == nlp::Status::Optimal);
    const int m = kind == ProblemKind::P3_LVUR ? 1 : 2;
    double max_metric = 0.0, max_z2 = 0.0;
    for (const auto& u : metrics::bus_unbalance(net, prob.admittance(), sol.state)) max_metric = std::max(max_metric, u.values[m]);
    for (const BusAuxiliaries& a : prob.layout().aux) {
      const int z2 = kind == ProblemKind::P3_LVUR ? a.z2l : a.z2p;
      max_z2 = std::max(max_z2, sol.x(z2));
    }
    CHECK(max_z2 == doctest::Approx(max_metric).epsilon(1e-6));
    CHECK(max_z2 >= max_metric - 1e-9);
  }
}

TEST_CASE("the local solver is never beaten by a coarse grid") {
  for (const char* name : {"unbal4_2inv.json", "balanced4.json"}) {
    const Network net = helpers::load(name);
    for (ProblemKind kind : {ProblemKind::P1_Loss, ProblemKind::P2_VUF, ProblemKind::P3_LVUR, ProblemKind::P4_PVUR}) {
      CAPTURE(name);
      CAPTURE(problem_code(kind));
      const Solution sol = solve(OptimizationProblem(net, kind, {}));
      REQUIRE(sol.status == nlp::Status::Optimal);
      const auto g = oracle::grid_search(net, kind, oracle::GridSpec::full_range(net, 7));
      CHECK(sol.objective <= g.objective + 1e-6 * std::max(1.0, std::abs(g.objective)));
    }
  }
}
