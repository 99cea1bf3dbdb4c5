#include <doctest.h>

#include "helpers.hpp"
#include "oracles.hpp"
#include "tpopf/metrics.hpp"
#include "tpopf/opf.hpp"
#include "tpopf/oracle.hpp"

using namespace tpopf;

TEST_CASE("inverter reactive bounds") {
  const auto [lo, hi] = inverter_q_bounds(50.0, 35.0);
  CHECK(hi == doctest::Approx(std::sqrt(2500.0 - 1225.0)).epsilon(1e-12));
  CHECK(hi == doctest::Approx(35.70714).epsilon(1e-6));
  CHECK(lo == -hi);
  CHECK(inverter_q_bounds(50.0, 50.0).second == 0.0);
  CHECK(inverter_q_bounds(50.0, 0.0).second == doctest::Approx(50.0));
  CHECK_THROWS_AS(inverter_q_bounds(50.0, 60.0), std::invalid_argument);
  CHECK_THROWS_AS(inverter_q_bounds(-1.0, 0.0), std::invalid_argument);
}

TEST_CASE("polar sequence decomposition") {
  const double k = 2.0 * ref::kPi / 3.0;
  auto s = vuf_sequence_decomposition<double>(1, 1, 1, 0, -k, k);
  CHECK(s[0] == doctest::Approx(1.0));
  CHECK(std::abs(s[1]) < 1e-12);
  CHECK(std::abs(s[2]) < 1e-12);
  CHECK(std::abs(s[3]) < 1e-12);

  s = vuf_sequence_decomposition<double>(1, 1, 0.9, 0, -k, k);
  const auto o = ref::sequences(ref::polar_deg(1, 0), ref::polar_deg(1, -120), ref::polar_deg(0.9, 120));
  CHECK(s[0] == doctest::Approx(o.pos.real()).epsilon(1e-12));
  CHECK(std::abs(s[1] - o.pos.imag()) < 1e-12);
  CHECK(s[2] == doctest::Approx(o.neg.real()).epsilon(1e-12));
  CHECK(s[3] == doctest::Approx(o.neg.imag()).epsilon(1e-12));
  CHECK(s[0] == doctest::Approx(0.96667).epsilon(1e-5));
  CHECK(s[3] == doctest::Approx(0.028868).epsilon(1e-5));

  std::mt19937 rng(7);
  std::uniform_real_distribution<double> mag(0.85, 1.1), ang(-0.2, 0.2);
  for (int i = 0; i < 200; ++i) {
    const double va = mag(rng), vb = mag(rng), vc = mag(rng);
    const double ta = ang(rng), tb = -k + ang(rng), tc = k + ang(rng);
    const auto d = vuf_sequence_decomposition<double>(va, vb, vc, ta, tb, tc);
    const double polar = std::hypot(d[2], d[3]) / std::hypot(d[0], d[1]);
    CHECK(polar == doctest::Approx(metrics::vuf(std::polar(va, ta), std::polar(vb, tb), std::polar(vc, tc))).epsilon(1e-12));
  }
}

TEST_CASE("problem structure") {
  const Network feeder = helpers::load("ieee13_mod.json");
  const OptimizationProblem p1(feeder, ProblemKind::P1_Loss, {});
  CHECK(p1.layout().auxiliary_count == 0);
  CHECK(p1.families().vuf == 0);

  const OptimizationProblem p4(feeder, ProblemKind::P4_PVUR, {});
  const int k = static_cast<int>(p4.three_phase_buses().size());
  CHECK(k == 8);
  CHECK(p4.layout().auxiliary_count == 4 * k);
  CHECK(p4.families().pvur_deviation + p4.families().pvur_ratio == 9 * k);

  const OptimizationProblem p5(feeder, ProblemKind::P5_LossVU, {});
  CHECK(p5.families().vuf == k);
  CHECK(p5.families().pvur_deviation > 0);
  CHECK(p5.families().lvur_deviation > 0);
  CHECK(p5.families().line_to_line == 3 * k);
  CHECK(p5.families().pvur_limit == k);
  CHECK(p5.families().lvur_limit == k);

  // Power balance rows at every node, slack included.
  CHECK(p1.families().power_balance == 2 * p1.admittance().node_count());
  CHECK(p1.row_names().size() == static_cast<std::size_t>(p1.num_constraints()));
}

TEST_CASE("pack and unpack round trip") {
  const Network net = helpers::load("unbal4_2inv.json");
  const OptimizationProblem prob(net, ProblemKind::P5_LossVU, {});
  std::mt19937 rng(3);
  const Eigen::VectorXd x = helpers::random_point(prob, rng);
  const VoltageState s = prob.unpack_state(x);
  const auto& l = prob.layout();
  std::vector<double> q;
  for (int v : l.q_inv) q.push_back(x(v));
  std::array<double, 3> ps{}, qs{};
  for (int p = 0; p < 3; ++p) {
    ps[p] = x(l.p_sub[p]);
    qs[p] = x(l.q_sub[p]);
  }
  Eigen::VectorXd y = prob.pack(s, ps, qs, q);
  Eigen::VectorXd tight = x;
  prob.tighten_auxiliaries(tight);
  CHECK((y - tight).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("constraint Jacobian and Lagrangian Hessian against finite differences") {
  std::mt19937 rng(11);
  for (const char* name : {"unbal4_2inv.json", "ieee13_mod.json"}) {
    const Network net = helpers::load(name);
    for (ProblemKind kind : kAllProblems) {
      CAPTURE(name);
      CAPTURE(problem_code(kind));
      const OptimizationProblem prob(net, kind, {});
      const Eigen::VectorXd x = helpers::random_point(prob, rng);
      Eigen::MatrixXd jac;
      prob.jacobian(x, jac);
      const double jerr = oracle::finite_difference_check(
          [&](const Eigen::VectorXd& v) {
            Eigen::VectorXd g;
            prob.constraints(v, g);
            return g;
          },
          jac, x);
      CHECK(jerr < 1e-5);

      Eigen::VectorXd lambda(prob.num_constraints());
      std::normal_distribution<double> n01;
      for (int i = 0; i < lambda.size(); ++i) lambda(i) = n01(rng);
      const double sigma = 0.7;
      Eigen::MatrixXd hess;
      prob.hessian(x, sigma, lambda, hess);
      const Eigen::MatrixXd full = hess.selfadjointView<Eigen::Lower>();
      const double herr = oracle::finite_difference_check(
          [&](const Eigen::VectorXd& v) {
            Eigen::VectorXd g;
            Eigen::MatrixXd j;
            prob.gradient(v, g);
            prob.jacobian(v, j);
            return Eigen::VectorXd(sigma * g + j.transpose() * lambda);
          },
          full, x);
      CHECK(herr < 1e-5);
    }
  }
}

TEST_CASE("balanced feeder: every problem is optimal and unbalance-free") {
  const Network net = helpers::load("balanced4.json");
  const SystemAdmittance sys = assemble_ybus(net);
  for (ProblemKind kind : kAllProblems) {
    CAPTURE(problem_code(kind));
    const OptimizationProblem prob(net, kind, {});
    const Solution sol = solve(prob);
    REQUIRE(sol.status == nlp::Status::Optimal);
    const auto s = metrics::feeder_unbalance_summary(net, sys, sol.state);
    for (int m = 0; m < 3; ++m) CHECK(s.max[m] < 1e-8);
    if (kind != ProblemKind::P1_Loss && kind != ProblemKind::P5_LossVU) CHECK(std::abs(sol.objective) < 1e-10);
  }
}

TEST_CASE("reported objective matches a recomputation from the state") {
  const Network net = helpers::load("unbal4_2inv.json");
  const SystemAdmittance sys = assemble_ybus(net);
  for (ProblemKind kind : {ProblemKind::P1_Loss, ProblemKind::P2_VUF, ProblemKind::P3_LVUR, ProblemKind::P4_PVUR}) {
    CAPTURE(problem_code(kind));
    const OptimizationProblem prob(net, kind, {});
    const Solution sol = solve(prob);
    REQUIRE(sol.status == nlp::Status::Optimal);
    CHECK(objective_value(prob, sol.state) == doctest::Approx(sol.objective).epsilon(1e-9));
    CHECK(oracle::score(net, sys, kind, sol.state) == doctest::Approx(sol.objective).epsilon(1e-7));
  }
}

TEST_CASE("P5 reports infeasibility when the limits cannot be met") {
  // On the 4-bus fixture the best reachable PVUR is about 3.5 %.
  const Network net = helpers::load("unbal4_2inv.json");
  const OptimizationProblem prob(net, ProblemKind::P5_LossVU, {});
  const Solution sol = solve(prob);
  CHECK(sol.status != nlp::Status::Optimal);
  CHECK(sol.primal_infeasibility > 1e-6);
}

TEST_CASE("solution report rows") {
  const Network net = helpers::load("ieee13_mod.json");
  const SystemAdmittance sys = assemble_ybus(net);
  const Solution sol = solve(OptimizationProblem(net, ProblemKind::P1_Loss, {}));
  const ReportRow row = evaluate_solution(net, sys, sol);
  CHECK(row.problem == "P1-Loss");
  CHECK(row.status == "optimal");
  CHECK(row.loss_kw == doctest::Approx(sol.objective * net.s_base_kva).epsilon(1e-6));
  double q = 0.0;
  for (double v : sol.q_inv) q += v;
  CHECK(row.q_avg_kvar == doctest::Approx(q / sol.q_inv.size() * net.s_base_kva));
  CHECK(row.power_factor > 0.0);
  CHECK(row.power_factor <= 1.0);
}

TEST_CASE("problem codes") {
  CHECK(problem_from_code("P3") == ProblemKind::P3_LVUR);
  CHECK(problem_from_code("P5-Loss_VU") == ProblemKind::P5_LossVU);
  CHECK_FALSE(problem_from_code("P6").has_value());
  CHECK(problem_label(ProblemKind::P2_VUF) == "P2-VUF");
}
