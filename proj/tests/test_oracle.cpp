#include <doctest.h>

#include "helpers.hpp"
#include "tpopf/metrics.hpp"
#include "tpopf/oracle.hpp"

using namespace tpopf;

TEST_CASE("grid axes contain both bounds and zero") {
  const auto pts = oracle::axis_points({-40.0, 40.0, 4});
  CHECK(pts.front() == -40.0);
  CHECK(pts.back() == 40.0);
  CHECK(std::find(pts.begin(), pts.end(), 0.0) != pts.end());
  CHECK(pts.size() == 5);
  CHECK(std::is_sorted(pts.begin(), pts.end()));
  CHECK(oracle::axis_points({-1.0, 1.0, 41}).size() == 41);
  CHECK_THROWS_AS(oracle::axis_points({0.0, 1.0, 1}), std::invalid_argument);
}

TEST_CASE("oversized grids are refused") {
  const Network net = helpers::load("ieee13_mod.json");
  CHECK_THROWS_AS(oracle::grid_search(net, ProblemKind::P1_Loss, oracle::GridSpec::full_range(net, 11)),
                  oracle::GridTooLarge);
}

TEST_CASE("no inverters: the grid is the base power flow") {
  const Network net = helpers::load("min2bus.json");
  const SystemAdmittance sys = assemble_ybus(net);
  const auto g = oracle::grid_search(net, ProblemKind::P1_Loss, {});
  const auto pf = solve_powerflow(net, sys, inverter_injections(net, sys));
  CHECK(g.evaluated == 1);
  CHECK(g.q.empty());
  CHECK(g.objective == doctest::Approx(metrics::network_losses(sys, pf.state, net.s_base_kva) / net.s_base_kva));
}

TEST_CASE("balanced fixture has zero VUF at every grid point") {
  const Network net = helpers::load("balanced4.json");
  const auto g = oracle::grid_search(net, ProblemKind::P2_VUF, oracle::GridSpec::full_range(net, 3));
  CHECK(g.feasible == g.evaluated);
  CHECK(g.objective < 1e-20);
}

TEST_CASE("finite differences of a linear map are exact") {
  Eigen::MatrixXd a(2, 3);
  a << 1, -2, 3, 0.5, 4, -1;
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(3, 0.1, 0.3);
  const double err = oracle::finite_difference_check([&](const Eigen::VectorXd& v) { return Eigen::VectorXd(a * v); }, a, x);
  CHECK(err < 1e-10);
}

TEST_CASE("worker count honours TPOPF_THREADS") {
  setenv("TPOPF_THREADS", "1", 1);
  CHECK(oracle::worker_count(8) == 1);
  unsetenv("TPOPF_THREADS");
  CHECK(oracle::worker_count(3) == 3);
}
