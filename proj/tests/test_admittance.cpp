#include <doctest.h>

#include <sstream>

#include "oracles.hpp"
#include "tpopf/admittance.hpp"

using namespace tpopf;

namespace {

double max_abs(const Eigen::MatrixXcd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

Branch make_branch(PhaseSet phases, Eigen::MatrixXcd z) {
  Branch b;
  b.from_bus = "f";
  b.to_bus = "t";
  b.phases = phases;
  b.z_series = std::move(z);
  b.b_shunt = Eigen::VectorXd::Zero(phases.size());
  return b;
}

}  // namespace

TEST_CASE("single-phase series admittance") {
  Eigen::MatrixXcd z(1, 1);
  z(0, 0) = Complex(0.01, 0.1);
  const auto y = line_branch_admittance(make_branch(PhaseSet::of(Phase::A), z), PhaseSet::of(Phase::A),
                                        PhaseSet::of(Phase::A));
  const Complex expected = ref::reciprocal(0.01, 0.1);
  CHECK(std::abs(y.y_series(0, 0) - expected) < 1e-12);
  // Frozen value and the multiply-back check.
  CHECK(y.y_series(0, 0).real() == doctest::Approx(0.990099).epsilon(1e-6));
  CHECK(y.y_series(0, 0).imag() == doctest::Approx(-9.900990).epsilon(1e-6));
  CHECK(std::abs(y.y_series(0, 0) * z(0, 0) - 1.0) < 1e-12);
}

TEST_CASE("diagonal impedance inverts elementwise") {
  Eigen::MatrixXcd z = Eigen::MatrixXcd::Zero(3, 3);
  z(0, 0) = {0.1, 0.2};
  z(1, 1) = {0.3, 0.1};
  z(2, 2) = {0.05, 0.4};
  const auto y = line_branch_admittance(make_branch(PhaseSet::abc(), z), PhaseSet::abc(), PhaseSet::abc());
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const Complex want = i == j ? ref::reciprocal(z(i, i).real(), z(i, i).imag()) : Complex(0.0);
      CHECK(std::abs(y.y_series(i, j) - want) < 1e-12);
    }
}

TEST_CASE("two-phase branch from a three-phase bus has a zero row") {
  Eigen::MatrixXcd z(2, 2);
  z << Complex(0.2, 0.4), Complex(0.05, 0.1), Complex(0.05, 0.1), Complex(0.2, 0.4);
  const auto y =
      line_branch_admittance(make_branch(PhaseSet::parse("bc"), z), PhaseSet::abc(), PhaseSet::parse("bc"));
  REQUIRE(y.y_series.rows() == 3);
  REQUIRE(y.y_series.cols() == 2);
  CHECK(max_abs(y.y_series.row(0)) == 0.0);
  const Eigen::MatrixXcd inv = z.inverse();
  CHECK(max_abs(y.y_series.bottomRows(2) - inv) < 1e-12);
}

TEST_CASE("transformer table entries") {
  SUBCASE("Yy0 with unit admittance") {
    const auto t = transformer_submatrices(Connection::Yy0, 1.0);
    Eigen::Matrix3cd want;
    want << 2.0 / 3, -1.0 / 3, -1.0 / 3, -1.0 / 3, 2.0 / 3, -1.0 / 3, -1.0 / 3, -1.0 / 3, 2.0 / 3;
    CHECK(max_abs(t.y_ii - want) < 1e-12);
    CHECK(max_abs(t.y_jj - want) < 1e-12);
    CHECK(max_abs(t.y_ij + want) < 1e-12);
    CHECK(max_abs(t.y_ji + want) < 1e-12);
  }
  SUBCASE("YNyn0 with admittance 2") {
    const auto t = transformer_submatrices(Connection::YNyn0, 2.0);
    const Eigen::Matrix3cd two = 2.0 * Eigen::Matrix3cd::Identity();
    CHECK(max_abs(t.y_ii - two) < 1e-12);
    CHECK(max_abs(t.y_ij + two) < 1e-12);
  }
  SUBCASE("Dyn11 uses the transposed delta block") {
    const auto t = transformer_submatrices(Connection::Dyn11, 1.0);
    const double r = 1.0 / std::sqrt(3.0);
    CHECK(std::abs(t.y_ij(0, 0) + r) < 1e-12);
    CHECK(std::abs(t.y_ij(1, 0) - r) < 1e-12);
    CHECK(std::abs(t.y_ij(0, 1)) < 1e-12);
    CHECK(std::abs(r - 0.57735) < 1e-5);
  }
  CHECK_THROWS_AS(transformer_submatrices("Zz0", 1.0), std::invalid_argument);
}

TEST_CASE("regulator taps scale the YNyn0 blocks") {
  Regulator reg;
  reg.taps = {1.05, 1.0, 0.95};
  reg.y_t = 1.0;
  const auto t = regulator_admittance(reg);
  const std::array<double, 3> ii{1.1025, 1.0, 0.9025}, ij{-1.05, -1.0, -0.95};
  for (int p = 0; p < 3; ++p) {
    CHECK(std::abs(t.y_ii(p, p) - ii[p]) < 1e-12);
    CHECK(std::abs(t.y_ij(p, p) - ij[p]) < 1e-12);
    CHECK(std::abs(t.y_ji(p, p) - ij[p]) < 1e-12);
    CHECK(std::abs(t.y_jj(p, p) - 1.0) < 1e-12);
  }
  reg.taps = {1.0, 1.0, 1.0};
  const auto unit = regulator_admittance(reg);
  const auto plain = transformer_submatrices(Connection::YNyn0, 1.0);
  CHECK(max_abs(unit.y_ii - plain.y_ii) + max_abs(unit.y_ij - plain.y_ij) < 1e-15);
  reg.taps = {1.0, 0.0, 1.0};
  CHECK_THROWS_AS(regulator_admittance(reg), std::invalid_argument);
}

TEST_CASE("system admittance of a single three-phase line") {
  const Network net = load_case_file(ref::case_path("balanced4.json"));
  Network two = net;
  two.buses.resize(2);
  two.branches.resize(1);
  two.loads.clear();
  two.inverters.clear();
  const SystemAdmittance sys = assemble_ybus(two);
  REQUIRE(sys.node_count() == 6);
  const Eigen::MatrixXcd y = two.branches[0].z_series.inverse();
  const Eigen::MatrixXcd dense = Eigen::MatrixXcd(sys.y_bus);
  Eigen::MatrixXcd want(6, 6);
  Eigen::MatrixXcd shunt = Eigen::MatrixXcd::Zero(3, 3);
  for (int p = 0; p < 3; ++p) shunt(p, p) = Complex(0.0, two.branches[0].b_shunt(p));
  want << y + shunt, -y, -y, y + shunt;
  CHECK(max_abs(dense - want) < 1e-12);
}

TEST_CASE("13-bus admittance structure") {
  const Network net = load_case_file(ref::case_path("ieee13_mod.json"));
  const SystemAdmittance sys = assemble_ybus(net);
  int phases = 0;
  for (const Bus& b : net.buses) phases += b.phases.size();
  CHECK(sys.node_count() == phases);

  // Lines only: reciprocity, and each row sums to that node's line charging.
  // Dropping the transformers would leave islands, so the line-only matrix
  // is summed from the retained device blocks.
  {
    const SystemAdmittance& full = sys;
    Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(full.node_count(), full.node_count());
    Eigen::VectorXcd charging = Eigen::VectorXcd::Zero(full.node_count());
    for (const TwoPort& d : full.devices) {
      if (d.kind != DeviceKind::Line) continue;
      for (std::size_t a = 0; a < d.from_nodes.size(); ++a)
        for (std::size_t b = 0; b < d.from_nodes.size(); ++b) y(d.from_nodes[a], d.from_nodes[b]) += d.y_ff(a, b);
      for (std::size_t a = 0; a < d.from_nodes.size(); ++a)
        for (std::size_t b = 0; b < d.to_nodes.size(); ++b) y(d.from_nodes[a], d.to_nodes[b]) += d.y_ft(a, b);
      for (std::size_t a = 0; a < d.to_nodes.size(); ++a)
        for (std::size_t b = 0; b < d.from_nodes.size(); ++b) y(d.to_nodes[a], d.from_nodes[b]) += d.y_tf(a, b);
      for (std::size_t a = 0; a < d.to_nodes.size(); ++a)
        for (std::size_t b = 0; b < d.to_nodes.size(); ++b) y(d.to_nodes[a], d.to_nodes[b]) += d.y_tt(a, b);
    }
    for (const Branch& br : net.branches) {
      const int f = net.bus_index(br.from_bus), t = net.bus_index(br.to_bus);
      int k = 0;
      for (Phase p : br.phases.phases()) {
        charging(full.index.node(f, p)) += Complex(0.0, br.b_shunt(k));
        charging(full.index.node(t, p)) += Complex(0.0, br.b_shunt(k));
        ++k;
      }
    }
    // The 1 ft switch line has entries near 1e5, so compare relatively.
    CHECK(max_abs(y - y.transpose()) < 1e-14 * max_abs(y));
    const Eigen::VectorXcd row_sums = y.rowwise().sum();
    CHECK((row_sums - charging).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("Y-bus dump lists every stored entry") {
  const Network net = load_case_file(ref::case_path("min2bus.json"));
  const SystemAdmittance sys = assemble_ybus(net);
  std::ostringstream out;
  write_ybus_coo(sys, out);
  std::istringstream in(out.str());
  int lines = 0;
  std::string line;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == sys.y_bus.nonZeros());
}
