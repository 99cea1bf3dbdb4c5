#include <doctest.h>

#include "oracles.hpp"
#include "tpopf/metrics.hpp"

using namespace tpopf;
using ref::polar_deg;

TEST_CASE("sequence components") {
  SUBCASE("balanced positive sequence") {
    const auto s = metrics::sequence_components(polar_deg(1, 0), polar_deg(1, -120), polar_deg(1, 120));
    CHECK(std::abs(s.positive - 1.0) < 1e-12);
    CHECK(std::abs(s.negative) < 1e-12);
  }
  SUBCASE("reversed rotation is pure negative sequence") {
    const auto s = metrics::sequence_components(polar_deg(1, 0), polar_deg(1, 120), polar_deg(1, -120));
    CHECK(std::abs(s.positive) < 1e-12);
    CHECK(std::abs(s.negative - 1.0) < 1e-12);
  }
  SUBCASE("one phase at 0.9 pu") {
    const Complex va = polar_deg(1, 0), vb = polar_deg(1, -120), vc = polar_deg(0.9, 120);
    const auto s = metrics::sequence_components(va, vb, vc);
    const auto o = ref::sequences(va, vb, vc);
    CHECK(std::abs(s.positive - o.pos) < 1e-12);
    CHECK(std::abs(s.negative - o.neg) < 1e-12);
    // Frozen oracle values.
    CHECK(s.positive.real() == doctest::Approx(0.96667).epsilon(1e-5));
    CHECK(std::abs(s.positive.imag()) < 1e-12);
    CHECK(s.negative.real() == doctest::Approx(0.016667).epsilon(1e-5));
    CHECK(s.negative.imag() == doctest::Approx(0.028868).epsilon(1e-5));
  }
}

TEST_CASE("voltage unbalance factor") {
  CHECK(metrics::vuf(polar_deg(1, 0), polar_deg(1, -120), polar_deg(1, 120)) < 1e-12);
  const Complex va = polar_deg(1, 0), vb = polar_deg(1, -120), vc = polar_deg(0.9, 120);
  const double v = metrics::vuf(va, vb, vc);
  CHECK(v == doctest::Approx(ref::vuf(va, vb, vc)).epsilon(1e-12));
  CHECK(v == doctest::Approx(0.034483).epsilon(1e-5));
  try {
    metrics::vuf(polar_deg(1, 0), polar_deg(1, 120), polar_deg(1, -120));
    FAIL("expected UndefinedMetric");
  } catch (const metrics::UndefinedMetric& e) {
    CHECK(std::string(e.what()).find("zero positive sequence") != std::string::npos);
  }
}

TEST_CASE("line-to-line magnitudes") {
  const double k = 2.0 * ref::kPi / 3.0;
  auto ll = metrics::line_to_line_magnitudes({1, 1, 1}, {0, -k, k});
  for (double x : ll) CHECK(x == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));

  ll = metrics::line_to_line_magnitudes({1, 0.9, 1}, {0, -k, k});
  CHECK(ll[0] == doctest::Approx(std::abs(polar_deg(1, 0) - polar_deg(0.9, -120))).epsilon(1e-12));
  CHECK(ll[0] == doctest::Approx(1.646208).epsilon(1e-6));
  CHECK(ll[0] == doctest::Approx(std::sqrt(2.71)).epsilon(1e-12));

  ll = metrics::line_to_line_magnitudes({1, 1, 1}, {0.3, 0.3, 0.3});
  CHECK(ll[0] == doctest::Approx(0.0));
}

TEST_CASE("LVUR and PVUR") {
  CHECK(metrics::lvur(1.0, 0.98, 1.02) == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(metrics::lvur(1.0, 1.0, 1.0) == 0.0);
  CHECK(metrics::lvur(1.73, 1.73, 1.70) == doctest::Approx(ref::max_dev_ratio(1.73, 1.73, 1.70)).epsilon(1e-12));
  CHECK(metrics::lvur(1.73, 1.73, 1.70) == doctest::Approx(0.011628).epsilon(1e-5));

  CHECK(metrics::pvur(1, 1, 1) == 0.0);
  CHECK(metrics::pvur(1.00, 0.95, 0.99) == doctest::Approx(ref::max_dev_ratio(1.00, 0.95, 0.99)).epsilon(1e-12));
  CHECK(metrics::pvur(1.00, 0.95, 0.99) == doctest::Approx(0.030612).epsilon(1e-5));
  CHECK(metrics::pvur(1.02, 1.02, 0.96) == doctest::Approx(0.04).epsilon(1e-12));
}

TEST_CASE("substation power factor") {
  CHECK(metrics::substation_power_factor({100, 100, 100}, {0, 0, 0}) == doctest::Approx(1.0));
  CHECK(metrics::substation_power_factor({100, 100, 100}, {75, 75, 75}) == doctest::Approx(0.8).epsilon(1e-12));
  CHECK_THROWS_AS(metrics::substation_power_factor({0, 0, 0}, {0, 0, 0}), metrics::UndefinedMetric);
}

TEST_CASE("losses") {
  const Network net = load_case_file(ref::case_path("balanced4.json"));
  const SystemAdmittance sys = assemble_ybus(net);
  // All nodes at the same balanced phasors: no series current anywhere.
  CHECK(metrics::network_losses(sys, VoltageState::flat(sys.index), net.s_base_kva) == doctest::Approx(0.0));
  const auto pf = solve_powerflow(net, sys, inverter_injections(net, sys));
  const auto dev = metrics::device_losses(sys, pf.state, net.s_base_kva);
  CHECK(dev.size() == 3);
  double sum = 0.0;
  for (const auto& d : dev) {
    CHECK(d.kw > 0.0);
    sum += d.kw;
  }
  CHECK(sum == doctest::Approx(metrics::network_losses(sys, pf.state, net.s_base_kva)));
}

TEST_CASE("feeder unbalance summary") {
  {
    const Network net = load_case_file(ref::case_path("balanced4.json"));
    const SystemAdmittance sys = assemble_ybus(net);
    const auto pf = solve_powerflow(net, sys, inverter_injections(net, sys));
    const auto s = metrics::feeder_unbalance_summary(net, sys, pf.state);
    CHECK(s.three_phase_buses == 4);
    for (int m = 0; m < 3; ++m) {
      CHECK(s.avg[m] < 1e-10);
      CHECK(s.max[m] < 1e-10);
    }
  }
  {
    // Only the substation is three-phase.
    const Network net = load_case_file(ref::case_path("min2bus.json"));
    const SystemAdmittance sys = assemble_ybus(net);
    const auto pf = solve_powerflow(net, sys, inverter_injections(net, sys));
    const auto s = metrics::feeder_unbalance_summary(net, sys, pf.state);
    CHECK(s.three_phase_buses == 1);
    for (int m = 0; m < 3; ++m) CHECK(s.avg[m] == s.max[m]);
  }
  {
    const Network net = load_case_file(ref::case_path("ieee13_mod.json"));
    const SystemAdmittance sys = assemble_ybus(net);
    const auto pf = solve_powerflow(net, sys, inverter_injections(net, sys));
    const auto s = metrics::feeder_unbalance_summary(net, sys, pf.state);
    CHECK(s.max[0] > s.avg[0]);
    // Per-bus values agree with the reference formulas.
    for (const auto& u : metrics::bus_unbalance(net, sys, pf.state)) {
      std::array<Complex, 3> v;
      for (int p = 0; p < 3; ++p) v[p] = pf.state.phasor(sys.index.node(u.bus, static_cast<Phase>(p)));
      CHECK(u.values[0] == doctest::Approx(ref::vuf(v[0], v[1], v[2])).epsilon(1e-10));
      CHECK(u.values[1] == doctest::Approx(ref::lvur(v[0], v[1], v[2])).epsilon(1e-10));
      CHECK(u.values[2] == doctest::Approx(ref::pvur(v[0], v[1], v[2])).epsilon(1e-10));
    }
  }
}
