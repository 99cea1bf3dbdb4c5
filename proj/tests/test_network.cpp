#include <doctest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "oracles.hpp"
#include "tpopf/network.hpp"

using namespace tpopf;
using nlohmann::json;

namespace {

json read_case(const std::string& name) {
  std::ifstream in(ref::case_path(name));
  return json::parse(in);
}

bool has_code(const std::vector<Violation>& v, const std::string& code) {
  return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.code == code; });
}

}  // namespace

TEST_CASE("phase sets parse and iterate in a-b-c order") {
  const PhaseSet s = PhaseSet::parse("ca");
  CHECK(s.size() == 2);
  CHECK(s.has(Phase::A));
  CHECK_FALSE(s.has(Phase::B));
  CHECK(s.str() == "ac");
  CHECK(s.position(Phase::C) == 1);
  CHECK(PhaseSet::parse("abc").is_three_phase());
  CHECK_THROWS_AS(PhaseSet::parse(""), std::invalid_argument);
  CHECK_THROWS_AS(PhaseSet::parse("abd"), std::invalid_argument);
}

TEST_CASE("minimal two-bus case") {
  const Network net = load_case_file(ref::case_path("min2bus.json"));
  CHECK(net.n_b() == 2);
  CHECK(net.n_br() == 1);
  CHECK(net.slack_index() == 0);
  CHECK(net.buses[1].phases == PhaseSet::of(Phase::A));
  REQUIRE(net.loads.size() == 1);
  CHECK(net.loads[0].coefficients.p_p == doctest::Approx(0.1));
  CHECK(net.loads[0].coefficients.q_p == doctest::Approx(0.05));
}

TEST_CASE("branch to a missing bus is reported by id") {
  json doc = read_case("min2bus.json");
  doc["branches"][0]["to"] = "x9";
  try {
    load_case(doc.dump());
    FAIL("expected a validation error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("x9") != std::string::npos);
  }
}

TEST_CASE("13-bus case carries seven 50 kVA inverters") {
  const Network net = load_case_file(ref::case_path("ieee13_mod.json"));
  CHECK(net.n_b() == 13);
  REQUIRE(net.n_g() == 7);
  for (const Inverter& inv : net.inverters) CHECK(inv.s_rating * net.s_base_kva == doctest::Approx(50.0));
  CHECK(net.transformers.size() == 1);
  CHECK(net.regulators.size() == 1);
  // 634 sits on the low-voltage side of the transformer.
  CHECK(net.buses[net.bus_index("634")].base_kv == doctest::Approx(0.48 / std::sqrt(3.0)));
}

TEST_CASE("validate reports broken invariants") {
  const Network good = load_case_file(ref::case_path("balanced4.json"));
  CHECK(validate(good).empty());

  Network two_slack = good;
  two_slack.buses[1].kind = BusKind::Slack;
  const auto v = validate(two_slack);
  REQUIRE(v.size() == 1);
  CHECK(v[0].code == "multiple-slack");

  Network overload = good;
  overload.inverters[0].p_output = 60.0 / overload.s_base_kva;
  CHECK(has_code(validate(overload), "inverter-overload"));
}

TEST_CASE("unit conversion to per unit") {
  json doc = read_case("min2bus.json");
  // 0.5 mile at 2 ohm/mile on a 2.4 kV, 1000 kVA base.
  doc["branches"][0]["length"] = {{"value", 0.5}, {"unit", "mi"}};
  doc["branches"][0]["z_series"] = {{"unit", "ohm/mi"}, {"values", json::array({json::array({2.0, 4.0})})}};
  const Network net = load_case(doc.dump());
  const double z_base = 2.4 * 2.4 * 1000.0 / 1000.0;
  CHECK(net.branches[0].z_series(0, 0).real() == doctest::Approx(1.0 / z_base));
  CHECK(net.branches[0].z_series(0, 0).imag() == doctest::Approx(2.0 / z_base));
}

TEST_CASE("multi-phase wye loads expand per phase and shunts become impedance loads") {
  const Network net = load_case_file(ref::case_path("balanced4.json"));
  int expanded = 0;
  for (const ZipLoad& l : net.loads)
    if (l.id.rfind("L3.", 0) == 0) ++expanded;
  CHECK(expanded == 3);

  const Network feeder = load_case_file(ref::case_path("ieee13_mod.json"));
  int caps = 0;
  for (const ZipLoad& l : feeder.loads)
    if (l.id.rfind("C675.", 0) == 0) {
      ++caps;
      CHECK(l.coefficients.q_z == doctest::Approx(-200.0 / feeder.s_base_kva));
    }
  CHECK(caps == 3);
}

TEST_CASE("malformed documents raise errors instead of crashing") {
  CHECK_THROWS(load_case("not json"));
  CHECK_THROWS(load_case("{}"));
  json doc = read_case("min2bus.json");
  doc["transformers"] = json::array({{{"from", "1"}, {"to", "2"}, {"connection", "Zz9"},
                                      {"y_t", {{"unit", "pu"}, {"value", {1.0, 0.0}}}}}});
  CHECK_THROWS(load_case(doc.dump()));
}

TEST_CASE("save_case round trips every fixture") {
  for (const char* name : {"min2bus.json", "balanced4.json", "unbal4_2inv.json", "ieee13_mod.json"}) {
    CAPTURE(name);
    const Network net = load_case_file(ref::case_path(name));
    CHECK(load_case(save_case(net)) == net);
  }
}
