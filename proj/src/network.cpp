#include "tpopf/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>

#include "json.hpp"

namespace tpopf {

using json = nlohmann::json;

char phase_char(Phase p) { return static_cast<char>('a' + static_cast<int>(p)); }

Phase phase_from_char(char c) {
  switch (c) {
    case 'a':
    case 'A':
      return Phase::A;
    case 'b':
    case 'B':
      return Phase::B;
    case 'c':
    case 'C':
      return Phase::C;
    default:
      throw std::invalid_argument(std::string("unknown phase '") + c + "'");
  }
}

PhaseSet PhaseSet::parse(std::string_view s) {
  std::uint8_t bits = 0;
  for (char c : s) bits |= static_cast<std::uint8_t>(1u << static_cast<int>(phase_from_char(c)));
  if (bits == 0) throw std::invalid_argument("empty phase set");
  return PhaseSet(bits);
}

std::vector<Phase> PhaseSet::phases() const {
  std::vector<Phase> out;
  for (int k = 0; k < 3; ++k)
    if (has(static_cast<Phase>(k))) out.push_back(static_cast<Phase>(k));
  return out;
}

int PhaseSet::position(Phase p) const {
  if (!has(p)) return -1;
  int pos = 0;
  for (int k = 0; k < static_cast<int>(p); ++k)
    if (has(static_cast<Phase>(k))) ++pos;
  return pos;
}

std::string PhaseSet::str() const {
  std::string s;
  for (Phase p : phases()) s.push_back(phase_char(p));
  return s;
}

std::string_view connection_name(Connection c) {
  switch (c) {
    case Connection::YNyn0: return "YNyn0";
    case Connection::Yy0: return "Yy0";
    case Connection::YNd1: return "YNd1";
    case Connection::Yd1: return "Yd1";
    case Connection::Dyn1: return "Dyn1";
    case Connection::Dyn11: return "Dyn11";
  }
  return "?";
}

std::optional<Connection> connection_from_name(std::string_view s) {
  for (Connection c : {Connection::YNyn0, Connection::Yy0, Connection::YNd1, Connection::Yd1,
                       Connection::Dyn1, Connection::Dyn11})
    if (connection_name(c) == s) return c;
  return std::nullopt;
}

bool Branch::operator==(const Branch& o) const {
  return id == o.id && from_bus == o.from_bus && to_bus == o.to_bus && phases == o.phases &&
         z_series.rows() == o.z_series.rows() && z_series.cols() == o.z_series.cols() &&
         z_series == o.z_series && b_shunt.size() == o.b_shunt.size() && b_shunt == o.b_shunt;
}

int Network::bus_index(std::string_view id) const {
  for (int i = 0; i < n_b(); ++i)
    if (buses[i].id == id) return i;
  return -1;
}

int Network::slack_index() const {
  for (int i = 0; i < n_b(); ++i)
    if (buses[i].kind == BusKind::Slack) return i;
  return -1;
}

// ---------------------------------------------------------------------------
// Validation

namespace {

std::string at(std::string_view list, std::size_t i, std::string_view field) {
  std::ostringstream os;
  os << list << '[' << i << ']';
  if (!field.empty()) os << '.' << field;
  return os.str();
}

}  // namespace

std::vector<Violation> validate(const Network& net) {
  std::vector<Violation> out;
  auto add = [&](std::string code, std::string path, std::string msg) {
    out.push_back({std::move(code), std::move(path), std::move(msg)});
  };

  if (!(net.s_base_kva > 0.0) || !std::isfinite(net.s_base_kva))
    add("invalid-base", "base.s_kva", "system power base must be positive");

  std::set<std::string> seen;
  int slack_count = 0;
  for (std::size_t i = 0; i < net.buses.size(); ++i) {
    const Bus& b = net.buses[i];
    if (!seen.insert(b.id).second)
      add("duplicate-bus", at("buses", i, "id"), "duplicate bus id '" + b.id + "'");
    if (b.phases.empty()) add("empty-phases", at("buses", i, "phases"), "bus '" + b.id + "' has no phases");
    if (!(b.base_kv > 0.0) || !std::isfinite(b.base_kv))
      add("invalid-base", at("buses", i, "base_kv"), "bus '" + b.id + "' needs a positive base_kv");
    for (int k = 0; k < 3; ++k) {
      if (!(b.v_min[k] > 0.0) || !(b.v_min[k] <= b.v_max[k]))
        add("voltage-bounds", at("buses", i, "v_min"),
            "bus '" + b.id + "' requires 0 < v_min <= v_max");
    }
    if (b.kind == BusKind::Slack) {
      ++slack_count;
      if (!b.phases.is_three_phase())
        add("slack-phases", at("buses", i, "phases"), "slack bus '" + b.id + "' must have phases abc");
    }
  }
  if (slack_count == 0) add("no-slack", "buses", "network has no slack bus");
  if (slack_count > 1) add("multiple-slack", "buses", "network has more than one slack bus");

  auto bus_phases = [&](const std::string& id, const std::string& path) -> std::optional<PhaseSet> {
    const int k = net.bus_index(id);
    if (k < 0) {
      add("unknown-bus", path, "unknown bus '" + id + "'");
      return std::nullopt;
    }
    return net.buses[k].phases;
  };

  for (std::size_t i = 0; i < net.branches.size(); ++i) {
    const Branch& br = net.branches[i];
    auto pf = bus_phases(br.from_bus, at("branches", i, "from_bus"));
    auto pt = bus_phases(br.to_bus, at("branches", i, "to_bus"));
    if (br.phases.empty()) {
      add("empty-phases", at("branches", i, "phases"), "branch has no phases");
      continue;
    }
    if ((pf && !br.phases.subset_of(*pf)) || (pt && !br.phases.subset_of(*pt)))
      add("phase-mismatch", at("branches", i, "phases"),
          "branch phases '" + br.phases.str() + "' not present at both endpoints");
    const int n = br.phases.size();
    if (br.z_series.rows() != n || br.z_series.cols() != n) {
      add("impedance-shape", at("branches", i, "z_series"), "impedance matrix must be square over the branch phases");
      continue;
    }
    if (br.b_shunt.size() != n)
      add("impedance-shape", at("branches", i, "b_shunt"), "shunt vector must have one entry per phase");
    const double scale = br.z_series.cwiseAbs().maxCoeff();
    if ((br.z_series - br.z_series.transpose()).cwiseAbs().maxCoeff() > 1e-9 * std::max(scale, 1e-300))
      add("asymmetric-impedance", at("branches", i, "z_series"), "impedance matrix must be symmetric");
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(br.z_series);
    lu.setThreshold(1e-12);
    if (!(scale > 0.0) || lu.rank() < n)
      add("singular-impedance", at("branches", i, "z_series"), "impedance matrix is singular");
  }

  auto check_three_phase_device = [&](std::string_view list, std::size_t i, const std::string& from,
                                      const std::string& to) {
    auto pf = bus_phases(from, at(list, i, "from_bus"));
    auto pt = bus_phases(to, at(list, i, "to_bus"));
    if ((pf && !pf->is_three_phase()) || (pt && !pt->is_three_phase()))
      add("phase-mismatch", at(list, i, ""), "device endpoints must both be three-phase");
  };
  for (std::size_t i = 0; i < net.transformers.size(); ++i) {
    const Transformer& t = net.transformers[i];
    check_three_phase_device("transformers", i, t.from_bus, t.to_bus);
    if (!(std::abs(t.y_t) > 0.0)) add("zero-admittance", at("transformers", i, "y_t"), "leakage admittance must be nonzero");
  }
  for (std::size_t i = 0; i < net.regulators.size(); ++i) {
    const Regulator& r = net.regulators[i];
    check_three_phase_device("regulators", i, r.from_bus, r.to_bus);
    for (double t : r.taps)
      if (!(t > 0.0)) add("bad-tap", at("regulators", i, "taps"), "regulator taps must be positive");
    if (!(std::abs(r.y_t) > 0.0)) add("zero-admittance", at("regulators", i, "y_t"), "admittance must be nonzero");
  }

  for (std::size_t i = 0; i < net.loads.size(); ++i) {
    const ZipLoad& l = net.loads[i];
    auto ph = bus_phases(l.bus, at("loads", i, "bus"));
    if (!ph) continue;
    if (l.configuration == LoadConfig::Wye) {
      if (!ph->has(l.phase))
        add("load-phase", at("loads", i, "phases"),
            std::string("phase ") + phase_char(l.phase) + " not present at bus '" + l.bus + "'");
    } else {
      const int a = static_cast<int>(l.phase), b = static_cast<int>(l.phase2);
      if ((a + 1) % 3 != b)
        add("load-phase", at("loads", i, "phases"), "delta loads must name one of ab, bc, ca");
      if (!ph->has(l.phase) || !ph->has(l.phase2))
        add("load-phase", at("loads", i, "phases"), "delta pair not present at bus '" + l.bus + "'");
    }
  }

  for (std::size_t i = 0; i < net.inverters.size(); ++i) {
    const Inverter& inv = net.inverters[i];
    auto ph = bus_phases(inv.bus, at("inverters", i, "bus"));
    if (ph && !ph->has(inv.phase))
      add("inverter-phase", at("inverters", i, "phase"),
          std::string("phase ") + phase_char(inv.phase) + " not present at bus '" + inv.bus + "'");
    if (inv.p_output < 0.0)
      add("inverter-negative-p", at("inverters", i, "p_output"), "inverter active output must be non-negative");
    if (inv.p_output > inv.s_rating)
      add("inverter-overload", at("inverters", i, "p_output"),
          "inverter '" + inv.id + "' active output exceeds its apparent power rating");
  }

  const SubstationLimits& sl = net.substation_limits;
  for (int k = 0; k < 3; ++k) {
    if (sl.p_min[k] > sl.p_max[k] || sl.q_min[k] > sl.q_max[k])
      add("substation-limits", "substation", "substation bounds require min <= max");
  }

  // Connectivity from the slack over every two-terminal device.
  const int slack = net.slack_index();
  if (slack >= 0 && out.empty()) {
    std::vector<std::vector<int>> adj(net.buses.size());
    auto link = [&](const std::string& a, const std::string& b) {
      const int i = net.bus_index(a), j = net.bus_index(b);
      if (i >= 0 && j >= 0) {
        adj[i].push_back(j);
        adj[j].push_back(i);
      }
    };
    for (const auto& br : net.branches) link(br.from_bus, br.to_bus);
    for (const auto& t : net.transformers) link(t.from_bus, t.to_bus);
    for (const auto& r : net.regulators) link(r.from_bus, r.to_bus);
    std::vector<bool> seen_bus(net.buses.size(), false);
    std::queue<int> q;
    q.push(slack);
    seen_bus[slack] = true;
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int v : adj[u])
        if (!seen_bus[v]) {
          seen_bus[v] = true;
          q.push(v);
        }
    }
    for (std::size_t i = 0; i < net.buses.size(); ++i)
      if (!seen_bus[i])
        add("disconnected", at("buses", i, "id"), "bus '" + net.buses[i].id + "' is not connected to the slack");
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON case format

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ValidationError(path, "schema", msg);
}

const json& require(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) fail(path, std::string("missing field '") + key + "'");
  return obj.at(key);
}

double number(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

// Bounds may be null (unbounded) in the case file.
double bound_number(const json& v, double unbounded, double scale, const std::string& path) {
  if (v.is_null()) return unbounded;
  return number(v, path) * scale;
}

std::string text(const json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "expected a string");
  return v.get<std::string>();
}

Complex complex_pair(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 2) fail(path, "expected [re, im]");
  return {number(v[0], path), number(v[1], path)};
}

double length_in_miles(const json& q, const std::string& path) {
  const double value = number(require(q, "value", path), path + ".value");
  const std::string unit = text(require(q, "unit", path), path + ".unit");
  if (unit == "mi") return value;
  if (unit == "ft") return value / 5280.0;
  if (unit == "km") return value / 1.609344;
  if (unit == "m") return value / 1609.344;
  fail(path + ".unit", "unknown length unit '" + unit + "'");
}

double power_scale(const std::string& unit, double s_base_kva, const std::string& path) {
  if (unit == "pu") return 1.0;
  if (unit == "kW" || unit == "kVAR" || unit == "kvar" || unit == "kVA") return 1.0 / s_base_kva;
  if (unit == "MW" || unit == "MVAR" || unit == "MVA") return 1000.0 / s_base_kva;
  if (unit == "W" || unit == "VAR" || unit == "VA") return 1e-3 / s_base_kva;
  fail(path, "unknown power unit '" + unit + "'");
}

/// Impedance base in ohm for a per-phase power base and line-to-ground kV.
double z_base_ohm(double base_kv, double s_base_kva) {
  return (base_kv * 1e3) * (base_kv * 1e3) / (s_base_kva * 1e3);
}

struct UnitContext {
  double s_base_kva = 0.0;
  const std::vector<Bus>* buses = nullptr;

  double base_kv_of(const std::string& bus, const std::string& path) const {
    for (const auto& b : *buses)
      if (b.id == bus) return b.base_kv;
    throw ValidationError(path, "unknown-bus", "unknown bus '" + bus + "'");
  }
};

std::array<double, 3> per_phase(const json& v, double fallback, const std::string& path) {
  if (v.is_null()) return {fallback, fallback, fallback};
  if (v.is_number()) {
    const double x = v.get<double>();
    return {x, x, x};
  }
  if (v.is_array() && v.size() == 3)
    return {number(v[0], path), number(v[1], path), number(v[2], path)};
  fail(path, "expected a number or three numbers");
}

Bus parse_bus(const json& j, const std::string& path) {
  Bus b;
  b.id = text(require(j, "id", path), path + ".id");
  try {
    b.phases = PhaseSet::parse(text(require(j, "phases", path), path + ".phases"));
  } catch (const std::invalid_argument& e) {
    fail(path + ".phases", e.what());
  }
  const std::string kind = j.value("kind", std::string("load"));
  if (kind == "slack")
    b.kind = BusKind::Slack;
  else if (kind == "load")
    b.kind = BusKind::Load;
  else
    fail(path + ".kind", "bus kind must be 'slack' or 'load'");
  b.base_kv = number(require(j, "base_kv", path), path + ".base_kv");
  b.v_min = per_phase(j.value("v_min", json()), 0.9, path + ".v_min");
  b.v_max = per_phase(j.value("v_max", json()), 1.1, path + ".v_max");
  return b;
}

Branch parse_branch(const json& j, const std::string& path, const UnitContext& ctx) {
  Branch br;
  br.id = j.value("id", std::string());
  br.from_bus = text(require(j, "from", path), path + ".from");
  br.to_bus = text(require(j, "to", path), path + ".to");
  try {
    br.phases = PhaseSet::parse(text(require(j, "phases", path), path + ".phases"));
  } catch (const std::invalid_argument& e) {
    fail(path + ".phases", e.what());
  }
  const int n = br.phases.size();
  const double base_kv = ctx.base_kv_of(br.from_bus, path + ".from");
  const double to_kv = ctx.base_kv_of(br.to_bus, path + ".to");
  if (std::abs(base_kv - to_kv) > 1e-9 * std::max(base_kv, to_kv))
    throw ValidationError(path, "base-mismatch", "line endpoints must share a voltage base");
  const double zb = z_base_ohm(base_kv, ctx.s_base_kva);
  const double miles = j.contains("length") ? length_in_miles(j["length"], path + ".length") : -1.0;

  const json& z = require(j, "z_series", path);
  const std::string zunit = text(require(z, "unit", path + ".z_series"), path + ".z_series.unit");
  double zscale = 0.0;
  if (zunit == "pu")
    zscale = 1.0;
  else if (zunit == "ohm")
    zscale = 1.0 / zb;
  else if (zunit == "ohm/mi" || zunit == "ohm/km") {
    if (miles < 0.0) fail(path + ".length", "per-length impedance needs a length");
    zscale = (zunit == "ohm/mi" ? miles : miles * 1.609344) / zb;
  } else {
    fail(path + ".z_series.unit", "unknown impedance unit '" + zunit + "'");
  }
  const json& zv = require(z, "values", path + ".z_series");
  if (!zv.is_array() || static_cast<int>(zv.size()) != n * n)
    throw ValidationError(path + ".z_series.values", "impedance-shape",
                          "expected " + std::to_string(n * n) + " [re, im] pairs");
  br.z_series.resize(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      br.z_series(r, c) = complex_pair(zv[r * n + c], path + ".z_series.values") * zscale;

  br.b_shunt = Eigen::VectorXd::Zero(n);
  if (j.contains("b_shunt")) {
    const json& b = j["b_shunt"];
    const std::string bunit = text(require(b, "unit", path + ".b_shunt"), path + ".b_shunt.unit");
    double bscale = 0.0;
    if (bunit == "pu")
      bscale = 1.0;
    else if (bunit == "S")
      bscale = zb;
    else if (bunit == "uS")
      bscale = 1e-6 * zb;
    else if (bunit == "uS/mi" || bunit == "uS/km") {
      if (miles < 0.0) fail(path + ".length", "per-length susceptance needs a length");
      bscale = 1e-6 * zb * (bunit == "uS/mi" ? miles : miles * 1.609344);
    } else {
      fail(path + ".b_shunt.unit", "unknown susceptance unit '" + bunit + "'");
    }
    const json& bv = require(b, "values", path + ".b_shunt");
    if (!bv.is_array() || static_cast<int>(bv.size()) != n)
      throw ValidationError(path + ".b_shunt.values", "impedance-shape", "expected one value per phase");
    for (int k = 0; k < n; ++k) br.b_shunt(k) = number(bv[k], path + ".b_shunt.values") * bscale;
  }
  return br;
}

Complex device_admittance(const json& j, const std::string& path, const std::string& from_bus,
                          const UnitContext& ctx) {
  if (j.contains("y_t")) {
    const json& y = j["y_t"];
    const std::string unit = text(require(y, "unit", path + ".y_t"), path + ".y_t.unit");
    const Complex v = complex_pair(require(y, "value", path + ".y_t"), path + ".y_t.value");
    if (unit == "pu") return v;
    if (unit == "S") return v * z_base_ohm(ctx.base_kv_of(from_bus, path + ".from"), ctx.s_base_kva);
    fail(path + ".y_t.unit", "unknown admittance unit '" + unit + "'");
  }
  if (j.contains("z_pct")) {
    // Percent impedance on the device's own three-phase rating.
    const json& z = j["z_pct"];
    const Complex zp = complex_pair(require(z, "value", path + ".z_pct"), path + ".z_pct.value");
    const double rating = number(require(z, "rating_kva", path + ".z_pct"), path + ".z_pct.rating_kva");
    if (!(rating > 0.0)) fail(path + ".z_pct.rating_kva", "rating must be positive");
    const Complex z_sys = zp / 100.0 * (ctx.s_base_kva / (rating / 3.0));
    if (std::abs(z_sys) == 0.0) throw ValidationError(path, "zero-admittance", "zero impedance");
    return 1.0 / z_sys;
  }
  fail(path, "device needs 'y_t' or 'z_pct'");
}

std::vector<ZipLoad> parse_load(const json& j, const std::string& path, const UnitContext& ctx) {
  ZipLoad l;
  l.id = j.value("id", std::string());
  l.bus = text(require(j, "bus", path), path + ".bus");
  const std::string config = j.value("config", std::string("wye"));
  const std::string phases = text(require(j, "phases", path), path + ".phases");
  const double s = power_scale(text(require(j, "unit", path), path + ".unit"), ctx.s_base_kva, path + ".unit");
  auto coef = [&](const char* key) -> std::array<double, 3> {
    if (!j.contains(key)) return {0.0, 0.0, 0.0};
    const json& v = j[key];
    if (!v.is_array() || v.size() != 3) fail(path + "." + key, "expected [constant power, current, impedance]");
    return {number(v[0], path) * s, number(v[1], path) * s, number(v[2], path) * s};
  };
  const auto p = coef("p");
  const auto q = coef("q");
  l.coefficients = {p[0], p[1], p[2], q[0], q[1], q[2]};
  try {
    if (config == "wye") {
      l.configuration = LoadConfig::Wye;
      // A multi-phase wye entry expands to identical per-phase loads.
      std::vector<ZipLoad> out;
      for (Phase ph : PhaseSet::parse(phases).phases()) {
        ZipLoad each = l;
        each.phase = ph;
        if (phases.size() > 1) each.id = l.id + "." + phase_char(ph);
        out.push_back(each);
      }
      return out;
    }
    if (config == "delta") {
      l.configuration = LoadConfig::Delta;
      if (phases.size() != 2) fail(path + ".phases", "delta loads take a phase pair");
      l.phase = phase_from_char(phases[0]);
      l.phase2 = phase_from_char(phases[1]);
      // Accept "ac" as the ca branch with its orientation restored.
      if (l.phase == Phase::A && l.phase2 == Phase::C) std::swap(l.phase, l.phase2);
      return {l};
    }
  } catch (const std::invalid_argument& e) {
    fail(path + ".phases", e.what());
  }
  fail(path + ".config", "load config must be 'wye' or 'delta'");
}

}  // namespace

Network load_case(std::string_view text_in) {
  json doc;
  try {
    doc = json::parse(text_in);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed case document: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("case document must be a JSON object");

  Network net;
  net.name = doc.value("name", std::string());
  net.s_base_kva = number(require(require(doc, "base", ""), "s_kva", "base"), "base.s_kva");
  if (!(net.s_base_kva > 0.0)) throw ValidationError("base.s_kva", "invalid-base", "system power base must be positive");

  const json empty = json::array();
  auto list = [&](const char* key) -> const json& {
    if (!doc.contains(key)) return empty;
    if (!doc[key].is_array()) fail(key, "expected an array");
    return doc[key];
  };

  const json& buses = require(doc, "buses", "");
  if (!buses.is_array()) fail("buses", "expected an array");
  for (std::size_t i = 0; i < buses.size(); ++i) net.buses.push_back(parse_bus(buses[i], at("buses", i, "")));
  for (std::size_t i = 0; i < net.buses.size(); ++i)
    if (!(net.buses[i].base_kv > 0.0))
      throw ValidationError(at("buses", i, "base_kv"), "invalid-base", "base_kv must be positive");

  UnitContext ctx{net.s_base_kva, &net.buses};

  const json& branches = list("branches");
  for (std::size_t i = 0; i < branches.size(); ++i)
    net.branches.push_back(parse_branch(branches[i], at("branches", i, ""), ctx));

  const json& transformers = list("transformers");
  for (std::size_t i = 0; i < transformers.size(); ++i) {
    const json& j = transformers[i];
    const std::string path = at("transformers", i, "");
    Transformer t;
    t.id = j.value("id", std::string());
    t.from_bus = text(require(j, "from", path), path + ".from");
    t.to_bus = text(require(j, "to", path), path + ".to");
    const std::string code = text(require(j, "connection", path), path + ".connection");
    const auto conn = connection_from_name(code);
    if (!conn) throw ValidationError(path + ".connection", "unknown-connection", "unknown connection code '" + code + "'");
    t.connection = *conn;
    t.y_t = device_admittance(j, path, t.from_bus, ctx);
    net.transformers.push_back(t);
  }

  const json& regulators = list("regulators");
  for (std::size_t i = 0; i < regulators.size(); ++i) {
    const json& j = regulators[i];
    const std::string path = at("regulators", i, "");
    Regulator r;
    r.id = j.value("id", std::string());
    r.from_bus = text(require(j, "from", path), path + ".from");
    r.to_bus = text(require(j, "to", path), path + ".to");
    r.taps = per_phase(require(j, "taps", path), 1.0, path + ".taps");
    r.y_t = device_admittance(j, path, r.from_bus, ctx);
    net.regulators.push_back(r);
  }

  const json& loads = list("loads");
  for (std::size_t i = 0; i < loads.size(); ++i)
    for (auto& l : parse_load(loads[i], at("loads", i, ""), ctx)) net.loads.push_back(std::move(l));

  // Bus shunts (capacitor banks) become constant-impedance loads.
  const json& shunts = list("shunts");
  for (std::size_t i = 0; i < shunts.size(); ++i) {
    const json& j = shunts[i];
    const std::string path = at("shunts", i, "");
    const double s = power_scale(text(require(j, "unit", path), path + ".unit"), net.s_base_kva, path + ".unit");
    const double q = number(require(j, "q", path), path + ".q") * s;
    const double p = j.contains("p") ? number(j["p"], path + ".p") * s : 0.0;
    try {
      for (Phase ph : PhaseSet::parse(text(require(j, "phases", path), path + ".phases")).phases()) {
        ZipLoad l;
        l.id = j.value("id", std::string("shunt")) + "." + phase_char(ph);
        l.bus = text(require(j, "bus", path), path + ".bus");
        l.phase = ph;
        // Positive q is capacitive (injected) reactive power at base voltage.
        l.coefficients.p_z = p;
        l.coefficients.q_z = -q;
        net.loads.push_back(l);
      }
    } catch (const std::invalid_argument& e) {
      fail(path + ".phases", e.what());
    }
  }

  const json& inverters = list("inverters");
  for (std::size_t i = 0; i < inverters.size(); ++i) {
    const json& j = inverters[i];
    const std::string path = at("inverters", i, "");
    Inverter inv;
    inv.id = j.value("id", "inv" + std::to_string(i));
    inv.bus = text(require(j, "bus", path), path + ".bus");
    const std::string ph = text(require(j, "phase", path), path + ".phase");
    if (ph.size() != 1) fail(path + ".phase", "inverters are single-phase");
    try {
      inv.phase = phase_from_char(ph[0]);
    } catch (const std::invalid_argument& e) {
      fail(path + ".phase", e.what());
    }
    const double s = power_scale(text(require(j, "unit", path), path + ".unit"), net.s_base_kva, path + ".unit");
    inv.s_rating = number(require(j, "s_rating", path), path + ".s_rating") * s;
    inv.p_output = number(require(j, "p_output", path), path + ".p_output") * s;
    net.inverters.push_back(inv);
  }

  if (doc.contains("substation")) {
    const json& j = doc["substation"];
    const double s = power_scale(text(require(j, "unit", "substation"), "substation.unit"), net.s_base_kva,
                                 "substation.unit");
    auto bounds = [&](const char* key, double unbounded, std::array<double, 3>& dst) {
      if (!j.contains(key)) return;
      const json& v = j[key];
      if (v.is_null() || v.is_number()) {
        const double x = bound_number(v, unbounded, s, std::string("substation.") + key);
        dst = {x, x, x};
        return;
      }
      if (!v.is_array() || v.size() != 3) fail(std::string("substation.") + key, "expected three values");
      for (int k = 0; k < 3; ++k) dst[k] = bound_number(v[k], unbounded, s, std::string("substation.") + key);
    };
    bounds("p_min", -kInf, net.substation_limits.p_min);
    bounds("p_max", kInf, net.substation_limits.p_max);
    bounds("q_min", -kInf, net.substation_limits.q_min);
    bounds("q_max", kInf, net.substation_limits.q_max);
  }

  const auto violations = validate(net);
  if (!violations.empty()) {
    const Violation& v = violations.front();
    throw ValidationError(v.path, v.code, v.message);
  }
  return net;
}

Network load_case_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open case file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_case(ss.str());
}

std::string save_case(const Network& net) {
  auto bound = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  auto triple = [](const std::array<double, 3>& a) { return json::array({a[0], a[1], a[2]}); };
  auto cpair = [](Complex c) { return json::array({c.real(), c.imag()}); };

  json doc;
  doc["name"] = net.name;
  doc["base"] = {{"s_kva", net.s_base_kva}};
  doc["buses"] = json::array();
  for (const auto& b : net.buses) {
    doc["buses"].push_back({{"id", b.id},
                            {"phases", b.phases.str()},
                            {"kind", b.kind == BusKind::Slack ? "slack" : "load"},
                            {"base_kv", b.base_kv},
                            {"v_min", triple(b.v_min)},
                            {"v_max", triple(b.v_max)}});
  }
  doc["branches"] = json::array();
  for (const auto& br : net.branches) {
    json z = json::array();
    for (int r = 0; r < br.z_series.rows(); ++r)
      for (int c = 0; c < br.z_series.cols(); ++c) z.push_back(cpair(br.z_series(r, c)));
    json b = json::array();
    for (int k = 0; k < br.b_shunt.size(); ++k) b.push_back(br.b_shunt(k));
    doc["branches"].push_back({{"id", br.id},
                               {"from", br.from_bus},
                               {"to", br.to_bus},
                               {"phases", br.phases.str()},
                               {"z_series", {{"unit", "pu"}, {"values", z}}},
                               {"b_shunt", {{"unit", "pu"}, {"values", b}}}});
  }
  doc["transformers"] = json::array();
  for (const auto& t : net.transformers) {
    doc["transformers"].push_back({{"id", t.id},
                                   {"from", t.from_bus},
                                   {"to", t.to_bus},
                                   {"connection", std::string(connection_name(t.connection))},
                                   {"y_t", {{"unit", "pu"}, {"value", cpair(t.y_t)}}}});
  }
  doc["regulators"] = json::array();
  for (const auto& r : net.regulators) {
    doc["regulators"].push_back({{"id", r.id},
                                 {"from", r.from_bus},
                                 {"to", r.to_bus},
                                 {"taps", triple(r.taps)},
                                 {"y_t", {{"unit", "pu"}, {"value", cpair(r.y_t)}}}});
  }
  doc["loads"] = json::array();
  for (const auto& l : net.loads) {
    std::string phases(1, phase_char(l.phase));
    if (l.configuration == LoadConfig::Delta) phases.push_back(phase_char(l.phase2));
    const auto& c = l.coefficients;
    doc["loads"].push_back({{"id", l.id},
                            {"bus", l.bus},
                            {"config", l.configuration == LoadConfig::Wye ? "wye" : "delta"},
                            {"phases", phases},
                            {"unit", "pu"},
                            {"p", json::array({c.p_p, c.p_i, c.p_z})},
                            {"q", json::array({c.q_p, c.q_i, c.q_z})}});
  }
  doc["inverters"] = json::array();
  for (const auto& inv : net.inverters) {
    doc["inverters"].push_back({{"id", inv.id},
                                {"bus", inv.bus},
                                {"phase", std::string(1, phase_char(inv.phase))},
                                {"unit", "pu"},
                                {"s_rating", inv.s_rating},
                                {"p_output", inv.p_output}});
  }
  const auto& sl = net.substation_limits;
  json sub = {{"unit", "pu"}};
  for (auto [key, arr] : {std::pair{"p_min", &sl.p_min}, std::pair{"p_max", &sl.p_max},
                          std::pair{"q_min", &sl.q_min}, std::pair{"q_max", &sl.q_max}})
    sub[key] = json::array({bound((*arr)[0]), bound((*arr)[1]), bound((*arr)[2])});
  doc["substation"] = sub;
  return doc.dump(2);
}

}  // namespace tpopf
