#include "tpopf/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <json.hpp>

namespace tpopf::report {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fixed2(double v) {
  if (!std::isfinite(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  // Avoid "-0.00".
  if (std::string(buf) == "-0.00") return "0.00";
  return buf;
}

std::string fixed4(double v) {
  if (!std::isfinite(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double from_nullable(const json& j) { return j.is_null() ? kNaN : j.get<double>(); }

json triple(const std::array<double, 3>& a) { return json::array({nullable(a[0]), nullable(a[1]), nullable(a[2])}); }
std::array<double, 3> triple_from(const json& j) {
  return {from_nullable(j.at(0)), from_nullable(j.at(1)), from_nullable(j.at(2))};
}

}  // namespace

int problem_order(std::string_view code) {
  if (code == "P0_pf" || code == "P0") return 0;
  if (code.size() == 2 && code[0] == 'P' && code[1] >= '1' && code[1] <= '5') return code[1] - '0';
  return 100;
}

ProblemResult make_result(const Network& net, const SystemAdmittance& sys, std::string code, const ReportRow& row,
                          const VoltageState& state, const std::vector<double>& q_inv_pu) {
  ProblemResult r;
  r.code = std::move(code);
  r.row = row;
  for (std::size_t i = 0; i < net.inverters.size(); ++i) {
    r.inverter_ids.push_back(net.inverters[i].id);
    r.q_inv_kvar.push_back((i < q_inv_pu.size() ? q_inv_pu[i] : 0.0) * net.s_base_kva);
  }
  const auto sub = slack_generation(net, sys, state, inverter_injections(net, sys, q_inv_pu));
  for (int p = 0; p < 3; ++p) {
    r.p_sub_kw[p] = sub[p].real() * net.s_base_kva;
    r.q_sub_kvar[p] = sub[p].imag() * net.s_base_kva;
  }
  const auto per_bus = metrics::bus_unbalance(net, sys, state);
  for (int b = 0; b < net.n_b(); ++b) {
    BusRecord rec;
    rec.id = net.buses[b].id;
    rec.phases = net.buses[b].phases.str();
    rec.three_phase = net.buses[b].phases.is_three_phase();
    for (int p = 0; p < 3; ++p) {
      const int n = sys.index.node(b, static_cast<Phase>(p));
      rec.v[p] = n >= 0 ? state.magnitude[n] : kNaN;
      rec.theta_deg[p] = n >= 0 ? state.angle[n] * 180.0 / std::numbers::pi : kNaN;
    }
    rec.unbalance = {kNaN, kNaN, kNaN};
    for (const auto& u : per_bus)
      if (u.bus == b) rec.unbalance = u.values;
    r.buses.push_back(rec);
  }
  return r;
}

std::string to_json(const ProblemResult& r) {
  json j;
  j["code"] = r.code;
  j["problem"] = r.row.problem;
  j["status"] = r.row.status;
  j["objective"] = r.objective;
  j["iterations"] = r.iterations;
  j["kkt"] = {{"stationarity", r.stationarity},
              {"primal_infeasibility", r.primal_infeasibility},
              {"complementarity", r.complementarity}};
  j["loss_kw"] = r.row.loss_kw;
  j["power_factor"] = r.row.power_factor;
  j["q_avg_kvar"] = r.row.q_avg_kvar;
  const auto& u = r.row.unbalance;
  j["unbalance"] = {{"avg", triple(u.avg)},
                    {"max", triple(u.max)},
                    {"argmax", {u.argmax[0], u.argmax[1], u.argmax[2]}},
                    {"three_phase_buses", u.three_phase_buses}};
  j["substation"] = {{"p_kw", triple(r.p_sub_kw)}, {"q_kvar", triple(r.q_sub_kvar)}};
  json inv = json::array();
  for (std::size_t i = 0; i < r.q_inv_kvar.size(); ++i) inv.push_back({{"id", r.inverter_ids[i]}, {"q_kvar", r.q_inv_kvar[i]}});
  j["inverters"] = inv;
  json buses = json::array();
  for (const BusRecord& b : r.buses)
    buses.push_back({{"id", b.id},
                     {"phases", b.phases},
                     {"v", triple(b.v)},
                     {"theta_deg", triple(b.theta_deg)},
                     {"three_phase", b.three_phase},
                     {"vuf", nullable(b.unbalance[0])},
                     {"lvur", nullable(b.unbalance[1])},
                     {"pvur", nullable(b.unbalance[2])}});
  j["buses"] = buses;
  return j.dump(2) + "\n";
}

ProblemResult from_json(std::string_view text) {
  const json j = json::parse(text);
  ProblemResult r;
  r.code = j.at("code").get<std::string>();
  r.row.problem = j.at("problem").get<std::string>();
  r.row.status = j.at("status").get<std::string>();
  r.objective = j.at("objective").get<double>();
  r.iterations = j.at("iterations").get<int>();
  r.stationarity = j.at("kkt").at("stationarity").get<double>();
  r.primal_infeasibility = j.at("kkt").at("primal_infeasibility").get<double>();
  r.complementarity = j.at("kkt").at("complementarity").get<double>();
  r.row.loss_kw = j.at("loss_kw").get<double>();
  r.row.power_factor = j.at("power_factor").get<double>();
  r.row.q_avg_kvar = j.at("q_avg_kvar").get<double>();
  const json& u = j.at("unbalance");
  r.row.unbalance.avg = triple_from(u.at("avg"));
  r.row.unbalance.max = triple_from(u.at("max"));
  for (int k = 0; k < 3; ++k) r.row.unbalance.argmax[k] = u.at("argmax").at(k).get<std::string>();
  r.row.unbalance.three_phase_buses = u.at("three_phase_buses").get<int>();
  r.p_sub_kw = triple_from(j.at("substation").at("p_kw"));
  r.q_sub_kvar = triple_from(j.at("substation").at("q_kvar"));
  for (const json& i : j.at("inverters")) {
    r.inverter_ids.push_back(i.at("id").get<std::string>());
    r.q_inv_kvar.push_back(i.at("q_kvar").get<double>());
  }
  for (const json& b : j.at("buses")) {
    BusRecord rec;
    rec.id = b.at("id").get<std::string>();
    rec.phases = b.at("phases").get<std::string>();
    rec.v = triple_from(b.at("v"));
    rec.theta_deg = triple_from(b.at("theta_deg"));
    rec.three_phase = b.at("three_phase").get<bool>();
    rec.unbalance = {from_nullable(b.at("vuf")), from_nullable(b.at("lvur")), from_nullable(b.at("pvur"))};
    r.buses.push_back(rec);
  }
  return r;
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::vector<ProblemResult> load_results(const std::filesystem::path& dir) {
  std::vector<ProblemResult> out;
  if (std::filesystem::is_directory(dir)) {
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      const std::string name = entry.path().filename().string();
      if (name.size() < 12 || name.substr(name.size() - 12) != ".result.json") continue;
      std::ifstream in(entry.path());
      std::stringstream ss;
      ss << in.rdbuf();
      out.push_back(from_json(ss.str()));
    }
  }
  if (out.empty()) throw std::runtime_error("no results found in " + dir.string());
  std::sort(out.begin(), out.end(), [](const ProblemResult& a, const ProblemResult& b) {
    return problem_order(a.code) < problem_order(b.code) ||
           (problem_order(a.code) == problem_order(b.code) && a.code < b.code);
  });
  return out;
}

std::string comparison_csv(const std::vector<ProblemResult>& results) {
  std::ostringstream out;
  out << "problem,status,loss_kw,cos_phi,q_avg_kvar,vuf_avg_pct,vuf_max_pct,lvur_avg_pct,lvur_max_pct,pvur_avg_pct,"
         "pvur_max_pct\n";
  for (const ProblemResult& r : results) {
    const auto& u = r.row.unbalance;
    out << r.row.problem << ',' << r.row.status << ',' << fixed2(r.row.loss_kw) << ',' << fixed2(r.row.power_factor)
        << ',' << fixed2(r.row.q_avg_kvar);
    for (int m = 0; m < 3; ++m) out << ',' << fixed2(100.0 * u.avg[m]) << ',' << fixed2(100.0 * u.max[m]);
    out << '\n';
  }
  return out.str();
}

std::string bus_csv(const ProblemResult& r) {
  std::ostringstream out;
  out << "bus,V_a,V_b,V_c,theta_a,theta_b,theta_c,VUF_pct,LVUR_pct,PVUR_pct\n";
  for (const BusRecord& b : r.buses) {
    out << b.id;
    for (double v : b.v) out << ',' << fixed4(v);
    for (double t : b.theta_deg) out << ',' << fixed2(t);
    for (double m : b.unbalance) out << ',' << fixed2(100.0 * m);
    out << '\n';
  }
  return out.str();
}

std::string format_table(const std::vector<ProblemResult>& results) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-12s %-10s %10s %7s %10s %8s %8s %8s %8s %8s %8s\n", "Problem", "Status",
                "Loss[kW]", "cos_phi", "Qavg[kVAR]", "VUFavg%", "VUFmax%", "LVURavg%", "LVURmax%", "PVURavg%",
                "PVURmax%");
  out << line;
  for (const ProblemResult& r : results) {
    const auto& u = r.row.unbalance;
    std::snprintf(line, sizeof line, "%-12s %-10s %10.2f %7.2f %10.2f %8.2f %8.2f %8.2f %8.2f %8.2f %8.2f\n",
                  r.row.problem.c_str(), r.row.status.c_str(), r.row.loss_kw, r.row.power_factor, r.row.q_avg_kvar,
                  100 * u.avg[0], 100 * u.max[0], 100 * u.avg[1], 100 * u.max[1], 100 * u.avg[2], 100 * u.max[2]);
    out << line;
  }
  return out.str();
}

}  // namespace tpopf::report
