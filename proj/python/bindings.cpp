// Thin pybind11 layer. Results cross the boundary as the same JSON documents
// the CLI writes, so the Python side decodes them with the json module.
#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tpopf/metrics.hpp"
#include "tpopf/opf.hpp"
#include "tpopf/oracle.hpp"
#include "tpopf/report.hpp"

namespace py = pybind11;
using namespace tpopf;

namespace {

ProblemKind parse_kind(const std::string& code) {
  if (auto k = problem_from_code(code)) return *k;
  throw std::invalid_argument("unknown problem '" + code + "' (expected P1 .. P5)");
}

std::string power_flow_json(const Network& net, double tol, int max_iter) {
  const SystemAdmittance sys = assemble_ybus(net);
  PowerFlowResult pf;
  {
    py::gil_scoped_release release;
    pf = solve_powerflow(net, sys, inverter_injections(net, sys), {tol, max_iter});
  }
  const std::vector<double> q0(net.inverters.size(), 0.0);
  const ReportRow row = evaluate_state(net, sys, pf.state, q0, "P0-Base_PF", "converged");
  report::ProblemResult r = report::make_result(net, sys, "P0_pf", row, pf.state, q0);
  r.iterations = pf.iterations;
  r.primal_infeasibility = pf.residual;
  return report::to_json(r);
}

std::string solve_json(const Network& net, const std::string& problem, const UnbalanceLimits& limits, double tol,
                       int max_iter, const std::string& method, bool flat_start) {
  const ProblemKind kind = parse_kind(problem);
  if (method != "ipm" && method != "al") throw std::invalid_argument("method must be 'ipm' or 'al'");
  SolveOptions o;
  o.feas_tol = o.kkt_tol = tol;
  o.max_iter = max_iter;
  o.method = method == "al" ? nlp::Method::AugmentedLagrangian : nlp::Method::InteriorPoint;
  o.start = flat_start ? StartPoint::Flat : StartPoint::PowerFlow;
  const OptimizationProblem prob(net, kind, limits);
  Solution sol;
  {
    py::gil_scoped_release release;
    sol = solve(prob, o);
  }
  const SystemAdmittance& sys = prob.admittance();
  report::ProblemResult r =
      report::make_result(net, sys, std::string(problem_code(kind)), evaluate_solution(net, sys, sol), sol.state, sol.q_inv);
  r.objective = sol.objective;
  r.iterations = sol.iterations;
  r.stationarity = sol.stationarity;
  r.primal_infeasibility = sol.primal_infeasibility;
  r.complementarity = sol.complementarity;
  return report::to_json(r);
}

py::dict grid_search(const Network& net, const std::string& problem, int points, const UnbalanceLimits& limits,
                     int threads) {
  const ProblemKind kind = parse_kind(problem);
  oracle::GridResult g;
  {
    py::gil_scoped_release release;
    g = oracle::grid_search(net, kind, oracle::GridSpec::full_range(net, points), limits, threads);
  }
  std::vector<double> q_kvar;
  for (double q : g.q) q_kvar.push_back(q * net.s_base_kva);
  py::dict d;
  d["q_kvar"] = q_kvar;
  d["objective"] = g.objective;
  d["evaluated"] = g.evaluated;
  d["feasible"] = g.feasible;
  d["diverged"] = g.diverged;
  return d;
}

UnbalanceLimits limits_from(double u_vuf, double u_pvur, double u_lvur) { return {u_vuf, u_pvur, u_lvur}; }

}  // namespace

PYBIND11_MODULE(_tpopf, m) {
  m.doc() = "Three-phase unbalanced distribution OPF";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<PowerFlowError>(m, "PowerFlowError", PyExc_RuntimeError);
  py::register_exception<oracle::GridTooLarge>(m, "GridTooLarge", PyExc_ValueError);
  py::register_exception<metrics::UndefinedMetric>(m, "UndefinedMetric", PyExc_ValueError);

  py::class_<Network>(m, "Network")
      .def_static("from_file", &load_case_file, py::arg("path"))
      .def_static("from_json", [](const std::string& text) { return load_case(text); }, py::arg("text"))
      .def("to_json", [](const Network& n) { return save_case(n); })
      .def_readonly("name", &Network::name)
      .def_readonly("s_base_kva", &Network::s_base_kva)
      .def_property_readonly("bus_ids",
                             [](const Network& n) {
                               std::vector<std::string> ids;
                               for (const Bus& b : n.buses) ids.push_back(b.id);
                               return ids;
                             })
      .def_property_readonly("inverter_ids",
                             [](const Network& n) {
                               std::vector<std::string> ids;
                               for (const Inverter& i : n.inverters) ids.push_back(i.id);
                               return ids;
                             })
      .def("validate",
           [](const Network& n) {
             std::vector<std::tuple<std::string, std::string, std::string>> out;
             for (const Violation& v : validate(n)) out.emplace_back(v.code, v.path, v.message);
             return out;
           })
      .def("__repr__", [](const Network& n) {
        return "<Network '" + n.name + "' buses=" + std::to_string(n.n_b()) + " inverters=" +
               std::to_string(n.n_g()) + ">";
      });

  m.def("_power_flow_json", &power_flow_json, py::arg("network"), py::arg("tol") = 1e-8, py::arg("max_iter") = 50);
  m.def(
      "_solve_json",
      [](const Network& net, const std::string& problem, double u_vuf, double u_pvur, double u_lvur, double tol,
         int max_iter, const std::string& method, bool flat_start) {
        return solve_json(net, problem, limits_from(u_vuf, u_pvur, u_lvur), tol, max_iter, method, flat_start);
      },
      py::arg("network"), py::arg("problem"), py::arg("u_vuf") = 0.02, py::arg("u_pvur") = 0.02,
      py::arg("u_lvur") = 0.03, py::arg("tol") = 1e-6, py::arg("max_iter") = 3000, py::arg("method") = "ipm",
      py::arg("flat_start") = false);
  m.def(
      "grid_search",
      [](const Network& net, const std::string& problem, int points, double u_vuf, double u_pvur, double u_lvur,
         int threads) { return grid_search(net, problem, points, limits_from(u_vuf, u_pvur, u_lvur), threads); },
      py::arg("network"), py::arg("problem"), py::arg("points") = 41, py::arg("u_vuf") = 0.02,
      py::arg("u_pvur") = 0.02, py::arg("u_lvur") = 0.03, py::arg("threads") = 0,
      "Exhaustive setpoint scan; objective in the same per-unit terms as the OPF.");

  m.def("vuf", &metrics::vuf, py::arg("va"), py::arg("vb"), py::arg("vc"), "|V_n| / |V_p| as a fraction");
  m.def(
      "lvur",
      [](Complex va, Complex vb, Complex vc) {
        const auto ll = metrics::line_to_line_magnitudes({std::abs(va), std::abs(vb), std::abs(vc)},
                                                         {std::arg(va), std::arg(vb), std::arg(vc)});
        return metrics::lvur(ll[0], ll[1], ll[2]);
      },
      py::arg("va"), py::arg("vb"), py::arg("vc"));
  m.def(
      "pvur", [](Complex va, Complex vb, Complex vc) { return metrics::pvur(std::abs(va), std::abs(vb), std::abs(vc)); },
      py::arg("va"), py::arg("vb"), py::arg("vc"));
}
