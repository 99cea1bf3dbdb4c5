#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "tpopf/admittance.hpp"
#include "tpopf/metrics.hpp"
#include "tpopf/network.hpp"
#include "tpopf/opf.hpp"
#include "tpopf/oracle.hpp"
#include "tpopf/powerflow.hpp"
#include "tpopf/report.hpp"

namespace tpopf::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kBaseCode = "P0_pf";
constexpr const char* kBaseLabel = "P0-Base_PF";

std::optional<std::string> canonical_code(std::string token) {
  token.erase(std::remove_if(token.begin(), token.end(), [](unsigned char c) { return std::isspace(c); }),
              token.end());
  if (token == "P0" || token == kBaseCode || token == kBaseLabel) return std::string(kBaseCode);
  if (auto k = problem_from_code(token)) return std::string(problem_code(*k));
  return std::nullopt;
}

struct SolverFlags {
  double tol = 1e-6;
  int max_iter = 3000;
  UnbalanceLimits limits;
  std::string method = "ipm";
  bool flat_start = false;
  bool verbose = false;
  int threads = 0;
};

void add_solver_flags(CLI::App* cmd, SolverFlags& f) {
  cmd->add_option("--tol", f.tol, "KKT and feasibility tolerance")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--max-iter", f.max_iter, "Iteration limit")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--method", f.method, "NLP method")
      ->capture_default_str()
      ->check(CLI::IsMember({"ipm", "al"}));
  cmd->add_flag("--flat-start", f.flat_start, "Start from a flat voltage profile instead of the Q = 0 power flow");
  cmd->add_flag("--verbose", f.verbose, "Print solver iterations to stderr");
  cmd->add_option("--threads", f.threads, "Worker threads (0 = hardware, capped by TPOPF_THREADS)")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
}

void add_limit_flags(CLI::App* cmd, UnbalanceLimits& l) {
  cmd->add_option("--u-vuf", l.u_vuf, "VUF limit for P5 (fraction)")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--u-pvur", l.u_pvur, "PVUR limit for P5 (fraction)")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--u-lvur", l.u_lvur, "LVUR limit for P5 (fraction)")->capture_default_str()->check(CLI::PositiveNumber);
}

SolveOptions solve_options(const SolverFlags& f) {
  SolveOptions o;
  o.feas_tol = f.tol;
  o.kkt_tol = f.tol;
  o.max_iter = f.max_iter;
  o.start = f.flat_start ? StartPoint::Flat : StartPoint::PowerFlow;
  o.method = f.method == "al" ? nlp::Method::AugmentedLagrangian : nlp::Method::InteriorPoint;
  o.verbose = f.verbose;
  return o;
}

std::optional<Network> load_or_report(const std::string& path) {
  try {
    return load_case_file(path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << path << ": " << e.what() << "\n";
    return std::nullopt;
  }
}

struct Outcome {
  std::optional<report::ProblemResult> result;
  int exit = kSuccess;
  std::string message;
  double seconds = 0.0;
};

Outcome solve_base(const Network& net, const SystemAdmittance& sys) {
  Outcome out;
  try {
    const PowerFlowResult pf = solve_powerflow(net, sys, inverter_injections(net, sys));
    const std::vector<double> q0(net.inverters.size(), 0.0);
    const ReportRow row = evaluate_state(net, sys, pf.state, q0, kBaseLabel, "converged");
    report::ProblemResult r = report::make_result(net, sys, kBaseCode, row, pf.state, q0);
    r.iterations = pf.iterations;
    r.primal_infeasibility = pf.residual;
    out.result = std::move(r);
    out.message = "converged in " + std::to_string(pf.iterations) + " iterations";
  } catch (const PowerFlowError& e) {
    out.exit = kSolverFailure;
    out.message = e.what();
  }
  return out;
}

Outcome solve_problem(const Network& net, const SystemAdmittance& sys, ProblemKind kind, const SolverFlags& flags) {
  Outcome out;
  std::optional<OptimizationProblem> prob;
  try {
    prob.emplace(net, kind, flags.limits);
  } catch (const std::invalid_argument& e) {
    out.exit = kInputError;
    out.message = e.what();
    return out;
  }
  const Solution sol = solve(*prob, solve_options(flags));
  const ReportRow row = evaluate_solution(net, sys, sol);
  report::ProblemResult r = report::make_result(net, sys, std::string(problem_code(kind)), row, sol.state, sol.q_inv);
  r.objective = sol.objective;
  r.iterations = sol.iterations;
  r.stationarity = sol.stationarity;
  r.primal_infeasibility = sol.primal_infeasibility;
  r.complementarity = sol.complementarity;
  out.result = std::move(r);
  out.message = row.status + " after " + std::to_string(sol.iterations) + " iterations";
  if (sol.status != nlp::Status::Optimal) out.exit = kSolverFailure;
  return out;
}

std::string json_array(const std::vector<report::ProblemResult>& results) {
  std::string s = "[\n";
  for (std::size_t i = 0; i < results.size(); ++i) {
    std::string item = report::to_json(results[i]);
    while (!item.empty() && item.back() == '\n') item.pop_back();
    s += item;
    s += i + 1 < results.size() ? ",\n" : "\n";
  }
  return s + "]\n";
}

void write_csv_files(const fs::path& dir, const std::vector<report::ProblemResult>& results) {
  report::write_atomic(dir / "comparison.csv", report::comparison_csv(results));
  for (const auto& r : results) report::write_atomic(dir / ("buses_" + r.code + ".csv"), report::bus_csv(r));
}

void emit(const std::vector<std::string>& formats, const std::vector<report::ProblemResult>& results) {
  for (const std::string& f : formats) {
    if (f == "table") std::cout << report::format_table(results);
    if (f == "csv") std::cout << report::comparison_csv(results);
    if (f == "json") std::cout << json_array(results);
  }
}

// ---- run -------------------------------------------------------------------

struct RunArgs {
  std::string case_path;
  std::string problems = "P1..P5";
  std::string out_dir;
  std::vector<std::string> formats{"table"};
  SolverFlags flags;
};

int cmd_run(const RunArgs& a) {
  std::string err;
  const auto codes = parse_problem_list(a.problems, err);
  if (!codes) {
    std::cerr << "error: " << err << "\n";
    return kInputError;
  }
  const auto net = load_or_report(a.case_path);
  if (!net) return kInputError;
  const SystemAdmittance sys = assemble_ybus(*net);

  std::vector<Outcome> outcomes(codes->size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < codes->size(); i = next++) {
      const auto t0 = std::chrono::steady_clock::now();
      const std::string& code = (*codes)[i];
      Outcome o = code == kBaseCode ? solve_base(*net, sys) : solve_problem(*net, sys, *problem_from_code(code), a.flags);
      o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::lock_guard lock(log_mutex);
      std::fprintf(stderr, "%-6s %s (%.2f s)\n", code.c_str(), o.message.c_str(), o.seconds);
      outcomes[i] = std::move(o);
    }
  };
  const int workers = std::min<int>(oracle::worker_count(a.flags.threads), static_cast<int>(codes->size()));
  if (workers <= 1 || a.flags.verbose) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  int exit = kSuccess;
  std::vector<report::ProblemResult> results;
  for (const Outcome& o : outcomes) {
    exit = std::max(exit, o.exit);
    if (o.result) results.push_back(*o.result);
  }
  if (!a.out_dir.empty()) {
    try {
      fs::create_directories(a.out_dir);
      for (const auto& r : results) report::write_atomic(fs::path(a.out_dir) / (r.code + ".result.json"), report::to_json(r));
      if (std::find(a.formats.begin(), a.formats.end(), "csv") != a.formats.end() && !results.empty())
        write_csv_files(a.out_dir, results);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kInputError;
    }
  }
  if (!results.empty()) emit(a.formats, results);
  return exit;
}

// ---- pf --------------------------------------------------------------------

struct PfArgs {
  std::string case_path;
  std::string ybus_path;
  std::string format = "table";
};

void print_bus_table(const report::ProblemResult& r) {
  std::printf("%-8s %-5s %8s %8s %8s %9s %9s %9s %7s %7s %7s\n", "Bus", "Ph", "V_a", "V_b", "V_c", "th_a", "th_b", "th_c",
              "VUF%", "LVUR%", "PVUR%");
  auto cell = [](double v, const char* fmt, int width) {
    if (std::isfinite(v))
      std::printf(fmt, width, v);
    else
      std::printf(" %*s", width, "-");
  };
  for (const auto& b : r.buses) {
    std::printf("%-8s %-5s", b.id.c_str(), b.phases.c_str());
    for (double v : b.v) cell(v, " %*.4f", 8);
    for (double t : b.theta_deg) cell(t, " %*.2f", 9);
    for (double u : b.unbalance) cell(100.0 * u, " %*.2f", 7);
    std::printf("\n");
  }
}

int cmd_pf(const PfArgs& a) {
  const auto net = load_or_report(a.case_path);
  if (!net) return kInputError;
  const SystemAdmittance sys = assemble_ybus(*net);
  if (!a.ybus_path.empty()) {
    std::ofstream f(a.ybus_path);
    if (!f) {
      std::cerr << "error: cannot write " << a.ybus_path << "\n";
      return kInputError;
    }
    write_ybus_coo(sys, f);
  }
  const Outcome o = solve_base(*net, sys);
  if (!o.result) {
    std::cerr << "error: power flow failed: " << o.message << "\n";
    return o.exit;
  }
  std::fprintf(stderr, "power flow %s\n", o.message.c_str());
  if (a.format == "json") {
    std::cout << report::to_json(*o.result);
  } else if (a.format == "csv") {
    std::cout << report::bus_csv(*o.result);
  } else {
    std::cout << report::format_table({*o.result}) << "\n";
    print_bus_table(*o.result);
  }
  return kSuccess;
}

// ---- oracle ----------------------------------------------------------------

struct OracleArgs {
  std::string case_path;
  std::string problem = "P1";
  int points = 41;
  bool compare = false;
  SolverFlags flags;
};

int cmd_oracle(const OracleArgs& a) {
  const auto kind = problem_from_code(a.problem);
  if (!kind) {
    std::cerr << "error: --problem must be one of P1..P5\n";
    return kInputError;
  }
  const auto net = load_or_report(a.case_path);
  if (!net) return kInputError;
  oracle::GridResult g;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    g = oracle::grid_search(*net, *kind, oracle::GridSpec::full_range(*net, a.points), a.flags.limits, a.flags.threads);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSolverFailure;
  }
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("problem     %s\n", std::string(problem_label(*kind)).c_str());
  std::printf("grid        %lld points, %lld admissible, %lld diverged (%.2f s)\n", g.evaluated, g.feasible, g.diverged,
              dt);
  std::printf("objective   %.10g\n", g.objective);
  for (std::size_t i = 0; i < g.q.size(); ++i)
    std::printf("q[%s]%*s %.4f kVAR\n", net->inverters[i].id.c_str(),
                static_cast<int>(std::max<std::size_t>(0, 8 - std::min<std::size_t>(8, net->inverters[i].id.size()))), "",
                g.q[i] * net->s_base_kva);
  if (!a.compare) return kSuccess;

  const SystemAdmittance sys = assemble_ybus(*net);
  const Outcome o = solve_problem(*net, sys, *kind, a.flags);
  if (!o.result) {
    std::cerr << "error: " << o.message << "\n";
    return o.exit;
  }
  const double opf = o.result->objective;
  const double gap = (g.objective - opf) / std::max(std::abs(g.objective), 1e-12);
  std::printf("opf         %.10g (%s)\n", opf, o.result->row.status.c_str());
  std::printf("gap         %.3e (grid - opf) / |grid|\n", gap);
  return o.exit;
}

// ---- report / validate ---------------------------------------------------------

int cmd_report(const std::string& dir, const std::string& format) {
  std::vector<report::ProblemResult> results;
  try {
    results = report::load_results(dir);
    write_csv_files(dir, results);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  emit({format}, results);
  return kSuccess;
}

int cmd_validate(const std::string& path) {
  const auto net = load_or_report(path);
  if (!net) return kInputError;
  std::printf("valid: %s: %d buses, %zu branches, %zu transformers, %zu regulators, %zu loads, %zu inverters\n",
              net->name.empty() ? path.c_str() : net->name.c_str(), net->n_b(), net->branches.size(),
              net->transformers.size(), net->regulators.size(), net->loads.size(), net->inverters.size());
  return kSuccess;
}

}  // namespace

std::optional<std::vector<std::string>> parse_problem_list(const std::string& text, std::string& error) {
  std::vector<std::string> out;
  auto push = [&](const std::string& c) {
    if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
  };
  std::stringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (token.find_first_not_of(" \t") == std::string::npos) continue;
    const auto dots = token.find("..");
    if (dots != std::string::npos) {
      const auto lo = canonical_code(token.substr(0, dots));
      const auto hi = canonical_code(token.substr(dots + 2));
      if (!lo || !hi || report::problem_order(*lo) > report::problem_order(*hi)) {
        error = "invalid problem range '" + token + "'";
        return std::nullopt;
      }
      for (int k = report::problem_order(*lo); k <= report::problem_order(*hi); ++k)
        push(k == 0 ? std::string(kBaseCode) : "P" + std::to_string(k));
      continue;
    }
    const auto c = canonical_code(token);
    if (!c) {
      error = "unknown problem '" + token + "' (expected P0_pf, P1 .. P5 or a range such as P1..P5)";
      return std::nullopt;
    }
    push(*c);
  }
  if (out.empty()) {
    error = "no problems requested";
    return std::nullopt;
  }
  return out;
}

int main(int argc, char** argv) {
  CLI::App app{"Three-phase unbalanced feeder power flow and reactive-power OPF"};
  app.set_config("--config", "", "INI/TOML file with option defaults, one [section] per subcommand");
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Solve the base power flow and OPF problems on a case");
  run_cmd->add_option("case", run.case_path, "Case file (JSON)")->required();
  // Config files hand comma lists over as several values; join them back.
  run_cmd->add_option("--problems", run.problems, "Problems: P0_pf, P1..P5, comma lists and ranges")
      ->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::Join)
      ->capture_default_str();
  run_cmd->add_option("--out", run.out_dir, "Directory for <code>.result.json files");
  run_cmd->add_option("--format", run.formats, "Stdout formats")
      ->delimiter(',')
      ->check(CLI::IsMember({"table", "csv", "json"}))
      ->capture_default_str();
  add_solver_flags(run_cmd, run.flags);
  add_limit_flags(run_cmd, run.flags.limits);

  PfArgs pf;
  auto* pf_cmd = app.add_subcommand("pf", "Solve the power flow with all inverters at Q = 0");
  pf_cmd->add_option("case", pf.case_path, "Case file (JSON)")->required();
  pf_cmd->add_option("--dump-ybus", pf.ybus_path, "Write the bus admittance matrix as 'row col re im' lines");
  pf_cmd->add_option("--format", pf.format, "Output format")
      ->check(CLI::IsMember({"table", "csv", "json"}))
      ->capture_default_str();

  OracleArgs orc;
  auto* orc_cmd = app.add_subcommand("oracle", "Brute-force grid search over inverter setpoints");
  orc_cmd->add_option("case", orc.case_path, "Case file (JSON)")->required();
  orc_cmd->add_option("--problem", orc.problem, "Objective (P1..P5)")->capture_default_str();
  orc_cmd->add_option("--points", orc.points, "Grid points per inverter")->capture_default_str()->check(CLI::Range(2, 100000));
  orc_cmd->add_flag("--compare", orc.compare, "Also solve the OPF and print the relative gap");
  add_solver_flags(orc_cmd, orc.flags);
  add_limit_flags(orc_cmd, orc.flags.limits);

  std::string report_dir, report_format = "table";
  auto* rep_cmd = app.add_subcommand("report", "Write comparison.csv and buses_<code>.csv from saved results");
  rep_cmd->add_option("dir", report_dir, "Directory holding *.result.json")->required();
  rep_cmd->add_option("--format", report_format, "Stdout format")
      ->check(CLI::IsMember({"table", "csv", "json"}))
      ->capture_default_str();

  std::string validate_path;
  auto* val_cmd = app.add_subcommand("validate", "Parse and validate a case file");
  val_cmd->add_option("case", validate_path, "Case file (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInputError;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*pf_cmd) return cmd_pf(pf);
    if (*orc_cmd) return cmd_oracle(orc);
    if (*rep_cmd) return cmd_report(report_dir, report_format);
    if (*val_cmd) return cmd_validate(validate_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSolverFailure;
  }
  return kInputError;
}

}  // namespace tpopf::cli
