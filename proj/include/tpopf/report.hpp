#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "tpopf/opf.hpp"

namespace tpopf::report {

struct BusRecord {
  std::string id;
  std::string phases;
  std::array<double, 3> v{};          // pu, NaN for absent phases
  std::array<double, 3> theta_deg{};  // degrees, NaN for absent phases
  bool three_phase = false;
  std::array<double, 3> unbalance{};  // VUF, LVUR, PVUR fractions (three-phase buses)
};

/// Everything written for one solved problem.
struct ProblemResult {
  std::string code;  // "P0_pf", "P1" .. "P5"
  ReportRow row;
  double objective = 0.0;
  int iterations = 0;
  double stationarity = 0.0;
  double primal_infeasibility = 0.0;
  double complementarity = 0.0;
  std::vector<std::string> inverter_ids;
  std::vector<double> q_inv_kvar;
  std::array<double, 3> p_sub_kw{};
  std::array<double, 3> q_sub_kvar{};
  std::vector<BusRecord> buses;
};

ProblemResult make_result(const Network& net, const SystemAdmittance& sys, std::string code, const ReportRow& row,
                          const VoltageState& state, const std::vector<double>& q_inv_pu);

std::string to_json(const ProblemResult& r);
ProblemResult from_json(std::string_view text);

/// Writes through a temporary file in the same directory and renames it.
void write_atomic(const std::filesystem::path& path, const std::string& content);

/// Reads every result file (*.result.json) in `dir`, sorted P0_pf, P1 .. P5.
/// Throws std::runtime_error when there are none.
std::vector<ProblemResult> load_results(const std::filesystem::path& dir);

/// Problem, Loss [kW], cos(phi), Q_avg [kVAR], avg/max VUF, LVUR, PVUR [%].
std::string comparison_csv(const std::vector<ProblemResult>& results);
/// bus, V_a, V_b, V_c, theta_a, theta_b, theta_c, VUF%, LVUR%, PVUR%.
std::string bus_csv(const ProblemResult& r);
/// Fixed-width text rendering of the comparison.
std::string format_table(const std::vector<ProblemResult>& results);

/// Sort key placing P0_pf first and then P1 .. P5.
int problem_order(std::string_view code);

}  // namespace tpopf::report
