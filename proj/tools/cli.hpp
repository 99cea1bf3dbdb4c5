#pragma once

#include <optional>
#include <string>
#include <vector>

namespace tpopf::cli {

enum ExitCode : int { kSuccess = 0, kSolverFailure = 1, kInputError = 2 };

/// Expands "P1,P3", "P1..P5", "P0_pf" and problem labels into canonical
/// codes ("P0_pf", "P1" .. "P5"), in request order without duplicates.
/// Returns std::nullopt with `error` set on an unknown token.
std::optional<std::vector<std::string>> parse_problem_list(const std::string& text, std::string& error);

int main(int argc, char** argv);

}  // namespace tpopf::cli
