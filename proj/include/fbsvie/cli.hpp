#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "fbsvie/control_fn.hpp"

namespace fbsvie {

enum ExitCode : int { exit_ok = 0, exit_validation = 2, exit_check_failed = 3, exit_no_convergence = 4 };

// "constant:V", "cstar", "theta:V" (V c*) or "shift:V" (c* + V).
ControlFn parse_control(const std::string& text);

// Runs one subcommand; args exclude the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fbsvie
