#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "fbsvie/model.hpp"

namespace fbsvie {

// JSON scenario files mirror ScenarioSpec with snake_case fields:
//
//   grid                   {"horizon": T, "n_steps": n}            (required)
//   initial                xi > 0                                   (default 1)
//   alpha, beta            kernel                                   (default 0)
//   levy                   [[size, weight], ...]                    (default none)
//   pi                     one kernel per atom         (default pi = atom size)
//   gamma                  number or n+1 node values                (default 0)
//   filtration             "full" | "trivial" | {"mode": "delay", "delay": d}
//   gamma_sign_convention  "discounting" | "paper_ode"
//   mc                     {"n_paths", "seed", "n_blocks"}
//   regression             {"degree", "state_variables": ["x" | "log_x"]}
//
// A kernel is a number, {"kind": "constant", "value": v},
// {"kind": "exp_decay", "amplitude": a, "rate": r} or
// {"kind": "table", "n": n, "table": [row-major lower triangle]}.
ScenarioSpec parse_config(const nlohmann::json& doc);
ScenarioSpec parse_config_text(const std::string& text);
// Throws IoError for unreadable files and ValidationError for malformed ones.
ScenarioSpec load_config(const std::filesystem::path& path);

// Canonical JSON of a validated scenario; round-trips through parse_config.
nlohmann::json scenario_to_json(const ScenarioSpec& spec);

// FNV-1a 64 of the canonical JSON, as 16 hex digits.
std::string scenario_hash(const ScenarioSpec& spec);

}  // namespace fbsvie
