#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace fbsvie {

struct CheckResult {
  std::string name;
  double value = 0.0;
  double reference = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string detail;
};

struct OutputFile {
  std::string name;
  std::string path;
  std::size_t nan_count = 0;
};

struct RunReport {
  std::string subcommand;
  std::string scenario_hash;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
  std::vector<OutputFile> outputs;
  std::vector<CheckResult> checks;
  std::string error;
  int exit_code = 0;

  bool all_pass() const;
  void add_check(CheckResult c) { checks.push_back(std::move(c)); }
};

nlohmann::json report_to_json(const RunReport& report);

// Writes report.json into `dir`; throws IoError.
std::filesystem::path write_report(const RunReport& report, const std::filesystem::path& dir);

// One fixed-width line per check: "PASS name value=... reference=... tol=...".
std::string format_check(const CheckResult& c);

}  // namespace fbsvie
