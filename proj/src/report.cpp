#include "fbsvie/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "fbsvie/csv.hpp"
#include "fbsvie/error.hpp"

namespace fbsvie {

bool RunReport::all_pass() const {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

namespace {

// JSON has no NaN; non-finite numbers are written as strings.
nlohmann::json real(double v) {
  if (std::isfinite(v)) return v;
  return format_real(v);
}

}  // namespace

nlohmann::json report_to_json(const RunReport& r) {
  nlohmann::json doc;
  doc["subcommand"] = r.subcommand;
  doc["scenario_hash"] = r.scenario_hash;
  doc["seed"] = r.seed;
  doc["wall_seconds"] = r.wall_seconds;
  doc["exit_code"] = r.exit_code;
  if (!r.error.empty()) doc["error"] = r.error;
  doc["outputs"] = nlohmann::json::array();
  for (const auto& o : r.outputs) {
    nlohmann::json e{{"name", o.name}, {"path", o.path}};
    if (o.nan_count > 0) e["nan_values"] = o.nan_count;
    doc["outputs"].push_back(e);
  }
  doc["checks"] = nlohmann::json::array();
  for (const auto& c : r.checks) {
    nlohmann::json e{{"name", c.name},
                     {"value", real(c.value)},
                     {"reference", real(c.reference)},
                     {"tolerance", real(c.tolerance)},
                     {"pass", c.pass}};
    if (!c.detail.empty()) e["detail"] = c.detail;
    doc["checks"].push_back(e);
  }
  return doc;
}

std::filesystem::path write_report(const RunReport& report, const std::filesystem::path& dir) {
  const auto path = dir / "report.json";
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f << report_to_json(report).dump(2) << '\n';
  if (!f) throw IoError("write to '" + path.string() + "' failed");
  return path;
}

std::string format_check(const CheckResult& c) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s %s  value=%.6g reference=%.6g tol=%.3g", c.pass ? "PASS" : "FAIL",
                c.name.c_str(), c.value, c.reference, c.tolerance);
  std::string line = buf;
  if (!c.detail.empty()) line += "  (" + c.detail + ")";
  return line;
}

}  // namespace fbsvie
