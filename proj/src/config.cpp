#include "fbsvie/config.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "fbsvie/error.hpp"

namespace fbsvie {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!allowed.count(key)) throw ValidationError("unknown field '" + key + "' in " + where);
  }
}

double number(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) throw ValidationError("missing field '" + key + "' in " + where);
  if (!obj[key].is_number()) throw ValidationError("field '" + key + "' in " + where + " must be a number");
  return obj[key].get<double>();
}

std::uint64_t unsigned_field(const json& obj, const std::string& key, const std::string& where) {
  const double v = number(obj, key, where);
  if (v < 0 || v != static_cast<double>(static_cast<std::uint64_t>(v)))
    throw ValidationError("field '" + key + "' in " + where + " must be a non-negative integer");
  return obj[key].is_number_unsigned() ? obj[key].get<std::uint64_t>() : static_cast<std::uint64_t>(v);
}

Kernel parse_kernel(const json& k, const TimeGrid& grid, const std::string& where) {
  if (k.is_number()) return Kernel::constant(k.get<double>());
  if (!k.is_object()) throw ValidationError(where + " must be a number or an object");
  if (k.contains("value") && k.contains("table"))
    throw ValidationError(where + " is ambiguous: both 'value' and 'table' are given");
  std::string kind;
  if (k.contains("kind")) {
    if (!k["kind"].is_string()) throw ValidationError(where + ".kind must be a string");
    kind = k["kind"].get<std::string>();
  } else if (k.contains("table")) {
    kind = "table";
  } else if (k.contains("amplitude")) {
    kind = "exp_decay";
  } else {
    kind = "constant";
  }
  if (kind == "constant") {
    reject_unknown(k, {"kind", "value"}, where);
    return Kernel::constant(number(k, "value", where));
  }
  if (kind == "exp_decay") {
    reject_unknown(k, {"kind", "amplitude", "rate"}, where);
    return Kernel::exp_decay(number(k, "amplitude", where), number(k, "rate", where));
  }
  if (kind == "table") {
    reject_unknown(k, {"kind", "n", "table"}, where);
    const auto n = unsigned_field(k, "n", where);
    if (n != grid.steps())
      throw ValidationError(where + ".n = " + std::to_string(n) + " does not match the grid (" +
                            std::to_string(grid.steps()) + " steps)");
    if (!k["table"].is_array()) throw ValidationError(where + ".table must be an array");
    std::vector<double> values;
    for (const auto& v : k["table"]) {
      if (!v.is_number()) throw ValidationError(where + ".table entries must be numbers");
      values.push_back(v.get<double>());
    }
    return Kernel::table(grid, std::move(values));
  }
  throw ValidationError("unknown kernel kind '" + kind + "' in " + where);
}

json kernel_to_json(const Kernel& k) {
  switch (k.kind()) {
    case Kernel::Kind::constant:
      return {{"kind", "constant"}, {"value", k.value()}};
    case Kernel::Kind::exp_decay:
      return {{"kind", "exp_decay"}, {"amplitude", k.amplitude()}, {"rate", k.rate()}};
    case Kernel::Kind::table:
      return {{"kind", "table"}, {"n", k.table_grid().steps()}, {"table", k.table_values()}};
  }
  return {};
}

}  // namespace

ScenarioSpec parse_config(const json& doc) {
  if (!doc.is_object()) throw ValidationError("scenario must be a JSON object");
  reject_unknown(doc,
                 {"grid", "initial", "alpha", "beta", "levy", "pi", "gamma", "filtration", "gamma_sign_convention",
                  "mc", "regression", "name", "description"},
                 "scenario");
  ScenarioSpec s;
  if (!doc.contains("grid")) throw ValidationError("missing field 'grid'");
  const json& g = doc["grid"];
  if (!g.is_object()) throw ValidationError("field 'grid' must be an object");
  reject_unknown(g, {"horizon", "n_steps"}, "grid");
  const double n_raw = number(g, "n_steps", "grid");
  if (n_raw != static_cast<double>(static_cast<long long>(n_raw)))
    throw ValidationError("field 'n_steps' in grid must be an integer");
  s.grid = build_time_grid(number(g, "horizon", "grid"), static_cast<long long>(n_raw));

  if (doc.contains("initial")) s.initial = number(doc, "initial", "scenario");
  s.alpha = doc.contains("alpha") ? parse_kernel(doc["alpha"], s.grid, "alpha") : Kernel::constant(0.0);
  s.beta = doc.contains("beta") ? parse_kernel(doc["beta"], s.grid, "beta") : Kernel::constant(0.0);

  std::vector<LevyAtom> atoms;
  if (doc.contains("levy")) {
    if (!doc["levy"].is_array()) throw ValidationError("field 'levy' must be an array of [size, weight] pairs");
    for (const auto& a : doc["levy"]) {
      if (!a.is_array() || a.size() != 2 || !a[0].is_number() || !a[1].is_number())
        throw ValidationError("each levy atom must be a [size, weight] pair");
      atoms.push_back({a[0].get<double>(), a[1].get<double>()});
    }
  }
  s.levy = LevyMeasure(atoms);
  if (doc.contains("pi")) {
    if (!doc["pi"].is_array()) throw ValidationError("field 'pi' must be an array with one kernel per atom");
    if (doc["pi"].size() != atoms.size())
      throw ValidationError("field 'pi' has " + std::to_string(doc["pi"].size()) + " kernels for " +
                            std::to_string(atoms.size()) + " atoms");
    for (std::size_t m = 0; m < atoms.size(); ++m)
      s.pi.push_back(parse_kernel(doc["pi"][m], s.grid, "pi[" + std::to_string(m) + "]"));
  } else {
    for (const auto& a : atoms) s.pi.push_back(Kernel::constant(a.size));
  }

  if (doc.contains("gamma")) {
    const json& gm = doc["gamma"];
    s.gamma.clear();
    if (gm.is_number()) {
      s.gamma.push_back(gm.get<double>());
    } else if (gm.is_array()) {
      for (const auto& v : gm) {
        if (!v.is_number()) throw ValidationError("gamma entries must be numbers");
        s.gamma.push_back(v.get<double>());
      }
    } else {
      throw ValidationError("field 'gamma' must be a number or an array");
    }
  }

  if (doc.contains("filtration")) {
    const json& f = doc["filtration"];
    std::string mode;
    double delay = 0.0;
    if (f.is_string()) {
      mode = f.get<std::string>();
    } else if (f.is_object()) {
      reject_unknown(f, {"mode", "delay"}, "filtration");
      if (!f.contains("mode") || !f["mode"].is_string()) throw ValidationError("missing field 'mode' in filtration");
      mode = f["mode"].get<std::string>();
      if (f.contains("delay")) delay = number(f, "delay", "filtration");
    } else {
      throw ValidationError("field 'filtration' must be a string or an object");
    }
    if (mode == "full") {
      s.filtration = FiltrationMode::full();
    } else if (mode == "trivial") {
      s.filtration = FiltrationMode::trivial();
    } else if (mode == "delay") {
      s.filtration = FiltrationMode::delayed(delay);
    } else {
      throw ValidationError("unknown filtration mode '" + mode + "'");
    }
  }

  if (doc.contains("gamma_sign_convention")) {
    const json& c = doc["gamma_sign_convention"];
    const std::string v = c.is_string() ? c.get<std::string>() : "";
    if (v == "discounting") {
      s.convention = GammaConvention::discounting;
    } else if (v == "paper_ode") {
      s.convention = GammaConvention::paper_ode;
    } else {
      throw ValidationError("gamma_sign_convention must be 'discounting' or 'paper_ode'");
    }
  }

  if (doc.contains("mc")) {
    const json& mc = doc["mc"];
    if (!mc.is_object()) throw ValidationError("field 'mc' must be an object");
    reject_unknown(mc, {"n_paths", "seed", "n_blocks"}, "mc");
    if (mc.contains("n_paths")) s.mc.n_paths = unsigned_field(mc, "n_paths", "mc");
    if (mc.contains("seed")) s.mc.seed = unsigned_field(mc, "seed", "mc");
    if (mc.contains("n_blocks")) s.mc.n_blocks = unsigned_field(mc, "n_blocks", "mc");
  }

  if (doc.contains("regression")) {
    const json& r = doc["regression"];
    if (!r.is_object()) throw ValidationError("field 'regression' must be an object");
    reject_unknown(r, {"degree", "state_variables"}, "regression");
    if (r.contains("degree")) s.regression.degree = static_cast<int>(unsigned_field(r, "degree", "regression"));
    if (r.contains("state_variables")) {
      if (!r["state_variables"].is_array()) throw ValidationError("regression.state_variables must be an array");
      s.regression.state_variables.clear();
      for (const auto& v : r["state_variables"]) {
        const std::string name = v.is_string() ? v.get<std::string>() : "";
        if (name == "x") {
          s.regression.state_variables.push_back(StateVariable::x);
        } else if (name == "log_x") {
          s.regression.state_variables.push_back(StateVariable::log_x);
        } else {
          throw ValidationError("unknown state variable in regression.state_variables");
        }
      }
    }
  }
  return validate_scenario(std::move(s));
}

ScenarioSpec parse_config_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("invalid JSON: ") + e.what());
  }
  return parse_config(doc);
}

ScenarioSpec load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read config '" + path.string() + "'");
  std::stringstream buf;
  buf << f.rdbuf();
  try {
    return parse_config_text(buf.str());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

json scenario_to_json(const ScenarioSpec& spec) {
  json doc;
  doc["grid"] = {{"horizon", spec.grid.horizon()}, {"n_steps", spec.grid.steps()}};
  doc["initial"] = spec.initial;
  doc["alpha"] = kernel_to_json(spec.alpha);
  doc["beta"] = kernel_to_json(spec.beta);
  doc["levy"] = json::array();
  for (const auto& a : spec.levy.atoms()) doc["levy"].push_back({a.size, a.weight});
  doc["pi"] = json::array();
  for (const auto& k : spec.pi) doc["pi"].push_back(kernel_to_json(k));
  doc["gamma"] = spec.gamma;
  switch (spec.filtration.mode) {
    case FiltrationMode::Mode::full:
      doc["filtration"] = {{"mode", "full"}};
      break;
    case FiltrationMode::Mode::trivial:
      doc["filtration"] = {{"mode", "trivial"}};
      break;
    case FiltrationMode::Mode::delay:
      doc["filtration"] = {{"mode", "delay"}, {"delay", spec.filtration.delay}};
      break;
  }
  doc["gamma_sign_convention"] = spec.convention == GammaConvention::discounting ? "discounting" : "paper_ode";
  doc["mc"] = {{"n_paths", spec.mc.n_paths}, {"seed", spec.mc.seed}, {"n_blocks", spec.mc.n_blocks}};
  json vars = json::array();
  for (auto v : spec.regression.state_variables) vars.push_back(v == StateVariable::x ? "x" : "log_x");
  doc["regression"] = {{"degree", spec.regression.degree}, {"state_variables", vars}};
  return doc;
}

std::string scenario_hash(const ScenarioSpec& spec) {
  const std::string text = scenario_to_json(spec).dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace fbsvie
