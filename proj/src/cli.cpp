#include "fbsvie/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "fbsvie/acceptance.hpp"
#include "fbsvie/bsde.hpp"
#include "fbsvie/bsvie.hpp"
#include "fbsvie/config.hpp"
#include "fbsvie/control.hpp"
#include "fbsvie/csv.hpp"
#include "fbsvie/error.hpp"
#include "fbsvie/fsvie.hpp"
#include "fbsvie/malliavin.hpp"
#include "fbsvie/report.hpp"

namespace fbsvie {

namespace fs = std::filesystem;

ControlFn parse_control(const std::string& text) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  std::optional<double> value;
  if (colon != std::string::npos) {
    try {
      std::size_t used = 0;
      value = std::stod(text.substr(colon + 1), &used);
      if (used != text.size() - colon - 1) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ValidationError("control '" + text + "': value is not a number");
    }
  }
  if (kind == "cstar" && !value) return ControlFn::theta_scaled_cstar(1.0);
  if (kind == "constant" && value) return ControlFn::constant(*value);
  if (kind == "theta" && value) return ControlFn::theta_scaled_cstar(*value);
  if (kind == "shift" && value) return ControlFn::cstar_plus_shift(*value);
  throw ValidationError("control '" + text + "' is not one of constant:V, cstar, theta:V, shift:V");
}

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> paths;
  std::string out = ".";
  std::string convention;
};

void add_common(CLI::App* sub, CommonOptions& o, bool config_required) {
  auto* cfg = sub->add_option("--config", o.config, "scenario JSON file");
  if (config_required) cfg->required();
  sub->add_option("--seed", o.seed, "override the Monte Carlo seed");
  sub->add_option("--paths", o.paths, "override the number of paths")->check(CLI::PositiveNumber);
  sub->add_option("--out", o.out, "output directory")->capture_default_str();
  sub->add_option("--convention", o.convention, "gamma sign convention")
      ->check(CLI::IsMember({"discounting", "paper_ode"}));
}

ScenarioSpec scenario_from(const CommonOptions& o) {
  ScenarioSpec s = o.config.empty() ? reference_scenario() : load_config(o.config);
  if (o.seed) s.mc.seed = *o.seed;
  if (o.paths) s.mc.n_paths = *o.paths;
  if (o.convention == "discounting") s.convention = GammaConvention::discounting;
  if (o.convention == "paper_ode") s.convention = GammaConvention::paper_ode;
  return validate_scenario(std::move(s));
}

class Session {
 public:
  Session(std::string subcommand, const CommonOptions& o, std::ostream& out)
      : opts_(o), out_(out), start_(std::chrono::steady_clock::now()) {
    report_.subcommand = std::move(subcommand);
  }

  RunReport& report() { return report_; }

  void set_scenario(const ScenarioSpec& s) {
    report_.scenario_hash = scenario_hash(s);
    report_.seed = s.mc.seed;
  }

  void emit(const std::string& name, const CsvTable& table) {
    fs::create_directories(opts_.out);
    const fs::path path = fs::path(opts_.out) / name;
    write_csv(table, path);
    report_.outputs.push_back({name, path.string(), table.nan_count()});
    if (table.nan_count() > 0) out_ << "note: " << name << " contains " << table.nan_count() << " nan values\n";
  }

  void check(CheckResult c) {
    out_ << format_check(c) << '\n';
    report_.add_check(std::move(c));
  }

  int finish(int code) {
    report_.exit_code = code;
    report_.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    try {
      fs::create_directories(opts_.out);
      write_report(report_, opts_.out);
    } catch (const std::exception& e) {
      if (code == exit_ok) code = exit_validation;
      out_ << "could not write report: " << e.what() << '\n';
    }
    return code;
  }

  int finish_checks() { return finish(report_.all_pass() ? exit_ok : exit_check_failed); }

 private:
  CommonOptions opts_;
  std::ostream& out_;
  std::chrono::steady_clock::time_point start_;
  RunReport report_;
};

double oracle_or_nan(const ScenarioSpec& spec, const ControlFn& c) {
  return spec.all_kernels_t_independent() ? log_utility_oracle(spec, c) : std::nan("");
}

int simulate_forward(Session& session, const ScenarioSpec& spec, const ControlFn& control) {
  const NoiseBundle noise = generate_noise(spec);
  const ForwardPaths paths = simulate_fsvie(spec, noise, control);
  const CurveSummary curve = summarize_paths(paths);
  const auto exact_mean = forward_mean_oracle(spec, control, QuadratureRule::left_point);
  const auto continuous_mean = forward_mean_oracle(spec, control, QuadratureRule::trapezoid);
  session.emit("forward.csv", CsvTable::from_columns({{"t", curve.t},
                                                      {"mean", curve.mean},
                                                      {"se", curve.se},
                                                      {"q05", curve.q05},
                                                      {"q50", curve.q50},
                                                      {"q95", curve.q95},
                                                      {"scheme_mean", exact_mean},
                                                      {"oracle_mean", continuous_mean}}));
  const std::size_t n = spec.grid.steps();
  CheckResult c;
  c.name = "mean X(T) against the expectation of the scheme";
  c.value = curve.mean[n];
  c.reference = exact_mean[n];
  c.tolerance = 3.0 * curve.se[n];
  c.pass = std::abs(c.value - c.reference) <= c.tolerance + 1e-12;
  session.check(c);
  return session.finish_checks();
}

int solve_bsvie_cmd(Session& session, const ScenarioSpec& spec, const std::string& which) {
  const NoiseBundle noise = generate_noise(spec.grid, {}, spec.mc.n_paths, spec.mc.seed, spec.mc.n_blocks);
  const NoiseLevels lv = accumulate_levels(noise);
  const std::size_t P = noise.n_paths();
  const TimeGrid& g = spec.grid;
  std::vector<double> zeta(g.size() * P, 1.0);
  BsvieDriver driver = BsvieDriver::zero();
  if (which == "resolvent") {
    driver.fn = [](const BsvieDriverArgs& a) { return a.y; };
    driver.uses_y = true;
    driver.lipschitz = 1.0;
  } else {
    const auto bt = lv.brownian_at(g.steps());
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t p = 0; p < P; ++p) zeta[i * P + p] = (which == "sine" ? 1.0 : 0.0) + g.node(i) * bt[p];
    if (which == "sine") {
      driver.fn = [](const BsvieDriverArgs& a) { return std::sin(a.y); };
      driver.uses_y = true;
      driver.lipschitz = 1.0;
    }
  }
  BsvieConfig cfg;
  cfg.filtration = spec.filtration.effective() == FiltrationMode::Mode::trivial ? FiltrationMode::full()
                                                                               : spec.filtration;
  cfg.degree = spec.regression.degree;
  const BsvieSolution sol = solve_bsvie(zeta, driver, noise, noise_state_provider(noise), cfg);

  std::vector<double> t, mean, se;
  for (std::size_t i = 0; i <= g.steps(); ++i) {
    const Estimate e = sample_estimate(sol.triple.y_node(i));
    t.push_back(g.node(i));
    mean.push_back(e.value);
    se.push_back(e.se);
  }
  session.emit("bsvie_y.csv", CsvTable::from_columns({{"t", t}, {"mean_y", mean}, {"se_y", se}}));
  CsvTable log;
  log.header = {"pass", "distance", "norm"};
  for (std::size_t k = 0; k < sol.distances.size(); ++k)
    log.add_row({static_cast<std::int64_t>(k + 1), sol.distances[k], sol.norms[k]});
  session.emit("bsvie_iterations.csv", log);

  CheckResult c;
  if (which == "resolvent") {
    c.name = "resolvent Y(0) against exp(T)";
    c.value = mean[0];
    c.reference = std::exp(g.horizon());
    c.tolerance = 0.01 * c.reference;
    c.pass = std::abs(c.value - c.reference) <= c.tolerance;
  } else if (which == "martingale") {
    c.name = "time-regularity norm of Z against T^2/2";
    c.value = z_time_derivative_norm(sol.triple);
    c.reference = 0.5 * g.horizon() * g.horizon();
    c.tolerance = 0.1 * c.reference;
    c.pass = std::abs(c.value - c.reference) <= c.tolerance;
  } else {
    c.name = "Picard iteration converged";
    c.value = static_cast<double>(sol.iterations);
    c.reference = static_cast<double>(cfg.max_iter);
    c.tolerance = 0.0;
    c.pass = sol.converged;
  }
  session.check(c);
  return session.finish_checks();
}

int evaluate_utility(Session& session, const ScenarioSpec& spec, const ControlFn& control, std::size_t levels) {
  const NoiseBundle noise = extrapolation_noise(spec, levels);
  PerformanceSpec perf;
  perf.levels = levels;
  const PerformanceResult res = performance(spec, control, noise, perf);
  const double oracle = oracle_or_nan(spec, control);
  CsvTable t;
  t.header = {"levels", "J_mc", "J_se", "J_oracle"};
  t.add_row({static_cast<std::int64_t>(levels), res.j.value, res.j.se, oracle});
  session.emit("utility.csv", t);
  if (!std::isnan(oracle)) {
    CheckResult c;
    c.name = "Monte Carlo J against the log-utility oracle";
    c.value = res.j.value;
    c.reference = oracle;
    c.tolerance = 3.0 * res.j.se;
    c.pass = std::abs(c.value - c.reference) <= c.tolerance + 1e-12;
    session.check(c);
  }
  return session.finish_checks();
}

int optimal_consumption_cmd(Session& session, const ScenarioSpec& spec) {
  const auto lam = lambda_adjoint(spec.gamma, spec.grid, spec.convention);
  const auto big_p = adjoint_product(spec.gamma, spec.grid, spec.convention);
  auto cs = cstar_values(spec.gamma, spec.grid, spec.convention);
  cs.push_back(std::nan(""));  // c* is not evaluated at T
  session.emit("c_star.csv", CsvTable::from_columns(
                                 {{"t", spec.grid.nodes()}, {"lambda", lam}, {"P", big_p}, {"c_star", cs}}));
  double worst = 0.0;
  for (std::size_t i = 0; i < spec.grid.steps(); ++i) worst = std::max(worst, std::abs(cs[i] * big_p[i] - lam[i]));
  CheckResult c;
  c.name = "first-order condition c* P = lambda";
  c.value = worst;
  c.reference = 0.0;
  c.tolerance = 1e-12;
  c.pass = worst <= 1e-12;
  session.check(c);
  return session.finish_checks();
}

int check_mp(Session& session, const ScenarioSpec& spec, const ControlFn& base) {
  const NoiseBundle fine = extrapolation_noise(spec, 3);
  const NoiseBundle noise2 = coarsen(fine, 2);
  PerformanceSpec perf;
  perf.levels = 2;
  const std::vector<double> thetas{0.7, 0.85, 1.0, 1.15, 1.3};
  CsvTable theta_table;
  theta_table.header = {"theta", "J_mc", "J_se", "J_oracle"};
  std::vector<std::vector<double>> per_path;
  for (double th : thetas) {
    const auto c = ControlFn::theta_scaled_cstar(th);
    per_path.push_back(extrapolated_performance_paths(spec, c, noise2, perf));
    const Estimate e = sample_estimate(per_path.back());
    theta_table.add_row({th, e.value, e.se, oracle_or_nan(spec, c)});
  }
  session.emit("theta_scan.csv", theta_table);
  for (std::size_t k = 0; k < thetas.size(); ++k) {
    if (thetas[k] == 1.0) continue;
    std::vector<double> diff(per_path[2].size());
    for (std::size_t p = 0; p < diff.size(); ++p) diff[p] = per_path[2][p] - per_path[k][p];
    const Estimate d = sample_estimate(diff);
    CheckResult c;
    c.name = "J(c*) - J(" + std::to_string(thetas[k]).substr(0, 4) + " c*) > 0";
    c.value = d.value;
    c.reference = 0.0;
    c.tolerance = 3.0 * d.se;
    c.pass = d.value > -3.0 * d.se;
    session.check(c);
  }

  CsvTable bumps;
  bumps.header = {"bump_start", "dJ_dtheta", "se"};
  const double T = spec.grid.horizon();
  for (double start : {0.1 * T, 0.4 * T, 0.7 * T}) {
    const auto d = gateaux_derivative(spec, base, {start, 0.1 * T, 1.0}, fine, 1e-3, 3).j;
    bumps.add_row({start, d.value, d.se});
    CheckResult c;
    c.name = "Gateaux derivative on [" + std::to_string(start).substr(0, 4) + ", +0.1T)";
    c.value = d.value;
    c.reference = 0.0;
    c.tolerance = 3.0 * d.se;
    c.pass = std::abs(d.value) <= c.tolerance + 1e-12;
    session.check(c);
  }
  session.emit("gateaux.csv", bumps);
  return session.finish_checks();
}

int verify_duality_cmd(Session& session, std::size_t paths, std::uint64_t seed) {
  session.report().seed = seed;
  const auto rows = builtin_duality_checks(paths, seed);
  CsvTable t;
  t.header = {"name", "expected", "lhs", "se_lhs", "rhs", "se_rhs", "se_diff", "z"};
  for (const auto& r : rows) {
    t.add_row({r.name, r.expected, r.result.lhs, r.result.se_lhs, r.result.rhs, r.result.se_rhs, r.result.se_diff,
               r.z_score()});
    CheckResult c;
    c.name = r.name;
    c.value = r.result.lhs - r.result.rhs;
    c.reference = 0.0;
    c.tolerance = 3.0 * r.result.se_diff;
    c.pass = r.pass();
    session.check(c);
  }
  session.emit("duality.csv", t);
  return session.finish_checks();
}

int run_acceptance_cmd(Session& session, const ScenarioSpec& spec, const std::vector<int>& only) {
  AcceptanceOptions opts;
  opts.scenario = spec;
  opts.n_paths = spec.mc.n_paths;
  opts.seed = spec.mc.seed;
  opts.n_blocks = spec.mc.n_blocks;
  AcceptanceSuite suite(opts);
  CsvTable t;
  t.header = {"criterion", "pass", "value", "reference", "tolerance", "detail"};
  const auto results = suite.run_all(only, [&](const CheckResult& c) { session.check(c); });
  for (const auto& c : results)
    t.add_row({c.name, std::string(c.pass ? "PASS" : "FAIL"), c.value, c.reference, c.tolerance, c.detail});
  session.emit("acceptance.csv", t);
  return session.finish_checks();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Forward-backward stochastic Volterra equations with jumps: solvers and checks", "fbsvie"};
  app.require_subcommand(1);
  CommonOptions o;
  std::string control = "constant:1";
  std::string bsvie_case = "resolvent";
  std::size_t levels = 2;
  std::vector<int> only;

  auto* sim = app.add_subcommand("simulate-forward", "simulate X and write mean and quantile curves");
  add_common(sim, o, true);
  sim->add_option("--control", control, "consumption control")->capture_default_str();
  auto* bsv = app.add_subcommand("solve-bsvie", "Picard solver on a built-in BSVIE case");
  add_common(bsv, o, true);
  bsv->add_option("--case", bsvie_case, "resolvent, martingale or sine")
      ->check(CLI::IsMember({"resolvent", "martingale", "sine"}))
      ->capture_default_str();
  auto* util = app.add_subcommand("evaluate-utility", "Monte Carlo J(c) against the oracle");
  add_common(util, o, true);
  util->add_option("--control", control, "consumption control")->capture_default_str();
  util->add_option("--levels", levels, "Richardson levels")->check(CLI::Range(1, 4))->capture_default_str();
  auto* opt = app.add_subcommand("optimal-consumption", "closed-form c*, lambda and P");
  add_common(opt, o, true);
  auto* mp = app.add_subcommand("check-mp", "Gateaux derivatives and the theta scan around a control");
  add_common(mp, o, true);
  mp->add_option("--control", control, "base control")->default_val("cstar");
  auto* dual = app.add_subcommand("verify-duality", "built-in duality identities");
  add_common(dual, o, false);
  auto* acc = app.add_subcommand("run-acceptance", "the full acceptance suite");
  add_common(acc, o, true);
  acc->add_option("--only", only, "criteria to run (1-10)")->check(CLI::Range(1, kCriterionCount));

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return exit_validation;
  }

  CLI::App* chosen = app.get_subcommands().front();
  Session session(chosen->get_name(), o, out);
  try {
    if (chosen == dual) {
      const std::size_t paths = o.paths.value_or(200000);
      const std::uint64_t seed = o.seed.value_or(7);
      return verify_duality_cmd(session, paths, seed);
    }
    const ScenarioSpec spec = scenario_from(o);
    session.set_scenario(spec);
    if (chosen == sim) return simulate_forward(session, spec, parse_control(control));
    if (chosen == bsv) return solve_bsvie_cmd(session, spec, bsvie_case);
    if (chosen == util) return evaluate_utility(session, spec, parse_control(control), levels);
    if (chosen == opt) return optimal_consumption_cmd(session, spec);
    if (chosen == mp) return check_mp(session, spec, parse_control(control));
    if (chosen == acc) return run_acceptance_cmd(session, spec, only);
  } catch (const ConvergenceError& e) {
    err << "error: " << e.what() << '\n';
    session.report().error = e.what();
    return session.finish(exit_no_convergence);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    session.report().error = e.what();
    return session.finish(exit_validation);
  } catch (const PositivityError& e) {
    err << "error: " << e.what() << '\n';
    session.report().error = e.what();
    return session.finish(exit_validation);
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    session.report().error = e.what();
    return session.finish(exit_validation);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    session.report().error = e.what();
    return session.finish(exit_check_failed);
  }
  return exit_validation;
}

}  // namespace fbsvie
