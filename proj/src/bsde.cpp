#include "fbsvie/bsde.hpp"

#include <cmath>
#include <string>

#include "fbsvie/parallel.hpp"

namespace fbsvie {

StateProvider noise_state_provider(const NoiseBundle& noise) {
  auto levels = std::make_shared<NoiseLevels>(accumulate_levels(noise));
  return [levels](std::size_t node) {
    const auto P = static_cast<Eigen::Index>(levels->n_paths);
    const auto M = static_cast<Eigen::Index>(levels->n_atoms);
    Eigen::MatrixXd s(P, 1 + M);
    const auto b = levels->brownian_at(node);
    for (Eigen::Index p = 0; p < P; ++p) s(p, 0) = b[static_cast<std::size_t>(p)];
    for (Eigen::Index m = 0; m < M; ++m) {
      const auto c = levels->counts_at(node, static_cast<std::size_t>(m));
      for (Eigen::Index p = 0; p < P; ++p) s(p, 1 + m) = c[static_cast<std::size_t>(p)];
    }
    return s;
  };
}

StateProvider forward_state_provider(const ForwardPaths& paths, const std::vector<StateVariable>& vars) {
  if (vars.empty()) throw ValidationError("at least one regression state variable is required");
  return [&paths, vars](std::size_t node) {
    const auto P = static_cast<Eigen::Index>(paths.n_paths);
    Eigen::MatrixXd s(P, static_cast<Eigen::Index>(vars.size()));
    const auto x = paths.node(node);
    for (std::size_t v = 0; v < vars.size(); ++v)
      for (Eigen::Index p = 0; p < P; ++p) {
        const double xv = x[static_cast<std::size_t>(p)];
        if (vars[v] == StateVariable::x) {
          s(p, static_cast<Eigen::Index>(v)) = xv;
        } else {
          if (!(xv > 0.0)) throw DomainError("ln X regressor needs X > 0 at node " + std::to_string(node));
          s(p, static_cast<Eigen::Index>(v)) = std::log(xv);
        }
      }
    return s;
  };
}

BsdeSolution solve_bsde(std::span<const double> terminal, const Driver& driver, const NoiseBundle& noise,
                        const StateProvider& states, const BsdeConfig& config, std::size_t start) {
  const TimeGrid& g = noise.grid();
  const std::size_t n = g.steps();
  const std::size_t P = noise.n_paths();
  const std::size_t M = noise.n_atoms();
  const double dt = g.dt();
  if (terminal.size() != P)
    throw ValidationError("terminal has " + std::to_string(terminal.size()) + " values for " + std::to_string(P) +
                          " paths");
  if (start > n) throw ValidationError("start node beyond the grid");
  for (double v : terminal)
    if (!std::isfinite(v)) throw ValidationError("terminal value must be finite");
  const bool trivial = config.filtration.effective() == FiltrationMode::Mode::trivial;

  BsdeSolution sol;
  sol.grid = g;
  sol.n_paths = P;
  sol.n_atoms = M;
  sol.start = start;
  sol.y.assign((n + 1) * P, 0.0);
  sol.z.assign(n * P, 0.0);
  sol.k.assign(n * M * P, 0.0);
  sol.r_squared.assign(n, 1.0);
  sol.pathwise.assign(terminal.begin(), terminal.end());
  std::copy(terminal.begin(), terminal.end(), sol.y.begin() + static_cast<std::ptrdiff_t>(n * P));

  std::vector<double> target(P), gvals(P), innovation(P);
  for (std::size_t i = n; i-- > start;) {
    try {
      const std::size_t at = config.filtration.conditioning_node(g, i);
      Projector proj = trivial ? Projector(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(P), 0), 0)
                               : Projector(states(at), config.degree);
      const double* next = sol.y.data() + (i + 1) * P;
      if (config.needs_z || (config.needs_k && M > 0)) {
        // the martingale increment Y_{i+1} - E[Y_{i+1} | G_i] carries all of Z and K
        proj.apply(proj.fit(std::span<const double>(next, P)), innovation);
        for (std::size_t p = 0; p < P; ++p) innovation[p] = next[p] - innovation[p];
      }
      if (config.needs_z) {
        const auto db = noise.increments(i);
        for (std::size_t p = 0; p < P; ++p) target[p] = innovation[p] * db[p] / dt;
        proj.apply(proj.fit(target), std::span<double>(sol.z.data() + i * P, P));
      }
      if (config.needs_k)
        for (std::size_t m = 0; m < M; ++m) {
          const double wdt = noise.levy().atoms()[m].weight * dt;
          const auto cnt = noise.counts(i, m);
          for (std::size_t p = 0; p < P; ++p)
            target[p] = innovation[p] * (static_cast<double>(cnt[p]) - wdt) / wdt;
          proj.apply(proj.fit(target), std::span<double>(sol.k.data() + (i * M + m) * P, P));
        }
      const double t = g.node(i);
      parallel_for(noise.n_blocks(), [&](std::size_t block) {
        const auto [first, last] = noise.block_range(block);
        std::vector<double> kbuf(M);
        for (std::size_t p = first; p < last; ++p) {
          for (std::size_t m = 0; m < M; ++m) kbuf[m] = sol.k[(i * M + m) * P + p];
          gvals[p] = driver(DriverArgs{i, t, p, next[p], sol.z[i * P + p], kbuf});
        }
      });
      for (std::size_t p = 0; p < P; ++p) {
        if (!std::isfinite(gvals[p]))
          throw DomainError("driver returned a non-finite value on path " + std::to_string(p));
        target[p] = next[p] + gvals[p] * dt;
        sol.pathwise[p] += gvals[p] * dt;
      }
      const auto fit = proj.fit(target);
      sol.r_squared[i] = fit.diagnostics().r_squared;
      proj.apply(fit, std::span<double>(sol.y.data() + i * P, P));
    } catch (const RegressionError& e) {
      throw RegressionError("BSDE step " + std::to_string(i) + ": " + e.what(), e.condition_number());
    }
  }
  const auto y_start = sol.y_node(start);
  double mean = 0.0;
  for (double v : y_start) mean += v;
  sol.y0 = mean / static_cast<double>(P);
  sol.se = sample_estimate(sol.pathwise).se;
  return sol;
}

namespace {

Driver utility_driver(const ScenarioSpec& spec, const std::vector<double>& c, const ForwardPaths& paths) {
  const double sign = spec.convention == GammaConvention::discounting ? -1.0 : 1.0;
  const auto gamma = gamma_on_grid(spec.gamma, spec.grid);
  return [&paths, c, gamma, sign](const DriverArgs& a) {
    const double x = paths.at(a.path, a.step);
    if (!(x > 0.0))
      throw DomainError("utility needs X > 0; path " + std::to_string(a.path) + " node " + std::to_string(a.step) +
                        " has X = " + std::to_string(x));
    return std::log(c[a.step] * x) + sign * gamma[a.step] * a.y;
  };
}

BsdeSolution utility_solution(const ScenarioSpec& spec, const ControlFn& control, const ForwardPaths& paths,
                              const NoiseBundle& noise) {
  if (!(paths.grid == spec.grid) || paths.n_paths != noise.n_paths())
    throw ValidationError("forward paths do not match the scenario and noise");
  const auto c = control.values(spec);
  const std::vector<double> terminal(noise.n_paths(), 0.0);
  BsdeConfig cfg;
  cfg.degree = spec.regression.degree;
  cfg.needs_z = false;
  cfg.needs_k = false;
  return solve_bsde(terminal, utility_driver(spec, c, paths), noise,
                    forward_state_provider(paths, spec.regression.state_variables), cfg);
}

}  // namespace

Estimate recursive_utility(const ScenarioSpec& spec, const ControlFn& control, const ForwardPaths& paths,
                           const NoiseBundle& noise) {
  const auto sol = utility_solution(spec, control, paths, noise);
  return {sol.y0, sol.se};
}

std::vector<double> recursive_utility_paths(const ScenarioSpec& spec, const ControlFn& control,
                                            const ForwardPaths& paths, const NoiseBundle& noise) {
  return utility_solution(spec, control, paths, noise).pathwise;
}

std::vector<double> utility_closed_form(const ScenarioSpec& spec, const ControlFn& control,
                                        const ForwardPaths& paths) {
  const auto c = control.values(spec);
  const auto lambda = lambda_adjoint(spec.gamma, spec.grid, spec.convention);
  const double dt = spec.grid.dt();
  std::vector<double> out(paths.n_paths, 0.0);
  for (std::size_t i = 0; i < spec.grid.steps(); ++i) {
    const auto x = paths.node(i);
    for (std::size_t p = 0; p < paths.n_paths; ++p) {
      if (!(x[p] > 0.0)) throw DomainError("utility needs X > 0 at node " + std::to_string(i));
      out[p] += lambda[i] * std::log(c[i] * x[p]) * dt;
    }
  }
  return out;
}

BsdeCurve summarize_bsde(const BsdeSolution& sol) {
  BsdeCurve c;
  const std::size_t n = sol.grid.steps();
  const std::size_t P = sol.n_paths;
  c.mean_k.assign(sol.n_atoms, {});
  for (std::size_t i = sol.start; i <= n; ++i) {
    const auto e = sample_estimate(sol.y_node(i));
    c.t.push_back(sol.grid.node(i));
    c.mean_y.push_back(e.value);
    c.se_y.push_back(e.se);
    if (i < n) {
      c.mean_z.push_back(sample_estimate(std::span<const double>(sol.z.data() + i * P, P)).value);
      for (std::size_t m = 0; m < sol.n_atoms; ++m)
        c.mean_k[m].push_back(
            sample_estimate(std::span<const double>(sol.k.data() + (i * sol.n_atoms + m) * P, P)).value);
    } else {
      c.mean_z.push_back(0.0);
      for (std::size_t m = 0; m < sol.n_atoms; ++m) c.mean_k[m].push_back(0.0);
    }
  }
  return c;
}

}  // namespace fbsvie
