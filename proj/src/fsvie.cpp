#include "fbsvie/fsvie.hpp"

#include <cmath>
#include <string>

#include "fbsvie/parallel.hpp"

namespace fbsvie {

namespace {

// Kernel values K(t_i, t_j) on the full node triangle, row-major (n+1)^2.
std::vector<double> tabulate(const Kernel& k, const TimeGrid& g) {
  const std::size_t s = g.size();
  std::vector<double> out(s * s, 0.0);
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = 0; j <= i; ++j) out[i * s + j] = k.at_nodes(g, i, j);
  return out;
}

struct Coefficients {
  std::size_t size = 0;
  std::vector<double> drift;              // alpha(t_i,t_j) - c_j
  std::vector<double> vol;                // beta(t_i,t_j)
  std::vector<std::vector<double>> jump;  // pi_m(t_i,t_j)
  std::vector<double> compensator;        // sum_m pi_m(t_i,t_j) w_m dt
};

Coefficients coefficients(const ScenarioSpec& spec, const std::vector<double>& c) {
  const TimeGrid& g = spec.grid;
  Coefficients k;
  k.size = g.size();
  k.drift = tabulate(spec.alpha, g);
  k.vol = tabulate(spec.beta, g);
  k.compensator.assign(k.size * k.size, 0.0);
  for (std::size_t m = 0; m < spec.levy.size(); ++m) {
    k.jump.push_back(tabulate(spec.pi[m], g));
    const double wdt = spec.levy.atoms()[m].weight * g.dt();
    for (std::size_t idx = 0; idx < k.size * k.size; ++idx) k.compensator[idx] += k.jump[m][idx] * wdt;
  }
  for (std::size_t i = 0; i < k.size; ++i)
    for (std::size_t j = 0; j < std::min(i, g.steps()); ++j) k.drift[i * k.size + j] -= c[j];
  return k;
}

void check_inputs(const ScenarioSpec& spec, const NoiseBundle& noise) {
  if (!(noise.grid() == spec.grid))
    throw ValidationError("noise grid (n=" + std::to_string(noise.n_steps()) + ") does not match the scenario grid (n=" +
                          std::to_string(spec.grid.steps()) + ")");
  if (!(noise.levy() == spec.levy)) throw ValidationError("noise Levy atoms do not match the scenario");
  if (spec.pi.size() != spec.levy.size()) throw ValidationError("scenario must carry one pi kernel per atom");
}

// Adds the contribution of step j to row i of a linear Volterra recursion,
// for paths [first, last): out += src_j * (drift dt + vol dB_j + sum_m pi_m Ntilde_jm).
void add_step(const Coefficients& k, const NoiseBundle& noise, std::size_t i, std::size_t j, const double* src,
              double* out, std::size_t first, std::size_t last) {
  const std::size_t s = k.size;
  const double dt = noise.grid().dt();
  const double a = k.drift[i * s + j] * dt - k.compensator[i * s + j];
  const double b = k.vol[i * s + j];
  const auto db = noise.increments(j);
  for (std::size_t p = first; p < last; ++p) out[p] += src[p] * (a + b * db[p]);
  for (std::size_t m = 0; m < k.jump.size(); ++m) {
    const double pm = k.jump[m][i * s + j];
    if (pm == 0.0) continue;
    const auto cnt = noise.counts(j, m);
    for (std::size_t p = first; p < last; ++p) out[p] += src[p] * pm * static_cast<double>(cnt[p]);
  }
}

}  // namespace

ForwardPaths simulate_fsvie(const ScenarioSpec& spec, const NoiseBundle& noise, const ControlFn& control,
                            const SimulateOptions& options) {
  check_inputs(spec, noise);
  const auto c = control.values(spec);
  const TimeGrid& g = spec.grid;
  const std::size_t n = g.steps();
  const std::size_t P = noise.n_paths();
  const auto k = coefficients(spec, c);
  const bool incremental = spec.all_kernels_t_independent();

  ForwardPaths out;
  out.grid = g;
  out.n_paths = P;
  out.positive_state = options.positive_state;
  out.x.assign((n + 1) * P, spec.initial);

  parallel_for(noise.n_blocks(), [&](std::size_t block) {
    const auto [first, last] = noise.block_range(block);
    for (std::size_t i = 1; i <= n; ++i) {
      double* row = out.x.data() + i * P;
      if (incremental) {
        // the row-i sum equals the row-(i-1) sum plus the step i-1 term
        const double* prev = out.x.data() + (i - 1) * P;
        for (std::size_t p = first; p < last; ++p) row[p] = prev[p];
        add_step(k, noise, i, i - 1, prev, row, first, last);
      } else {
        for (std::size_t j = 0; j < i; ++j) add_step(k, noise, i, j, out.x.data() + j * P, row, first, last);
      }
      if (options.positive_state && i < n)
        for (std::size_t p = first; p < last; ++p)
          if (!(row[p] > options.floor)) throw PositivityError(p, i, row[p]);
    }
  });

  if (options.positive_state) {
    const auto last_row = out.node(n);
    for (double v : last_row)
      if (!(v > 0.0)) {
        out.terminal_positive = false;
        break;
      }
  }
  return out;
}

std::vector<double> forward_mean_oracle(const ScenarioSpec& spec, const ControlFn& control, QuadratureRule rule) {
  const auto c = control.values(spec);
  const TimeGrid& g = spec.grid;
  const std::size_t n = g.steps();
  const double dt = g.dt();
  auto kern = [&](std::size_t i, std::size_t j) { return spec.alpha.at_nodes(g, i, j) - c[std::min(j, n - 1)]; };
  std::vector<double> m(n + 1, spec.initial);
  for (std::size_t i = 1; i <= n; ++i) {
    if (rule == QuadratureRule::left_point) {
      double acc = 0.0;
      for (std::size_t j = 0; j < i; ++j) acc += kern(i, j) * m[j];
      m[i] = spec.initial + dt * acc;
    } else {
      double acc = 0.5 * kern(i, 0) * m[0];
      for (std::size_t j = 1; j < i; ++j) acc += kern(i, j) * m[j];
      m[i] = (spec.initial + dt * acc) / (1.0 - 0.5 * dt * kern(i, i));
    }
  }
  return m;
}

FirstVariation first_variation(const ScenarioSpec& spec, const NoiseBundle& noise, const ControlFn& control,
                               const ForwardPaths& paths, std::size_t k) {
  check_inputs(spec, noise);
  const TimeGrid& g = spec.grid;
  const std::size_t n = g.steps();
  if (k >= n) throw DomainError("first variation needs t_k < T (k = " + std::to_string(k) + ")");
  const std::size_t P = noise.n_paths();
  if (paths.n_paths != P || !(paths.grid == g)) throw ValidationError("forward paths do not match the noise");
  const auto c = control.values(spec);
  const auto coef = coefficients(spec, c);
  const bool incremental = spec.all_kernels_t_independent();
  const std::size_t atoms = spec.levy.size();

  FirstVariation fv;
  fv.k = k;
  fv.n_paths = P;
  fv.brownian.assign((n + 1) * P, 0.0);
  fv.jump.assign(atoms, std::vector<double>((n + 1) * P, 0.0));

  auto propagate = [&](std::vector<double>& v, const Kernel& seed_kernel) {
    parallel_for(noise.n_blocks(), [&](std::size_t block) {
      const auto [first, last] = noise.block_range(block);
      const double* xk = paths.x.data() + k * P;
      for (std::size_t i = k; i <= n; ++i) {
        double* row = v.data() + i * P;
        const double seed = seed_kernel.at_nodes(g, i, k);
        if (incremental && i > k) {
          const double* prev = v.data() + (i - 1) * P;
          for (std::size_t p = first; p < last; ++p) row[p] = prev[p];
          add_step(coef, noise, i, i - 1, prev, row, first, last);
          continue;
        }
        for (std::size_t p = first; p < last; ++p) row[p] = seed * xk[p];
        for (std::size_t j = k; j < i; ++j) add_step(coef, noise, i, j, v.data() + j * P, row, first, last);
      }
    });
  };
  propagate(fv.brownian, spec.beta);
  for (std::size_t m = 0; m < atoms; ++m) propagate(fv.jump[m], spec.pi[m]);
  return fv;
}

CurveSummary summarize_paths(const ForwardPaths& paths) {
  CurveSummary s;
  for (std::size_t i = 0; i < paths.grid.size(); ++i) {
    const auto row = paths.node(i);
    const auto e = sample_estimate(row);
    s.t.push_back(paths.grid.node(i));
    s.mean.push_back(e.value);
    s.se.push_back(e.se);
    s.q05.push_back(sample_quantile(row, 0.05));
    s.q50.push_back(sample_quantile(row, 0.50));
    s.q95.push_back(sample_quantile(row, 0.95));
  }
  return s;
}

}  // namespace fbsvie
