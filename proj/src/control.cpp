#include "fbsvie/control.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "fbsvie/bsde.hpp"

namespace fbsvie {

namespace {

double gamma_sign(const ScenarioSpec& spec) { return spec.convention == GammaConvention::discounting ? -1.0 : 1.0; }

}  // namespace

double hamiltonian_h0(double t, double x, double y, double c, double p, double q, std::span<const double> r,
                      double lambda, const ScenarioSpec& spec) {
  if (!(c > 0.0)) throw DomainError("H0 needs c > 0, got " + std::to_string(c));
  if (!(x > 0.0)) throw DomainError("H0 needs x > 0, got " + std::to_string(x));
  if (r.size() != spec.levy.size()) throw ValidationError("H0 needs one r value per atom");
  double h = (spec.alpha(t, t) - c) * p * x + spec.beta(t, t) * q * x;
  for (std::size_t m = 0; m < spec.levy.size(); ++m) h += spec.pi[m](t, t) * x * r[m] * spec.levy.atoms()[m].weight;
  h += (std::log(c) + std::log(x) + gamma_sign(spec) * gamma_at(spec, t) * y) * lambda;
  return h;
}

Estimate hamiltonian_h1(std::size_t k, double x, const H1Inputs& in, const ScenarioSpec& spec) {
  const TimeGrid& g = spec.grid;
  const std::size_t n = g.steps();
  const std::size_t P = in.n_paths;
  if (k > n) throw ValidationError("H1 node beyond the grid");
  const bool use_alpha = !spec.alpha.t_independent();
  const bool use_beta = !spec.beta.t_independent();
  std::vector<bool> use_pi(spec.levy.size());
  bool any = use_alpha || use_beta;
  for (std::size_t m = 0; m < spec.levy.size(); ++m) {
    use_pi[m] = !spec.pi[m].t_independent();
    any = any || use_pi[m];
  }
  if (!any || k == n || x == 0.0) return {0.0, 0.0};
  const double t = g.node(k);
  std::vector<double> per_path(P, 0.0);
  for (std::size_t i = k; i <= n; ++i) {
    const double s = g.node(i);
    const double w = (i == k || i == n) ? 0.5 * g.dt() : g.dt();
    const double da = use_alpha ? spec.alpha.d_first(s, t) : 0.0;
    const double db = use_beta ? spec.beta.d_first(s, t) : 0.0;
    for (std::size_t p = 0; p < P; ++p) {
      double v = 0.0;
      if (use_alpha) v += da * in.p[i * P + p];
      if (use_beta) v += db * in.dp_brownian[i * P + p];
      per_path[p] += w * x * v;
    }
    for (std::size_t m = 0; m < spec.levy.size(); ++m) {
      if (!use_pi[m]) continue;
      const double dpi = spec.pi[m].d_first(s, t) * spec.levy.atoms()[m].weight;
      for (std::size_t p = 0; p < P; ++p) per_path[p] += w * x * dpi * in.dp_jump[m][i * P + p];
    }
  }
  return sample_estimate(per_path);
}

AdjointState build_adjoint(const ScenarioSpec& spec, const ForwardPaths& paths) {
  AdjointState a;
  a.lambda = lambda_adjoint(spec.gamma, spec.grid, spec.convention);
  a.big_p = adjoint_product(spec.gamma, spec.grid, spec.convention);
  a.n_paths = paths.n_paths;
  const std::size_t n = spec.grid.steps();
  a.p.assign((n + 1) * paths.n_paths, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = paths.node(i);
    for (std::size_t p = 0; p < paths.n_paths; ++p) a.p[i * paths.n_paths + p] = a.big_p[i] / x[p];
  }
  return a;
}

H1Inputs adjoint_derivatives(const ScenarioSpec& spec, const NoiseBundle& noise, const ControlFn& control,
                             const ForwardPaths& paths, const AdjointState& adjoint, std::size_t k) {
  const std::size_t n = spec.grid.steps();
  const std::size_t P = paths.n_paths;
  const std::size_t M = spec.levy.size();
  const auto fv = first_variation(spec, noise, control, paths, k);
  const auto states = forward_state_provider(paths, spec.regression.state_variables);
  const Projector proj(states(k), spec.regression.degree);

  H1Inputs in;
  in.k = k;
  in.n_paths = P;
  in.p = adjoint.p;
  in.dp_brownian.assign((n + 1) * P, 0.0);
  in.dp_jump.assign(M, std::vector<double>((n + 1) * P, 0.0));
  std::vector<double> target(P);
  for (std::size_t i = k; i < n; ++i) {
    const double big_p = adjoint.big_p[i];
    const auto x = paths.node(i);
    for (std::size_t p = 0; p < P; ++p) target[p] = -big_p * fv.brownian_at(p, i) / (x[p] * x[p]);
    proj.apply(proj.fit(target), std::span<double>(in.dp_brownian.data() + i * P, P));
    for (std::size_t m = 0; m < M; ++m) {
      for (std::size_t p = 0; p < P; ++p) {
        const double bumped = x[p] + fv.jump_at(m, p, i);
        if (!(bumped > 0.0)) throw DomainError("jump-perturbed state is not positive at node " + std::to_string(i));
        target[p] = big_p / bumped - big_p / x[p];
      }
      proj.apply(proj.fit(target), std::span<double>(in.dp_jump[m].data() + i * P, P));
    }
  }
  return in;
}

ConcavityReport concavity_probe(const ScenarioSpec& spec, const std::vector<ConcavitySample>& samples) {
  ConcavityReport rep;
  rep.overall_min = std::numeric_limits<double>::infinity();
  for (const auto& s : samples) {
    auto h = [&](const std::array<double, 3>& v) {
      return hamiltonian_h0(s.t, v[0], v[1], v[2], s.p, s.q, s.r, s.lambda, spec) + s.h1_per_x * v[0];
    };
    const std::array<double, 3> base{s.x, s.y, s.c};
    std::array<double, 3> step{};
    for (int a = 0; a < 3; ++a) step[a] = 1e-4 * (base[a] != 0.0 ? std::abs(base[a]) : 1.0);
    Eigen::Matrix3d hess;
    const double h0 = h(base);
    for (int a = 0; a < 3; ++a) {
      auto up = base, dn = base;
      up[a] += step[a];
      dn[a] -= step[a];
      hess(a, a) = (h(up) - 2.0 * h0 + h(dn)) / (step[a] * step[a]);
      for (int b = a + 1; b < 3; ++b) {
        auto pp = base, pm = base, mp = base, mm = base;
        pp[a] += step[a], pp[b] += step[b];
        pm[a] += step[a], pm[b] -= step[b];
        mp[a] -= step[a], mp[b] += step[b];
        mm[a] -= step[a], mm[b] -= step[b];
        hess(a, b) = hess(b, a) = (h(pp) - h(pm) - h(mp) + h(mm)) / (4.0 * step[a] * step[b]);
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(hess, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    rep.hessian.push_back(hess);
    rep.min_eigenvalue.push_back(lo);
    rep.overall_min = std::min(rep.overall_min, lo);
  }
  if (samples.empty()) rep.overall_min = 0.0;
  return rep;
}

double Utility::operator()(double v) const {
  switch (kind) {
    case Kind::zero:
      return 0.0;
    case Kind::identity:
      return v;
    case Kind::log:
      if (!(v > 0.0)) throw DomainError("log utility needs a positive argument, got " + std::to_string(v));
      return std::log(v);
    case Kind::power:
      if (!(v > 0.0)) throw DomainError("power utility needs a positive argument, got " + std::to_string(v));
      return std::pow(v, exponent) / exponent;
  }
  return 0.0;
}

double Utility::derivative(double v) const {
  switch (kind) {
    case Kind::zero:
      return 0.0;
    case Kind::identity:
      return 1.0;
    case Kind::log:
      return 1.0 / v;
    case Kind::power:
      return std::pow(v, exponent - 1.0);
  }
  return 0.0;
}

std::vector<double> performance_paths(const ScenarioSpec& spec, const ControlFn& control, const NoiseBundle& noise,
                                      const PerformanceSpec& perf) {
  const auto paths = simulate_fsvie(spec, noise, control);
  auto out = recursive_utility_paths(spec, control, paths, noise);
  const std::size_t P = paths.n_paths;
  const std::size_t n = spec.grid.steps();
  // psi(Y(0)) + psi'(Y(0)) (Yhat - Y(0)) keeps the mean at psi(Y(0))
  const double y0 = sample_estimate(out).value;
  const double psi0 = perf.psi(y0);
  const double dpsi = perf.psi.derivative(y0);
  for (double& v : out) v = psi0 + dpsi * (v - y0);
  if (perf.f.kind != Utility::Kind::zero) {
    const auto c = control.values(spec);
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = paths.node(i);
      for (std::size_t p = 0; p < P; ++p) out[p] += perf.f(c[i] * x[p]) * spec.grid.dt();
    }
  }
  if (perf.phi.kind != Utility::Kind::zero) {
    const auto x = paths.node(n);
    for (std::size_t p = 0; p < P; ++p) out[p] += perf.phi(x[p]);
  }
  return out;
}

namespace {

std::size_t pow2(std::size_t e) { return std::size_t{1} << e; }

// Runs `per_path(level scenario, level noise)` on every level and combines the
// per-path results with Richardson weights.
template <class PerPath>
PerformanceResult extrapolate(const ScenarioSpec& spec, const NoiseBundle& noise, std::size_t levels,
                              PerPath per_path, std::vector<double>* combined_out = nullptr) {
  if (levels < 1) throw ValidationError("levels must be >= 1");
  const TimeGrid finest = spec.grid.refined(pow2(levels - 1));
  if (!(noise.grid() == finest))
    throw ValidationError("noise must live on the finest extrapolation grid (n = " + std::to_string(finest.steps()) +
                          "), got n = " + std::to_string(noise.n_steps()));
  const auto weights = richardson_weights(levels);
  PerformanceResult res;
  std::vector<double> combined(noise.n_paths(), 0.0);
  for (std::size_t l = 0; l < levels; ++l) {
    const ScenarioSpec s = refine_scenario(spec, pow2(l));
    const NoiseBundle coarse = coarsen(noise, pow2(levels - 1 - l));
    const auto v = per_path(s, coarse);
    res.per_level.push_back(sample_estimate(v));
    for (std::size_t p = 0; p < v.size(); ++p) combined[p] += weights[l] * v[p];
  }
  res.j = sample_estimate(combined);
  if (combined_out) *combined_out = std::move(combined);
  return res;
}

}  // namespace

PerformanceResult performance(const ScenarioSpec& spec, const ControlFn& control, const NoiseBundle& noise,
                              const PerformanceSpec& perf) {
  return extrapolate(spec, noise, perf.levels, [&](const ScenarioSpec& s, const NoiseBundle& nb) {
    return performance_paths(s, control, nb, perf);
  });
}

std::vector<double> extrapolated_performance_paths(const ScenarioSpec& spec, const ControlFn& control,
                                                   const NoiseBundle& noise, const PerformanceSpec& perf) {
  std::vector<double> out;
  extrapolate(
      spec, noise, perf.levels,
      [&](const ScenarioSpec& s, const NoiseBundle& nb) { return performance_paths(s, control, nb, perf); }, &out);
  return out;
}

PerformanceResult gateaux_derivative(const ScenarioSpec& spec, const ControlFn& base, const Bump& bump,
                                     const NoiseBundle& noise, double theta, std::size_t levels) {
  if (!(theta > 0.0)) throw ValidationError("finite-difference step must be positive");
  if (bump.start < 0.0 || bump.start >= spec.grid.horizon())
    throw ValidationError("bump must start inside [0, T)");
  const ControlFn up = ControlFn::bump(base, bump.start, bump.width, theta * bump.height);
  const ControlFn down = ControlFn::bump(base, bump.start, bump.width, -theta * bump.height);
  PerformanceSpec perf;
  return extrapolate(spec, noise, levels, [&](const ScenarioSpec& s, const NoiseBundle& nb) {
    (void)up.values(s);
    (void)down.values(s);
    auto jp = performance_paths(s, up, nb, perf);
    const auto jm = performance_paths(s, down, nb, perf);
    for (std::size_t p = 0; p < jp.size(); ++p) jp[p] = (jp[p] - jm[p]) / (2.0 * theta);
    return jp;
  });
}

NoiseBundle extrapolation_noise(const ScenarioSpec& spec, std::size_t levels) {
  if (levels < 1) throw ValidationError("levels must be >= 1");
  return generate_noise(spec.grid.refined(pow2(levels - 1)), spec.levy, spec.mc.n_paths, spec.mc.seed,
                        spec.mc.n_blocks);
}

namespace {

constexpr std::array<double, 5> kGlNodes{-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                         0.9061798459386640};
constexpr std::array<double, 5> kGlWeights{0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                           0.4786286704993665, 0.2369268850561891};

template <class F>
double gauss_legendre(F f, double a, double b) {
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double s = 0.0;
  for (std::size_t q = 0; q < 5; ++q) s += kGlWeights[q] * f(mid + half * kGlNodes[q]);
  return half * s;
}

// Integral of f over [0, s] using the cell boundaries for exactness of
// piecewise definitions.
struct Cumulative {
  std::vector<double> bounds, values;

  template <class F>
  Cumulative(F f, double horizon, std::size_t cells) {
    bounds.resize(cells + 1);
    values.assign(cells + 1, 0.0);
    for (std::size_t k = 0; k <= cells; ++k) bounds[k] = horizon * static_cast<double>(k) / static_cast<double>(cells);
    for (std::size_t k = 0; k < cells; ++k) values[k + 1] = values[k] + gauss_legendre(f, bounds[k], bounds[k + 1]);
  }
};

}  // namespace

double log_utility_oracle(const ScenarioSpec& spec, const ControlFn& control) {
  if (!spec.all_kernels_t_independent())
    throw ValidationError("log utility oracle is unsupported for kernels that depend on their first argument");
  const TimeGrid& g = spec.grid;
  const double T = g.horizon();
  const std::size_t cells = 10 * g.steps();
  const double h = T / static_cast<double>(cells);
  const double sign = gamma_sign(spec);

  const Cumulative gamma_int([&](double s) { return gamma_at(spec, s); }, T, cells);
  auto cell_of = [&](double s) { return std::min(static_cast<std::size_t>(s / h), cells - 1); };
  auto big_gamma = [&](double s) {
    const std::size_t k = cell_of(s);
    return gamma_int.values[k] + gauss_legendre([&](double r) { return gamma_at(spec, r); }, k * h, s);
  };
  auto lambda = [&](double s) { return std::exp(sign * big_gamma(s)); };
  const Cumulative lambda_int(lambda, T, cells);
  auto big_p = [&](double s) {
    const std::size_t k = cell_of(s);
    return lambda_int.values.back() - lambda_int.values[k] - gauss_legendre(lambda, k * h, s);
  };

  // drift of ln X: alpha - beta^2/2 + sum_m w_m (ln(1 + pi_m) - pi_m)
  auto drift = [&](double r) {
    const double b = spec.beta.hold_in_s(r);
    double v = spec.alpha.hold_in_s(r) - 0.5 * b * b;
    for (std::size_t m = 0; m < spec.levy.size(); ++m) {
      const double pm = spec.pi[m].hold_in_s(r);
      v += spec.levy.atoms()[m].weight * (std::log1p(pm) - pm);
    }
    return v;
  };
  const Cumulative drift_int(drift, T, cells);
  auto big_a = [&](double s) {
    const std::size_t k = cell_of(s);
    return drift_int.values[k] + gauss_legendre(drift, k * h, s);
  };

  // ln c(s) and int_0^s c for the supported control kinds
  std::function<double(double)> log_c, c_int;
  const double p0 = big_p(0.0);
  std::function<void(const ControlFn&, std::function<double(double)>&, std::function<double(double)>&)> build =
      [&](const ControlFn& u, std::function<double(double)>& rate, std::function<double(double)>& integral) {
        switch (u.kind()) {
          case ControlFn::Kind::constant: {
            const double v = u.parameter();
            rate = [v](double) { return v; };
            integral = [v](double s) { return v * s; };
            break;
          }
          case ControlFn::Kind::table: {
            const auto vals = u.raw_values(spec);
            std::vector<double> prefix(g.size(), 0.0);
            for (std::size_t i = 0; i < g.steps(); ++i) prefix[i + 1] = prefix[i] + vals[i] * g.dt();
            rate = [vals, &g](double s) { return vals[std::min(g.floor_index(s), g.steps() - 1)]; };
            integral = [vals, prefix, &g](double s) {
              const std::size_t i = std::min(g.floor_index(s), g.steps() - 1);
              return prefix[i] + vals[i] * (s - g.node(i));
            };
            break;
          }
          case ControlFn::Kind::theta_scaled_cstar: {
            const double th = u.parameter();
            rate = [&, th](double s) { return th * lambda(s) / big_p(s); };
            integral = [&, th](double s) { return th * std::log(p0 / big_p(s)); };
            break;
          }
          case ControlFn::Kind::cstar_plus_shift: {
            const double sh = u.parameter();
            rate = [&, sh](double s) { return lambda(s) / big_p(s) + sh; };
            integral = [&, sh](double s) { return std::log(p0 / big_p(s)) + sh * s; };
            break;
          }
          case ControlFn::Kind::bump: {
            std::function<double(double)> br, bi;
            build(*u.base(), br, bi);
            const double a = u.start(), w = u.width(), ht = u.parameter();
            rate = [br, a, w, ht](double s) { return br(s) + ((s >= a && s < a + w) ? ht : 0.0); };
            integral = [bi, a, w, ht](double s) { return bi(s) + ht * std::clamp(s - a, 0.0, w); };
            break;
          }
        }
      };
  std::function<double(double)> rate;
  build(control, rate, c_int);
  const double ln_xi = std::log(spec.initial);
  auto integrand = [&](double s) {
    const double c = rate(s);
    if (!(c > 0.0)) throw DomainError("oracle control must be positive");
    return lambda(s) * (std::log(c) + ln_xi + big_a(s) - c_int(s));
  };
  double total = 0.0;
  for (std::size_t k = 0; k < cells; ++k) {
    // split cells at the bump edges and grid nodes are already cell bounds
    total += gauss_legendre(integrand, k * h, (k + 1) * h);
  }
  return total;
}

}  // namespace fbsvie
