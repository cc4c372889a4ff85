#include "fbsvie/bsvie.hpp"

#include <cmath>
#include <string>

#include "fbsvie/parallel.hpp"

namespace fbsvie {

BsvieDriver BsvieDriver::zero() {
  BsvieDriver d;
  d.fn = [](const BsvieDriverArgs&) { return 0.0; };
  d.uses_y = false;
  return d;
}

std::size_t BsvieTriple::tri(std::size_t i, std::size_t j) const {
  const std::size_t n = grid.steps();
  if (i > j || j >= n) throw DomainError("triangle index (" + std::to_string(i) + ", " + std::to_string(j) +
                                         ") outside i <= j < n");
  return i * n - i * (i - 1) / 2 + (j - i);
}

double BsvieTriple::z_at(std::size_t i, std::size_t j, std::size_t path) const {
  const auto& f = z_fn(i, j);
  if (!projectors) return f.intercept();
  return (*projectors)[j].apply_at(f, path);
}

double BsvieTriple::k_at(std::size_t i, std::size_t j, std::size_t m, std::size_t path) const {
  const auto& f = k_fn(i, j, m);
  if (!projectors) return f.intercept();
  return (*projectors)[j].apply_at(f, path);
}

BsvieTriple make_triple(const TimeGrid& grid, std::size_t n_atoms, std::vector<double> y, std::size_t n_paths,
                        std::shared_ptr<const std::vector<Projector>> projectors) {
  if (y.size() != grid.size() * n_paths) throw ValidationError("Y must hold (n+1) x n_paths values");
  BsvieTriple t;
  t.grid = grid;
  t.n_paths = n_paths;
  t.n_atoms = n_atoms;
  t.projectors = std::move(projectors);
  t.y = std::move(y);
  t.z.assign(t.triangle_size(), ProjectionFn::constant(0.0));
  t.k.assign(t.triangle_size() * n_atoms, ProjectionFn::constant(0.0));
  return t;
}

namespace {

double mean_square(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s / static_cast<double>(v.size());
}

double mean_square_diff(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t p = 0; p < a.size(); ++p) s += (a[p] - b[p]) * (a[p] - b[p]);
  return s / static_cast<double>(a.size());
}

// Trapezoid-in-t, left-point-in-s assembly of per-entry second moments.
template <class YTerm, class ZTerm>
double assemble(const TimeGrid& g, double beta_w, YTerm y_term, ZTerm z_term) {
  const std::size_t n = g.steps();
  const double dt = g.dt();
  double total = 0.0;
  for (std::size_t i = 0; i <= n; ++i) {
    double inner = std::exp(beta_w * g.node(i)) * y_term(i);
    for (std::size_t j = i; j < n; ++j) inner += std::exp(beta_w * g.node(j)) * z_term(i, j) * dt;
    const double w = (i == 0 || i == n) ? 0.5 : 1.0;
    total += w * dt * inner;
  }
  return total;
}

double entry_ms(const BsvieTriple& t, const ProjectionFn& f, std::size_t j) {
  if (!t.projectors) return f.intercept() * f.intercept();
  return (*t.projectors)[j].mean_square(f);
}

double entry_ms_diff(const BsvieTriple& t, const ProjectionFn& f, const ProjectionFn& g, std::size_t j) {
  if (!t.projectors) return (f.intercept() - g.intercept()) * (f.intercept() - g.intercept());
  return (*t.projectors)[j].mean_square_diff(f, g);
}

double atom_weight(const LevyMeasure& levy, std::size_t m) {
  return m < levy.size() ? levy.atoms()[m].weight : 0.0;
}

}  // namespace

double weighted_norm(const BsvieTriple& t, double beta_w, const LevyMeasure& levy) {
  return assemble(
      t.grid, beta_w, [&](std::size_t i) { return mean_square(t.y_node(i)); },
      [&](std::size_t i, std::size_t j) {
        double v = entry_ms(t, t.z_fn(i, j), j);
        for (std::size_t m = 0; m < t.n_atoms; ++m) v += atom_weight(levy, m) * entry_ms(t, t.k_fn(i, j, m), j);
        return v;
      });
}

double weighted_distance(const BsvieTriple& a, const BsvieTriple& b, double beta_w, const LevyMeasure& levy) {
  if (!(a.grid == b.grid) || a.n_paths != b.n_paths || a.n_atoms != b.n_atoms)
    throw ValidationError("triples live on different grids");
  const BsvieTriple& ref = a.projectors ? a : b;
  return assemble(
      a.grid, beta_w, [&](std::size_t i) { return mean_square_diff(a.y_node(i), b.y_node(i)); },
      [&](std::size_t i, std::size_t j) {
        double v = entry_ms_diff(ref, a.z_fn(i, j), b.z_fn(i, j), j);
        for (std::size_t m = 0; m < a.n_atoms; ++m)
          v += atom_weight(levy, m) * entry_ms_diff(ref, a.k_fn(i, j, m), b.k_fn(i, j, m), j);
        return v;
      });
}

std::shared_ptr<const std::vector<Projector>> build_projectors(const NoiseBundle& noise, const StateProvider& states,
                                                               const BsvieConfig& config) {
  const TimeGrid& g = noise.grid();
  const bool trivial = config.filtration.effective() == FiltrationMode::Mode::trivial;
  auto out = std::make_shared<std::vector<Projector>>();
  out->reserve(g.steps());
  for (std::size_t j = 0; j < g.steps(); ++j) {
    if (trivial) {
      out->emplace_back(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(noise.n_paths()), 0), 0);
    } else {
      out->emplace_back(states(config.filtration.conditioning_node(g, j)), config.degree);
    }
  }
  return out;
}

namespace {

// Backward sweep for one parameter node; fills the Z/K row of `out` when given.
std::vector<double> sweep(std::size_t i, std::span<const double> zeta, const BsvieDriver& driver,
                          const BsvieTriple& frozen, const NoiseBundle& noise, BsvieTriple* out) {
  const TimeGrid& g = noise.grid();
  const std::size_t n = g.steps();
  const std::size_t P = noise.n_paths();
  const std::size_t M = noise.n_atoms();
  const double dt = g.dt();
  const auto& projectors = *frozen.projectors;

  std::vector<double> ybar(zeta.begin() + static_cast<std::ptrdiff_t>(i * P),
                           zeta.begin() + static_cast<std::ptrdiff_t>((i + 1) * P));
  std::vector<double> innovation(P), target(P), kbuf(M);
  // terminal plus the driver sums so far; its gap to ybar is the part of the
  // target the later regressions had to estimate
  std::vector<double> pathwise(ybar), gap(P), weight(P);
  for (std::size_t j = n; j-- > i;) {
    const Projector& proj = projectors[j];
    const Projector* later = j + 1 < n ? &projectors[j + 1] : nullptr;
    if (later && out)
      for (std::size_t p = 0; p < P; ++p) gap[p] = pathwise[p] - ybar[p];
    try {
      proj.apply(proj.fit(ybar), innovation);
      for (std::size_t p = 0; p < P; ++p) innovation[p] = ybar[p] - innovation[p];
      const auto db = noise.increments(j);
      for (std::size_t p = 0; p < P; ++p) target[p] = innovation[p] * db[p] / dt;
      auto zfit = proj.fit(target);
      if (later && out) {
        for (std::size_t p = 0; p < P; ++p) weight[p] = db[p] / dt;
        zfit.set_inherited_se(later->propagated_se(weight, gap));
      }
      std::vector<ProjectionFn> kfit(M);
      for (std::size_t m = 0; m < M; ++m) {
        const double wdt = noise.levy().atoms()[m].weight * dt;
        const auto cnt = noise.counts(j, m);
        for (std::size_t p = 0; p < P; ++p) target[p] = innovation[p] * (static_cast<double>(cnt[p]) - wdt) / wdt;
        kfit[m] = proj.fit(target);
        if (later && out) {
          for (std::size_t p = 0; p < P; ++p) weight[p] = (static_cast<double>(cnt[p]) - wdt) / wdt;
          kfit[m].set_inherited_se(later->propagated_se(weight, gap));
        }
      }

      const double t = g.node(i);
      const double s = g.node(j);
      const auto& zf = frozen.z_fn(i, j);
      for (std::size_t p = 0; p < P; ++p) {
        BsvieDriverArgs a;
        a.i = i;
        a.j = j;
        a.t = t;
        a.s = s;
        a.path = p;
        a.y = driver.uses_y ? frozen.y_at(p, j) : 0.0;
        a.z = driver.uses_z ? proj.apply_at(zf, p) : 0.0;
        if (driver.uses_k)
          for (std::size_t m = 0; m < M; ++m) kbuf[m] = proj.apply_at(frozen.k_fn(i, j, m), p);
        a.k = kbuf;
        const double gv = driver.fn(a);
        if (!std::isfinite(gv))
          throw DomainError("driver returned a non-finite value at (t_" + std::to_string(i) + ", s_" +
                            std::to_string(j) + ")");
        target[p] = ybar[p] + gv * dt;
        pathwise[p] += gv * dt;
      }
      proj.apply(proj.fit(target), ybar);
      if (out) {
        out->z[out->tri(i, j)] = std::move(zfit);
        for (std::size_t m = 0; m < M; ++m) out->k[out->tri(i, j) * M + m] = std::move(kfit[m]);
      }
    } catch (const RegressionError& e) {
      throw RegressionError("BSVIE family node " + std::to_string(i) + ", step " + std::to_string(j) + ": " +
                                e.what(),
                            e.condition_number());
    }
  }
  return ybar;
}

void check_family_inputs(std::span<const double> zeta, const BsvieTriple& frozen, const NoiseBundle& noise) {
  if (!(frozen.grid == noise.grid()) || frozen.n_paths != noise.n_paths() || frozen.n_atoms != noise.n_atoms())
    throw ValidationError("frozen triple does not match the noise");
  if (!frozen.projectors || frozen.projectors->size() != noise.n_steps())
    throw ValidationError("frozen triple carries no per-node regression bases");
  if (zeta.size() != noise.grid().size() * noise.n_paths())
    throw ValidationError("zeta must hold (n+1) x n_paths values");
}

}  // namespace

std::vector<double> solve_family_node(std::size_t i, std::span<const double> zeta, const BsvieDriver& driver,
                                      const BsvieTriple& frozen, const NoiseBundle& noise) {
  check_family_inputs(zeta, frozen, noise);
  if (i > noise.n_steps()) throw ValidationError("family node beyond the grid");
  return sweep(i, zeta, driver, frozen, noise, nullptr);
}

BsvieTriple solve_family_step(std::span<const double> zeta, const BsvieDriver& driver, const BsvieTriple& frozen,
                              const NoiseBundle& noise) {
  check_family_inputs(zeta, frozen, noise);
  const std::size_t n = noise.n_steps();
  const std::size_t P = noise.n_paths();
  BsvieTriple out = make_triple(frozen.grid, frozen.n_atoms, std::vector<double>((n + 1) * P, 0.0), P,
                                frozen.projectors);
  std::copy(zeta.begin() + static_cast<std::ptrdiff_t>(n * P), zeta.end(),
            out.y.begin() + static_cast<std::ptrdiff_t>(n * P));
  parallel_for(n, [&](std::size_t i) {
    const auto yi = sweep(i, zeta, driver, frozen, noise, &out);
    std::copy(yi.begin(), yi.end(), out.y.begin() + static_cast<std::ptrdiff_t>(i * P));
  });
  return out;
}

BsvieSolution solve_bsvie(std::span<const double> zeta, const BsvieDriver& driver, const NoiseBundle& noise,
                          const StateProvider& states, const BsvieConfig& config, const BsvieTriple* initial) {
  const TimeGrid& g = noise.grid();
  const std::size_t P = noise.n_paths();
  auto projectors = build_projectors(noise, states, config);
  BsvieTriple current;
  if (initial) {
    current = *initial;
    current.projectors = projectors;
  } else {
    current = make_triple(g, noise.n_atoms(), std::vector<double>(g.size() * P, 0.0), P, projectors);
  }

  BsvieSolution sol;
  double reference = 0.0;
  for (std::size_t pass = 1; pass <= config.max_iter; ++pass) {
    BsvieTriple next = solve_family_step(zeta, driver, current, noise);
    const double d = weighted_distance(next, current, config.beta_w, noise.levy());
    const double norm = weighted_norm(next, config.beta_w, noise.levy());
    sol.distances.push_back(d);
    sol.norms.push_back(norm);
    if (pass == 1) reference = norm;
    current = std::move(next);
    sol.iterations = pass;
    // d and reference are squared norms
    if (d <= config.tol * config.tol * reference) {
      sol.converged = true;
      break;
    }
  }
  if (!sol.converged)
    throw ConvergenceError("Picard iteration did not converge in " + std::to_string(config.max_iter) +
                               " passes (last distance " + std::to_string(sol.distances.back()) + ")",
                           sol.distances);
  sol.triple = std::move(current);
  return sol;
}

double z_time_derivative_norm(const BsvieTriple& t) {
  const std::size_t n = t.grid.steps();
  if (n < 2) throw ValidationError("need at least two nodes in the first index");
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) total += entry_ms_diff(t, t.z_fn(i + 1, j), t.z_fn(i, j), j);
  // sum of ((dZ)/dt)^2 dt ds with dt = ds
  return total;
}

}  // namespace fbsvie
