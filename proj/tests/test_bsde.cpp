#include <algorithm>
#include <cmath>
#include <memory>

#include <doctest.h>

#include "fbsvie/bsde.hpp"
#include "fbsvie/control_fn.hpp"
#include "fbsvie/stats.hpp"
#include "support.hpp"

using namespace fbsvie;
using fbsvie::testing::small_scenario;

namespace {

std::vector<double> terminal_brownian_square(const NoiseBundle& noise) {
  const NoiseLevels lv = accumulate_levels(noise);
  const auto b = lv.brownian_at(noise.n_steps());
  std::vector<double> out(b.begin(), b.end());
  for (auto& v : out) v *= v;
  return out;
}

}  // namespace

TEST_CASE("zero driver with terminal B(1)^2 gives E B(1)^2 = 1") {
  const NoiseBundle noise = generate_noise(TimeGrid(1.0, 100), {}, 20000, 42, 8);
  const auto terminal = terminal_brownian_square(noise);
  const BsdeSolution sol =
      solve_bsde(terminal, [](const DriverArgs&) { return 0.0; }, noise, noise_state_provider(noise), {});
  CHECK(std::abs(sol.y0 - 1.0) <= 3.0 * sol.se);
  for (std::size_t p = 0; p < noise.n_paths(); p += 97) CHECK(sol.y_at(p, 100) == terminal[p]);
}

TEST_CASE("linear driver reproduces exponential growth") {
  const NoiseBundle noise = generate_noise(TimeGrid(1.0, 100), {}, 1000, 3, 4);
  const std::vector<double> terminal(1000, 1.0);
  BsdeConfig cfg;
  cfg.needs_z = cfg.needs_k = false;
  const BsdeSolution sol =
      solve_bsde(terminal, [](const DriverArgs& a) { return a.y; }, noise, noise_state_provider(noise), cfg);
  CHECK(std::abs(sol.y0 - std::exp(1.0)) <= 0.02 * std::exp(1.0));
  CHECK(sol.y0 == doctest::Approx(std::pow(1.01, 100)).epsilon(1e-10));
}

TEST_CASE("null solution is exactly zero") {
  const NoiseBundle noise = generate_noise(TimeGrid(1.0, 20), LevyMeasure({{-0.1, 2.0}}), 200, 3, 4);
  const std::vector<double> terminal(200, 0.0);
  const BsdeSolution sol =
      solve_bsde(terminal, [](const DriverArgs&) { return 0.0; }, noise, noise_state_provider(noise), {});
  for (double v : sol.y) CHECK(v == 0.0);
  for (double v : sol.z) CHECK(v == 0.0);
  for (double v : sol.k) CHECK(v == 0.0);
  CHECK(sol.se == 0.0);
}

TEST_CASE("Z of a Wiener integral is its integrand") {
  const TimeGrid g(1.0, 20);
  double spreads[2] = {0.0, 0.0};
  for (std::size_t n_paths : {2000u, 20000u}) {
    const NoiseBundle noise = generate_noise(g, {}, n_paths, 11, 8);
    // the running integral int_0^t s dB is the Markov state of this problem
    auto running = std::make_shared<std::vector<double>>((g.steps() + 1) * n_paths, 0.0);
    for (std::size_t i = 0; i < g.steps(); ++i)
      for (std::size_t p = 0; p < n_paths; ++p)
        (*running)[(i + 1) * n_paths + p] = (*running)[i * n_paths + p] + g.node(i) * noise.increment(p, i);
    const StateProvider states = [running, n_paths](std::size_t node) {
      Eigen::MatrixXd s(static_cast<Eigen::Index>(n_paths), 1);
      for (std::size_t p = 0; p < n_paths; ++p) s(static_cast<Eigen::Index>(p), 0) = (*running)[node * n_paths + p];
      return s;
    };
    const std::span<const double> terminal(running->data() + g.steps() * n_paths, n_paths);
    BsdeConfig cfg;
    cfg.needs_k = false;
    const BsdeSolution sol = solve_bsde(terminal, [](const DriverArgs&) { return 0.0; }, noise, states, cfg);
    const BsdeCurve curve = summarize_bsde(sol);
    double& worst_spread = spreads[n_paths == 2000 ? 0 : 1];
    for (std::size_t i = 1; i < g.steps(); ++i) {
      std::vector<double> zi(n_paths), target(n_paths);
      for (std::size_t p = 0; p < n_paths; ++p) {
        zi[p] = sol.z_at(p, i);
        const double db = noise.increment(p, i);
        target[p] = g.node(i) * db * db / g.dt();
      }
      const Estimate e = sample_estimate(zi);
      CHECK(e.value == doctest::Approx(curve.mean_z[i]).epsilon(1e-12));
      CHECK(std::abs(e.value - g.node(i)) <= 3.0 * sample_estimate(target).se);
      double var = 0.0;
      for (double v : zi) var += (v - e.value) * (v - e.value);
      worst_spread = std::max(worst_spread, std::sqrt(var / static_cast<double>(n_paths)) / g.node(i));
    }
  }
  CHECK(spreads[1] < 0.5 * spreads[0]);
}

TEST_CASE("jump coefficient of a compensated count") {
  const TimeGrid g(1.0, 20);
  const NoiseBundle noise = generate_noise(g, LevyMeasure({{0.3, 2.0}}), 20000, 12, 8);
  const double wdt = 2.0 * g.dt();
  std::vector<double> terminal(noise.n_paths(), 0.0);
  for (std::size_t i = 0; i < g.steps(); ++i)
    for (std::size_t p = 0; p < noise.n_paths(); ++p)
      terminal[p] += compensated_jump_sum(noise, p, i, [](double) { return 1.0; });
  const BsdeSolution sol =
      solve_bsde(terminal, [](const DriverArgs&) { return 0.0; }, noise, noise_state_provider(noise), {});
  for (std::size_t i = 0; i < g.steps(); i += 3) {
    std::vector<double> ki(noise.n_paths()), target(noise.n_paths());
    for (std::size_t p = 0; p < noise.n_paths(); ++p) {
      ki[p] = sol.k_at(p, i, 0);
      const double c = noise.count(p, i, 0) - wdt;
      target[p] = c * c / wdt;
    }
    CHECK(std::abs(sample_estimate(ki).value - 1.0) <= 3.0 * sample_estimate(target).se);
  }
}

TEST_CASE("comparison: a larger terminal never lowers Y(0)") {
  const NoiseBundle noise = generate_noise(TimeGrid(1.0, 50), {}, 4000, 13, 4);
  const auto base = terminal_brownian_square(noise);
  auto bigger = base;
  for (std::size_t p = 0; p < bigger.size(); ++p) bigger[p] += 0.1 * std::abs(std::sin(static_cast<double>(p)));
  BsdeConfig cfg;
  cfg.needs_k = false;
  const Driver driver = [](const DriverArgs& a) { return -0.5 * a.y + 0.2 * std::tanh(a.z); };
  const auto states = noise_state_provider(noise);
  const BsdeSolution lo = solve_bsde(base, driver, noise, states, cfg);
  const BsdeSolution hi = solve_bsde(bigger, driver, noise, states, cfg);
  CHECK(hi.y0 >= lo.y0 - 3.0 * std::max(lo.se, hi.se));
}

TEST_CASE("recursive utility against the discounted closed form") {
  for (double gamma : {0.0, 1.0}) {
    ScenarioSpec s = small_scenario(100, 4000);
    s.gamma = {gamma};
    s = validate_scenario(s);
    const NoiseBundle noise = generate_noise(s);
    const ControlFn c = ControlFn::constant(1.0);
    const ForwardPaths fp = simulate_fsvie(s, noise, c);
    const Estimate bsde = recursive_utility(s, c, fp, noise);
    const Estimate closed = sample_estimate(utility_closed_form(s, c, fp));
    if (gamma == 0.0) {
      CHECK(bsde.value == doctest::Approx(closed.value).epsilon(1e-10));
    } else {
      CHECK(std::abs(bsde.value - closed.value) <= 0.02 * std::abs(closed.value));
    }
  }
}

TEST_CASE("utility with c = 1 and X = 1 vanishes") {
  // alpha = c keeps X at its initial value
  ScenarioSpec s = small_scenario(50, 100);
  s.alpha = Kernel::constant(1.0);
  s.beta = Kernel::constant(0.0);
  s.gamma = {25.0};
  s = validate_scenario(s);
  const NoiseBundle noise = generate_noise(s);
  const ControlFn c = ControlFn::constant(1.0);
  const ForwardPaths fp = simulate_fsvie(s, noise, c);
  const Estimate e = recursive_utility(s, c, fp, noise);
  CHECK(std::abs(e.value) <= 1e-14);
  CHECK(e.se <= 1e-14);
}

TEST_CASE("adjoint product solves its backward equation") {
  for (auto convention : {GammaConvention::discounting, GammaConvention::paper_ode}) {
    const TimeGrid g(1.0, 50);
    const std::vector<double> gamma(g.size(), 1.0);
    const auto lambda = lambda_adjoint(gamma, g, convention);
    const auto big_p = adjoint_product(gamma, g, convention);
    const NoiseBundle noise = generate_noise(g, {}, 100, 2, 4);
    const std::vector<double> terminal(100, 0.0);
    BsdeConfig cfg;
    cfg.needs_z = cfg.needs_k = false;
    const BsdeSolution sol = solve_bsde(
        terminal, [&](const DriverArgs& a) { return lambda[a.step]; }, noise, noise_state_provider(noise), cfg);
    for (std::size_t i = 0; i <= 50; ++i)
      CHECK(sol.y_at(7, i) == doctest::Approx(big_p[i]).epsilon(1e-12));
  }
}

TEST_CASE("bsde input validation") {
  const NoiseBundle noise = generate_noise(TimeGrid(1.0, 10), {}, 10, 2, 1);
  const auto states = noise_state_provider(noise);
  const Driver zero = [](const DriverArgs&) { return 0.0; };
  CHECK_THROWS_AS(solve_bsde(std::vector<double>(9, 0.0), zero, noise, states, {}), ValidationError);
  std::vector<double> bad(10, 0.0);
  bad[3] = std::nan("");
  CHECK_THROWS_AS(solve_bsde(bad, zero, noise, states, {}), ValidationError);
}
