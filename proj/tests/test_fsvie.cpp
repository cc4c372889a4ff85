#include <cmath>

#include <doctest.h>

#include "fbsvie/fsvie.hpp"
#include "fbsvie/stats.hpp"
#include "support.hpp"

using namespace fbsvie;
using fbsvie::testing::Gen;
using fbsvie::testing::small_scenario;

TEST_CASE("deterministic growth without volatility") {
  ScenarioSpec s = small_scenario(100, 8);
  s.beta = Kernel::constant(0.0);
  const NoiseBundle noise = generate_noise(s);
  const ForwardPaths fp = simulate_fsvie(s, noise, ControlFn::constant(1e-300));
  const double euler = std::pow(1.0 + 0.05 * 0.01, 100);
  for (std::size_t p = 0; p < fp.n_paths; ++p) {
    CHECK(fp.at(p, 100) == doctest::Approx(euler).epsilon(1e-12));
    CHECK(std::abs(fp.at(p, 100) - std::exp(0.05)) < 0.05 * 0.05 * 0.01);
  }
}

TEST_CASE("no dynamics keeps the initial value") {
  ScenarioSpec s = small_scenario(20, 4);
  s.alpha = Kernel::constant(0.0);
  s.beta = Kernel::constant(0.0);
  const NoiseBundle noise = generate_noise(s);
  const ForwardPaths fp = simulate_fsvie(s, noise, ControlFn::constant(1e-300));
  for (std::size_t i = 0; i <= 20; ++i)
    for (std::size_t p = 0; p < 4; ++p) CHECK(fp.at(p, i) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("Monte Carlo mean matches the left-point oracle") {
  const ScenarioSpec s = small_scenario(100, 20000);
  const NoiseBundle noise = generate_noise(s);
  const ControlFn c = ControlFn::constant(1.0);
  const ForwardPaths fp = simulate_fsvie(s, noise, c);
  const auto oracle = forward_mean_oracle(s, c, QuadratureRule::left_point);
  CHECK(oracle[100] == doctest::Approx(std::pow(1.0 - 0.95 * 0.01, 100)).epsilon(1e-12));
  for (std::size_t i : {25u, 50u, 100u}) {
    const Estimate e = sample_estimate(fp.node(i));
    CHECK(std::abs(e.value - oracle[i]) <= 3.0 * e.se);
  }
}

TEST_CASE("trapezoid mean oracle examples") {
  const ScenarioSpec s = reference_scenario();
  const auto m = forward_mean_oracle(s, ControlFn::constant(1.0));
  CHECK(m[100] == doctest::Approx(std::exp(-0.95)).epsilon(1e-4));
  CHECK(std::abs(m[100] - std::exp(-0.95)) < 1e-4);

  ScenarioSpec flat = reference_scenario();
  flat.alpha = Kernel::constant(0.0);
  const auto m0 = forward_mean_oracle(flat, ControlFn::constant(1e-300));
  for (double v : m0) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));

  ScenarioSpec decay = reference_scenario();
  decay.alpha = Kernel::exp_decay(0.05, 1.0);
  const ScenarioSpec fine = refine_scenario(decay, 100);
  const double coarse_end = forward_mean_oracle(decay, ControlFn::constant(1e-300))[100];
  const double fine_end = forward_mean_oracle(fine, ControlFn::constant(1e-300))[10000];
  CHECK(std::abs(coarse_end - fine_end) <= 1e-4 * fine_end);
}

TEST_CASE("linear in the initial value") {
  ScenarioSpec s = fbsvie::testing::with_atom(small_scenario(30, 200), -0.2, 1.5);
  s.alpha = Kernel::exp_decay(0.1, 2.0);
  s = validate_scenario(s);
  const NoiseBundle noise = generate_noise(s);
  const ForwardPaths a = simulate_fsvie(s, noise, ControlFn::constant(0.5));
  ScenarioSpec doubled = s;
  doubled.initial = 2.0;
  const ForwardPaths b = simulate_fsvie(doubled, noise, ControlFn::constant(0.5));
  for (std::size_t k = 0; k < a.x.size(); ++k) CHECK(b.x[k] == 2.0 * a.x[k]);
}

TEST_CASE("t-independent kernels reduce to jump-diffusion Euler") {
  Gen gen(21);
  for (int trial = 0; trial < 10; ++trial) {
    ScenarioSpec s = small_scenario(gen.index(5, 40), 48, 100 + trial);
    s.alpha = Kernel::constant(gen.uniform(-0.5, 0.5));
    s.beta = Kernel::constant(gen.uniform(0.0, 0.4));
    s.levy = gen.levy(2);
    s.pi.clear();
    std::vector<double> pis;
    for (const auto& a : s.levy.atoms()) {
      pis.push_back(gen.uniform(-0.5, 0.5));
      s.pi.push_back(Kernel::constant(pis.back()));
    }
    s = validate_scenario(s);
    const double c = gen.uniform(0.1, 1.0);
    const NoiseBundle noise = generate_noise(s);
    const ForwardPaths fp = simulate_fsvie(s, noise, ControlFn::constant(c));
    const double dt = s.grid.dt();
    for (std::size_t p = 0; p < noise.n_paths(); ++p) {
      double x = s.initial;
      for (std::size_t i = 0; i < s.grid.steps(); ++i) {
        double jump = 0.0;
        for (std::size_t m = 0; m < pis.size(); ++m)
          jump += pis[m] * (noise.count(p, i, m) - s.levy.atoms()[m].weight * dt);
        x += x * ((s.alpha(0, 0) - c) * dt + s.beta(0, 0) * noise.increment(p, i) + jump);
        CHECK(std::abs(fp.at(p, i + 1) - x) <= 1e-12 * std::max(1.0, std::abs(x)));
      }
    }
  }
}

TEST_CASE("positivity breach is reported, never clamped") {
  const ScenarioSpec s = small_scenario(100, 8);
  const NoiseBundle noise = generate_noise(s);
  try {
    simulate_fsvie(s, noise, ControlFn::constant(200.0));
    FAIL("expected a positivity error");
  } catch (const PositivityError& e) {
    CHECK(e.node() == 1);
    CHECK(e.value() <= 0.0);
  }
}

TEST_CASE("noise must match the scenario") {
  const ScenarioSpec s = small_scenario(20, 8);
  const NoiseBundle other = generate_noise(TimeGrid(1.0, 10), {}, 8, 1, 1);
  CHECK_THROWS_AS(simulate_fsvie(s, other, ControlFn::constant(1.0)), ValidationError);
}

TEST_CASE("first variation ratios and adaptedness") {
  const ScenarioSpec s = fbsvie::testing::with_atom(small_scenario(40, 100), -0.1, 2.0);
  const NoiseBundle noise = generate_noise(s);
  const ControlFn c = ControlFn::constant(1.0);
  const ForwardPaths fp = simulate_fsvie(s, noise, c);
  const std::size_t k = 13;
  const FirstVariation v = first_variation(s, noise, c, fp, k);
  for (std::size_t p = 0; p < fp.n_paths; ++p) {
    for (std::size_t i = 0; i < k; ++i) {
      CHECK(v.brownian_at(p, i) == 0.0);
      CHECK(v.jump_at(0, p, i) == 0.0);
    }
    for (std::size_t i = k; i <= 40; ++i) {
      CHECK(v.brownian_at(p, i) / fp.at(p, i) == doctest::Approx(0.2).epsilon(1e-10));
      CHECK(v.jump_at(0, p, i) / fp.at(p, i) == doctest::Approx(-0.1).epsilon(1e-10));
    }
  }
  CHECK_THROWS_AS(first_variation(s, noise, c, fp, 40), DomainError);
}

TEST_CASE("path summary columns") {
  const ScenarioSpec s = small_scenario(10, 400);
  const NoiseBundle noise = generate_noise(s);
  const ForwardPaths fp = simulate_fsvie(s, noise, ControlFn::constant(1.0));
  const CurveSummary c = summarize_paths(fp);
  REQUIRE(c.t.size() == 11);
  CHECK(c.mean[0] == 1.0);
  CHECK(c.se[0] == 0.0);
  for (std::size_t i = 0; i <= 10; ++i) {
    CHECK(c.q05[i] <= c.q50[i]);
    CHECK(c.q50[i] <= c.q95[i]);
  }
}
