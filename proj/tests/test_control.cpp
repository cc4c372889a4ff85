#include <cmath>

#include <doctest.h>

#include "fbsvie/control.hpp"
#include "support.hpp"

using namespace fbsvie;
using fbsvie::testing::Gen;
using fbsvie::testing::small_scenario;

TEST_CASE("adjoint lambda examples") {
  const TimeGrid g(1.0, 100);
  for (double v : lambda_adjoint(std::vector<double>(g.size(), 0.0), g, GammaConvention::discounting))
    CHECK(v == 1.0);
  const std::vector<double> one(g.size(), 1.0);
  CHECK(lambda_adjoint(one, g, GammaConvention::discounting)[100] == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(lambda_adjoint(one, g, GammaConvention::paper_ode)[100] == doctest::Approx(std::exp(1.0)).epsilon(1e-12));
  CHECK(lambda_adjoint(one, g, GammaConvention::discounting)[0] == 1.0);
}

TEST_CASE("adjoint product examples") {
  const TimeGrid g(1.0, 100);
  const auto p0 = adjoint_product(std::vector<double>(g.size(), 0.0), g, GammaConvention::discounting);
  for (std::size_t i = 0; i <= 100; ++i) CHECK(p0[i] == doctest::Approx(1.0 - g.node(i)).epsilon(1e-12));
  CHECK(p0[100] == 0.0);
  const std::vector<double> one(g.size(), 1.0);
  const auto p1 = adjoint_product(one, g, GammaConvention::discounting);
  CHECK(std::abs(p1[0] - (1.0 - std::exp(-1.0))) <= 0.01 * (1.0 - std::exp(-1.0)));
  CHECK(p1[100] == 0.0);
  for (std::size_t i = 0; i < 100; ++i) CHECK(p1[i + 1] <= p1[i]);
}

TEST_CASE("optimal consumption examples") {
  const TimeGrid g(1.0, 100);
  const auto c0 = cstar_values(std::vector<double>(g.size(), 0.0), g, GammaConvention::discounting);
  CHECK(c0[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c0[50] == doctest::Approx(2.0).epsilon(1e-12));
  const TimeGrid g2(2.0, 100);
  CHECK(cstar_values(std::vector<double>(g2.size(), 0.0), g2, GammaConvention::discounting)[0] ==
        doctest::Approx(0.5).epsilon(1e-12));
  const auto c1 = cstar_values(std::vector<double>(g.size(), 1.0), g, GammaConvention::discounting);
  CHECK(std::abs(c1[0] - 1.58198) <= 0.01 * 1.58198);
}

TEST_CASE("first-order condition under both conventions for random gamma") {
  Gen gen(31);
  for (int trial = 0; trial < 50; ++trial) {
    const TimeGrid g(gen.uniform(0.5, 3.0), gen.index(2, 200));
    std::vector<double> gamma = gen.reals(g.size(), -1.0, 2.0);
    for (auto convention : {GammaConvention::discounting, GammaConvention::paper_ode}) {
      const auto lambda = lambda_adjoint(gamma, g, convention);
      const auto big_p = adjoint_product(gamma, g, convention);
      const auto c = cstar_values(gamma, g, convention);
      for (std::size_t i = 0; i < g.steps(); ++i) CHECK(std::abs(c[i] * big_p[i] - lambda[i]) <= 1e-12);
    }
  }
}

TEST_CASE("c* ignores everything but gamma") {
  Gen gen(32);
  ScenarioSpec base = small_scenario(50, 8);
  base.gamma = gen.reals(51, 0.0, 1.0);
  base = validate_scenario(base);
  const auto reference = ControlFn::theta_scaled_cstar(1.0).values(base);
  for (int trial = 0; trial < 20; ++trial) {
    ScenarioSpec s = base;
    s.initial = gen.uniform(0.1, 10.0);
    s.alpha = gen.kernel(1.0);
    s.beta = gen.kernel(1.0);
    s.levy = gen.levy(2);
    s.pi.clear();
    for (std::size_t m = 0; m < s.levy.size(); ++m) s.pi.push_back(Kernel::constant(gen.uniform(-0.5, 0.5)));
    s = validate_scenario(s);
    CHECK(ControlFn::theta_scaled_cstar(1.0).values(s) == reference);
  }
}

TEST_CASE("control function kinds") {
  const ScenarioSpec s = small_scenario(10, 8);
  CHECK(ControlFn::constant(0.7).values(s) == std::vector<double>(10, 0.7));
  const auto cstar = ControlFn::theta_scaled_cstar(1.0).values(s);
  const auto scaled = ControlFn::theta_scaled_cstar(1.1).values(s);
  const auto shifted = ControlFn::cstar_plus_shift(0.25).values(s);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(cstar[i] == doctest::Approx(1.0 / (1.0 - s.grid.node(i))).epsilon(1e-12));
    CHECK(scaled[i] == doctest::Approx(1.1 * cstar[i]).epsilon(1e-14));
    CHECK(shifted[i] == doctest::Approx(cstar[i] + 0.25).epsilon(1e-14));
  }
  const auto bumped = ControlFn::bump(ControlFn::constant(1.0), 0.4, 0.2, 0.5).values(s);
  for (std::size_t i = 0; i < 10; ++i) CHECK(bumped[i] == ((i == 4 || i == 5) ? 1.5 : 1.0));

  const TimeGrid coarse(1.0, 5);
  const ControlFn table = ControlFn::table(coarse, {1.0, 2.0, 3.0, 4.0, 5.0});
  const auto held = table.values(s);
  for (std::size_t i = 0; i < 10; ++i) CHECK(held[i] == static_cast<double>(i / 2 + 1));

  CHECK_THROWS_AS(ControlFn::bump(ControlFn::constant(1.0), 0.4, 0.1, -2.0).values(s), DomainError);
  CHECK(ControlFn::bump(ControlFn::constant(1.0), 0.4, 0.1, -2.0).raw_values(s)[4] == -1.0);
  CHECK_THROWS_AS(ControlFn::constant(0.0).values(s), DomainError);
}

TEST_CASE("H0 examples") {
  const ScenarioSpec s = reference_scenario();
  CHECK(hamiltonian_h0(0.3, 1.0, 0.0, 1.0, 0.5, 0.0, {}, 1.0, s) == doctest::Approx(-0.475).epsilon(1e-14));
  CHECK(hamiltonian_h0(0.3, 2.3, 0.7, 1.4, 0.0, 0.0, {}, 0.0, s) == 0.0);
  const double h = 1e-5;
  const double dc = (hamiltonian_h0(0.3, 1.0, 0.0, 2.0 + h, 0.5, 0.0, {}, 1.0, s) -
                     hamiltonian_h0(0.3, 1.0, 0.0, 2.0 - h, 0.5, 0.0, {}, 1.0, s)) /
                    (2.0 * h);
  CHECK(std::abs(dc) < 1e-8);
}

TEST_CASE("H1 examples") {
  ScenarioSpec toy = reference_scenario();
  toy.alpha = Kernel::exp_decay(0.05, 1.0);
  toy.beta = Kernel::constant(0.0);
  toy = validate_scenario(toy);
  H1Inputs in;
  in.k = 0;
  in.n_paths = 1;
  for (std::size_t i = 0; i <= 100; ++i) in.p.push_back(1.0 - toy.grid.node(i));
  in.dp_brownian.assign(101, 0.0);
  const Estimate h1 = hamiltonian_h1(0, 1.0, in, toy);
  CHECK(h1.value == doctest::Approx(-0.05 * std::exp(-1.0)).epsilon(1e-4));
  CHECK(h1.value == doctest::Approx(-0.018394).epsilon(1e-4));
  CHECK(hamiltonian_h1(0, 0.0, in, toy).value == 0.0);

  const ScenarioSpec s0 = reference_scenario();
  CHECK(hamiltonian_h1(0, 1.0, in, s0).value == 0.0);
}

TEST_CASE("projected Malliavin derivatives of p match the analytic shortcuts") {
  const ScenarioSpec s = fbsvie::testing::with_atom(small_scenario(40, 2000), -0.1, 0.5);
  const NoiseBundle noise = generate_noise(s);
  const ControlFn c = ControlFn::constant(1.0);
  const ForwardPaths fp = simulate_fsvie(s, noise, c);
  const AdjointState adj = build_adjoint(s, fp);
  for (std::size_t p = 0; p < fp.n_paths; p += 101) {
    CHECK(adj.p[40 * fp.n_paths + p] == 0.0);
    CHECK(adj.p[10 * fp.n_paths + p] == doctest::Approx(adj.big_p[10] / fp.at(p, 10)).epsilon(1e-14));
  }
  const std::size_t k = 12;
  const H1Inputs in = adjoint_derivatives(s, noise, c, fp, adj, k);
  for (std::size_t j = k; j < 40; j += 5) {
    double mean_db = 0.0, mean_dj = 0.0, mean_p = 0.0;
    for (std::size_t p = 0; p < fp.n_paths; ++p) {
      mean_db += in.dp_brownian[j * fp.n_paths + p];
      mean_dj += in.dp_jump[0][j * fp.n_paths + p];
      mean_p += adj.p[j * fp.n_paths + p];
    }
    CHECK(mean_db == doctest::Approx(-0.2 * mean_p).epsilon(1e-10));
    CHECK(mean_dj == doctest::Approx(-mean_p * -0.1 / 0.9).epsilon(1e-10));
  }
  CHECK(hamiltonian_h1(k, 1.0, in, s).value == 0.0);
}

TEST_CASE("concavity probe examples") {
  const ScenarioSpec s = reference_scenario();
  ConcavitySample log_only;
  log_only.t = 0.3;
  log_only.p = 0.0;
  log_only.lambda = 1.0;
  const ConcavityReport r = concavity_probe(s, {log_only});
  CHECK(r.hessian[0](2, 2) == doctest::Approx(-1.0).epsilon(1e-4));
  CHECK(r.hessian[0](0, 0) == doctest::Approx(-1.0).epsilon(1e-4));
  CHECK(r.overall_min == doctest::Approx(-1.0).epsilon(1e-4));

  ConcavitySample flat = log_only;
  flat.lambda = 0.0;
  const ConcavityReport z = concavity_probe(s, {flat});
  CHECK(std::abs(z.min_eigenvalue[0]) < 1e-6);
}

TEST_CASE("log utility oracle examples") {
  const ScenarioSpec s = reference_scenario();
  CHECK(log_utility_oracle(s, ControlFn::constant(1.0)) == doctest::Approx(-0.485).epsilon(1e-9));
  CHECK(std::abs(log_utility_oracle(s, ControlFn::theta_scaled_cstar(1.0)) - 0.015) <= 1e-9);
  // c* is held piecewise constant between nodes, which moves J(1.1 c*) by O(dt^2)
  CHECK(std::abs(log_utility_oracle(s, ControlFn::theta_scaled_cstar(1.1)) - (std::log(1.1) + 1.0 - 1.1 + 0.015)) <=
        1e-5);
  const ScenarioSpec jumps = fbsvie::testing::with_atom(s, -0.1, 0.5);
  CHECK(log_utility_oracle(jumps, ControlFn::constant(1.0)) == doctest::Approx(-0.486340).epsilon(1e-5));
}

TEST_CASE("oracle is maximized at theta = 1") {
  const ScenarioSpec s = reference_scenario();
  const double best = log_utility_oracle(s, ControlFn::theta_scaled_cstar(1.0));
  for (double theta : {0.7, 0.85, 1.15, 1.3}) CHECK(log_utility_oracle(s, ControlFn::theta_scaled_cstar(theta)) < best);
}

TEST_CASE("Monte Carlo J agrees with the oracle for random deterministic controls") {
  Gen gen(33);
  const ScenarioSpec s = small_scenario(50, 4000, 77);
  PerformanceSpec perf;
  perf.levels = 2;
  const NoiseBundle noise = extrapolation_noise(s, 2);
  for (int trial = 0; trial < 6; ++trial) {
    ControlFn c;
    switch (trial % 3) {
      case 0:
        c = ControlFn::constant(gen.uniform(0.3, 2.0));
        break;
      case 1:
        c = ControlFn::theta_scaled_cstar(gen.uniform(0.7, 1.3));
        break;
      default:
        c = ControlFn::bump(ControlFn::constant(1.0), 0.2, 0.3, gen.uniform(0.1, 1.0));
    }
    const PerformanceResult r = performance(s, c, noise, perf);
    CHECK(std::abs(r.j.value - log_utility_oracle(s, c)) <= 3.0 * r.j.se);
    CHECK(r.per_level.size() == 2);
  }
}

TEST_CASE("Gateaux derivative examples") {
  const ScenarioSpec s = small_scenario(50, 2000, 5);
  const NoiseBundle noise = extrapolation_noise(s, 2);
  const PerformanceResult zero = gateaux_derivative(s, ControlFn::constant(1.0), {0.4, 0.1, 0.0}, noise, 1e-3, 2);
  CHECK(zero.j.value == 0.0);
  const PerformanceResult at_one = gateaux_derivative(s, ControlFn::constant(1.0), {0.4, 0.1, 1.0}, noise, 1e-3, 2);
  CHECK(at_one.j.value == doctest::Approx(0.045).epsilon(0.01));
  const PerformanceResult at_opt =
      gateaux_derivative(s, ControlFn::theta_scaled_cstar(1.0), {0.4, 0.1, 1.0}, noise, 1e-3, 2);
  CHECK(std::abs(at_opt.j.value) <= 3.0 * at_opt.j.se + 1e-6);
}

TEST_CASE("utility catalog") {
  CHECK(Utility::log()(std::exp(2.0)) == doctest::Approx(2.0));
  CHECK(Utility::log().derivative(4.0) == 0.25);
  CHECK(Utility::identity()(3.0) == 3.0);
  CHECK(Utility::zero()(3.0) == 0.0);
  CHECK(Utility::power(0.5)(4.0) == doctest::Approx(4.0));
  CHECK_THROWS_AS(Utility::log()(0.0), DomainError);
}
