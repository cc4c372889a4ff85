#include <cmath>

#include <doctest.h>

#include "fbsvie/model.hpp"
#include "fbsvie/stats.hpp"
#include "support.hpp"

using namespace fbsvie;
using fbsvie::testing::Gen;

TEST_CASE("time grid examples") {
  const TimeGrid g = build_time_grid(1.0, 4);
  const std::vector<double> expected{0.0, 0.25, 0.5, 0.75, 1.0};
  REQUIRE(g.nodes().size() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) CHECK(g.node(i) == doctest::Approx(expected[i]).epsilon(1e-15));
  CHECK(build_time_grid(2.0, 2).dt() == 1.0);
  CHECK_THROWS_AS(build_time_grid(1.0, 1), ValidationError);
  CHECK_THROWS_AS(build_time_grid(0.0, 10), ValidationError);
  CHECK_THROWS_AS(build_time_grid(-1.0, 10), ValidationError);
}

TEST_CASE("time grid lookups and refinement") {
  const TimeGrid g(1.0, 10);
  CHECK(g.index_of(0.3).value() == 3);
  CHECK_FALSE(g.index_of(0.35).has_value());
  CHECK(g.floor_index(0.35) == 3);
  CHECK(g.floor_index(5.0) == 10);
  const TimeGrid f = g.refined(4);
  CHECK(f.steps() == 40);
  CHECK(f.node(12) == doctest::Approx(g.node(3)));
}

TEST_CASE("kernel examples") {
  CHECK(Kernel::constant(0.05)(0.7, 0.2) == 0.05);
  CHECK(Kernel::exp_decay(0.05, 1.0)(1.0, 0.0) == doctest::Approx(0.05 * std::exp(-1.0)).epsilon(1e-14));
  CHECK(Kernel::exp_decay(0.05, 1.0)(1.0, 0.0) == doctest::Approx(0.018394).epsilon(1e-4));
  CHECK_THROWS_AS(Kernel::constant(0.05)(0.2, 0.7), DomainError);
}

TEST_CASE("table kernel lookups") {
  const TimeGrid g(1.0, 2);
  // rows: K(t0,t0); K(t1,t0) K(t1,t1); K(t2,t0) K(t2,t1) K(t2,t2)
  const Kernel k = Kernel::table(g, {1.0, 2.0, 3.0, 4.0, 5.0, 6.0});
  CHECK(k(0.5, 0.0) == 2.0);
  CHECK(k(1.0, 0.5) == 5.0);
  CHECK(k.at_nodes(g, 2, 2) == 6.0);
  CHECK_THROWS_AS(k(0.3, 0.0), DomainError);
  CHECK_THROWS_AS(k(0.5, 1.0), DomainError);
  CHECK_FALSE(k.t_independent());
  CHECK(Kernel::table(g, {1.0, 1.0, 2.0, 1.0, 2.0, 3.0}).t_independent());
  CHECK_THROWS_AS(Kernel::table(g, {1.0, 2.0}), ValidationError);
}

TEST_CASE("exp_decay derivative matches central differences at second order") {
  Gen gen(11);
  for (int trial = 0; trial < 50; ++trial) {
    const double a = gen.uniform(-1.0, 1.0);
    const double rho = gen.uniform(0.0, 4.0);
    const Kernel k = Kernel::exp_decay(a, rho);
    const double s = gen.uniform(0.0, 0.5);
    const double t = s + gen.uniform(0.1, 0.5);
    CHECK(k.d_first(t, s) == doctest::Approx(-rho * a * std::exp(-rho * (t - s))).epsilon(1e-14));
    double prev = 0.0;
    for (double h : {1e-2, 5e-3}) {
      const double err = std::abs(k.d_first(t, s) - (k(t + h, s) - k(t - h, s)) / (2.0 * h));
      if (prev > 1e-13) CHECK(err < 0.3 * prev);
      prev = err;
    }
  }
  CHECK(Kernel::constant(0.3).d_first(0.5, 0.1) == 0.0);
}

TEST_CASE("levy integral examples") {
  const LevyMeasure m({{-0.1, 0.5}});
  CHECK(levy_integral(m, [](double e) { return e; }) == doctest::Approx(-0.05).epsilon(1e-15));
  CHECK(levy_integral(m, [](double e) { return std::log1p(e) - e; }) == doctest::Approx(-0.002680).epsilon(1e-3));
  CHECK(levy_integral(LevyMeasure{}, [](double) { return 7.0; }) == 0.0);
}

TEST_CASE("levy integral is linear in the integrand") {
  Gen gen(3);
  for (int trial = 0; trial < 100; ++trial) {
    const LevyMeasure m = gen.levy(5);
    const double a = gen.uniform(-3, 3), b = gen.uniform(-3, 3);
    auto f = [](double e) { return std::sin(3 * e); };
    auto g = [](double e) { return e * e - 0.2; };
    const double lhs = levy_integral(m, [&](double e) { return a * f(e) + b * g(e); });
    const double rhs = a * levy_integral(m, f) + b * levy_integral(m, g);
    CHECK(std::abs(lhs - rhs) <= 1e-14 * (1.0 + std::abs(lhs)));
  }
}

TEST_CASE("scenario validation examples") {
  CHECK_NOTHROW(validate_scenario(reference_scenario()));

  ScenarioSpec bad_jump = reference_scenario();
  bad_jump.levy = LevyMeasure({{-1.5, 1.0}});
  bad_jump.pi = {Kernel::constant(-1.5)};
  CHECK_THROWS_WITH_AS(validate_scenario(bad_jump), doctest::Contains("positivity"), ValidationError);

  ScenarioSpec zero_xi = reference_scenario();
  zero_xi.initial = 0.0;
  CHECK_THROWS_AS(validate_scenario(zero_xi), ValidationError);

  ScenarioSpec extra_pi = reference_scenario();
  extra_pi.levy = LevyMeasure({{-0.1, 1.0}});
  extra_pi.pi = {Kernel::constant(-0.1), Kernel::constant(0.2)};
  CHECK_THROWS_AS(validate_scenario(extra_pi), ValidationError);

  ScenarioSpec bad_blocks = reference_scenario();
  bad_blocks.mc.n_blocks = 7;
  CHECK_THROWS_AS(validate_scenario(bad_blocks), ValidationError);
}

TEST_CASE("validated scenarios evaluate every kernel on the grid triangle") {
  Gen gen(5);
  for (int trial = 0; trial < 30; ++trial) {
    ScenarioSpec s = reference_scenario();
    s.grid = TimeGrid(gen.uniform(0.5, 2.0), gen.index(2, 30));
    s.gamma = {gen.uniform(0.0, 1.0)};
    s.alpha = gen.kernel(0.5);
    s.beta = gen.kernel(0.5);
    s.levy = gen.levy(3);
    s.pi.clear();
    for (const auto& a : s.levy.atoms()) s.pi.push_back(Kernel::constant(a.size));
    const ScenarioSpec v = validate_scenario(s);
    CHECK(v.gamma.size() == v.grid.size());
    for (std::size_t i = 0; i < v.grid.size(); ++i)
      for (std::size_t j = 0; j <= i; ++j) {
        CHECK(std::isfinite(v.alpha.at_nodes(v.grid, i, j)));
        CHECK(std::isfinite(v.beta.at_nodes(v.grid, i, j)));
        for (const auto& k : v.pi) CHECK(k.at_nodes(v.grid, i, j) > -1.0);
      }
  }
}

TEST_CASE("reference scenario fields") {
  const ScenarioSpec s = reference_scenario();
  CHECK(s.grid.steps() == 100);
  CHECK(s.grid.horizon() == 1.0);
  CHECK(s.initial == 1.0);
  CHECK(s.alpha(0.5, 0.2) == 0.05);
  CHECK(s.beta(0.5, 0.2) == 0.2);
  CHECK(s.levy.empty());
  CHECK(s.filtration == FiltrationMode::trivial());
  CHECK(s.convention == GammaConvention::discounting);
  CHECK(s.mc.n_paths == 100000);
  CHECK(s.mc.seed == 42);
  CHECK(s.all_kernels_t_independent());
}

TEST_CASE("refinement interpolates gamma and keeps the model") {
  ScenarioSpec s = reference_scenario();
  s.grid = TimeGrid(1.0, 4);
  s.gamma = {0.0, 1.0, 2.0, 3.0, 4.0};
  s = validate_scenario(s);
  const ScenarioSpec r = refine_scenario(s, 2);
  CHECK(r.grid.steps() == 8);
  CHECK(r.gamma[1] == doctest::Approx(0.5));
  CHECK(r.gamma[8] == doctest::Approx(4.0));
  CHECK(gamma_at(s, 0.125) == doctest::Approx(0.5));
}

TEST_CASE("filtration conditioning nodes") {
  const TimeGrid g(1.0, 10);
  CHECK(FiltrationMode::full().conditioning_node(g, 7) == 7);
  CHECK(FiltrationMode::delayed(0.3).conditioning_node(g, 7) == 4);
  CHECK(FiltrationMode::delayed(0.3).conditioning_node(g, 2) == 0);
  CHECK(FiltrationMode::delayed(0.0).effective() == FiltrationMode::Mode::full);
}

TEST_CASE("richardson weights cancel low-order error terms") {
  const auto w2 = richardson_weights(2);
  CHECK(w2[0] == doctest::Approx(-1.0));
  CHECK(w2[1] == doctest::Approx(2.0));
  for (std::size_t L = 1; L <= 4; ++L) {
    const auto w = richardson_weights(L);
    double sum = 0.0;
    for (double v : w) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t p = 1; p < L; ++p) {
      double moment = 0.0;
      for (std::size_t l = 0; l < L; ++l) moment += w[l] * std::pow(0.5, static_cast<double>(p * l));
      CHECK(std::abs(moment) < 1e-12);
    }
  }
}

TEST_CASE("sample estimate and quantile") {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  const Estimate e = sample_estimate(v);
  CHECK(e.value == 2.5);
  CHECK(e.se == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
  CHECK(sample_quantile(v, 0.5) == doctest::Approx(2.5));
  CHECK(sample_quantile(v, 0.0) == 1.0);
  CHECK(sample_quantile(v, 1.0) == 4.0);
}
