#include <cmath>

#include <doctest.h>

#include "fbsvie/malliavin.hpp"
#include "support.hpp"

using namespace fbsvie;
using fbsvie::testing::Gen;

namespace {

void check_values(const std::vector<double>& got, const std::vector<double>& want, double tol) {
  REQUIRE(got.size() == want.size());
  for (std::size_t p = 0; p < got.size(); ++p) CHECK(std::abs(got[p] - want[p]) <= tol * (1.0 + std::abs(want[p])));
}

Functional polynomial(const Functional& x, const std::vector<double>& c) {
  Functional out = Functional::constant(c[0]);
  Functional power = Functional::constant(1.0);
  for (std::size_t k = 1; k < c.size(); ++k) {
    power = power * x;
    out = out + c[k] * power;
  }
  return out;
}

}  // namespace

TEST_CASE("Brownian derivative examples") {
  const TimeGrid g(1.0, 20);
  const NoiseBundle noise = generate_noise(g, {}, 50, 1, 1);
  FunctionalEvaluator ev(noise);
  const Functional b1 = Functional::brownian(1.0);

  for (std::size_t k : {0u, 7u, 19u}) {
    const Functional d = hida_derivative_brownian(b1, g, k);
    CHECK(d.is_constant());
    CHECK(d.constant_value() == 1.0);
  }

  const Functional d2 = hida_derivative_brownian(b1 * b1, g, 4);
  CHECK(d2.degree() == 1);
  auto twice = ev.evaluate(b1, 20);
  for (auto& v : twice) v *= 2.0;
  check_values(ev.evaluate(d2, 20), twice, 1e-14);

  const Functional dc = hida_derivative_brownian(Functional::constant(5.0), g, 3);
  CHECK(dc.is_constant());
  CHECK(dc.constant_value() == 0.0);
}

TEST_CASE("jump derivative examples") {
  const TimeGrid g(1.0, 20);
  const LevyMeasure levy({{-0.1, 2.0}});
  const NoiseBundle noise = generate_noise(g, levy, 50, 2, 1);
  FunctionalEvaluator ev(noise);
  const Functional n1 = Functional::compensated_count(1.0);

  const auto ones = std::vector<double>(50, 1.0);
  check_values(ev.evaluate(hida_derivative_jump(n1, g, levy, 5, 0), 20), ones, 1e-14);

  auto expected = ev.evaluate(n1, 20);
  for (auto& v : expected) v = 2.0 * v + 1.0;
  check_values(ev.evaluate(hida_derivative_jump(n1 * n1, g, levy, 5, 0), 20), expected, 1e-12);

  const Functional dc = hida_derivative_jump(Functional::constant(3.0), g, levy, 5, 0);
  CHECK(dc.is_constant());
  CHECK(dc.constant_value() == 0.0);
}

TEST_CASE("derivatives of adapted values vanish after their time") {
  const TimeGrid g(1.0, 20);
  const LevyMeasure levy({{0.4, 1.0}});
  const NoiseBundle noise = generate_noise(g, levy, 40, 3, 1);
  FunctionalEvaluator ev(noise);
  const Functional f = Functional::brownian(0.25) * Functional::compensated_count(0.25) + Functional::brownian(0.25);
  const std::vector<double> zeros(40, 0.0);
  for (std::size_t k = 5; k < 20; ++k) {
    check_values(ev.evaluate(hida_derivative_brownian(f, g, k), 20), zeros, 0.0);
    check_values(ev.evaluate(hida_derivative_jump(f, g, levy, k, 0), 20), zeros, 0.0);
  }
}

TEST_CASE("chain rules on random polynomials") {
  Gen gen(4);
  const TimeGrid g(1.0, 10);
  const LevyMeasure levy({{0.5, 1.5}});
  const NoiseBundle noise = generate_noise(g, levy, 30, 5, 1);
  FunctionalEvaluator ev(noise);
  const Functional b = Functional::brownian(1.0);
  const Functional n = Functional::compensated_count(1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto c = gen.reals(gen.index(1, 5), -2.0, 2.0);
    const Functional pb = polynomial(b, c);
    const Functional pn = polynomial(n, c);
    const auto bv = ev.evaluate(b, 10);
    const auto nv = ev.evaluate(n, 10);
    std::vector<double> dp(30), diff(30);
    for (std::size_t p = 0; p < 30; ++p) {
      double deriv = 0.0, at = 0.0, shifted = 0.0;
      for (std::size_t k = 0; k < c.size(); ++k) {
        if (k > 0) deriv += static_cast<double>(k) * c[k] * std::pow(bv[p], static_cast<double>(k - 1));
        at += c[k] * std::pow(nv[p], static_cast<double>(k));
        shifted += c[k] * std::pow(nv[p] + 1.0, static_cast<double>(k));
      }
      dp[p] = deriv;
      diff[p] = shifted - at;
    }
    const std::size_t k = gen.index(0, 9);
    check_values(ev.evaluate(hida_derivative_brownian(pb, g, k), 10), dp, 1e-10);
    check_values(ev.evaluate(hida_derivative_jump(pn, g, levy, k, 0), 10), diff, 1e-10);
  }
}

TEST_CASE("degree above four is rejected") {
  const Functional b = Functional::brownian(1.0);
  const Functional b4 = b * b * b * b;
  CHECK(b4.degree() == 4);
  CHECK_THROWS_AS(b4 * b, ValidationError);
}

TEST_CASE("Brownian duality examples") {
  const NoiseBundle noise = generate_noise(TimeGrid(1.0, 100), {}, 40000, 6, 8);
  const Functional b1 = Functional::brownian(1.0);
  const auto within = [](const DualityResult& r, double expected) {
    CHECK(std::abs(r.lhs - expected) <= 3.0 * r.se_lhs + 1e-12);
    CHECK(std::abs(r.rhs - expected) <= 3.0 * r.se_rhs + 1e-12);
  };
  within(verify_duality_brownian(b1 * b1, Functional::brownian_running(), noise), 1.0);
  within(verify_duality_brownian(b1, Functional::constant(1.0), noise), 1.0);
  within(verify_duality_brownian(Functional::constant(5.0), Functional::brownian_running(), noise), 0.0);
}

TEST_CASE("jump duality examples") {
  const NoiseBundle noise = generate_noise(TimeGrid(1.0, 100), LevyMeasure({{-0.1, 2.0}}), 40000, 7, 8);
  const Functional n1 = Functional::compensated_count(1.0);
  const std::vector<Functional> one{Functional::constant(1.0)};
  const auto within = [](const DualityResult& r, double expected) {
    CHECK(std::abs(r.lhs - expected) <= 3.0 * r.se_lhs + 1e-12);
    CHECK(std::abs(r.rhs - expected) <= 3.0 * r.se_rhs + 1e-12);
  };
  within(verify_duality_jump(n1 * n1, one, noise), 2.0);
  within(verify_duality_jump(n1, one, noise), 2.0);
  within(verify_duality_jump(Functional::constant(5.0), one, noise), 0.0);
}

TEST_CASE("Clark-Ocone reconstruction error shrinks like 2/n") {
  const Functional b1 = Functional::brownian(1.0);
  double previous = 1e300;
  for (std::size_t n : {10u, 40u}) {
    const NoiseBundle noise = generate_noise(TimeGrid(1.0, n), {}, 20000, 8, 4);
    const double mse = clark_ocone_mse(b1 * b1, noise);
    CHECK(mse == doctest::Approx(2.0 / static_cast<double>(n)).epsilon(0.1));
    CHECK(mse < previous);
    previous = mse;
  }
}

TEST_CASE("built-in duality table") {
  const auto rows = builtin_duality_checks(20000, 9, 4);
  CHECK(rows.size() == 6);
  for (const auto& r : rows) {
    CHECK(std::isfinite(r.z_score()));
    CHECK_MESSAGE(r.pass(), r.name);
  }
}
