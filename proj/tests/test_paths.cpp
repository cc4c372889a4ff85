#include <cmath>
#include <sstream>

#include <doctest.h>

#include "fbsvie/paths.hpp"
#include "fbsvie/stats.hpp"
#include "support.hpp"

using namespace fbsvie;

TEST_CASE("regeneration is bit-identical") {
  const TimeGrid g(1.0, 20);
  const LevyMeasure m({{-0.1, 2.0}, {0.3, 0.5}});
  const NoiseBundle a = generate_noise(g, m, 400, 9, 4);
  const NoiseBundle b = generate_noise(g, m, 400, 9, 4);
  CHECK(a == b);
  const NoiseBundle c = generate_noise(g, m, 400, 10, 4);
  CHECK_FALSE(a == c);
}

TEST_CASE("block partition must divide the path count") {
  CHECK_THROWS_AS(generate_noise(TimeGrid(1.0, 10), {}, 100, 1, 7), ValidationError);
  CHECK_THROWS_AS(generate_noise(TimeGrid(1.0, 10), {}, 0, 1, 1), ValidationError);
  const NoiseBundle b = generate_noise(TimeGrid(1.0, 10), {}, 100, 1, 4);
  CHECK(b.block_range(0) == std::pair<std::size_t, std::size_t>{0, 25});
  CHECK(b.block_range(3) == std::pair<std::size_t, std::size_t>{75, 100});
}

TEST_CASE("Brownian increments have variance dt") {
  const TimeGrid g(1.0, 100);
  const NoiseBundle b = generate_noise(g, {}, 100000, 42, 8);
  for (std::size_t i : {0u, 50u, 99u}) {
    const auto inc = b.increments(i);
    std::vector<double> sq(inc.begin(), inc.end());
    for (auto& v : sq) v *= v;
    const Estimate var = sample_estimate(sq);
    CHECK(std::abs(var.value - 0.01) <= 3.0 * var.se);
    const Estimate mean = sample_estimate(inc);
    CHECK(std::abs(mean.value) <= 3.0 * mean.se);
  }
}

TEST_CASE("mean total jump count equals w T") {
  const TimeGrid g(1.0, 100);
  const NoiseBundle b = generate_noise(g, LevyMeasure({{-0.1, 2.0}}), 20000, 42, 8);
  std::vector<double> totals(b.n_paths(), 0.0);
  for (std::size_t i = 0; i < g.steps(); ++i)
    for (std::size_t p = 0; p < b.n_paths(); ++p) totals[p] += b.count(p, i, 0);
  const Estimate e = sample_estimate(totals);
  CHECK(std::abs(e.value - 2.0) <= 3.0 * e.se);
}

TEST_CASE("compensated jump sum examples") {
  const TimeGrid g(1.0, 100);
  const NoiseBundle none = generate_noise(g, {}, 8, 1, 1);
  CHECK(compensated_jump_sum(none, 3, 5, [](double e) { return e; }) == 0.0);

  const NoiseBundle b = generate_noise(g, LevyMeasure({{-0.1, 0.5}}), 4000, 1, 4);
  bool saw_zero = false, saw_one = false;
  for (std::size_t p = 0; p < b.n_paths() && !(saw_zero && saw_one); ++p) {
    for (std::size_t i = 0; i < g.steps(); ++i) {
      const double v = compensated_jump_sum(b, p, i, [](double e) { return e; });
      if (b.count(p, i, 0) == 0 && !saw_zero) {
        CHECK(v == doctest::Approx(0.0005).epsilon(1e-12));
        saw_zero = true;
      }
      if (b.count(p, i, 0) == 1 && !saw_one) {
        CHECK(v == doctest::Approx(-0.0995).epsilon(1e-12));
        saw_one = true;
      }
    }
  }
  CHECK(saw_zero);
  CHECK(saw_one);
}

TEST_CASE("compensated sums have mean zero and variance total mass times T") {
  const TimeGrid g(1.0, 50);
  const LevyMeasure m({{-0.2, 1.5}, {0.4, 0.7}});
  const NoiseBundle b = generate_noise(g, m, 40000, 5, 8);
  std::vector<double> step(b.n_paths()), total(b.n_paths(), 0.0);
  for (std::size_t i = 0; i < g.steps(); ++i)
    for (std::size_t p = 0; p < b.n_paths(); ++p) {
      const double v = compensated_jump_sum(b, p, i, [](double) { return 1.0; });
      if (i == 17) step[p] = v;
      total[p] += v;
    }
  const Estimate s = sample_estimate(step);
  CHECK(std::abs(s.value) <= 3.0 * s.se);
  const Estimate t = sample_estimate(total);
  CHECK(std::abs(t.value) <= 3.0 * t.se);
  std::vector<double> sq(total);
  for (auto& v : sq) v = v * v;
  const Estimate var = sample_estimate(sq);
  CHECK(std::abs(var.value - m.total_mass()) <= 3.0 * var.se);
}

TEST_CASE("coarsening sums consecutive steps") {
  const TimeGrid g(1.0, 8);
  const NoiseBundle fine = generate_noise(g, LevyMeasure({{0.2, 3.0}}), 16, 3, 2);
  const NoiseBundle coarse = coarsen(fine, 2);
  CHECK(coarse.n_steps() == 4);
  for (std::size_t p = 0; p < 16; ++p)
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(coarse.increment(p, i) == fine.increment(p, 2 * i) + fine.increment(p, 2 * i + 1));
      CHECK(coarse.count(p, i, 0) == fine.count(p, 2 * i, 0) + fine.count(p, 2 * i + 1, 0));
    }
  CHECK_THROWS_AS(coarsen(fine, 3), ValidationError);
}

TEST_CASE("accumulated levels end at the summed noise") {
  const TimeGrid g(1.0, 10);
  const NoiseBundle b = generate_noise(g, LevyMeasure({{0.2, 3.0}}), 12, 4, 3);
  const NoiseLevels lv = accumulate_levels(b);
  for (std::size_t p = 0; p < 12; ++p) {
    double bsum = 0.0, nsum = 0.0;
    for (std::size_t i = 0; i < 10; ++i) {
      bsum += b.increment(p, i);
      nsum += b.count(p, i, 0);
    }
    CHECK(lv.brownian_at(0)[p] == 0.0);
    CHECK(lv.brownian_at(10)[p] == doctest::Approx(bsum).epsilon(1e-14));
    CHECK(lv.counts_at(10, 0)[p] == nsum);
  }
}

TEST_CASE("binary dump round-trips") {
  const TimeGrid g(1.0, 6);
  const LevyMeasure m({{-0.3, 1.0}});
  const NoiseBundle b = generate_noise(g, m, 10, 77, 2);
  std::stringstream buf;
  write_noise(b, buf);
  const NoiseBundle r = read_noise(buf, g, m, 2);
  CHECK(r == b);

  std::stringstream truncated(buf.str().substr(0, 40));
  CHECK_THROWS_AS(read_noise(truncated, g, m, 2), IoError);
  std::stringstream wrong(buf.str());
  CHECK_THROWS_AS(read_noise(wrong, TimeGrid(1.0, 7), m, 2), IoError);
}
