#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "fbsvie/model.hpp"

namespace fbsvie::testing {

// Small seeded generator for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  std::size_t index(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }
  double normal() { return std::normal_distribution<double>()(rng_); }

  std::vector<double> reals(std::size_t n, double lo, double hi) {
    std::vector<double> v(n);
    for (auto& x : v) x = uniform(lo, hi);
    return v;
  }

  LevyMeasure levy(std::size_t max_atoms) {
    std::vector<LevyAtom> atoms;
    const std::size_t m = index(0, max_atoms);
    for (std::size_t i = 0; i < m; ++i) {
      double e = uniform(-0.8, 0.8);
      if (std::abs(e) < 0.01) e = 0.05;
      atoms.push_back({e, uniform(0.1, 3.0)});
    }
    return LevyMeasure(atoms);
  }

  Kernel kernel(double scale) {
    switch (index(0, 1)) {
      case 0:
        return Kernel::constant(uniform(-scale, scale));
      default:
        return Kernel::exp_decay(uniform(-scale, scale), uniform(0.0, 3.0));
    }
  }

 private:
  std::mt19937_64 rng_;
};

// Reference scenario with a different grid and path count.
inline ScenarioSpec small_scenario(std::size_t n_steps, std::size_t n_paths, std::uint64_t seed = 42) {
  ScenarioSpec s = reference_scenario();
  s.grid = TimeGrid(1.0, n_steps);
  s.gamma = {0.0};
  s.mc.n_paths = n_paths;
  s.mc.seed = seed;
  s.mc.n_blocks = 4;
  return validate_scenario(s);
}

inline ScenarioSpec with_atom(ScenarioSpec s, double size, double weight) {
  s.levy = LevyMeasure({{size, weight}});
  s.pi = {Kernel::constant(size)};
  return validate_scenario(s);
}

}  // namespace fbsvie::testing
