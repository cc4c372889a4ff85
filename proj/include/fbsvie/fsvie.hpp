#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fbsvie/control_fn.hpp"
#include "fbsvie/model.hpp"
#include "fbsvie/paths.hpp"
#include "fbsvie/stats.hpp"

namespace fbsvie {

// X(t_i) per path, node-major ((n+1) x n_paths).
struct ForwardPaths {
  TimeGrid grid;
  std::size_t n_paths = 0;
  std::vector<double> x;
  bool positive_state = true;
  // X(T) > 0 on every path. Only t_0..t_{n-1} are guarded, since controls
  // such as c* drive X(T) through zero on the last step.
  bool terminal_positive = true;

  double at(std::size_t path, std::size_t node) const { return x[node * n_paths + path]; }
  std::span<const double> node(std::size_t i) const { return {x.data() + i * n_paths, n_paths}; }
};

struct SimulateOptions {
  bool positive_state = true;
  double floor = 1e-12;
};

// Left-point Euler for the linear Volterra equation
//   X(t_i) = xi + sum_{j<i} [(alpha(t_i,t_j) - c_j) X_j dt + beta(t_i,t_j) X_j dB_j
//                            + X_j sum_m pi_m(t_i,t_j) (N_jm - w_m dt)].
// The full triangular sum is evaluated for every node; when all kernels are
// t-independent the sums are accumulated incrementally in the same order.
ForwardPaths simulate_fsvie(const ScenarioSpec& spec, const NoiseBundle& noise, const ControlFn& control,
                            const SimulateOptions& options = {});

enum class QuadratureRule { trapezoid, left_point };

// Mean of the linear SVIE: m(t) = xi + int_0^t (alpha(t,s) - c(s)) m(s) ds.
// The trapezoid rule holds c(T) at c(t_{n-1}); left_point reproduces the exact
// expectation of the Euler scheme.
std::vector<double> forward_mean_oracle(const ScenarioSpec& spec, const ControlFn& control,
                                        QuadratureRule rule = QuadratureRule::trapezoid);

// Pathwise derivative of X with respect to the noise at t_k.
struct FirstVariation {
  std::size_t k = 0;
  std::size_t n_paths = 0;
  std::vector<double> brownian;           // (n+1) x n_paths
  std::vector<std::vector<double>> jump;  // per atom, (n+1) x n_paths

  double brownian_at(std::size_t path, std::size_t node) const { return brownian[node * n_paths + path]; }
  double jump_at(std::size_t atom, std::size_t path, std::size_t node) const {
    return jump[atom][node * n_paths + path];
  }
};

FirstVariation first_variation(const ScenarioSpec& spec, const NoiseBundle& noise, const ControlFn& control,
                               const ForwardPaths& paths, std::size_t k);

struct CurveSummary {
  std::vector<double> t, mean, se, q05, q50, q95;
};

CurveSummary summarize_paths(const ForwardPaths& paths);

}  // namespace fbsvie
