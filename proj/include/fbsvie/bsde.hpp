#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "fbsvie/condexp.hpp"
#include "fbsvie/control_fn.hpp"
#include "fbsvie/fsvie.hpp"
#include "fbsvie/paths.hpp"
#include "fbsvie/stats.hpp"

namespace fbsvie {

struct DriverArgs {
  std::size_t step = 0;
  double t = 0.0;
  std::size_t path = 0;
  double y = 0.0;
  double z = 0.0;
  std::span<const double> k;  // one value per atom
};

using Driver = std::function<double(const DriverArgs&)>;

struct BsdeConfig {
  FiltrationMode filtration = FiltrationMode::full();
  int degree = 2;
  // skip the Z and K regressions when the driver ignores them
  bool needs_z = true;
  bool needs_k = true;
};

// Y per node and path; Z and K per step (t_0..t_{n-1}). All node-major.
struct BsdeSolution {
  TimeGrid grid;
  std::size_t n_paths = 0;
  std::size_t n_atoms = 0;
  std::size_t start = 0;
  std::vector<double> y;  // (n+1) x P
  std::vector<double> z;  // n x P
  std::vector<double> k;  // n x M x P
  std::vector<double> r_squared;  // per step, Y regression
  std::vector<double> pathwise;   // terminal + sum_{i >= start} g_i dt, per path
  double y0 = 0.0;
  double se = 0.0;

  double y_at(std::size_t path, std::size_t node) const { return y[node * n_paths + path]; }
  double z_at(std::size_t path, std::size_t step) const { return z[step * n_paths + path]; }
  double k_at(std::size_t path, std::size_t step, std::size_t atom) const {
    return k[(step * n_atoms + atom) * n_paths + path];
  }
  std::span<const double> y_node(std::size_t i) const { return {y.data() + i * n_paths, n_paths}; }
};

// States (B(t_i), N_1(t_i), ..., N_M(t_i)) from the noise itself.
StateProvider noise_state_provider(const NoiseBundle& noise);
// States X(t_i) and/or ln X(t_i) from simulated forward paths.
StateProvider forward_state_provider(const ForwardPaths& paths, const std::vector<StateVariable>& vars);

// Explicit regression scheme on [t_start, T]:
//   Z_i = E[Y_{i+1} dB_i / dt | G_i],  K_im = E[Y_{i+1} Ntilde_im / (w_m dt) | G_i],
// where Y_{i+1} is replaced by its innovation Y_{i+1} - E[Y_{i+1} | G_i] in the
// Z and K targets (same conditional mean, far less variance),
//   Y_i = E[Y_{i+1} + g(t_i, Y_{i+1}, Z_i, K_i) dt | G_i].
// y0 is the mean of Y at t_start; its standard error comes from the pathwise
// sums terminal + sum_i g_i dt, whose mean equals y0.
BsdeSolution solve_bsde(std::span<const double> terminal, const Driver& driver, const NoiseBundle& noise,
                        const StateProvider& states, const BsdeConfig& config, std::size_t start = 0);

// Recursive utility Y(0) for consumption c: terminal 0, driver ln(c X) -+ gamma y.
Estimate recursive_utility(const ScenarioSpec& spec, const ControlFn& control, const ForwardPaths& paths,
                           const NoiseBundle& noise);

// Per-path pathwise utility sum_i lambda_i ln(c_i X_i) dt over t_0..t_{n-1},
// the closed form of the same quantity with deterministic gamma.
std::vector<double> utility_closed_form(const ScenarioSpec& spec, const ControlFn& control,
                                        const ForwardPaths& paths);

// Per-path representation of the utility BSDE solution: terminal + sum g dt.
std::vector<double> recursive_utility_paths(const ScenarioSpec& spec, const ControlFn& control,
                                            const ForwardPaths& paths, const NoiseBundle& noise);

struct BsdeCurve {
  std::vector<double> t, mean_y, se_y, mean_z;
  std::vector<std::vector<double>> mean_k;
};

BsdeCurve summarize_bsde(const BsdeSolution& sol);

}  // namespace fbsvie
