#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fbsvie/condexp.hpp"
#include "fbsvie/control_fn.hpp"
#include "fbsvie/fsvie.hpp"
#include "fbsvie/paths.hpp"
#include "fbsvie/stats.hpp"

namespace fbsvie {

// H0 = (alpha(t,t) - c) p x + beta(t,t) q x + sum_m pi_m(t,t) x r_m w_m
//      + (ln c + ln x -+ gamma y) lambda
// with the gamma sign of the scenario convention.
double hamiltonian_h0(double t, double x, double y, double c, double p, double q, std::span<const double> r,
                      double lambda, const ScenarioSpec& spec);

// Inputs of the memory Hamiltonian at the node t_k: per-path values on the
// nodes t_k..t_n of p(s), E[D_{t_k} p(s) | F_{t_k}] and, per atom,
// E[D_{t_k,e_m} p(s) | F_{t_k}]. All node-major over (n+1) nodes.
struct H1Inputs {
  std::size_t k = 0;
  std::size_t n_paths = 0;
  std::vector<double> p;
  std::vector<double> dp_brownian;
  std::vector<std::vector<double>> dp_jump;
};

// H1 = int_t^T [d1 alpha(s,t) x p(s) + d1 beta(s,t) x E[D_t p(s)|F_t]
//               + sum_m d1 pi_m(s,t) x E[D_{t,e_m} p(s)|F_t] w_m] ds,
// averaged over paths, trapezoid in s. Kernels constant in their first
// argument contribute exactly nothing.
Estimate hamiltonian_h1(std::size_t k, double x, const H1Inputs& in, const ScenarioSpec& spec);

// Adjoint quantities of the consumption problem: lambda and P are
// deterministic; p = P / X per path (p(T) = 0).
struct AdjointState {
  std::vector<double> lambda;
  std::vector<double> big_p;
  std::size_t n_paths = 0;
  std::vector<double> p;  // (n+1) x n_paths
};

AdjointState build_adjoint(const ScenarioSpec& spec, const ForwardPaths& paths);

// Projected Malliavin derivatives of p at t_k from the first variation of X:
//   D_t p(s) = -P(s) X(s)^{-2} D_t X(s),
//   D_{t,e} p(s) = P(s) / (X(s) + D_{t,e} X(s)) - P(s) / X(s),
// each projected on the states X(t_k).
H1Inputs adjoint_derivatives(const ScenarioSpec& spec, const NoiseBundle& noise, const ControlFn& control,
                             const ForwardPaths& paths, const AdjointState& adjoint, std::size_t k);

struct ConcavitySample {
  double t = 0.0;
  double x = 1.0;
  double y = 0.0;
  double c = 1.0;
  double p = 0.0;
  double q = 0.0;
  std::vector<double> r;
  double lambda = 1.0;
  // H1 per unit of x (H1 is linear in x for this model)
  double h1_per_x = 0.0;
};

struct ConcavityReport {
  std::vector<double> min_eigenvalue;
  std::vector<Eigen::Matrix3d> hessian;
  double overall_min = 0.0;
};

// Central-difference Hessian of H0 + H1 in (x, y, c), step 1e-4 relative.
ConcavityReport concavity_probe(const ScenarioSpec& spec, const std::vector<ConcavitySample>& samples);

// Catalog for f (applied to the consumption flow c X), phi (to X(T)) and psi
// (to Y(0)).
struct Utility {
  enum class Kind { zero, identity, log, power };
  Kind kind = Kind::zero;
  double exponent = 0.5;

  static Utility zero() { return {Kind::zero, 0.0}; }
  static Utility identity() { return {Kind::identity, 0.0}; }
  static Utility log() { return {Kind::log, 0.0}; }
  static Utility power(double g) { return {Kind::power, g}; }

  double operator()(double v) const;
  double derivative(double v) const;
};

struct PerformanceSpec {
  Utility f = Utility::zero();
  Utility phi = Utility::zero();
  Utility psi = Utility::identity();
  // nested grids n, 2n, ..., 2^{levels-1} n with Richardson weights; the
  // noise must then live on the finest grid
  std::size_t levels = 1;
};

struct PerformanceResult {
  Estimate j;
  std::vector<Estimate> per_level;  // plain estimate on each grid
};

// J(c) = E[int f(c X) ds + phi(X(T)) + psi(Y(0))], Y(0) from the recursive
// utility BSDE. Per-path contributions are combined across levels on the same
// paths, so the standard error accounts for the extrapolation.
PerformanceResult performance(const ScenarioSpec& spec, const ControlFn& control, const NoiseBundle& noise,
                              const PerformanceSpec& perf = {});

// Per-path contributions of the Richardson combination used by performance().
std::vector<double> extrapolated_performance_paths(const ScenarioSpec& spec, const ControlFn& control,
                                                   const NoiseBundle& noise, const PerformanceSpec& perf = {});

// Per-path J contributions on the scenario grid (mean = J).
std::vector<double> performance_paths(const ScenarioSpec& spec, const ControlFn& control, const NoiseBundle& noise,
                                      const PerformanceSpec& perf);

// Exact J for t-independent kernels and deterministic c via E ln X from Ito's
// formula, on 10 n cells with 5-point Gauss-Legendre.
double log_utility_oracle(const ScenarioSpec& spec, const ControlFn& control);

struct Bump {
  double start = 0.0;
  double width = 0.1;
  double height = 1.0;
};

// (J(c + theta mu) - J(c - theta mu)) / (2 theta) on common noise.
PerformanceResult gateaux_derivative(const ScenarioSpec& spec, const ControlFn& base, const Bump& bump,
                                     const NoiseBundle& noise, double theta = 1e-3, std::size_t levels = 1);

// Noise on the finest grid of an extrapolation with `levels` levels.
NoiseBundle extrapolation_noise(const ScenarioSpec& spec, std::size_t levels);

}  // namespace fbsvie
