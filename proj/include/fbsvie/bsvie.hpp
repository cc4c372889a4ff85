#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "fbsvie/condexp.hpp"
#include "fbsvie/paths.hpp"

namespace fbsvie {

// Arguments of a BSVIE driver g(t_i, s_j, y(s_j), z(t_i, s_j), k(t_i, s_j, .)).
struct BsvieDriverArgs {
  std::size_t i = 0;  // Volterra parameter node t_i
  std::size_t j = 0;  // running node s_j >= t_i
  double t = 0.0;
  double s = 0.0;
  std::size_t path = 0;
  double y = 0.0;
  double z = 0.0;
  std::span<const double> k;
};

struct BsvieDriver {
  std::function<double(const BsvieDriverArgs&)> fn;
  bool uses_y = true;
  bool uses_z = false;
  bool uses_k = false;
  double lipschitz = 0.0;  // reported only

  static BsvieDriver zero();
};

struct BsvieConfig {
  FiltrationMode filtration = FiltrationMode::full();
  int degree = 2;
  double beta_w = 20.0;
  double tol = 1e-6;
  std::size_t max_iter = 50;
};

// A candidate (Y, Z, K): Y per path on every node, Z(t_i, s_j) and
// K(t_i, s_j, e_m) for i <= j <= n-1 as projections on the per-node bases.
struct BsvieTriple {
  TimeGrid grid;
  std::size_t n_paths = 0;
  std::size_t n_atoms = 0;
  std::shared_ptr<const std::vector<Projector>> projectors;  // nodes 0..n-1
  std::vector<double> y;                                     // (n+1) x P
  std::vector<ProjectionFn> z;                               // triangle
  std::vector<ProjectionFn> k;                               // triangle x M

  std::size_t tri(std::size_t i, std::size_t j) const;
  std::size_t triangle_size() const { return grid.steps() * (grid.steps() + 1) / 2; }
  double y_at(std::size_t path, std::size_t node) const { return y[node * n_paths + path]; }
  std::span<const double> y_node(std::size_t i) const { return {y.data() + i * n_paths, n_paths}; }
  const ProjectionFn& z_fn(std::size_t i, std::size_t j) const { return z[tri(i, j)]; }
  const ProjectionFn& k_fn(std::size_t i, std::size_t j, std::size_t m) const { return k[tri(i, j) * n_atoms + m]; }
  double z_at(std::size_t i, std::size_t j, std::size_t path) const;
  double k_at(std::size_t i, std::size_t j, std::size_t m, std::size_t path) const;
};

// Y from per-path values, Z = K = 0.
BsvieTriple make_triple(const TimeGrid& grid, std::size_t n_atoms, std::vector<double> y, std::size_t n_paths,
                        std::shared_ptr<const std::vector<Projector>> projectors = nullptr);

// Squared H^2_beta norm: trapezoid in t, left point in s.
double weighted_norm(const BsvieTriple& triple, double beta_w, const LevyMeasure& levy = {});
double weighted_distance(const BsvieTriple& a, const BsvieTriple& b, double beta_w, const LevyMeasure& levy = {});

// One regression basis per node, on the states available at that node.
std::shared_ptr<const std::vector<Projector>> build_projectors(const NoiseBundle& noise, const StateProvider& states,
                                                               const BsvieConfig& config);

// zeta: (n+1) x P terminal values, zeta(t_i) in row i.
// Solves, for every node t_i, the BSDE on [t_i, T] with terminal zeta(t_i) and
// the driver evaluated at the frozen triple; Y(t_i) is its value at t_i.
BsvieTriple solve_family_step(std::span<const double> zeta, const BsvieDriver& driver, const BsvieTriple& frozen,
                              const NoiseBundle& noise);

// Same, for a single parameter node; returns Y(t_i) per path.
std::vector<double> solve_family_node(std::size_t i, std::span<const double> zeta, const BsvieDriver& driver,
                                      const BsvieTriple& frozen, const NoiseBundle& noise);

struct BsvieSolution {
  BsvieTriple triple;
  std::vector<double> distances;  // weighted distance of pass k to pass k-1
  std::vector<double> norms;      // weighted norm of each pass
  std::size_t iterations = 0;
  bool converged = false;
};

// Picard iteration of solve_family_step on fixed noise, from `initial` or the
// zero triple. Stops when the distance falls below tol times the norm of the
// first pass (compared as norms, not squares); throws ConvergenceError with the
// log otherwise.
BsvieSolution solve_bsvie(std::span<const double> zeta, const BsvieDriver& driver, const NoiseBundle& noise,
                          const StateProvider& states, const BsvieConfig& config,
                          const BsvieTriple* initial = nullptr);

// E int int (dZ/dt)^2 ds dt by first-index differences over the overlapping
// triangle.
double z_time_derivative_norm(const BsvieTriple& triple);

}  // namespace fbsvie
