#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "fbsvie/error.hpp"

namespace fbsvie {

// Uniform partition 0 = t_0 < t_1 < ... < t_n = T.
class TimeGrid {
 public:
  TimeGrid() = default;
  TimeGrid(double horizon, std::size_t n_steps);

  double horizon() const { return horizon_; }
  std::size_t steps() const { return n_steps_; }
  std::size_t size() const { return n_steps_ + 1; }
  double dt() const { return horizon_ / static_cast<double>(n_steps_); }
  double node(std::size_t i) const;
  std::vector<double> nodes() const;

  // Index of the node equal to t (within 1e-9 dt), if any.
  std::optional<std::size_t> index_of(double t) const;
  // Largest i with t_i <= t (clamped to [0, n]).
  std::size_t floor_index(double t) const;

  TimeGrid refined(std::size_t factor) const;

  bool operator==(const TimeGrid& other) const = default;

 private:
  double horizon_ = 1.0;
  std::size_t n_steps_ = 100;
};

TimeGrid build_time_grid(double horizon, long long n_steps);

// Deterministic kernel K(t, s) on the triangle 0 <= s <= t <= T.
class Kernel {
 public:
  enum class Kind { constant, exp_decay, table };

  Kernel() = default;
  static Kernel constant(double value);
  // K(t, s) = amplitude * exp(-rate (t - s)).
  static Kernel exp_decay(double amplitude, double rate);
  // Row-major lower triangle over the grid nodes: row i holds K(t_i, t_0..t_i),
  // (n+1)(n+2)/2 values in total.
  static Kernel table(const TimeGrid& grid, std::vector<double> lower_triangle);

  Kind kind() const;
  double operator()(double t, double s) const;
  // First-argument derivative dK/dt (t, s). Table kernels use finite
  // differences along the first index.
  double d_first(double t, double s) const;
  // True when K(t, s) does not depend on t.
  bool t_independent() const;

  // Node-indexed evaluation K(t_i, t_j), j <= i, on a grid compatible with the
  // kernel. Avoids node lookups for table kernels.
  double at_nodes(const TimeGrid& grid, std::size_t i, std::size_t j) const;
  // Evaluation for t-independent kernels at any s in [0, T]; table kernels hold
  // the value of the last node at or before s.
  double hold_in_s(double s) const;

  // Kind-specific data.
  double value() const;
  double amplitude() const;
  double rate() const;
  const TimeGrid& table_grid() const;
  const std::vector<double>& table_values() const;

 private:
  struct Constant {
    double value = 0.0;
  };
  struct ExpDecay {
    double amplitude = 0.0;
    double rate = 0.0;
  };
  struct Table {
    TimeGrid grid;
    std::vector<double> values;
  };
  std::variant<Constant, ExpDecay, Table> data_{Constant{}};

  double table_at(std::size_t i, std::size_t j) const;
};

struct LevyAtom {
  double size = 0.0;
  double weight = 0.0;

  bool operator==(const LevyAtom&) const = default;
};

// Finite discrete Levy measure nu = sum_m w_m delta_{e_m}.
class LevyMeasure {
 public:
  LevyMeasure() = default;
  explicit LevyMeasure(std::vector<LevyAtom> atoms);

  const std::vector<LevyAtom>& atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }
  bool empty() const { return atoms_.empty(); }
  double total_mass() const;

  bool operator==(const LevyMeasure&) const = default;

 private:
  std::vector<LevyAtom> atoms_;
};

// sum_m w_m f(e_m)
double levy_integral(const LevyMeasure& measure, const std::function<double(double)>& f);

struct FiltrationMode {
  enum class Mode { full, trivial, delay };
  Mode mode = Mode::full;
  double delay = 0.0;

  static FiltrationMode full() { return {Mode::full, 0.0}; }
  static FiltrationMode trivial() { return {Mode::trivial, 0.0}; }
  static FiltrationMode delayed(double delay) { return {Mode::delay, delay}; }

  // delay mode with zero delay behaves as full mode
  Mode effective() const;
  // Node at which information is available when projecting at node i.
  std::size_t conditioning_node(const TimeGrid& grid, std::size_t i) const;

  bool operator==(const FiltrationMode&) const = default;
};

// discounting: lambda(t) = exp(-int gamma), driver ln(cX) - gamma y
// paper_ode:   lambda(t) = exp(+int gamma), driver ln(cX) + gamma y
enum class GammaConvention { discounting, paper_ode };

enum class StateVariable { x, log_x };

struct McSettings {
  std::size_t n_paths = 100000;
  std::uint64_t seed = 42;
  std::size_t n_blocks = 8;
};

struct RegressionSettings {
  int degree = 2;
  std::vector<StateVariable> state_variables{StateVariable::x};
};

struct ScenarioSpec {
  TimeGrid grid;
  double initial = 1.0;
  Kernel alpha;
  Kernel beta;
  // one (t, s)-kernel per Levy atom: pi(t, s, e_m) = pi[m](t, s)
  std::vector<Kernel> pi;
  LevyMeasure levy;
  // gamma on the grid nodes (n+1 values); a single value is broadcast
  std::vector<double> gamma{0.0};
  FiltrationMode filtration;
  GammaConvention convention = GammaConvention::discounting;
  McSettings mc;
  RegressionSettings regression;

  bool all_kernels_t_independent() const;
};

// Checks every scenario invariant and returns the normalized spec (gamma
// broadcast to the grid, zero-delay filtration mapped to full).
ScenarioSpec validate_scenario(ScenarioSpec raw);

// T=1, n=100, xi=1, gamma=0, alpha=0.05, beta=0.2, no jumps, trivial
// filtration, discounting, 100000 paths, seed 42.
ScenarioSpec reference_scenario();

// Same model on a grid with `factor` times as many steps. gamma is linearly
// interpolated; table kernels cannot be refined.
ScenarioSpec refine_scenario(const ScenarioSpec& spec, std::size_t factor);

// gamma on a grid, linearly interpolated between nodes
double gamma_at(const ScenarioSpec& spec, double t);

}  // namespace fbsvie
