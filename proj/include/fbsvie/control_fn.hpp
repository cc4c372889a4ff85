#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "fbsvie/model.hpp"

namespace fbsvie {

// Deterministic consumption rate, evaluated at the left nodes t_0..t_{n-1}.
//
// Table controls remember the grid they were given on and hold their values
// piecewise-constant on finer grids. The c*-based kinds are recomputed from the
// scenario's gamma on whatever grid they are evaluated.
class ControlFn {
 public:
  enum class Kind { constant, table, theta_scaled_cstar, cstar_plus_shift, bump };

  ControlFn() = default;
  static ControlFn constant(double value);
  // n values for the nodes t_0..t_{n-1} of `grid`
  static ControlFn table(const TimeGrid& grid, std::vector<double> values);
  static ControlFn theta_scaled_cstar(double theta);
  static ControlFn cstar_plus_shift(double shift);
  // base + height on the nodes t_a <= t_i < t_a + width
  static ControlFn bump(const ControlFn& base, double start, double width, double height);

  Kind kind() const { return kind_; }
  // constant value, theta, shift or bump height
  double parameter() const { return parameter_; }
  const ControlFn* base() const { return base_.get(); }
  double start() const { return start_; }
  double width() const { return width_; }

  // Values at t_0..t_{n-1} of the scenario grid; throws DomainError if any is
  // not strictly positive.
  std::vector<double> values(const ScenarioSpec& spec) const;
  // Same without the positivity check.
  std::vector<double> raw_values(const ScenarioSpec& spec) const;

 private:
  Kind kind_ = Kind::constant;
  double parameter_ = 1.0;
  TimeGrid table_grid_;
  std::vector<double> table_;
  std::shared_ptr<const ControlFn> base_;
  double start_ = 0.0;
  double width_ = 0.0;
};

// lambda(t_i) = exp(-+ sum_{j<i} gamma(t_j) dt); minus under discounting.
std::vector<double> lambda_adjoint(const std::vector<double>& gamma, const TimeGrid& grid,
                                   GammaConvention convention);

// P(t_i) = sum_{j=i}^{n-1} lambda(t_j) dt, P(t_n) = 0.
std::vector<double> adjoint_product(const std::vector<double>& gamma, const TimeGrid& grid,
                                    GammaConvention convention);

// c*(t_i) = lambda(t_i) / P(t_i) for i < n, as a table control.
ControlFn optimal_consumption(const std::vector<double>& gamma, const TimeGrid& grid, GammaConvention convention);

std::vector<double> cstar_values(const std::vector<double>& gamma, const TimeGrid& grid,
                                 GammaConvention convention);

// Gamma on the grid nodes: broadcasts a single value.
std::vector<double> gamma_on_grid(const std::vector<double>& gamma, const TimeGrid& grid);

}  // namespace fbsvie
