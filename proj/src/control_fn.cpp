#include "fbsvie/control_fn.hpp"

#include <cmath>
#include <string>

namespace fbsvie {

ControlFn ControlFn::constant(double value) {
  ControlFn c;
  c.kind_ = Kind::constant;
  c.parameter_ = value;
  return c;
}

ControlFn ControlFn::table(const TimeGrid& grid, std::vector<double> values) {
  if (values.size() != grid.steps())
    throw ValidationError("control table needs n = " + std::to_string(grid.steps()) + " values, got " +
                          std::to_string(values.size()));
  ControlFn c;
  c.kind_ = Kind::table;
  c.table_grid_ = grid;
  c.table_ = std::move(values);
  return c;
}

ControlFn ControlFn::theta_scaled_cstar(double theta) {
  ControlFn c;
  c.kind_ = Kind::theta_scaled_cstar;
  c.parameter_ = theta;
  return c;
}

ControlFn ControlFn::cstar_plus_shift(double shift) {
  ControlFn c;
  c.kind_ = Kind::cstar_plus_shift;
  c.parameter_ = shift;
  return c;
}

ControlFn ControlFn::bump(const ControlFn& base, double start, double width, double height) {
  if (!(width > 0.0)) throw ValidationError("bump width must be positive");
  ControlFn c;
  c.kind_ = Kind::bump;
  c.parameter_ = height;
  c.base_ = std::make_shared<const ControlFn>(base);
  c.start_ = start;
  c.width_ = width;
  return c;
}

std::vector<double> ControlFn::raw_values(const ScenarioSpec& spec) const {
  const TimeGrid& g = spec.grid;
  const std::size_t n = g.steps();
  std::vector<double> out(n);
  switch (kind_) {
    case Kind::constant:
      out.assign(n, parameter_);
      break;
    case Kind::table: {
      if (table_grid_ == g) return table_;
      if (std::abs(table_grid_.horizon() - g.horizon()) > 1e-12 * g.horizon())
        throw ValidationError("control table horizon does not match the scenario grid");
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = std::min(table_grid_.floor_index(g.node(i)), table_grid_.steps() - 1);
        out[i] = table_[j];
      }
      break;
    }
    case Kind::theta_scaled_cstar: {
      out = cstar_values(spec.gamma, g, spec.convention);
      for (double& v : out) v *= parameter_;
      break;
    }
    case Kind::cstar_plus_shift: {
      out = cstar_values(spec.gamma, g, spec.convention);
      for (double& v : out) v += parameter_;
      break;
    }
    case Kind::bump: {
      out = base_->raw_values(spec);
      const double tol = 1e-9 * g.dt();
      for (std::size_t i = 0; i < n; ++i) {
        const double t = g.node(i);
        if (t >= start_ - tol && t < start_ + width_ - tol) out[i] += parameter_;
      }
      break;
    }
  }
  return out;
}

std::vector<double> ControlFn::values(const ScenarioSpec& spec) const {
  auto out = raw_values(spec);
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!(out[i] > 0.0))
      throw DomainError("control must be positive at t_" + std::to_string(i) + " = " +
                        std::to_string(spec.grid.node(i)) + ", got " + std::to_string(out[i]));
  return out;
}

std::vector<double> gamma_on_grid(const std::vector<double>& gamma, const TimeGrid& grid) {
  if (gamma.size() == 1) return std::vector<double>(grid.size(), gamma.front());
  if (gamma.size() != grid.size())
    throw ValidationError("gamma must have 1 or n+1 values, got " + std::to_string(gamma.size()));
  return gamma;
}

std::vector<double> lambda_adjoint(const std::vector<double>& gamma, const TimeGrid& grid,
                                   GammaConvention convention) {
  const auto g = gamma_on_grid(gamma, grid);
  const double sign = convention == GammaConvention::discounting ? -1.0 : 1.0;
  std::vector<double> lambda(grid.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    lambda[i] = std::exp(sign * acc);
    if (i < grid.steps()) acc += g[i] * grid.dt();
  }
  return lambda;
}

std::vector<double> adjoint_product(const std::vector<double>& gamma, const TimeGrid& grid,
                                    GammaConvention convention) {
  const auto lambda = lambda_adjoint(gamma, grid, convention);
  std::vector<double> p(grid.size(), 0.0);
  for (std::size_t i = grid.steps(); i-- > 0;) p[i] = p[i + 1] + lambda[i] * grid.dt();
  return p;
}

std::vector<double> cstar_values(const std::vector<double>& gamma, const TimeGrid& grid,
                                 GammaConvention convention) {
  const auto lambda = lambda_adjoint(gamma, grid, convention);
  const auto p = adjoint_product(gamma, grid, convention);
  std::vector<double> c(grid.steps());
  for (std::size_t i = 0; i < grid.steps(); ++i) c[i] = lambda[i] / p[i];
  return c;
}

ControlFn optimal_consumption(const std::vector<double>& gamma, const TimeGrid& grid, GammaConvention convention) {
  return ControlFn::table(grid, cstar_values(gamma, grid, convention));
}

}  // namespace fbsvie
