#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fbsvie {

struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

// Sample mean and its standard error.
Estimate sample_estimate(std::span<const double> values);

// Empirical quantile with linear interpolation; `values` is copied.
double sample_quantile(std::span<const double> values, double q);

// Weights w_0..w_{L-1} for estimates on grids n, 2n, ..., 2^{L-1} n that cancel
// the error terms of order dt, ..., dt^{L-1}. L=2 gives (-1, 2).
std::vector<double> richardson_weights(std::size_t levels);

}  // namespace fbsvie
