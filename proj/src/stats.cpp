#include "fbsvie/stats.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "fbsvie/error.hpp"

namespace fbsvie {

Estimate sample_estimate(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n == 0) return {};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  if (n == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double var = ss / static_cast<double>(n - 1);
  return {mean, std::sqrt(var / static_cast<double>(n))};
}

double sample_quantile(std::span<const double> values, double q) {
  if (values.empty()) return 0.0;
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double w = pos - static_cast<double>(lo);
  return (1.0 - w) * v[lo] + w * v[hi];
}

std::vector<double> richardson_weights(std::size_t levels) {
  if (levels < 1) throw ValidationError("extrapolation needs at least one level");
  const auto L = static_cast<Eigen::Index>(levels);
  Eigen::MatrixXd a(L, L);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(L);
  b(0) = 1.0;
  for (Eigen::Index k = 0; k < L; ++k)
    for (Eigen::Index l = 0; l < L; ++l) a(k, l) = std::pow(std::pow(2.0, -static_cast<double>(l)), k);
  const Eigen::VectorXd w = a.fullPivLu().solve(b);
  return {w.data(), w.data() + L};
}

}  // namespace fbsvie
