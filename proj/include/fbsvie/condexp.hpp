#pragma once

#include <cstddef>
#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fbsvie/model.hpp"

namespace fbsvie {

struct ProjectionDiagnostics {
  double r_squared = 1.0;
  double residual_variance = 0.0;
  double condition_number = 1.0;
  bool ridge_used = false;
  // sample mean and its standard error for the regression target
  double target_mean = 0.0;
  double target_se = 0.0;
  // error passed on by regressions the target itself was built from
  double inherited_se = 0.0;

  double mean_se() const { return std::sqrt(target_se * target_se + inherited_se * inherited_se); }
};

// Polynomial regression basis over a fixed set of state samples.
//
// State columns are standardized; monomials up to total degree d of the
// standardized states are centered and scaled, so a fit is
//   f(x) = intercept + sum_k beta_k (phi_k(x) - mean_k) / sd_k
// with intercept equal to the target sample mean. State columns with no spread
// are dropped, which leaves the plain sample mean for deterministic states.
class Basis {
 public:
  Basis() = default;
  Basis(const Eigen::MatrixXd& states, int degree);

  int degree() const { return degree_; }
  std::size_t state_dim() const { return state_mean_.size(); }
  std::size_t n_features() const { return exponents_.size(); }
  // Exponents over the kept (non-degenerate) state columns.
  const std::vector<std::vector<int>>& exponents() const { return exponents_; }
  const std::vector<std::size_t>& kept_states() const { return kept_; }

  // Centered, scaled feature row for one state vector.
  Eigen::VectorXd features(std::span<const double> state) const;

 private:
  friend class Projector;
  friend class ProjectionFn;
  int degree_ = 0;
  std::vector<double> state_mean_, state_sd_;
  std::vector<std::size_t> kept_;
  std::vector<std::vector<int>> exponents_;
  std::vector<double> feature_mean_, feature_sd_;

  double raw_feature(std::size_t k, std::span<const double> state) const;
};

class ProjectionFn {
 public:
  ProjectionFn() = default;

  // Evaluation at a raw state vector.
  double operator()(std::span<const double> state) const;
  double operator()(double state) const { return (*this)(std::span<const double>(&state, 1)); }

  double intercept() const { return intercept_; }
  const Eigen::VectorXd& beta() const { return beta_; }
  const ProjectionDiagnostics& diagnostics() const { return diag_; }
  bool is_zero() const { return intercept_ == 0.0 && (beta_.size() == 0 || beta_.isZero(0.0)); }

  // Coefficients on the raw monomials of raw_monomials(), constant first.
  std::vector<double> raw_coefficients() const;
  // Exponent vectors over all declared state variables, graded order.
  std::vector<std::vector<int>> raw_monomials() const;

  static ProjectionFn constant(double value);
  void set_inherited_se(double se) { diag_.inherited_se = se; }

 private:
  friend class Projector;
  std::shared_ptr<const Basis> basis_;
  double intercept_ = 0.0;
  Eigen::VectorXd beta_;
  ProjectionDiagnostics diag_;
};

// A basis bound to its training samples, reused for many targets on the same
// paths (one per time node in the backward solvers).
class Projector {
 public:
  Projector() = default;
  // states: n_samples x state_dim
  Projector(const Eigen::MatrixXd& states, int degree);

  std::size_t n_samples() const { return static_cast<std::size_t>(design_.rows()); }
  std::size_t n_features() const { return basis_ ? basis_->n_features() : 0; }
  const Basis& basis() const { return *basis_; }

  ProjectionFn fit(std::span<const double> targets) const;
  // Fitted values on the training samples.
  void apply(const ProjectionFn& fn, std::span<double> out) const;
  std::vector<double> apply(const ProjectionFn& fn) const;
  double apply_at(const ProjectionFn& fn, std::size_t sample) const;

  // Sample mean of fn^2 and of (f - g)^2 over the training samples, from the
  // Gram matrix of the centered design.
  double mean_square(const ProjectionFn& fn) const;
  double mean_square_diff(const ProjectionFn& f, const ProjectionFn& g) const;

  // Standard error that the slope estimates of a fit on this basis pass on to
  // mean_p(w_p * centered fit_p), for a fit whose target deviates from its
  // conditional mean by u (sandwich estimate).
  double propagated_se(std::span<const double> w, std::span<const double> u) const;

 private:
  std::shared_ptr<const Basis> basis_;
  Eigen::MatrixXd design_;  // centered, scaled features
  Eigen::MatrixXd gram_;    // design' design / n
  Eigen::LDLT<Eigen::MatrixXd> solver_;
  double condition_ = 1.0;
  bool ridge_ = false;
};

// One-shot fit: states n x k, targets n.
ProjectionFn fit_projection(const Eigen::MatrixXd& states, std::span<const double> targets, int degree);

double project(const ProjectionFn& fn, std::span<const double> state);

// Per-node state samples (n_paths x k) for the conditioning information.
using StateProvider = std::function<Eigen::MatrixXd(std::size_t node)>;

// E[target | G_{t_node}] on every path. trivial: sample mean; full: regression
// on the states at t_node; delay: regression on the states at (t_node - delay)^+.
std::vector<double> conditional_mean(const FiltrationMode& mode, const TimeGrid& grid, std::size_t node,
                                     std::span<const double> targets, const StateProvider& states, int degree);

}  // namespace fbsvie
