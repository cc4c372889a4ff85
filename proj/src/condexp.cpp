#include "fbsvie/condexp.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <string>

namespace fbsvie {

namespace {

// All exponent vectors over `dim` variables with lo <= total degree <= hi, in
// graded order and lexicographically descending within a degree.
std::vector<std::vector<int>> graded_exponents(std::size_t dim, int lo, int hi) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(dim, 0);
  std::function<void(std::size_t, int)> rec = [&](std::size_t v, int remaining) {
    if (v + 1 == dim) {
      cur[v] = remaining;
      out.push_back(cur);
      return;
    }
    for (int a = remaining; a >= 0; --a) {
      cur[v] = a;
      rec(v + 1, remaining - a);
    }
  };
  for (int d = lo; d <= hi; ++d) {
    if (dim == 0) {
      if (d == 0) out.emplace_back();
      continue;
    }
    rec(0, d);
  }
  return out;
}

using Poly = std::map<std::vector<int>, double>;

Poly multiply(const Poly& a, const Poly& b) {
  Poly out;
  for (const auto& [ea, ca] : a)
    for (const auto& [eb, cb] : b) {
      auto e = ea;
      for (std::size_t v = 0; v < e.size(); ++v) e[v] += eb[v];
      out[e] += ca * cb;
    }
  return out;
}

Eigen::VectorXd padded_beta(const ProjectionFn& fn, std::size_t q) {
  if (static_cast<std::size_t>(fn.beta().size()) == q) return fn.beta();
  if (fn.beta().size() != 0) throw ValidationError("projection does not belong to this basis");
  return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(q));
}

}  // namespace

Basis::Basis(const Eigen::MatrixXd& states, int degree) : degree_(degree) {
  if (degree < 0) throw ValidationError("regression degree must be >= 0");
  const auto n = states.rows();
  const auto k = states.cols();
  if (n < 1) throw RegressionError("no samples to fit", 0.0);
  for (Eigen::Index c = 0; c < k; ++c) {
    const double mean = states.col(c).mean();
    const double var = (states.col(c).array() - mean).square().mean();
    const double sd = std::sqrt(var);
    if (!std::isfinite(mean) || !std::isfinite(sd)) throw RegressionError("non-finite state samples", 0.0);
    state_mean_.push_back(mean);
    state_sd_.push_back(sd);
    if (sd > 1e-12 * (1.0 + std::abs(mean))) kept_.push_back(static_cast<std::size_t>(c));
  }
  const auto candidates = graded_exponents(kept_.size(), 1, degree);
  std::vector<double> buffer(static_cast<std::size_t>(k));
  for (const auto& e : candidates) {
    exponents_.push_back(e);
    const std::size_t idx = exponents_.size() - 1;
    double sum = 0.0, sum2 = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) {
      for (Eigen::Index c = 0; c < k; ++c) buffer[static_cast<std::size_t>(c)] = states(r, c);
      const double v = raw_feature(idx, buffer);
      sum += v;
      sum2 += v * v;
    }
    const double mean = sum / static_cast<double>(n);
    const double var = std::max(0.0, sum2 / static_cast<double>(n) - mean * mean);
    if (std::sqrt(var) <= 1e-10 * (1.0 + std::abs(mean))) {
      exponents_.pop_back();
      continue;
    }
    feature_mean_.push_back(mean);
    feature_sd_.push_back(std::sqrt(var));
  }
}

double Basis::raw_feature(std::size_t k, std::span<const double> state) const {
  double v = 1.0;
  const auto& e = exponents_[k];
  for (std::size_t a = 0; a < kept_.size(); ++a) {
    const std::size_t c = kept_[a];
    const double z = (state[c] - state_mean_[c]) / state_sd_[c];
    for (int p = 0; p < e[a]; ++p) v *= z;
  }
  return v;
}

Eigen::VectorXd Basis::features(std::span<const double> state) const {
  if (state.size() != state_dim())
    throw ValidationError("state dimension " + std::to_string(state.size()) + " does not match the basis (" +
                          std::to_string(state_dim()) + ")");
  Eigen::VectorXd f(static_cast<Eigen::Index>(n_features()));
  for (std::size_t k = 0; k < n_features(); ++k)
    f(static_cast<Eigen::Index>(k)) = (raw_feature(k, state) - feature_mean_[k]) / feature_sd_[k];
  return f;
}

double ProjectionFn::operator()(std::span<const double> state) const {
  if (!basis_ || beta_.size() == 0) {
    if (basis_ && state.size() != basis_->state_dim())
      throw ValidationError("state dimension " + std::to_string(state.size()) + " does not match the basis (" +
                            std::to_string(basis_->state_dim()) + ")");
    return intercept_;
  }
  return intercept_ + basis_->features(state).dot(beta_);
}

ProjectionFn ProjectionFn::constant(double value) {
  ProjectionFn f;
  f.intercept_ = value;
  f.diag_.target_mean = value;
  return f;
}

std::vector<std::vector<int>> ProjectionFn::raw_monomials() const {
  const std::size_t dim = basis_ ? basis_->state_dim() : 0;
  const int d = basis_ ? basis_->degree() : 0;
  return graded_exponents(dim, 0, d);
}

std::vector<double> ProjectionFn::raw_coefficients() const {
  const auto monomials = raw_monomials();
  std::vector<double> out(monomials.size(), 0.0);
  if (!basis_) {
    out[0] = intercept_;
    return out;
  }
  const Basis& b = *basis_;
  const std::size_t dim = b.state_dim();
  const std::vector<int> zero(dim, 0);
  Poly total{{zero, intercept_}};
  for (std::size_t k = 0; k < b.n_features() && static_cast<Eigen::Index>(k) < beta_.size(); ++k) {
    Poly term{{zero, 1.0}};
    for (std::size_t a = 0; a < b.kept_.size(); ++a) {
      const std::size_t c = b.kept_[a];
      // z = (x_c - mean) / sd
      auto unit = zero;
      unit[c] = 1;
      Poly z{{unit, 1.0 / b.state_sd_[c]}, {zero, -b.state_mean_[c] / b.state_sd_[c]}};
      for (int p = 0; p < b.exponents_[k][a]; ++p) term = multiply(term, z);
    }
    const double scale = beta_(static_cast<Eigen::Index>(k)) / b.feature_sd_[k];
    for (const auto& [e, coef] : term) total[e] += scale * coef;
    total[zero] -= scale * b.feature_mean_[k];
  }
  for (std::size_t i = 0; i < monomials.size(); ++i) {
    const auto it = total.find(monomials[i]);
    if (it != total.end()) out[i] = it->second;
  }
  return out;
}

Projector::Projector(const Eigen::MatrixXd& states, int degree) {
  auto basis = std::make_shared<Basis>(states, degree);
  const auto n = states.rows();
  const auto q = static_cast<Eigen::Index>(basis->n_features());
  if (n < q + 1)
    throw RegressionError("regression needs at least " + std::to_string(q + 1) + " samples, got " +
                              std::to_string(n),
                          0.0);
  design_.resize(n, q);
  std::vector<double> buffer(static_cast<std::size_t>(states.cols()));
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < states.cols(); ++c) buffer[static_cast<std::size_t>(c)] = states(r, c);
    if (q > 0) design_.row(r) = basis->features(buffer).transpose();
  }
  basis_ = std::move(basis);
  if (q == 0) return;
  gram_ = design_.transpose() * design_ / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram_, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  condition_ = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  Eigen::MatrixXd system = gram_;
  if (!(condition_ <= 1e10)) {
    ridge_ = true;
    system.diagonal().array() += 1e-8 * gram_.trace() / static_cast<double>(q);
  }
  solver_.compute(system);
  if (solver_.info() != Eigen::Success || !std::isfinite(hi))
    throw RegressionError("regression design is rank deficient beyond ridge rescue (condition number " +
                              std::to_string(condition_) + ")",
                          condition_);
}

ProjectionFn Projector::fit(std::span<const double> targets) const {
  const auto n = static_cast<Eigen::Index>(n_samples());
  if (static_cast<Eigen::Index>(targets.size()) != n)
    throw ValidationError("target count " + std::to_string(targets.size()) + " does not match " +
                          std::to_string(n) + " samples");
  Eigen::Map<const Eigen::VectorXd> y(targets.data(), n);
  const double mean = y.mean();
  if (!std::isfinite(mean)) throw RegressionError("non-finite regression targets", condition_);
  const double total = (y.array() - mean).square().mean();

  ProjectionFn f;
  f.basis_ = basis_;
  f.intercept_ = mean;
  f.diag_.target_mean = mean;
  f.diag_.target_se = n > 1 ? std::sqrt(total / static_cast<double>(n - 1)) : 0.0;
  f.diag_.condition_number = condition_;
  f.diag_.ridge_used = ridge_;
  const auto q = design_.cols();
  if (q == 0) {
    f.diag_.residual_variance = total;
    f.diag_.r_squared = total > 0.0 ? 0.0 : 1.0;
    return f;
  }
  const Eigen::VectorXd rhs = design_.transpose() * (y.array() - mean).matrix() / static_cast<double>(n);
  f.beta_ = solver_.solve(rhs);
  const double explained = f.beta_.dot(gram_ * f.beta_);
  f.diag_.residual_variance = std::max(0.0, total - 2.0 * f.beta_.dot(rhs) + explained);
  f.diag_.r_squared = total > 0.0 ? std::min(1.0, std::max(0.0, 1.0 - f.diag_.residual_variance / total)) : 1.0;
  return f;
}

double Projector::propagated_se(std::span<const double> w, std::span<const double> u) const {
  const auto n = static_cast<Eigen::Index>(n_samples());
  if (static_cast<Eigen::Index>(w.size()) != n || static_cast<Eigen::Index>(u.size()) != n)
    throw ValidationError("weights and residuals must have one value per sample");
  if (design_.cols() == 0 || n == 0) return 0.0;
  Eigen::Map<const Eigen::VectorXd> wv(w.data(), n), uv(u.data(), n);
  const Eigen::VectorXd m = design_.transpose() * wv / static_cast<double>(n);
  const Eigen::VectorXd a = solver_.solve(m);
  const Eigen::VectorXd v = design_ * a;
  const double var = (v.array() * uv.array()).square().sum() / (static_cast<double>(n) * static_cast<double>(n));
  return std::sqrt(var);
}

void Projector::apply(const ProjectionFn& fn, std::span<double> out) const {
  const auto n = static_cast<Eigen::Index>(n_samples());
  if (static_cast<Eigen::Index>(out.size()) != n) throw ValidationError("output size does not match samples");
  Eigen::Map<Eigen::VectorXd> o(out.data(), n);
  if (fn.beta().size() == 0 || design_.cols() == 0) {
    o.setConstant(fn.intercept());
    return;
  }
  o.noalias() = design_ * padded_beta(fn, n_features());
  o.array() += fn.intercept();
}

std::vector<double> Projector::apply(const ProjectionFn& fn) const {
  std::vector<double> out(n_samples());
  apply(fn, out);
  return out;
}

double Projector::apply_at(const ProjectionFn& fn, std::size_t sample) const {
  if (fn.beta().size() == 0 || design_.cols() == 0) return fn.intercept();
  return fn.intercept() + design_.row(static_cast<Eigen::Index>(sample)).dot(padded_beta(fn, n_features()));
}

double Projector::mean_square(const ProjectionFn& fn) const {
  if (fn.beta().size() == 0 || design_.cols() == 0) return fn.intercept() * fn.intercept();
  const Eigen::VectorXd b = padded_beta(fn, n_features());
  return fn.intercept() * fn.intercept() + b.dot(gram_ * b);
}

double Projector::mean_square_diff(const ProjectionFn& f, const ProjectionFn& g) const {
  const double da = f.intercept() - g.intercept();
  if (design_.cols() == 0) return da * da;
  const Eigen::VectorXd db = padded_beta(f, n_features()) - padded_beta(g, n_features());
  return da * da + db.dot(gram_ * db);
}

ProjectionFn fit_projection(const Eigen::MatrixXd& states, std::span<const double> targets, int degree) {
  return Projector(states, degree).fit(targets);
}

double project(const ProjectionFn& fn, std::span<const double> state) { return fn(state); }

std::vector<double> conditional_mean(const FiltrationMode& mode, const TimeGrid& grid, std::size_t node,
                                     std::span<const double> targets, const StateProvider& states, int degree) {
  if (mode.effective() == FiltrationMode::Mode::trivial) {
    double mean = 0.0;
    for (double v : targets) mean += v;
    mean /= static_cast<double>(targets.size());
    return std::vector<double>(targets.size(), mean);
  }
  const std::size_t at = mode.conditioning_node(grid, node);
  Projector proj(states(at), degree);
  return proj.apply(proj.fit(targets));
}

}  // namespace fbsvie
