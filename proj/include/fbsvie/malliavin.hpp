#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fbsvie/paths.hpp"

namespace fbsvie {

// Small functional calculus over the driving noise: constants, Wiener
// integrals int_0^u f dB, compensated jump integrals int_0^u int h dNtilde,
// and sums and products of these up to total degree 4.
//
// An integral either has a fixed upper limit u (a random variable) or a
// running upper limit (an adapted process, evaluated at the current node).
class Functional {
 public:
  enum class Op { constant, step, wiener, jump, sum, product };

  Functional();  // the constant 0
  static Functional constant(double value);
  static Functional wiener(std::function<double(double)> f, double upper);
  static Functional wiener_running(std::function<double(double)> f);
  static Functional jump(std::function<double(double, double)> h, double upper);
  static Functional jump_running(std::function<double(double, double)> h);
  // value on nodes strictly after t_k, 0 up to and including t_k
  static Functional step(double value, std::size_t after_node);

  // Shorthands: B(u), Ntilde(u) with unit integrands.
  static Functional brownian(double upper);
  static Functional brownian_running();
  static Functional compensated_count(double upper);
  static Functional compensated_count_running();

  Functional operator+(const Functional& other) const;
  Functional operator-(const Functional& other) const;
  Functional operator*(const Functional& other) const;
  friend Functional operator*(double a, const Functional& f) { return Functional::constant(a) * f; }

  Op op() const;
  int degree() const;
  bool is_constant() const;
  double constant_value() const;
  std::string describe() const;

  struct Node;
  const Node* node() const { return node_.get(); }

 private:
  explicit Functional(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;
  friend class FunctionalEvaluator;
  friend Functional hida_derivative_brownian(const Functional&, const TimeGrid&, std::size_t);
  friend Functional hida_derivative_jump(const Functional&, const TimeGrid&, const LevyMeasure&, std::size_t,
                                         std::size_t);
};

// D_{t_k} F: chain and product rules down to the primitives.
Functional hida_derivative_brownian(const Functional& f, const TimeGrid& grid, std::size_t k);
// D_{t_k, e_m} F in difference form: the functional with one extra jump of
// size e_m at t_k minus the functional itself.
Functional hida_derivative_jump(const Functional& f, const TimeGrid& grid, const LevyMeasure& levy, std::size_t k,
                                std::size_t m);

// Evaluates functionals on every path of a noise bundle. Cumulative integrals
// are cached per integrand.
class FunctionalEvaluator {
 public:
  explicit FunctionalEvaluator(const NoiseBundle& noise);

  // Values at node i: running integrals are taken up to t_i, fixed upper
  // limits must be grid nodes.
  std::vector<double> evaluate(const Functional& f, std::size_t node);

  const NoiseBundle& noise() const { return noise_; }

 private:
  const NoiseBundle& noise_;
  std::unordered_map<const void*, std::vector<double>> cache_;

  const std::vector<double>& cumulative(const Functional::Node& n);
  void eval_into(const Functional::Node& n, std::size_t node, std::span<double> out);
};

struct DualityResult {
  double lhs = 0.0;
  double rhs = 0.0;
  double se_lhs = 0.0;
  double se_rhs = 0.0;
  double se_diff = 0.0;  // SE of the pathwise difference (same noise)
};

// E[F int Psi dB] against E[int E[D_t F | F_t] Psi(t) dt]. The left side uses
// the Ito (left-point) sum; the right side uses the trapezoid rule in t with
// the left limit of the derivative at t = T.
DualityResult verify_duality_brownian(const Functional& f, const Functional& psi, const NoiseBundle& noise,
                                      int degree = 2);

// E[F int int Phi dNtilde] against E[int int Phi E[D_{t,e} F | F_t] nu(de) dt].
// phi holds one process per atom (a single entry is used for every atom).
DualityResult verify_duality_jump(const Functional& f, const std::vector<Functional>& phi, const NoiseBundle& noise,
                                  int degree = 2);

// Mean-square error of E[F] + sum_i E[D_{t_i}F | F_{t_i}] dB_i
//   + sum_{i,m} E[D_{t_i,e_m}F | F_{t_i}] Ntilde_im against F.
double clark_ocone_mse(const Functional& f, const NoiseBundle& noise, int degree = 2);

struct DualityRow {
  std::string name;
  double expected = 0.0;
  DualityResult result;
  double z_score() const;
  // both sides within `k` standard errors of the expected value and of each other
  bool pass(double k = 3.0) const;
};

// The built-in identities: Brownian (n = 200) and single-atom jump (w = 2,
// n = 100) cases on T = 1.
std::vector<DualityRow> builtin_duality_checks(std::size_t n_paths, std::uint64_t seed, std::size_t n_blocks = 8);

}  // namespace fbsvie
