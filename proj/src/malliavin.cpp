#include "fbsvie/malliavin.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "fbsvie/bsde.hpp"
#include "fbsvie/condexp.hpp"
#include "fbsvie/stats.hpp"

namespace fbsvie {

using Fn1 = std::function<double(double)>;
using Fn2 = std::function<double(double, double)>;

struct Functional::Node {
  Op op = Op::constant;
  double value = 0.0;
  std::size_t after = 0;
  bool running = false;
  double upper = 0.0;
  std::shared_ptr<const Fn1> f;
  std::shared_ptr<const Fn2> h;
  std::shared_ptr<const Node> a, b;
  int degree = 0;
};

namespace {

using NodePtr = std::shared_ptr<const Functional::Node>;

const std::shared_ptr<const Fn1>& unit_wiener() {
  static const auto f = std::make_shared<const Fn1>([](double) { return 1.0; });
  return f;
}

const std::shared_ptr<const Fn2>& unit_jump() {
  static const auto h = std::make_shared<const Fn2>([](double, double) { return 1.0; });
  return h;
}

std::string fmt(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

}  // namespace

Functional::Functional() : node_(std::make_shared<const Node>()) {}

Functional Functional::constant(double value) {
  Node n;
  n.op = Op::constant;
  n.value = value;
  return Functional(std::make_shared<const Node>(n));
}

Functional Functional::step(double value, std::size_t after_node) {
  if (value == 0.0) return constant(0.0);
  Node n;
  n.op = Op::step;
  n.value = value;
  n.after = after_node;
  return Functional(std::make_shared<const Node>(n));
}

namespace {

Functional::Node integral(Functional::Op op, bool running, double upper) {
  Functional::Node n;
  n.op = op;
  n.running = running;
  n.upper = upper;
  n.degree = 1;
  return n;
}

}  // namespace

Functional Functional::wiener(std::function<double(double)> f, double upper) {
  auto n = integral(Op::wiener, false, upper);
  n.f = std::make_shared<const Fn1>(std::move(f));
  return Functional(std::make_shared<const Node>(n));
}

Functional Functional::wiener_running(std::function<double(double)> f) {
  auto n = integral(Op::wiener, true, 0.0);
  n.f = std::make_shared<const Fn1>(std::move(f));
  return Functional(std::make_shared<const Node>(n));
}

Functional Functional::jump(std::function<double(double, double)> h, double upper) {
  auto n = integral(Op::jump, false, upper);
  n.h = std::make_shared<const Fn2>(std::move(h));
  return Functional(std::make_shared<const Node>(n));
}

Functional Functional::jump_running(std::function<double(double, double)> h) {
  auto n = integral(Op::jump, true, 0.0);
  n.h = std::make_shared<const Fn2>(std::move(h));
  return Functional(std::make_shared<const Node>(n));
}

Functional Functional::brownian(double upper) {
  auto n = integral(Op::wiener, false, upper);
  n.f = unit_wiener();
  return Functional(std::make_shared<const Node>(n));
}

Functional Functional::brownian_running() {
  auto n = integral(Op::wiener, true, 0.0);
  n.f = unit_wiener();
  return Functional(std::make_shared<const Node>(n));
}

Functional Functional::compensated_count(double upper) {
  auto n = integral(Op::jump, false, upper);
  n.h = unit_jump();
  return Functional(std::make_shared<const Node>(n));
}

Functional Functional::compensated_count_running() {
  auto n = integral(Op::jump, true, 0.0);
  n.h = unit_jump();
  return Functional(std::make_shared<const Node>(n));
}

Functional::Op Functional::op() const { return node_->op; }
int Functional::degree() const { return node_->degree; }
bool Functional::is_constant() const { return node_->op == Op::constant; }
double Functional::constant_value() const { return node_->value; }

Functional Functional::operator+(const Functional& o) const {
  if (is_constant() && o.is_constant()) return constant(constant_value() + o.constant_value());
  if (is_constant() && constant_value() == 0.0) return o;
  if (o.is_constant() && o.constant_value() == 0.0) return *this;
  if (node_ == o.node_) return constant(2.0) * *this;
  Node n;
  n.op = Op::sum;
  n.a = node_;
  n.b = o.node_;
  n.degree = std::max(degree(), o.degree());
  return Functional(std::make_shared<const Node>(n));
}

Functional Functional::operator-(const Functional& o) const { return *this + constant(-1.0) * o; }

Functional Functional::operator*(const Functional& o) const {
  if (is_constant() && o.is_constant()) return constant(constant_value() * o.constant_value());
  if ((is_constant() && constant_value() == 0.0) || (o.is_constant() && o.constant_value() == 0.0))
    return constant(0.0);
  if (is_constant() && constant_value() == 1.0) return o;
  if (o.is_constant() && o.constant_value() == 1.0) return *this;
  if (o.is_constant()) return o * *this;
  // fold nested scalar factors: a * (b * x) = (ab) * x
  if (is_constant() && o.op() == Op::product && o.node_->a->op == Op::constant)
    return constant(constant_value() * o.node_->a->value) * Functional(o.node_->b);
  const int d = degree() + o.degree();
  if (d > 4) throw ValidationError("functional degree " + std::to_string(d) + " exceeds the supported maximum of 4");
  Node n;
  n.op = Op::product;
  n.a = node_;
  n.b = o.node_;
  n.degree = d;
  return Functional(std::make_shared<const Node>(n));
}

std::string Functional::describe() const {
  const Node& n = *node_;
  switch (n.op) {
    case Op::constant:
      return fmt(n.value);
    case Op::step:
      return fmt(n.value) + "*1{node>" + std::to_string(n.after) + "}";
    case Op::wiener: {
      const std::string up = n.running ? "t" : fmt(n.upper);
      return n.f == unit_wiener() ? "B(" + up + ")" : "W[f](0," + up + ")";
    }
    case Op::jump: {
      const std::string up = n.running ? "t" : fmt(n.upper);
      return n.h == unit_jump() ? "Ntilde(" + up + ")" : "J[h](0," + up + ")";
    }
    case Op::sum:
      return "(" + Functional(n.a).describe() + " + " + Functional(n.b).describe() + ")";
    case Op::product:
      return Functional(n.a).describe() + "*" + Functional(n.b).describe();
  }
  return "?";
}

namespace {

std::size_t upper_index(const Functional::Node& n, const TimeGrid& g) {
  const auto idx = g.index_of(n.upper);
  if (!idx) throw DomainError("integral upper limit " + fmt(n.upper) + " is not a grid node");
  return *idx;
}

}  // namespace

Functional hida_derivative_brownian(const Functional& f, const TimeGrid& grid, std::size_t k) {
  if (k >= grid.steps()) throw DomainError("derivative node must be below n");
  const auto& n = *f.node_;
  const double t = grid.node(k);
  switch (n.op) {
    case Functional::Op::constant:
    case Functional::Op::step:
    case Functional::Op::jump:
      return Functional::constant(0.0);
    case Functional::Op::wiener:
      if (n.running) return Functional::step((*n.f)(t), k);
      return k < upper_index(n, grid) ? Functional::constant((*n.f)(t)) : Functional::constant(0.0);
    case Functional::Op::sum:
      return hida_derivative_brownian(Functional(n.a), grid, k) + hida_derivative_brownian(Functional(n.b), grid, k);
    case Functional::Op::product: {
      const Functional a(n.a), b(n.b);
      return hida_derivative_brownian(a, grid, k) * b + a * hida_derivative_brownian(b, grid, k);
    }
  }
  throw DomainError("unsupported functional node");
}

Functional hida_derivative_jump(const Functional& f, const TimeGrid& grid, const LevyMeasure& levy, std::size_t k,
                                std::size_t m) {
  if (k >= grid.steps()) throw DomainError("derivative node must be below n");
  if (m >= levy.size()) throw DomainError("atom index out of range");
  const auto& n = *f.node_;
  const double t = grid.node(k);
  const double e = levy.atoms()[m].size;
  switch (n.op) {
    case Functional::Op::constant:
    case Functional::Op::step:
    case Functional::Op::wiener:
      return Functional::constant(0.0);
    case Functional::Op::jump:
      if (n.running) return Functional::step((*n.h)(t, e), k);
      return k < upper_index(n, grid) ? Functional::constant((*n.h)(t, e)) : Functional::constant(0.0);
    case Functional::Op::sum:
      return hida_derivative_jump(Functional(n.a), grid, levy, k, m) +
             hida_derivative_jump(Functional(n.b), grid, levy, k, m);
    case Functional::Op::product: {
      // (A + DA)(B + DB) - AB
      const Functional a(n.a), b(n.b);
      const Functional da = hida_derivative_jump(a, grid, levy, k, m);
      const Functional db = hida_derivative_jump(b, grid, levy, k, m);
      return da * b + a * db + da * db;
    }
  }
  throw DomainError("unsupported functional node");
}

FunctionalEvaluator::FunctionalEvaluator(const NoiseBundle& noise) : noise_(noise) {}

const std::vector<double>& FunctionalEvaluator::cumulative(const Functional::Node& n) {
  const void* key = n.op == Functional::Op::wiener ? static_cast<const void*>(n.f.get())
                                                   : static_cast<const void*>(n.h.get());
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  const TimeGrid& g = noise_.grid();
  const std::size_t P = noise_.n_paths();
  const std::size_t steps = g.steps();
  std::vector<double> c((steps + 1) * P, 0.0);
  for (std::size_t i = 0; i < steps; ++i) {
    const double t = g.node(i);
    double* next = c.data() + (i + 1) * P;
    const double* prev = c.data() + i * P;
    if (n.op == Functional::Op::wiener) {
      const double fv = (*n.f)(t);
      const auto db = noise_.increments(i);
      for (std::size_t p = 0; p < P; ++p) next[p] = prev[p] + fv * db[p];
    } else {
      for (std::size_t p = 0; p < P; ++p) next[p] = prev[p];
      for (std::size_t m = 0; m < noise_.n_atoms(); ++m) {
        const auto& atom = noise_.levy().atoms()[m];
        const double hv = (*n.h)(t, atom.size);
        const double comp = hv * atom.weight * g.dt();
        const auto cnt = noise_.counts(i, m);
        for (std::size_t p = 0; p < P; ++p) next[p] += hv * static_cast<double>(cnt[p]) - comp;
      }
    }
  }
  return cache_.emplace(key, std::move(c)).first->second;
}

void FunctionalEvaluator::eval_into(const Functional::Node& n, std::size_t node, std::span<double> out) {
  const std::size_t P = noise_.n_paths();
  switch (n.op) {
    case Functional::Op::constant:
      std::fill(out.begin(), out.end(), n.value);
      return;
    case Functional::Op::step:
      std::fill(out.begin(), out.end(), node > n.after ? n.value : 0.0);
      return;
    case Functional::Op::wiener:
    case Functional::Op::jump: {
      const std::size_t u = n.running ? node : upper_index(n, noise_.grid());
      const auto& c = cumulative(n);
      std::copy(c.begin() + static_cast<std::ptrdiff_t>(u * P), c.begin() + static_cast<std::ptrdiff_t>((u + 1) * P),
                out.begin());
      return;
    }
    case Functional::Op::sum:
    case Functional::Op::product: {
      std::vector<double> right(P);
      eval_into(*n.a, node, out);
      eval_into(*n.b, node, right);
      if (n.op == Functional::Op::sum)
        for (std::size_t p = 0; p < P; ++p) out[p] += right[p];
      else
        for (std::size_t p = 0; p < P; ++p) out[p] *= right[p];
      return;
    }
  }
}

std::vector<double> FunctionalEvaluator::evaluate(const Functional& f, std::size_t node) {
  if (node > noise_.n_steps()) throw DomainError("evaluation node beyond the grid");
  std::vector<double> out(noise_.n_paths());
  eval_into(*f.node(), node, out);
  return out;
}

namespace {

// E[D F | F_{t_i}] per path; D is evaluated at T.
// E[D | F_{t_i}] per path, with the unprojected values of D in `raw`.
std::vector<double> projected(const Functional& d, FunctionalEvaluator& ev, const StateProvider& states,
                              std::size_t i, int degree, std::vector<double>* raw = nullptr) {
  const std::size_t n = ev.noise().n_steps();
  if (d.is_constant()) {
    std::vector<double> c(ev.noise().n_paths(), d.constant_value());
    if (raw) *raw = c;
    return c;
  }
  auto values = ev.evaluate(d, n);
  auto cm = conditional_mean(FiltrationMode::full(), ev.noise().grid(), i, values, states, degree);
  if (raw) *raw = std::move(values);
  return cm;
}

// The projected right side has a smaller path spread than its error: the
// regression intercepts carry the sampling error of the unprojected
// derivative. Standard errors use the larger of the two spreads.
DualityResult finish(const std::vector<double>& lhs, const std::vector<double>& rhs,
                     const std::vector<double>& rhs_raw) {
  DualityResult r;
  const auto l = sample_estimate(lhs);
  const auto q = sample_estimate(rhs);
  const auto q_raw = sample_estimate(rhs_raw);
  std::vector<double> diff(lhs.size()), diff_raw(lhs.size());
  for (std::size_t p = 0; p < lhs.size(); ++p) {
    diff[p] = lhs[p] - rhs[p];
    diff_raw[p] = lhs[p] - rhs_raw[p];
  }
  r.lhs = l.value;
  r.se_lhs = l.se;
  r.rhs = q.value;
  r.se_rhs = std::max(q.se, q_raw.se);
  r.se_diff = std::max(sample_estimate(diff).se, sample_estimate(diff_raw).se);
  return r;
}

}  // namespace

DualityResult verify_duality_brownian(const Functional& f, const Functional& psi, const NoiseBundle& noise,
                                      int degree) {
  const TimeGrid& g = noise.grid();
  const std::size_t n = g.steps();
  const std::size_t P = noise.n_paths();
  const double dt = g.dt();
  FunctionalEvaluator ev(noise);
  const auto states = noise_state_provider(noise);
  const auto fv = ev.evaluate(f, n);

  std::vector<double> lhs(P, 0.0), rhs(P, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto psi_i = ev.evaluate(psi, i);
    const auto db = noise.increments(i);
    for (std::size_t p = 0; p < P; ++p) lhs[p] += psi_i[p] * db[p];
  }
  for (std::size_t p = 0; p < P; ++p) lhs[p] *= fv[p];

  std::vector<double> rhs_raw(P, 0.0), raw;
  for (std::size_t i = 0; i <= n; ++i) {
    // at T the derivative is the left limit, i.e. the one at t_{n-1}
    const std::size_t k = std::min(i, n - 1);
    const auto d = hida_derivative_brownian(f, g, k);
    const auto cm = projected(d, ev, states, i, degree, &raw);
    const auto psi_i = ev.evaluate(psi, i);
    const double w = (i == 0 || i == n) ? 0.5 * dt : dt;
    for (std::size_t p = 0; p < P; ++p) {
      rhs[p] += w * cm[p] * psi_i[p];
      rhs_raw[p] += w * raw[p] * psi_i[p];
    }
  }
  return finish(lhs, rhs, rhs_raw);
}

DualityResult verify_duality_jump(const Functional& f, const std::vector<Functional>& phi, const NoiseBundle& noise,
                                  int degree) {
  const TimeGrid& g = noise.grid();
  const std::size_t n = g.steps();
  const std::size_t P = noise.n_paths();
  const std::size_t M = noise.n_atoms();
  const double dt = g.dt();
  if (phi.empty() || (phi.size() != 1 && phi.size() != M))
    throw ValidationError("phi needs one process per atom or a single shared one");
  auto phi_m = [&](std::size_t m) -> const Functional& { return phi.size() == 1 ? phi[0] : phi[m]; };
  FunctionalEvaluator ev(noise);
  const auto states = noise_state_provider(noise);
  const auto fv = ev.evaluate(f, n);

  std::vector<double> lhs(P, 0.0), rhs(P, 0.0), rhs_raw(P, 0.0), raw;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t m = 0; m < M; ++m) {
      const auto& atom = noise.levy().atoms()[m];
      const auto ph = ev.evaluate(phi_m(m), i);
      const auto cnt = noise.counts(i, m);
      for (std::size_t p = 0; p < P; ++p) lhs[p] += ph[p] * (static_cast<double>(cnt[p]) - atom.weight * dt);
      const auto d = hida_derivative_jump(f, g, noise.levy(), i, m);
      const auto cm = projected(d, ev, states, i, degree, &raw);
      for (std::size_t p = 0; p < P; ++p) {
        rhs[p] += ph[p] * cm[p] * atom.weight * dt;
        rhs_raw[p] += ph[p] * raw[p] * atom.weight * dt;
      }
    }
  for (std::size_t p = 0; p < P; ++p) lhs[p] *= fv[p];
  return finish(lhs, rhs, rhs_raw);
}

double clark_ocone_mse(const Functional& f, const NoiseBundle& noise, int degree) {
  const TimeGrid& g = noise.grid();
  const std::size_t n = g.steps();
  const std::size_t P = noise.n_paths();
  FunctionalEvaluator ev(noise);
  const auto states = noise_state_provider(noise);
  const auto fv = ev.evaluate(f, n);
  const double mean = sample_estimate(fv).value;
  std::vector<double> rec(P, mean);
  for (std::size_t i = 0; i < n; ++i) {
    const auto cm = projected(hida_derivative_brownian(f, g, i), ev, states, i, degree);
    const auto db = noise.increments(i);
    for (std::size_t p = 0; p < P; ++p) rec[p] += cm[p] * db[p];
    for (std::size_t m = 0; m < noise.n_atoms(); ++m) {
      const double wdt = noise.levy().atoms()[m].weight * g.dt();
      const auto cj = projected(hida_derivative_jump(f, g, noise.levy(), i, m), ev, states, i, degree);
      const auto cnt = noise.counts(i, m);
      for (std::size_t p = 0; p < P; ++p) rec[p] += cj[p] * (static_cast<double>(cnt[p]) - wdt);
    }
  }
  double mse = 0.0;
  for (std::size_t p = 0; p < P; ++p) mse += (fv[p] - rec[p]) * (fv[p] - rec[p]);
  return mse / static_cast<double>(P);
}

double DualityRow::z_score() const {
  const double diff = std::abs(result.lhs - result.rhs);
  if (result.se_diff > 0.0) return diff / result.se_diff;
  return diff <= 1e-12 ? 0.0 : std::numeric_limits<double>::infinity();
}

bool DualityRow::pass(double k) const {
  const double slack = 1e-12;
  return std::abs(result.lhs - expected) <= k * result.se_lhs + slack &&
         std::abs(result.rhs - expected) <= k * result.se_rhs + slack && z_score() <= k;
}

std::vector<DualityRow> builtin_duality_checks(std::size_t n_paths, std::uint64_t seed, std::size_t n_blocks) {
  std::vector<DualityRow> rows;
  {
    const TimeGrid grid(1.0, 200);
    const auto noise = generate_noise(grid, LevyMeasure{}, n_paths, seed, n_blocks);
    const auto b1 = Functional::brownian(1.0);
    const auto bt = Functional::brownian_running();
    rows.push_back({"brownian F=B(1)^2 Psi=B(t)", 1.0, verify_duality_brownian(b1 * b1, bt, noise)});
    rows.push_back({"brownian F=B(1) Psi=1", 1.0, verify_duality_brownian(b1, Functional::constant(1.0), noise)});
    rows.push_back({"brownian F=5 Psi=B(t)", 0.0, verify_duality_brownian(Functional::constant(5.0), bt, noise)});
  }
  {
    const TimeGrid grid(1.0, 100);
    const LevyMeasure levy({{1.0, 2.0}});
    const auto noise = generate_noise(grid, levy, n_paths, seed, n_blocks);
    const auto n1 = Functional::compensated_count(1.0);
    const std::vector<Functional> one{Functional::constant(1.0)};
    rows.push_back({"jump F=Ntilde(1)^2 Phi=1", 2.0, verify_duality_jump(n1 * n1, one, noise)});
    rows.push_back({"jump F=Ntilde(1) Phi=1", 2.0, verify_duality_jump(n1, one, noise)});
    rows.push_back({"jump F=5 Phi=1", 0.0, verify_duality_jump(Functional::constant(5.0), one, noise)});
  }
  return rows;
}

}  // namespace fbsvie
