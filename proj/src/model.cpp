#include "fbsvie/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

namespace fbsvie {

PositivityError::PositivityError(std::size_t path, std::size_t node, double value)
    : Error("state positivity breached on path " + std::to_string(path) + " at node " +
            std::to_string(node) + " (X = " + std::to_string(value) + ")"),
      path_(path),
      node_(node),
      value_(value) {}

namespace {

constexpr double kNodeTol = 1e-9;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------- TimeGrid

TimeGrid::TimeGrid(double horizon, std::size_t n_steps) : horizon_(horizon), n_steps_(n_steps) {
  if (!(horizon > 0.0) || !std::isfinite(horizon))
    throw ValidationError("time grid horizon must be positive and finite, got " + fmt(horizon));
  if (n_steps < 1) throw ValidationError("time grid needs at least one step");
}

double TimeGrid::node(std::size_t i) const {
  if (i >= n_steps_) return horizon_;
  return horizon_ * static_cast<double>(i) / static_cast<double>(n_steps_);
}

std::vector<double> TimeGrid::nodes() const {
  std::vector<double> out(size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = node(i);
  return out;
}

std::optional<std::size_t> TimeGrid::index_of(double t) const {
  const double x = t / dt();
  const double r = std::round(x);
  if (r < 0.0 || r > static_cast<double>(n_steps_)) return std::nullopt;
  if (std::abs(x - r) > kNodeTol) return std::nullopt;
  return static_cast<std::size_t>(r);
}

std::size_t TimeGrid::floor_index(double t) const {
  if (t <= 0.0) return 0;
  const double x = t / dt();
  double f = std::floor(x + kNodeTol);
  if (f > static_cast<double>(n_steps_)) f = static_cast<double>(n_steps_);
  return static_cast<std::size_t>(f);
}

TimeGrid TimeGrid::refined(std::size_t factor) const {
  if (factor < 1) throw ValidationError("refinement factor must be >= 1");
  return TimeGrid(horizon_, n_steps_ * factor);
}

TimeGrid build_time_grid(double horizon, long long n_steps) {
  if (!(horizon > 0.0)) throw ValidationError("horizon T must be positive, got " + fmt(horizon));
  if (n_steps < 2) throw ValidationError("number of steps must be >= 2, got " + std::to_string(n_steps));
  return TimeGrid(horizon, static_cast<std::size_t>(n_steps));
}

// ---------------------------------------------------------------- Kernel

Kernel Kernel::constant(double value) {
  if (!std::isfinite(value)) throw ValidationError("constant kernel value must be finite");
  Kernel k;
  k.data_ = Constant{value};
  return k;
}

Kernel Kernel::exp_decay(double amplitude, double rate) {
  if (!std::isfinite(amplitude) || !std::isfinite(rate))
    throw ValidationError("exp_decay kernel parameters must be finite");
  if (rate < 0.0) throw ValidationError("exp_decay kernel rate must be >= 0, got " + fmt(rate));
  Kernel k;
  k.data_ = ExpDecay{amplitude, rate};
  return k;
}

Kernel Kernel::table(const TimeGrid& grid, std::vector<double> lower_triangle) {
  const std::size_t m = grid.size();
  if (lower_triangle.size() != m * (m + 1) / 2)
    throw ValidationError("table kernel for n=" + std::to_string(grid.steps()) + " needs " +
                          std::to_string(m * (m + 1) / 2) + " values, got " +
                          std::to_string(lower_triangle.size()));
  for (double v : lower_triangle)
    if (!std::isfinite(v)) throw ValidationError("table kernel values must be finite");
  Kernel k;
  k.data_ = Table{grid, std::move(lower_triangle)};
  return k;
}

Kernel::Kind Kernel::kind() const {
  switch (data_.index()) {
    case 0: return Kind::constant;
    case 1: return Kind::exp_decay;
    default: return Kind::table;
  }
}

double Kernel::table_at(std::size_t i, std::size_t j) const {
  const auto& tb = std::get<Table>(data_);
  return tb.values[i * (i + 1) / 2 + j];
}

double Kernel::operator()(double t, double s) const {
  const double scale = std::max({1.0, std::abs(t), std::abs(s)});
  if (s > t + 1e-12 * scale)
    throw DomainError("kernel evaluated outside the triangle s <= t: (t=" + fmt(t) + ", s=" + fmt(s) + ")");
  if (s < -1e-12 * scale) throw DomainError("kernel evaluated at negative time s=" + fmt(s));
  if (const auto* c = std::get_if<Constant>(&data_)) return c->value;
  if (const auto* e = std::get_if<ExpDecay>(&data_)) return e->amplitude * std::exp(-e->rate * (t - s));
  const auto& tb = std::get<Table>(data_);
  const auto i = tb.grid.index_of(t);
  const auto j = tb.grid.index_of(s);
  if (!i || !j) throw DomainError("table kernel queried off its grid at (t=" + fmt(t) + ", s=" + fmt(s) + ")");
  if (*j > *i) throw DomainError("table kernel evaluated outside the triangle");
  return table_at(*i, *j);
}

double Kernel::d_first(double t, double s) const {
  (void)(*this)(t, s);  // domain check
  if (std::holds_alternative<Constant>(data_)) return 0.0;
  if (const auto* e = std::get_if<ExpDecay>(&data_)) {
    if (e->rate == 0.0) return 0.0;
    return -e->rate * e->amplitude * std::exp(-e->rate * (t - s));
  }
  const auto& tb = std::get<Table>(data_);
  const std::size_t i = *tb.grid.index_of(t);
  const std::size_t j = *tb.grid.index_of(s);
  const std::size_t n = tb.grid.steps();
  const double h = tb.grid.dt();
  const bool has_next = i + 1 <= n;
  const bool has_prev = i >= 1 && j <= i - 1;
  if (has_next && has_prev) return (table_at(i + 1, j) - table_at(i - 1, j)) / (2.0 * h);
  if (has_next) return (table_at(i + 1, j) - table_at(i, j)) / h;
  if (has_prev) return (table_at(i, j) - table_at(i - 1, j)) / h;
  throw DomainError("table kernel has no finite difference in t at (t=" + fmt(t) + ", s=" + fmt(s) + ")");
}

bool Kernel::t_independent() const {
  if (std::holds_alternative<Constant>(data_)) return true;
  if (const auto* e = std::get_if<ExpDecay>(&data_)) return e->rate == 0.0 || e->amplitude == 0.0;
  const auto& tb = std::get<Table>(data_);
  const std::size_t n = tb.grid.steps();
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (table_at(i, j) != table_at(j, j)) return false;
  return true;
}

double Kernel::at_nodes(const TimeGrid& grid, std::size_t i, std::size_t j) const {
  if (j > i) throw DomainError("kernel evaluated outside the triangle (node indices)");
  if (const auto* c = std::get_if<Constant>(&data_)) return c->value;
  if (const auto* e = std::get_if<ExpDecay>(&data_))
    return e->amplitude * std::exp(-e->rate * (grid.node(i) - grid.node(j)));
  const auto& tb = std::get<Table>(data_);
  if (!(tb.grid == grid)) {
    // allow any grid whose nodes land on the table grid
    return (*this)(grid.node(i), grid.node(j));
  }
  return table_at(i, j);
}

double Kernel::hold_in_s(double s) const {
  if (const auto* c = std::get_if<Constant>(&data_)) return c->value;
  if (const auto* e = std::get_if<ExpDecay>(&data_)) {
    if (e->rate != 0.0 && e->amplitude != 0.0)
      throw DomainError("hold_in_s requires a t-independent kernel");
    return e->amplitude;
  }
  const auto& tb = std::get<Table>(data_);
  const std::size_t j = tb.grid.floor_index(s);
  return table_at(tb.grid.steps(), j);
}

double Kernel::value() const { return std::get<Constant>(data_).value; }
double Kernel::amplitude() const { return std::get<ExpDecay>(data_).amplitude; }
double Kernel::rate() const { return std::get<ExpDecay>(data_).rate; }
const TimeGrid& Kernel::table_grid() const { return std::get<Table>(data_).grid; }
const std::vector<double>& Kernel::table_values() const { return std::get<Table>(data_).values; }

// ---------------------------------------------------------------- Levy

LevyMeasure::LevyMeasure(std::vector<LevyAtom> atoms) : atoms_(std::move(atoms)) {
  for (const auto& a : atoms_) {
    if (!std::isfinite(a.size) || a.size == 0.0)
      throw ValidationError("Levy atom sizes must be finite and non-zero, got " + fmt(a.size));
    if (!std::isfinite(a.weight) || !(a.weight > 0.0))
      throw ValidationError("Levy atom weights must be positive and finite, got " + fmt(a.weight));
  }
}

double LevyMeasure::total_mass() const {
  double s = 0.0;
  for (const auto& a : atoms_) s += a.weight;
  return s;
}

double levy_integral(const LevyMeasure& measure, const std::function<double(double)>& f) {
  double s = 0.0;
  for (const auto& a : measure.atoms()) s += a.weight * f(a.size);
  return s;
}

// ---------------------------------------------------------------- Filtration

FiltrationMode::Mode FiltrationMode::effective() const {
  if (mode == Mode::delay && delay == 0.0) return Mode::full;
  return mode;
}

std::size_t FiltrationMode::conditioning_node(const TimeGrid& grid, std::size_t i) const {
  switch (effective()) {
    case Mode::trivial: return 0;
    case Mode::full: return i;
    case Mode::delay: {
      const double t = grid.node(i) - delay;
      return t <= 0.0 ? 0 : grid.floor_index(t);
    }
  }
  return i;
}

// ---------------------------------------------------------------- Scenario

bool ScenarioSpec::all_kernels_t_independent() const {
  if (!alpha.t_independent() || !beta.t_independent()) return false;
  return std::all_of(pi.begin(), pi.end(), [](const Kernel& k) { return k.t_independent(); });
}

namespace {

void check_kernel_grid(const Kernel& k, const TimeGrid& grid, const char* name) {
  if (k.kind() != Kernel::Kind::table) return;
  const TimeGrid& kg = k.table_grid();
  if (!(kg == grid))
    throw ValidationError(std::string(name) + " table kernel is defined for n=" + std::to_string(kg.steps()) +
                          ", T=" + fmt(kg.horizon()) + " but the scenario grid has n=" +
                          std::to_string(grid.steps()) + ", T=" + fmt(grid.horizon()));
}

}  // namespace

ScenarioSpec validate_scenario(ScenarioSpec raw) {
  const TimeGrid& g = raw.grid;
  if (g.steps() < 2) throw ValidationError("grid needs n_steps >= 2");
  if (!std::isfinite(raw.initial) || !(raw.initial > 0.0))
    throw ValidationError("initial value xi must be > 0, got " + fmt(raw.initial));

  check_kernel_grid(raw.alpha, g, "alpha");
  check_kernel_grid(raw.beta, g, "beta");

  if (raw.pi.empty() && !raw.levy.empty()) {
    // default jump response pi(t, s, e) = e
    for (const auto& a : raw.levy.atoms()) raw.pi.push_back(Kernel::constant(a.size));
  }
  if (raw.pi.size() != raw.levy.size())
    throw ValidationError("need one pi kernel per Levy atom: " + std::to_string(raw.levy.size()) + " atoms, " +
                          std::to_string(raw.pi.size()) + " kernels");
  for (std::size_t m = 0; m < raw.pi.size(); ++m) {
    check_kernel_grid(raw.pi[m], g, "pi");
    for (std::size_t i = 0; i <= g.steps(); ++i)
      for (std::size_t j = 0; j <= i; ++j) {
        const double v = raw.pi[m].at_nodes(g, i, j);
        if (!(v > -1.0))
          throw ValidationError("positivity violated: pi(t=" + fmt(g.node(i)) + ", s=" + fmt(g.node(j)) +
                                ", e=" + fmt(raw.levy.atoms()[m].size) + ") = " + fmt(v) + " <= -1");
      }
  }

  if (raw.gamma.size() == 1) raw.gamma.assign(g.size(), raw.gamma.front());
  if (raw.gamma.size() != g.size())
    throw ValidationError("gamma must have 1 or n+1 = " + std::to_string(g.size()) + " values, got " +
                          std::to_string(raw.gamma.size()));
  for (double v : raw.gamma)
    if (!std::isfinite(v)) throw ValidationError("gamma values must be finite");

  if (raw.filtration.mode == FiltrationMode::Mode::delay) {
    if (!(raw.filtration.delay >= 0.0) || !std::isfinite(raw.filtration.delay))
      throw ValidationError("filtration delay must be >= 0");
    if (raw.filtration.delay == 0.0) raw.filtration = FiltrationMode::full();
  } else {
    raw.filtration.delay = 0.0;
  }

  if (raw.mc.n_paths < 1) throw ValidationError("mc.n_paths must be >= 1");
  if (raw.mc.n_blocks < 1 || raw.mc.n_paths % raw.mc.n_blocks != 0)
    throw ValidationError("mc.n_blocks (" + std::to_string(raw.mc.n_blocks) + ") must divide mc.n_paths (" +
                          std::to_string(raw.mc.n_paths) + ")");
  if (raw.regression.degree < 0 || raw.regression.degree > 4)
    throw ValidationError("regression.degree must be in [0, 4]");
  if (raw.regression.state_variables.empty())
    throw ValidationError("regression.state_variables must not be empty");
  return raw;
}

ScenarioSpec reference_scenario() {
  ScenarioSpec s;
  s.grid = TimeGrid(1.0, 100);
  s.initial = 1.0;
  s.alpha = Kernel::constant(0.05);
  s.beta = Kernel::constant(0.2);
  s.gamma = {0.0};
  s.filtration = FiltrationMode::trivial();
  s.convention = GammaConvention::discounting;
  s.mc = McSettings{100000, 42, 8};
  return validate_scenario(std::move(s));
}

ScenarioSpec refine_scenario(const ScenarioSpec& spec, std::size_t factor) {
  if (factor == 1) return spec;
  auto no_table = [](const Kernel& k) {
    if (k.kind() == Kernel::Kind::table) throw ValidationError("table kernels cannot be refined to a finer grid");
  };
  no_table(spec.alpha);
  no_table(spec.beta);
  for (const auto& k : spec.pi) no_table(k);
  ScenarioSpec out = spec;
  out.grid = spec.grid.refined(factor);
  out.gamma.resize(out.grid.size());
  for (std::size_t i = 0; i < out.grid.size(); ++i) out.gamma[i] = gamma_at(spec, out.grid.node(i));
  return out;
}

double gamma_at(const ScenarioSpec& spec, double t) {
  const TimeGrid& g = spec.grid;
  if (spec.gamma.size() == 1) return spec.gamma.front();
  const std::size_t i = std::min(g.floor_index(t), g.steps() - 1);
  const double w = (t - g.node(i)) / g.dt();
  return (1.0 - w) * spec.gamma[i] + w * spec.gamma[i + 1];
}

}  // namespace fbsvie
