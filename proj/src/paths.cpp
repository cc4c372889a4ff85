#include "fbsvie/paths.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <random>
#include <string>
#include <type_traits>

#include "fbsvie/parallel.hpp"

namespace fbsvie {

namespace {

std::mt19937_64 block_engine(std::uint64_t seed, std::size_t block, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32), stream};
  return std::mt19937_64(seq);
}

template <class T>
void put_le(std::ostream& out, T value) {
  std::array<unsigned char, sizeof(T)> bytes{};
  std::uint64_t bits = 0;
  if constexpr (std::is_same_v<T, double>) {
    static_assert(sizeof(double) == sizeof(std::uint64_t));
    std::memcpy(&bits, &value, sizeof(double));
  } else {
    bits = static_cast<std::uint64_t>(value);
  }
  for (std::size_t b = 0; b < sizeof(T); ++b) bytes[b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xffu);
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <class T>
T get_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T));
  if (!in) throw IoError("truncated noise dump");
  std::uint64_t bits = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
  if constexpr (std::is_same_v<T, double>) {
    double v;
    std::memcpy(&v, &bits, sizeof(double));
    return v;
  } else {
    return static_cast<T>(bits);
  }
}

}  // namespace

std::pair<std::size_t, std::size_t> NoiseBundle::block_range(std::size_t block) const {
  const std::size_t per = n_paths_ / n_blocks_;
  return {block * per, (block + 1) * per};
}

NoiseBundle generate_noise(const TimeGrid& grid, const LevyMeasure& levy, std::size_t n_paths, std::uint64_t seed,
                           std::size_t n_blocks) {
  if (n_paths < 1) throw ValidationError("n_paths must be >= 1");
  if (n_blocks < 1 || n_paths % n_blocks != 0)
    throw ValidationError("n_blocks (" + std::to_string(n_blocks) + ") must divide n_paths (" +
                          std::to_string(n_paths) + ")");
  NoiseBundle b;
  b.grid_ = grid;
  b.levy_ = levy;
  b.n_paths_ = n_paths;
  b.seed_ = seed;
  b.n_blocks_ = n_blocks;
  const std::size_t n = grid.steps();
  const std::size_t atoms = levy.size();
  b.dB_.assign(n * n_paths, 0.0);
  b.counts_.assign(n * atoms * n_paths, 0u);
  const double sd = std::sqrt(grid.dt());

  parallel_for(n_blocks, [&](std::size_t block) {
    const auto [first, last] = b.block_range(block);
    auto brownian = block_engine(seed, block, 0);
    auto jumps = block_engine(seed, block, 1);
    std::normal_distribution<double> normal(0.0, sd);
    std::vector<std::poisson_distribution<std::uint32_t>> poisson;
    for (const auto& a : levy.atoms()) poisson.emplace_back(a.weight * grid.dt());
    for (std::size_t i = 0; i < n; ++i) {
      double* row = b.dB_.data() + i * n_paths;
      for (std::size_t p = first; p < last; ++p) row[p] = normal(brownian);
      for (std::size_t m = 0; m < atoms; ++m) {
        std::uint32_t* crow = b.counts_.data() + (i * atoms + m) * n_paths;
        for (std::size_t p = first; p < last; ++p) crow[p] = poisson[m](jumps);
      }
    }
  });
  return b;
}

NoiseBundle generate_noise(const ScenarioSpec& spec) {
  return generate_noise(spec.grid, spec.levy, spec.mc.n_paths, spec.mc.seed, spec.mc.n_blocks);
}

double compensated_jump_sum(const NoiseBundle& bundle, std::size_t path, std::size_t step,
                            const std::function<double(double)>& f) {
  const double dt = bundle.grid().dt();
  double s = 0.0;
  for (std::size_t m = 0; m < bundle.n_atoms(); ++m) {
    const auto& a = bundle.levy().atoms()[m];
    const double fe = f(a.size);
    s += static_cast<double>(bundle.count(path, step, m)) * fe - a.weight * dt * fe;
  }
  return s;
}

NoiseBundle coarsen(const NoiseBundle& fine, std::size_t factor) {
  if (factor < 1 || fine.n_steps() % factor != 0)
    throw ValidationError("coarsening factor " + std::to_string(factor) + " must divide the step count " +
                          std::to_string(fine.n_steps()));
  if (factor == 1) return fine;
  NoiseBundle c;
  c.grid_ = TimeGrid(fine.grid().horizon(), fine.n_steps() / factor);
  c.levy_ = fine.levy_;
  c.n_paths_ = fine.n_paths_;
  c.seed_ = fine.seed_;
  c.n_blocks_ = fine.n_blocks_;
  const std::size_t n = c.grid_.steps();
  const std::size_t P = c.n_paths_;
  const std::size_t atoms = c.levy_.size();
  c.dB_.assign(n * P, 0.0);
  c.counts_.assign(n * atoms * P, 0u);
  for (std::size_t k = 0; k < n; ++k) {
    double* out = c.dB_.data() + k * P;
    for (std::size_t r = 0; r < factor; ++r) {
      const double* in = fine.dB_.data() + (k * factor + r) * P;
      for (std::size_t p = 0; p < P; ++p) out[p] += in[p];
    }
    for (std::size_t m = 0; m < atoms; ++m) {
      std::uint32_t* cout = c.counts_.data() + (k * atoms + m) * P;
      for (std::size_t r = 0; r < factor; ++r) {
        const std::uint32_t* cin = fine.counts_.data() + ((k * factor + r) * atoms + m) * P;
        for (std::size_t p = 0; p < P; ++p) cout[p] += cin[p];
      }
    }
  }
  return c;
}

NoiseLevels accumulate_levels(const NoiseBundle& bundle) {
  NoiseLevels lv;
  const std::size_t P = bundle.n_paths();
  const std::size_t n = bundle.n_steps();
  const std::size_t atoms = bundle.n_atoms();
  lv.n_paths = P;
  lv.n_atoms = atoms;
  lv.brownian.assign((n + 1) * P, 0.0);
  lv.counts.assign((n + 1) * atoms * P, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto inc = bundle.increments(i);
    const double* prev = lv.brownian.data() + i * P;
    double* next = lv.brownian.data() + (i + 1) * P;
    for (std::size_t p = 0; p < P; ++p) next[p] = prev[p] + inc[p];
    for (std::size_t m = 0; m < atoms; ++m) {
      const auto cnt = bundle.counts(i, m);
      const double* cp = lv.counts.data() + (i * atoms + m) * P;
      double* cn = lv.counts.data() + ((i + 1) * atoms + m) * P;
      for (std::size_t p = 0; p < P; ++p) cn[p] = cp[p] + static_cast<double>(cnt[p]);
    }
  }
  return lv;
}

void write_noise(const NoiseBundle& bundle, std::ostream& out) {
  put_le<std::uint64_t>(out, bundle.n_steps());
  put_le<std::uint64_t>(out, bundle.n_paths());
  put_le<std::uint64_t>(out, bundle.seed());
  for (std::size_t i = 0; i < bundle.n_steps(); ++i)
    for (double v : bundle.increments(i)) put_le<double>(out, v);
  for (std::size_t i = 0; i < bundle.n_steps(); ++i)
    for (std::size_t m = 0; m < bundle.n_atoms(); ++m)
      for (std::uint32_t c : bundle.counts(i, m)) put_le<std::uint32_t>(out, c);
  if (!out) throw IoError("failed to write noise dump");
}

NoiseBundle read_noise(std::istream& in, const TimeGrid& grid, const LevyMeasure& levy, std::size_t n_blocks) {
  const auto n = get_le<std::uint64_t>(in);
  const auto n_paths = get_le<std::uint64_t>(in);
  const auto seed = get_le<std::uint64_t>(in);
  if (n != grid.steps())
    throw IoError("noise dump has n=" + std::to_string(n) + " but the grid has n=" + std::to_string(grid.steps()));
  if (n_blocks < 1 || n_paths % n_blocks != 0) throw IoError("block partition does not divide the dumped path count");
  NoiseBundle b;
  b.grid_ = grid;
  b.levy_ = levy;
  b.n_paths_ = n_paths;
  b.seed_ = seed;
  b.n_blocks_ = n_blocks;
  b.dB_.resize(n * n_paths);
  for (auto& v : b.dB_) v = get_le<double>(in);
  b.counts_.resize(n * levy.size() * n_paths);
  for (auto& c : b.counts_) c = get_le<std::uint32_t>(in);
  return b;
}

}  // namespace fbsvie
