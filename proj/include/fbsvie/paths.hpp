#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "fbsvie/model.hpp"

namespace fbsvie {

// Brownian increments and per-step jump counts on a fixed grid.
//
// Storage is node-major: the n_paths values of step i are contiguous, which is
// the layout every cross-path regression wants. Jump times inside a step are
// not recorded; counts are aggregated per step and per atom.
class NoiseBundle {
 public:
  NoiseBundle() = default;

  const TimeGrid& grid() const { return grid_; }
  const LevyMeasure& levy() const { return levy_; }
  std::size_t n_paths() const { return n_paths_; }
  std::size_t n_steps() const { return grid_.steps(); }
  std::size_t n_atoms() const { return levy_.size(); }
  std::uint64_t seed() const { return seed_; }
  std::size_t n_blocks() const { return n_blocks_; }

  double increment(std::size_t path, std::size_t step) const { return dB_[step * n_paths_ + path]; }
  std::span<const double> increments(std::size_t step) const {
    return {dB_.data() + step * n_paths_, n_paths_};
  }
  std::uint32_t count(std::size_t path, std::size_t step, std::size_t atom) const {
    return counts_[(step * n_atoms() + atom) * n_paths_ + path];
  }
  std::span<const std::uint32_t> counts(std::size_t step, std::size_t atom) const {
    return {counts_.data() + (step * n_atoms() + atom) * n_paths_, n_paths_};
  }

  // Paths [first, last) of a block.
  std::pair<std::size_t, std::size_t> block_range(std::size_t block) const;

  bool operator==(const NoiseBundle& other) const = default;

 private:
  friend NoiseBundle generate_noise(const TimeGrid&, const LevyMeasure&, std::size_t, std::uint64_t, std::size_t);
  friend NoiseBundle coarsen(const NoiseBundle&, std::size_t);
  friend NoiseBundle read_noise(std::istream&, const TimeGrid&, const LevyMeasure&, std::size_t);

  TimeGrid grid_;
  LevyMeasure levy_;
  std::size_t n_paths_ = 0;
  std::uint64_t seed_ = 0;
  std::size_t n_blocks_ = 1;
  std::vector<double> dB_;
  std::vector<std::uint32_t> counts_;
};

// One independent pair of streams (Brownian, jumps) per block; regeneration
// with the same (grid, levy, n_paths, seed, n_blocks) is bit-identical.
NoiseBundle generate_noise(const TimeGrid& grid, const LevyMeasure& levy, std::size_t n_paths,
                           std::uint64_t seed, std::size_t n_blocks);

NoiseBundle generate_noise(const ScenarioSpec& spec);

// Increment of int int f(e) N~(ds, de) over (t_i, t_{i+1}] on one path:
// sum_m [c_m f(e_m) - w_m dt f(e_m)].
double compensated_jump_sum(const NoiseBundle& bundle, std::size_t path, std::size_t step,
                            const std::function<double(double)>& f);

// Same noise on a grid with `factor` times fewer steps: increments and counts
// of consecutive fine steps are summed. Used for nested-grid extrapolation.
NoiseBundle coarsen(const NoiseBundle& fine, std::size_t factor);

// Brownian levels B(t_i) and cumulative jump counts N_m(t_i), node-major,
// (n+1) x n_paths each.
struct NoiseLevels {
  std::size_t n_paths = 0;
  std::size_t n_atoms = 0;
  std::vector<double> brownian;
  std::vector<double> counts;  // (n+1) x n_atoms x n_paths

  std::span<const double> brownian_at(std::size_t node) const {
    return {brownian.data() + node * n_paths, n_paths};
  }
  std::span<const double> counts_at(std::size_t node, std::size_t atom) const {
    return {counts.data() + (node * n_atoms + atom) * n_paths, n_paths};
  }
};

NoiseLevels accumulate_levels(const NoiseBundle& bundle);

// Little-endian dump: header {n, n_paths, seed} as uint64, then increments as
// IEEE-754 doubles (step-major), then jump counts as uint32.
void write_noise(const NoiseBundle& bundle, std::ostream& out);
NoiseBundle read_noise(std::istream& in, const TimeGrid& grid, const LevyMeasure& levy, std::size_t n_blocks);

}  // namespace fbsvie
