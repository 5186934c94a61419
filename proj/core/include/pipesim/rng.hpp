#pragma once

#include <cstdint>

namespace pipesim {

// Counter-based generator: draw n is splitmix64(seed + n * golden), so the
// output depends only on (seed, position) and is identical on every platform
// with IEEE doubles.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) noexcept : seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t position() const noexcept { return position_; }

  std::uint64_t next_u64() noexcept;
  // Uniform in [0, 1) with 53 bits of mantissa.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  // Standard normal via Box-Muller; consumes two draws.
  double normal() noexcept;
  // Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound) noexcept;

  // Independent generator derived from this seed and a stream id. Does not
  // advance this generator.
  Rng split(std::uint64_t stream) const noexcept;

 private:
  std::uint64_t seed_;
  std::uint64_t position_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace pipesim
