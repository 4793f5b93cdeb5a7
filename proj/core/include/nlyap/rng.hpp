#pragma once

#include <cstdint>
#include <random>
#include <span>

#include "nlyap/interval.hpp"

namespace nlyap {

std::uint64_t splitmix64(std::uint64_t x);

/// Seed of the independent stream `index` derived from a run seed.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index);

/// mt19937_64 with distribution code of our own, so sequences do not depend
/// on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  void fill_uniform(const BoxRegion& box, std::span<double> out);

 private:
  std::mt19937_64 engine_;
};

}  // namespace nlyap
