// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace qgrl {

/// Seeded generator with platform-independent derived draws. The standard
/// distributions are implementation-defined, so everything that feeds a
/// logged or reported number goes through these helpers instead.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Unbiased integer in [0, n). n must be positive.
  std::size_t index(std::size_t n);

  /// Draws an index from unnormalised non-negative weights.
  std::size_t categorical(std::span<const double> weights);

  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(items[i - 1], items[j]);
    }
  }

  /// Independent child stream; used to decouple e.g. sampling from shuffling.
  Rng fork(std::uint64_t salt);

 private:
  std::mt19937_64 engine_;
};

}  // namespace qgrl
