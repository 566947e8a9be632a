// SPDX-License-Identifier: Apache-2.0
#include "qgrl/rng.hpp"

#include <limits>

#include "qgrl/error.hpp"

namespace qgrl {

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw InvalidArgument("Rng::index: empty range");
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return static_cast<std::size_t>(x % bound);
}

std::size_t Rng::categorical(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw InvalidArgument("Rng::categorical: weights sum to zero");
  const double u = uniform() * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last_positive = i;
    if (u < acc) return i;
  }
  // Rounding can leave u just above the accumulated sum.
  return last_positive;
}

Rng Rng::fork(std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(engine_() >> 32),
                    static_cast<std::uint32_t>(salt & 0xffffffffu),
                    static_cast<std::uint32_t>(salt >> 32)};
  std::uint64_t seed_words[2];
  std::uint32_t raw[4];
  seq.generate(raw, raw + 4);
  seed_words[0] = (static_cast<std::uint64_t>(raw[0]) << 32) | raw[1];
  seed_words[1] = (static_cast<std::uint64_t>(raw[2]) << 32) | raw[3];
  return Rng(seed_words[0] ^ (seed_words[1] * 0x9E3779B97F4A7C15ull));
}

}  // namespace qgrl
