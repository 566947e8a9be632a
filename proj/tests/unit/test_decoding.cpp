// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "qgrl/decoding.hpp"
#include "qgrl/error.hpp"
#include "support/oracles.hpp"

using namespace qgrl;

namespace {

/// Emits a fixed sequence with certainty, then EOS.
struct PointMass {
  struct State {
    std::size_t t = 0;
    nn::Vector dist;
  };
  std::vector<TokenId> script;  // ends with EOS
  std::size_t vocab = 5;

  State at(std::size_t t) const {
    State s{t, nn::Vector::Zero(static_cast<nn::Index>(vocab))};
    s.dist(script[std::min(t, script.size() - 1)]) = 1.0;
    return s;
  }
  State initial() const { return at(0); }
  const nn::Vector& distribution(const State& s) const { return s.dist; }
  State advance(const State& s, TokenId) const { return at(s.t + 1); }
  TokenId eos() const { return 4; }
};

}  // namespace

TEST_CASE("point-mass model: sample, greedy and beam all return the script") {
  const PointMass m{{2, 0, 3, 4}};
  Rng rng(1);
  CHECK(sample_sequence(m, 10, rng).tokens == m.script);
  CHECK(greedy_decode(m, 10).tokens == m.script);
  CHECK(beam_search(m, 1, 10).tokens == m.script);
  CHECK(beam_search(m, 3, 10).tokens == m.script);
  const auto capped = sample_sequence(m, 2, rng);
  CHECK(capped.tokens == std::vector<TokenId>{2, 0});
  CHECK_FALSE(capped.terminated);
}

TEST_CASE("sampling is reproducible under a seed") {
  const oracle::ToyModel m{6, 17};
  Rng a(5), b(5);
  const auto x = sample_sequence(m, 12, a), y = sample_sequence(m, 12, b);
  CHECK(x.tokens == y.tokens);
  CHECK(x.log_probs == y.log_probs);
}

TEST_CASE("first sampled token follows its probability") {
  const oracle::ToyModel m{4, 3};
  const double p = m.initial().dist(1);
  const int n = 10000;
  Rng rng(77);
  int hits = 0;
  for (int i = 0; i < n; ++i) hits += sample_sequence(m, 1, rng).tokens[0] == 1;
  const double sigma = std::sqrt(p * (1 - p) / n);
  CHECK(std::abs(hits / static_cast<double>(n) - p) <= 3 * sigma);
}

TEST_CASE("exhaustive-width beam returns the true argmax on two steps") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const oracle::ToyModel m{3, seed};
    const Hypothesis truth = oracle::exhaustive_best(m, 2);
    const Hypothesis got = beam_search(m, 9, 2);
    CHECK(got.tokens == truth.tokens);
    CHECK(got.score() == doctest::Approx(truth.score()).epsilon(1e-12));
  }
}

TEST_CASE("beam 1 is greedy and wider beams never score lower") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const oracle::ToyModel m{5, seed};
    CHECK(beam_search(m, 1, 6).tokens == greedy_decode(m, 6).tokens);
    double prev = -1e300;
    for (std::size_t b = 1; b <= 6; ++b) {
      const double s = beam_search(m, b, 4).score();
      CHECK(s >= prev - 1e-12);
      prev = s;
    }
    // Exhaustive search bounds every beam from above, and a beam as wide as
    // the search tree reaches it.
    const double best = oracle::exhaustive_best(m, 3).score();
    CHECK(beam_search(m, 4, 3).score() <= best + 1e-12);
    CHECK(beam_search(m, 125, 3).score() == doctest::Approx(best).epsilon(1e-12));
  }
  CHECK_THROWS_AS(beam_search(oracle::ToyModel{}, 0, 3), InvalidArgument);
  CHECK_THROWS_AS(greedy_decode(oracle::ToyModel{}, 0), InvalidArgument);
}
