// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <vector>

#include "qgrl/corpus.hpp"
#include "qgrl/error.hpp"
#include "qgrl/nn/graph.hpp"
#include "qgrl/rng.hpp"

namespace qgrl {

/// Autoregressive model seen by the decoders: a state exposes the distribution
/// of the next token, and advance() consumes a chosen token.
template <class M>
concept StepModel = requires(const M& m, const typename M::State& s, TokenId tok) {
  { m.initial() } -> std::same_as<typename M::State>;
  { m.distribution(s) } -> std::convertible_to<const nn::Vector&>;
  { m.advance(s, tok) } -> std::same_as<typename M::State>;
  { m.eos() } -> std::convertible_to<TokenId>;
};

struct SampledSequence {
  std::vector<TokenId> tokens;   // includes the terminating EOS when present
  std::vector<double> log_probs;  // log P of each sampled entry
  bool terminated = false;       // ended on EOS rather than the length cap

  std::size_t length() const { return tokens.size(); }
  double mean_log_prob() const;
};

struct Hypothesis {
  std::vector<TokenId> tokens;
  double log_prob = 0.0;
  /// log_prob / length
  double score() const { return tokens.empty() ? 0.0 : log_prob / static_cast<double>(tokens.size()); }
};

/// Multinomial sampling, one token per step until EOS or max_len tokens.
template <StepModel M>
SampledSequence sample_sequence(const M& model, std::size_t max_len, Rng& rng) {
  if (max_len == 0) throw InvalidArgument("sample_sequence: max_len must be >= 1");
  SampledSequence out;
  auto state = model.initial();
  for (std::size_t t = 0; t < max_len; ++t) {
    const nn::Vector& dist = model.distribution(state);
    const std::size_t k = rng.categorical(std::span<const double>(dist.data(), static_cast<std::size_t>(dist.size())));
    const TokenId tok = static_cast<TokenId>(k);
    out.tokens.push_back(tok);
    out.log_probs.push_back(std::log(dist(static_cast<nn::Index>(k))));
    if (tok == model.eos()) {
      out.terminated = true;
      break;
    }
    if (t + 1 < max_len) state = model.advance(state, tok);
  }
  return out;
}

/// Argmax decoding; ties go to the lowest token id.
template <StepModel M>
Hypothesis greedy_decode(const M& model, std::size_t max_len) {
  if (max_len == 0) throw InvalidArgument("greedy_decode: max_len must be >= 1");
  Hypothesis h;
  auto state = model.initial();
  for (std::size_t t = 0; t < max_len; ++t) {
    const nn::Vector& dist = model.distribution(state);
    nn::Index best = 0;
    dist.maxCoeff(&best);
    const TokenId tok = static_cast<TokenId>(best);
    h.tokens.push_back(tok);
    h.log_prob += std::log(dist(best));
    if (tok == model.eos()) break;
    if (t + 1 < max_len) state = model.advance(state, tok);
  }
  return h;
}

/// Beam search scored by length-normalised log-probability. Each step keeps
/// the `beam_size` best extensions of the live hypotheses by total
/// log-probability; extensions ending in EOS, or reaching max_len, retire to
/// the finished pool, and the best-scoring finished hypothesis is returned.
/// With beam_size == 1 this is exactly greedy_decode.
template <StepModel M>
Hypothesis beam_search(const M& model, std::size_t beam_size, std::size_t max_len) {
  if (beam_size == 0) throw InvalidArgument("beam_search: beam_size must be >= 1");
  if (max_len == 0) throw InvalidArgument("beam_search: max_len must be >= 1");
  using State = typename M::State;
  struct Live {
    State state;
    Hypothesis hyp;
  };
  struct Candidate {
    std::size_t parent;
    TokenId token;
    double log_prob;
  };

  std::vector<Live> live;
  live.push_back(Live{model.initial(), Hypothesis{}});
  std::vector<Hypothesis> finished;

  for (std::size_t t = 0; t < max_len && !live.empty(); ++t) {
    std::vector<Candidate> cands;
    for (std::size_t i = 0; i < live.size(); ++i) {
      const nn::Vector& dist = model.distribution(live[i].state);
      // Only the top beam_size tokens of one parent can survive pruning.
      std::vector<nn::Index> order(static_cast<std::size_t>(dist.size()));
      for (std::size_t k = 0; k < order.size(); ++k) order[k] = static_cast<nn::Index>(k);
      const std::size_t keep = std::min(beam_size, order.size());
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                        [&dist](nn::Index a, nn::Index b) {
                          if (dist(a) != dist(b)) return dist(a) > dist(b);
                          return a < b;
                        });
      for (std::size_t k = 0; k < keep; ++k) {
        const double p = dist(order[k]);
        if (!(p > 0.0)) continue;
        cands.push_back(Candidate{i, static_cast<TokenId>(order[k]), live[i].hyp.log_prob + std::log(p)});
      }
    }
    std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      return a.log_prob > b.log_prob;
    });
    if (cands.size() > beam_size) cands.resize(beam_size);

    std::vector<Live> next;
    for (const Candidate& c : cands) {
      Hypothesis h = live[c.parent].hyp;
      h.tokens.push_back(c.token);
      h.log_prob = c.log_prob;
      if (c.token == model.eos() || t + 1 == max_len) {
        finished.push_back(std::move(h));
      } else {
        next.push_back(Live{model.advance(live[c.parent].state, c.token), std::move(h)});
      }
    }
    live = std::move(next);
  }

  const Hypothesis* best = nullptr;
  for (const auto& h : finished)
    if (!best || h.score() > best->score()) best = &h;
  if (!best) throw InvalidArgument("beam_search: no hypothesis survived");
  return *best;
}

}  // namespace qgrl
