// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "qgrl/checkpoint.hpp"
#include "qgrl/corpus.hpp"
#include "qgrl/decoding.hpp"
#include "qgrl/nn/layers.hpp"

namespace qgrl {

struct GeneratorConfig {
  std::size_t hidden_size = 512;
  std::size_t embedding_size = 300;
  std::size_t max_decode_length = 32;
  std::size_t max_input_length = kMaxInputLength;
  double coverage_weight = 0.25;
  std::size_t beam_size = 3;

  void validate() const;
  nlohmann::json to_json() const;
  static GeneratorConfig from_json(const nlohmann::json& j);
};

/// A document as the copy mechanism sees it. Tokens outside the vocabulary
/// get document-local ids V, V+1, ... in order of first appearance.
struct SourceDocument {
  TokenSeq tokens;
  std::vector<TokenId> input_ids;       // vocabulary ids, OOV -> UNK
  std::vector<nn::Index> extended_ids;  // per position
  TokenSeq oov_tokens;
  std::size_t vocab_size = 0;

  std::size_t extended_size() const { return vocab_size + oov_tokens.size(); }
  /// Vocabulary id, document-local OOV id, or UNK.
  TokenId extended_id(const std::string& token, const Vocabulary& vocab) const;
  std::string token(TokenId id, const Vocabulary& vocab) const;
};

/// Per-step output of the decoder.
struct DecoderStep {
  nn::Vector distribution;  // over the extended vocabulary
  nn::Vector attention;     // a^t over document positions
  nn::Vector coverage;      // c^t, the coverage this step attended with
  double p_gen = 1.0;
  nn::Vector state;         // decoder hidden state after the step

  nn::Vector next_coverage() const { return coverage + attention; }
};

class GeneratorSession;

/// Sequence-to-sequence question generator: bidirectional GRU encoder, GRU
/// decoder with additive attention and a coverage feature, and a
/// pointer-generator output
///   P(y) = p_gen * P_vocab(y) + (1 - p_gen) * sum_{i: x_i = y} a_i.
class Generator {
 public:
  Generator(GeneratorConfig config, Vocabulary vocab, std::uint64_t seed);

  const GeneratorConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  nn::ParameterStore& params() { return *params_; }
  const nn::ParameterStore& params() const { return *params_; }

  SourceDocument prepare(const TokenSeq& document) const;
  /// Question tokens followed by EOS, as extended ids (absent tokens -> UNK).
  std::vector<TokenId> target_ids(const SourceDocument& src, const TokenSeq& question) const;
  /// Extended ids back to text; a trailing EOS is dropped.
  TokenSeq to_tokens(const SourceDocument& src, const std::vector<TokenId>& ids) const;

  struct Encoded {
    nn::Var states;    // 2h x n
    nn::Var features;  // attention projection of states, h x n
    nn::Var initial_state;
    const SourceDocument* source = nullptr;
  };

  struct StepVars {
    nn::Var distribution;
    nn::Var attention;
    nn::Var p_gen;
    nn::Var state;
  };

  Encoded encode(nn::Graph& g, const SourceDocument& src) const;
  StepVars decode_step(nn::Graph& g, const Encoded& enc, TokenId prev_token, nn::Var state,
                       nn::Var coverage, std::optional<double> force_p_gen = std::nullopt) const;

  /// Teacher-forced L_base over question + EOS:
  ///   (1/T) sum_t [ -log P(y_t) + coverage_weight * sum_i min(a_i^t, c_i^t) ].
  nn::Var mle_loss(nn::Graph& g, const Example& example) const;
  nn::Var mle_loss(nn::Graph& g, const SourceDocument& src, const TokenSeq& question) const;

  /// Teacher-forced log P of each token of `tokens` (extended ids).
  std::vector<nn::Var> sequence_log_probs(nn::Graph& g, const SourceDocument& src,
                                          const std::vector<TokenId>& tokens) const;
  /// (1/T) sum_t log P(tokens_t); the factor the policy-gradient losses scale.
  nn::Var mean_log_prob(nn::Graph& g, const SourceDocument& src,
                        const std::vector<TokenId>& tokens) const;

  /// Encoder states (2h x n) for a raw document.
  nn::Matrix encode_states(const TokenSeq& document) const;

  SampledSequence sample(const TokenSeq& document, std::size_t max_len, Rng& rng) const;
  SampledSequence sample(const TokenSeq& document, std::size_t max_len, std::uint64_t seed) const;
  std::vector<TokenId> greedy(const TokenSeq& document, std::size_t max_len) const;
  std::vector<TokenId> beam_search(const TokenSeq& document, std::size_t beam_size,
                                   std::size_t max_len) const;
  /// Decodes with the configured beam and returns question text.
  TokenSeq generate(const TokenSeq& document) const;
  TokenSeq generate(const TokenSeq& document, std::size_t beam_size, std::size_t max_len) const;

  /// exp(mean teacher-forced NLL per token, EOS included, no coverage term).
  double perplexity(const Corpus& corpus) const;
  /// Mean L_base over a corpus.
  double mean_loss(const Corpus& corpus) const;

  Checkpoint to_checkpoint() const;
  static Generator from_checkpoint(const Checkpoint& ckpt);

 private:
  friend class GeneratorSession;

  GeneratorConfig config_;
  Vocabulary vocab_;
  std::unique_ptr<nn::ParameterStore> params_;
  nn::Embedding embedding_;
  nn::BiGru encoder_;
  nn::Linear bridge_;
  nn::GruCell decoder_;
  nn::Linear attn_states_;
  nn::Linear attn_query_;
  nn::Parameter* attn_coverage_ = nullptr;
  nn::Parameter* attn_vector_ = nullptr;
  nn::Linear output_;
  nn::Linear vocab_proj_;
  nn::Linear gate_;
};

/// Read-only inference context for one document; implements StepModel so
/// the generic decoders can drive it.
class GeneratorSession {
 public:
  using State = DecoderStep;

  GeneratorSession(const Generator& generator, const TokenSeq& document);
  GeneratorSession(const GeneratorSession&) = delete;
  GeneratorSession& operator=(const GeneratorSession&) = delete;

  const SourceDocument& source() const { return source_; }
  const nn::Matrix& encoder_states() const { return encoded_.states.value(); }

  /// First step: previous token BOS, bridged encoder state, zero coverage.
  DecoderStep first_step(std::optional<double> force_p_gen = std::nullopt) const;
  DecoderStep step(TokenId prev_token, const nn::Vector& state, const nn::Vector& coverage,
                   std::optional<double> force_p_gen = std::nullopt) const;

  State initial() const { return first_step(); }
  const nn::Vector& distribution(const State& s) const { return s.distribution; }
  State advance(const State& s, TokenId token) const {
    return step(token, s.state, s.next_coverage());
  }
  TokenId eos() const { return Vocabulary::kEos; }

 private:
  const Generator* generator_;
  SourceDocument source_;
  std::unique_ptr<nn::Graph> graph_;
  Generator::Encoded encoded_;
};

}  // namespace qgrl
