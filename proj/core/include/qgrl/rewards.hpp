// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qgrl/corpus.hpp"
#include "qgrl/nn/graph.hpp"

namespace qgrl {

struct RewardConfig {
  double epsilon = 1e-12;
  std::size_t max_answer_length = 30;

  void validate() const;
  nlohmann::json to_json() const;
  static RewardConfig from_json(const nlohmann::json& j);
};

// Oracle interfaces. The desk models in oracles.hpp implement these; tests
// substitute stubs with closed-form outputs.

class LanguageModelScorer {
 public:
  virtual ~LanguageModelScorer() = default;
  /// P_LM(y_t | y_<t) for every question token followed by EOS.
  virtual std::vector<double> token_probabilities(const TokenSeq& question) const = 0;
  virtual std::string fingerprint() const = 0;
};

class RelevanceScorer {
 public:
  virtual ~RelevanceScorer() = default;
  virtual double relevance_probability(const TokenSeq& document, const TokenSeq& question) const = 0;
  virtual std::string fingerprint() const = 0;
};

struct SpanDistributions {
  nn::Vector start;
  nn::Vector end;
};

class SpanScorer {
 public:
  virtual ~SpanScorer() = default;
  virtual SpanDistributions span_distributions(const TokenSeq& document,
                                               const TokenSeq& question) const = 0;
  virtual std::string fingerprint() const = 0;
};

/// -exp(-(1/T) sum_t log max(p_t, eps)); the negated perplexity.
double fluency_reward(std::span<const double> token_probs, const RewardConfig& cfg = {});
double fluency_reward(const TokenSeq& question, const LanguageModelScorer& lm,
                      const RewardConfig& cfg = {});

/// -log(1 - P_rel + eps), P_rel clamped to [0, 1].
double relevance_reward(double p_rel, const RewardConfig& cfg = {});
double relevance_reward(const TokenSeq& document, const TokenSeq& question,
                        const RelevanceScorer& disc, const RewardConfig& cfg = {});

/// max over i <= j <= i + max_len of sqrt(start_i * end_j), by a sliding
/// window maximum of the start distribution. Bit-identical to the
/// exhaustive search since rounding is monotone.
double max_span_score(const nn::Vector& start, const nn::Vector& end, std::size_t max_len);
/// Reference enumeration over every valid (i, j).
double max_span_score_exhaustive(const nn::Vector& start, const nn::Vector& end,
                                 std::size_t max_len);
/// Best (i, j) with the same constraint; ties go to the earliest pair.
TokenSpan best_span(const SpanDistributions& dists, std::size_t max_len);

/// -log(1 - s + eps) for a span score s.
double answerability_from_score(double score, const RewardConfig& cfg = {});
double answerability_reward(const SpanDistributions& dists, const RewardConfig& cfg = {});
double answerability_reward(const TokenSeq& document, const TokenSeq& question,
                            const SpanScorer& qa, const RewardConfig& cfg = {});

struct FocalParams {
  double alpha_positive = 0.75;
  double alpha_negative = 0.25;
  double lambda = 2.0;

  void validate() const;
  double alpha(bool positive) const { return positive ? alpha_positive : alpha_negative; }
  nlohmann::json to_json() const;
  static FocalParams from_json(const nlohmann::json& j);
};

/// -alpha (1 - p)^lambda log p, with p clamped to [eps, 1].
double focal_loss(double p_true, double alpha, double lambda, double eps = 1e-12);

/// Focal loss of a binary classifier from its logit z, where p = sigmoid(z)
/// is the probability of the positive class.
nn::Var focal_loss_from_logit(nn::Var logit, bool positive, const FocalParams& params);

/// The oracles a run scores against; any may be absent.
struct RewardOracles {
  const LanguageModelScorer* fluency = nullptr;
  const RelevanceScorer* relevance = nullptr;
  const SpanScorer* answerability = nullptr;

  /// Combined fingerprint of the present oracles.
  std::string fingerprint() const;
};

struct RewardScores {
  std::optional<double> fluency;
  std::optional<double> relevance;
  std::optional<double> answerability;
};

/// Scores every present oracle. Empty questions have no defined relevance or
/// answerability and leave those fields unset.
RewardScores score_rewards(const TokenSeq& document, const TokenSeq& question,
                           const RewardOracles& oracles, const RewardConfig& cfg = {});

}  // namespace qgrl
