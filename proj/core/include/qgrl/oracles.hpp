// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "qgrl/checkpoint.hpp"
#include "qgrl/corpus.hpp"
#include "qgrl/nn/layers.hpp"
#include "qgrl/rewards.hpp"

namespace qgrl {

struct OracleModelConfig {
  std::size_t hidden_size = 64;
  std::size_t embedding_size = 32;

  void validate() const;
  nlohmann::json to_json() const;
  static OracleModelConfig from_json(const nlohmann::json& j);
};

struct OracleTrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  double learning_rate = 3e-3;
  double clip_norm = 5.0;
  std::size_t patience = 2;
  double lr_decay = 0.5;
  std::uint64_t seed = 7;

  void validate() const;
  nlohmann::json to_json() const;
  static OracleTrainConfig from_json(const nlohmann::json& j);
};

/// Per-epoch held-out score of an oracle fit.
struct OracleFitLog {
  std::vector<double> train_loss;
  std::vector<double> heldout_loss;
  std::size_t best_epoch = 0;
};

/// GRU language model over questions, started from BOS and closed with EOS.
class LanguageModel : public LanguageModelScorer {
 public:
  LanguageModel(OracleModelConfig config, Vocabulary vocab, std::uint64_t seed);

  std::vector<double> token_probabilities(const TokenSeq& question) const override;
  std::string fingerprint() const override;

  /// Next-token distributions for every prefix of question + EOS.
  std::vector<nn::Vector> step_distributions(const TokenSeq& question) const;
  /// Mean next-token NLL over question + EOS.
  nn::Var loss(nn::Graph& g, const TokenSeq& question) const;
  /// exp(total NLL / total predicted tokens).
  double perplexity(const std::vector<TokenSeq>& questions) const;

  const Vocabulary& vocab() const { return vocab_; }
  const OracleModelConfig& config() const { return config_; }
  nn::ParameterStore& params() { return *params_; }
  const nn::ParameterStore& params() const { return *params_; }

  Checkpoint to_checkpoint(const nlohmann::json& metadata = nlohmann::json::object()) const;
  static LanguageModel from_checkpoint(const Checkpoint& ckpt);

 private:
  std::vector<nn::Var> logits(nn::Graph& g, const TokenSeq& question) const;

  OracleModelConfig config_;
  Vocabulary vocab_;
  std::unique_ptr<nn::ParameterStore> params_;
  nn::Embedding embedding_;
  nn::GruCell cell_;
  nn::Linear output_;
};

struct LmTrainResult {
  LanguageModel model;
  double dev_perplexity = 0.0;
  OracleFitLog log;
};

/// Fits on the training questions; dev perplexity selects the epoch.
LmTrainResult train_lm(const Corpus& train, const Corpus& dev, const Vocabulary& vocab,
                       const OracleModelConfig& model, const OracleTrainConfig& cfg);

/// A labelled (document, question) pair for the relevance classifier.
struct RelevancePair {
  TokenSeq document;
  TokenSeq question;
  bool positive = true;
};

/// Pooled-encoder classifier: BiGRU encodings of both sides, question-to-
/// document attention, [q; aligned; q*aligned] mean and max pooled, then a
/// one-hidden-layer scorer. Question tokens also see an exact-match bit.
class RelevanceDiscriminator : public RelevanceScorer {
 public:
  RelevanceDiscriminator(OracleModelConfig config, Vocabulary vocab, std::uint64_t seed);

  double relevance_probability(const TokenSeq& document, const TokenSeq& question) const override;
  std::string fingerprint() const override;

  nn::Var logit(nn::Graph& g, const TokenSeq& document, const TokenSeq& question) const;

  const Vocabulary& vocab() const { return vocab_; }
  nn::ParameterStore& params() { return *params_; }
  const nn::ParameterStore& params() const { return *params_; }

  Checkpoint to_checkpoint(const nlohmann::json& metadata = nlohmann::json::object()) const;
  static RelevanceDiscriminator from_checkpoint(const Checkpoint& ckpt);

 private:
  OracleModelConfig config_;
  Vocabulary vocab_;
  std::unique_ptr<nn::ParameterStore> params_;
  nn::Embedding embedding_;
  nn::BiGru doc_encoder_;
  nn::BiGru question_encoder_;
  nn::Linear align_;
  nn::Linear hidden_;
  nn::Linear score_;
};

struct BinaryScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
};

/// Threshold 0.5 on the positive class.
BinaryScores evaluate_relevance(const RelevanceScorer& disc, const std::vector<RelevancePair>& pairs);

struct DiscriminatorTrainResult {
  RelevanceDiscriminator model;
  BinaryScores heldout;
  OracleFitLog log;
};

/// Minimises mean focal loss over `train`; `heldout` selects the epoch and
/// is scored at the end. Both classes must be present in `train`.
DiscriminatorTrainResult train_relevance_discriminator(const std::vector<RelevancePair>& train,
                                                       const std::vector<RelevancePair>& heldout,
                                                       const Vocabulary& vocab,
                                                       const OracleModelConfig& model,
                                                       const FocalParams& focal,
                                                       const OracleTrainConfig& cfg);

/// Shared-encoder span scorer: one BiGRU reads document and question (each
/// token carries an exact-match bit against the other side); the mean
/// question state scores every document position bilinearly for start and
/// end.
class SpanQAModel : public SpanScorer {
 public:
  SpanQAModel(OracleModelConfig config, Vocabulary vocab, std::uint64_t seed);

  SpanDistributions span_distributions(const TokenSeq& document,
                                       const TokenSeq& question) const override;
  std::string fingerprint() const override;

  /// -log P_s(start) - log P_e(end).
  nn::Var loss(nn::Graph& g, const TokenSeq& document, const TokenSeq& question,
               TokenSpan gold) const;
  TokenSpan predict(const TokenSeq& document, const TokenSeq& question,
                    std::size_t max_answer_length) const;

  const Vocabulary& vocab() const { return vocab_; }
  nn::ParameterStore& params() { return *params_; }
  const nn::ParameterStore& params() const { return *params_; }

  Checkpoint to_checkpoint(const nlohmann::json& metadata = nlohmann::json::object()) const;
  static SpanQAModel from_checkpoint(const Checkpoint& ckpt);

 private:
  struct Logits {
    nn::Var start;
    nn::Var end;
  };
  Logits logits(nn::Graph& g, const TokenSeq& document, const TokenSeq& question) const;

  OracleModelConfig config_;
  Vocabulary vocab_;
  std::unique_ptr<nn::ParameterStore> params_;
  nn::Embedding embedding_;
  nn::BiGru encoder_;
  nn::Linear start_;
  nn::Linear end_;
};

/// Bag-of-tokens overlap F1.
double token_f1(const TokenSeq& prediction, const TokenSeq& gold);

struct QaScores {
  double exact_match = 0.0;
  double f1 = 0.0;
  std::size_t count = 0;
};

/// Scores predicted spans against gold answers on examples that have one.
QaScores evaluate_qa(const SpanQAModel& qa, const Corpus& corpus, std::size_t max_answer_length);

struct QaTrainResult {
  SpanQAModel model;
  QaScores dev;
  OracleFitLog log;
};

QaTrainResult train_qa(const Corpus& train, const Corpus& dev, const Vocabulary& vocab,
                       const OracleModelConfig& model, const OracleTrainConfig& cfg,
                       std::size_t max_answer_length);

}  // namespace qgrl
