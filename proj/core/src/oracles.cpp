// SPDX-License-Identifier: Apache-2.0
#include "qgrl/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <unordered_set>

#include "qgrl/error.hpp"
#include "qgrl/nn/optim.hpp"
#include "qgrl/rng.hpp"

namespace qgrl {

using nn::Graph;
using nn::Index;
using nn::Matrix;
using nn::Var;
using nn::Vector;

void OracleModelConfig::validate() const {
  if (hidden_size == 0 || embedding_size == 0) throw ConfigError("oracle sizes must be positive");
}

nlohmann::json OracleModelConfig::to_json() const {
  return {{"hidden_size", hidden_size}, {"embedding_size", embedding_size}};
}

OracleModelConfig OracleModelConfig::from_json(const nlohmann::json& j) {
  OracleModelConfig c;
  c.hidden_size = j.at("hidden_size").get<std::size_t>();
  c.embedding_size = j.at("embedding_size").get<std::size_t>();
  c.validate();
  return c;
}

void OracleTrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("oracle epochs must be >= 1");
  if (batch_size == 0) throw ConfigError("oracle batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("oracle learning_rate must be > 0");
  if (!(clip_norm > 0.0)) throw ConfigError("oracle clip_norm must be > 0");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("oracle lr_decay must be in (0, 1]");
}

nlohmann::json OracleTrainConfig::to_json() const {
  return {{"epochs", epochs},       {"batch_size", batch_size}, {"learning_rate", learning_rate},
          {"clip_norm", clip_norm}, {"patience", patience},     {"lr_decay", lr_decay},
          {"seed", seed}};
}

OracleTrainConfig OracleTrainConfig::from_json(const nlohmann::json& j) {
  OracleTrainConfig c;
  c.epochs = j.at("epochs").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.clip_norm = j.at("clip_norm").get<double>();
  c.patience = j.at("patience").get<std::size_t>();
  c.lr_decay = j.at("lr_decay").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.validate();
  return c;
}

namespace {

// Mini-batch Adam with clipping, plateau decay and early stopping on a
// held-out loss; the best parameters are restored at the end.
OracleFitLog fit(nn::ParameterStore& params, std::size_t n, const OracleTrainConfig& cfg,
                 const std::function<Var(Graph&, std::size_t)>& loss_at,
                 const std::function<double()>& heldout_loss, const std::string& what) {
  cfg.validate();
  OracleFitLog log;
  Rng rng(cfg.seed);
  nn::Adam adam(params);
  nn::PlateauSchedule schedule(cfg.learning_rate, cfg.lr_decay);
  nn::ParameterStore best = params;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t b = 0; b < n; b += cfg.batch_size) {
      const std::size_t e = std::min(n, b + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(e - b);
      params.zero_grad();
      for (std::size_t k = b; k < e; ++k) {
        Graph g;
        Var loss = loss_at(g, order[k]);
        const double v = loss.scalar();
        if (!std::isfinite(v))
          throw TrainingError(what + ": non-finite loss at epoch " + std::to_string(epoch) +
                              ", example " + std::to_string(order[k]));
        total += v;
        g.backward(loss, scale);
      }
      nn::clip_global_norm(params, cfg.clip_norm);
      adam.step(schedule.learning_rate());
    }
    log.train_loss.push_back(total / static_cast<double>(n));
    const double h = heldout_loss();
    if (!std::isfinite(h))
      throw TrainingError(what + ": non-finite held-out loss at epoch " + std::to_string(epoch));
    log.heldout_loss.push_back(h);
    if (schedule.observe(h)) {
      best.copy_values_from(params);
      log.best_epoch = epoch;
    } else if (static_cast<std::size_t>(schedule.epochs_since_best()) > cfg.patience) {
      break;
    }
  }
  params.copy_values_from(best);
  return log;
}

std::string param_fingerprint(const std::string& kind, const nn::ParameterStore& params) {
  return kind + ":" + hex64(params.fingerprint());
}

std::unordered_set<std::string> token_set(const TokenSeq& tokens) {
  return {tokens.begin(), tokens.end()};
}

// Embedding followed by a 0/1 feature marking tokens present on the other side.
std::vector<Var> embed_with_match(Graph& g, const nn::Embedding& emb, const Vocabulary& vocab,
                                  const TokenSeq& tokens, const TokenSeq& other) {
  const auto other_set = token_set(other);
  std::vector<Var> out;
  out.reserve(tokens.size());
  for (const auto& tok : tokens) {
    const double bit = other_set.count(tok) ? 1.0 : 0.0;
    out.push_back(nn::vcat({emb(g, vocab.id(tok)), g.scalar(bit)}));
  }
  return out;
}

Vector softmax_vector(const Matrix& logits) {
  Vector v = logits.col(0);
  const double m = v.maxCoeff();
  v = (v.array() - m).exp().matrix();
  return v / v.sum();
}

template <class Model>
Model restore_model(const Checkpoint& ckpt) {
  Model m(OracleModelConfig::from_json(ckpt.config), ckpt.vocab, 0);
  ckpt.restore(m.params());
  return m;
}

Checkpoint make_checkpoint(const std::string& kind, const OracleModelConfig& config,
                           const Vocabulary& vocab, const nn::ParameterStore& params,
                           const nlohmann::json& metadata) {
  Checkpoint ckpt;
  ckpt.kind = kind;
  ckpt.config = config.to_json();
  ckpt.metadata = metadata;
  ckpt.vocab = vocab;
  ckpt.store(params);
  return ckpt;
}

}  // namespace

// ---------------------------------------------------------------------------
// LanguageModel

LanguageModel::LanguageModel(OracleModelConfig config, Vocabulary vocab, std::uint64_t seed)
    : config_(config), vocab_(std::move(vocab)), params_(std::make_unique<nn::ParameterStore>()) {
  config_.validate();
  Rng rng(seed);
  const Index h = static_cast<Index>(config_.hidden_size);
  const Index e = static_cast<Index>(config_.embedding_size);
  const Index v = static_cast<Index>(vocab_.size());
  embedding_ = nn::Embedding(*params_, "embedding", v, e, rng);
  cell_ = nn::GruCell(*params_, "cell", e, h, rng);
  output_ = nn::Linear(*params_, "output", h, v, rng);
}

std::vector<Var> LanguageModel::logits(Graph& g, const TokenSeq& question) const {
  std::vector<Var> out;
  out.reserve(question.size() + 1);
  Var state = cell_.zero_state(g);
  TokenId prev = Vocabulary::kBos;
  for (std::size_t t = 0; t <= question.size(); ++t) {
    state = cell_.step(g, embedding_(g, prev), state);
    out.push_back(output_(g, state));
    if (t < question.size()) prev = vocab_.id(question[t]);
  }
  return out;
}

std::vector<Vector> LanguageModel::step_distributions(const TokenSeq& question) const {
  Graph g(Graph::Mode::kInference);
  std::vector<Vector> out;
  for (Var l : logits(g, question)) out.push_back(softmax_vector(l.value()));
  return out;
}

std::vector<double> LanguageModel::token_probabilities(const TokenSeq& question) const {
  const auto dists = step_distributions(question);
  std::vector<double> probs;
  probs.reserve(dists.size());
  for (std::size_t t = 0; t < dists.size(); ++t) {
    const TokenId target = t < question.size() ? vocab_.id(question[t]) : Vocabulary::kEos;
    probs.push_back(dists[t](target));
  }
  return probs;
}

std::string LanguageModel::fingerprint() const { return param_fingerprint("lm", *params_); }

Var LanguageModel::loss(Graph& g, const TokenSeq& question) const {
  const auto ls = logits(g, question);
  std::vector<Var> terms;
  terms.reserve(ls.size());
  for (std::size_t t = 0; t < ls.size(); ++t) {
    const TokenId target = t < question.size() ? vocab_.id(question[t]) : Vocabulary::kEos;
    terms.push_back(nn::nll_from_logits(ls[t], target));
  }
  return nn::mean(nn::vcat(terms));
}

double LanguageModel::perplexity(const std::vector<TokenSeq>& questions) const {
  if (questions.empty()) throw InvalidArgument("perplexity: no questions");
  double nll = 0.0;
  std::size_t count = 0;
  for (const auto& q : questions) {
    for (double p : token_probabilities(q)) nll -= std::log(std::max(p, 1e-300));
    count += q.size() + 1;
  }
  return std::exp(nll / static_cast<double>(count));
}

Checkpoint LanguageModel::to_checkpoint(const nlohmann::json& metadata) const {
  return make_checkpoint("lm", config_, vocab_, *params_, metadata);
}

LanguageModel LanguageModel::from_checkpoint(const Checkpoint& ckpt) {
  return restore_model<LanguageModel>(ckpt);
}

namespace {

std::vector<TokenSeq> questions_of(const Corpus& corpus) {
  std::vector<TokenSeq> out;
  out.reserve(corpus.size());
  for (const auto& ex : corpus.examples) out.push_back(ex.question);
  return out;
}

}  // namespace

LmTrainResult train_lm(const Corpus& train, const Corpus& dev, const Vocabulary& vocab,
                       const OracleModelConfig& model_cfg, const OracleTrainConfig& cfg) {
  if (train.empty()) throw InvalidArgument("train_lm: empty training corpus");
  const auto train_q = questions_of(train);
  const auto dev_q = dev.empty() ? train_q : questions_of(dev);
  LanguageModel model(model_cfg, vocab, cfg.seed);
  auto log = fit(
      model.params(), train_q.size(), cfg,
      [&](Graph& g, std::size_t i) { return model.loss(g, train_q[i]); },
      [&] { return std::log(model.perplexity(dev_q)); }, "train_lm");
  const double ppl = model.perplexity(dev_q);
  return LmTrainResult{std::move(model), ppl, std::move(log)};
}

// ---------------------------------------------------------------------------
// RelevanceDiscriminator

RelevanceDiscriminator::RelevanceDiscriminator(OracleModelConfig config, Vocabulary vocab,
                                               std::uint64_t seed)
    : config_(config), vocab_(std::move(vocab)), params_(std::make_unique<nn::ParameterStore>()) {
  config_.validate();
  Rng rng(seed);
  const Index h = static_cast<Index>(config_.hidden_size);
  const Index e = static_cast<Index>(config_.embedding_size);
  const Index v = static_cast<Index>(vocab_.size());
  embedding_ = nn::Embedding(*params_, "embedding", v, e, rng);
  doc_encoder_ = nn::BiGru(*params_, "document", e + 1, h, rng);
  question_encoder_ = nn::BiGru(*params_, "question", e + 1, h, rng);
  align_ = nn::Linear(*params_, "align", 2 * h, 2 * h, rng, /*bias=*/false);
  hidden_ = nn::Linear(*params_, "hidden", 12 * h, h, rng);
  score_ = nn::Linear(*params_, "score", h, 1, rng);
}

Var RelevanceDiscriminator::logit(Graph& g, const TokenSeq& document,
                                  const TokenSeq& question) const {
  if (document.empty() || question.empty())
    throw InvalidArgument("relevance: document and question must be non-empty");
  Var hd = doc_encoder_.run(g, embed_with_match(g, embedding_, vocab_, document, question)).states;
  Var hq =
      question_encoder_.run(g, embed_with_match(g, embedding_, vocab_, question, document)).states;
  Var attention = nn::softmax(nn::matmul(nn::transpose(hd), align_.apply_columns(g, hq)));
  Var aligned = nn::matmul(hd, attention);
  Var features = nn::vcat({hq, aligned, nn::mul(hq, aligned)});
  Var pooled = nn::vcat({nn::row_mean(features), nn::row_max(features)});
  return score_(g, nn::tanh(hidden_(g, pooled)));
}

double RelevanceDiscriminator::relevance_probability(const TokenSeq& document,
                                                     const TokenSeq& question) const {
  Graph g(Graph::Mode::kInference);
  const double z = logit(g, document, question).scalar();
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

std::string RelevanceDiscriminator::fingerprint() const {
  return param_fingerprint("discriminator", *params_);
}

Checkpoint RelevanceDiscriminator::to_checkpoint(const nlohmann::json& metadata) const {
  return make_checkpoint("discriminator", config_, vocab_, *params_, metadata);
}

RelevanceDiscriminator RelevanceDiscriminator::from_checkpoint(const Checkpoint& ckpt) {
  return restore_model<RelevanceDiscriminator>(ckpt);
}

BinaryScores evaluate_relevance(const RelevanceScorer& disc,
                                const std::vector<RelevancePair>& pairs) {
  if (pairs.empty()) throw InvalidArgument("evaluate_relevance: no pairs");
  std::size_t tp = 0, fp = 0, fn = 0, correct = 0;
  for (const auto& p : pairs) {
    const bool predicted = disc.relevance_probability(p.document, p.question) >= 0.5;
    if (predicted && p.positive) ++tp;
    if (predicted && !p.positive) ++fp;
    if (!predicted && p.positive) ++fn;
    if (predicted == p.positive) ++correct;
  }
  BinaryScores s;
  s.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  s.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  s.accuracy = static_cast<double>(correct) / static_cast<double>(pairs.size());
  return s;
}

DiscriminatorTrainResult train_relevance_discriminator(const std::vector<RelevancePair>& train,
                                                       const std::vector<RelevancePair>& heldout,
                                                       const Vocabulary& vocab,
                                                       const OracleModelConfig& model_cfg,
                                                       const FocalParams& focal,
                                                       const OracleTrainConfig& cfg) {
  focal.validate();
  const auto positives = std::count_if(train.begin(), train.end(), [](auto& p) { return p.positive; });
  if (positives == 0) throw InvalidArgument("train_relevance_discriminator: no positive pairs");
  if (static_cast<std::size_t>(positives) == train.size())
    throw InvalidArgument("train_relevance_discriminator: no negative pairs");
  const auto& eval_pairs = heldout.empty() ? train : heldout;
  RelevanceDiscriminator model(model_cfg, vocab, cfg.seed);
  auto loss_of = [&](Graph& g, const RelevancePair& p) {
    return focal_loss_from_logit(model.logit(g, p.document, p.question), p.positive, focal);
  };
  auto log = fit(
      model.params(), train.size(), cfg,
      [&](Graph& g, std::size_t i) { return loss_of(g, train[i]); },
      [&] {
        double total = 0.0;
        for (const auto& p : eval_pairs) {
          Graph g(Graph::Mode::kInference);
          total += loss_of(g, p).scalar();
        }
        return total / static_cast<double>(eval_pairs.size());
      },
      "train_relevance_discriminator");
  const BinaryScores scores = evaluate_relevance(model, eval_pairs);
  return DiscriminatorTrainResult{std::move(model), scores, std::move(log)};
}

// ---------------------------------------------------------------------------
// SpanQAModel

SpanQAModel::SpanQAModel(OracleModelConfig config, Vocabulary vocab, std::uint64_t seed)
    : config_(config), vocab_(std::move(vocab)), params_(std::make_unique<nn::ParameterStore>()) {
  config_.validate();
  Rng rng(seed);
  const Index h = static_cast<Index>(config_.hidden_size);
  const Index e = static_cast<Index>(config_.embedding_size);
  const Index v = static_cast<Index>(vocab_.size());
  embedding_ = nn::Embedding(*params_, "embedding", v, e, rng);
  encoder_ = nn::BiGru(*params_, "encoder", e + 1, h, rng);
  start_ = nn::Linear(*params_, "start", 2 * h, 2 * h, rng);
  end_ = nn::Linear(*params_, "end", 2 * h, 2 * h, rng);
}

SpanQAModel::Logits SpanQAModel::logits(Graph& g, const TokenSeq& document,
                                        const TokenSeq& question) const {
  if (document.empty() || question.empty())
    throw InvalidArgument("span QA: document and question must be non-empty");
  Var hd = encoder_.run(g, embed_with_match(g, embedding_, vocab_, document, question)).states;
  Var hq = encoder_.run(g, embed_with_match(g, embedding_, vocab_, question, document)).states;
  Var q = nn::row_mean(hq);
  Var hd_t = nn::transpose(hd);
  return Logits{nn::matmul(hd_t, start_(g, q)), nn::matmul(hd_t, end_(g, q))};
}

SpanDistributions SpanQAModel::span_distributions(const TokenSeq& document,
                                                  const TokenSeq& question) const {
  Graph g(Graph::Mode::kInference);
  const Logits l = logits(g, document, question);
  return SpanDistributions{softmax_vector(l.start.value()), softmax_vector(l.end.value())};
}

std::string SpanQAModel::fingerprint() const { return param_fingerprint("qa", *params_); }

Var SpanQAModel::loss(Graph& g, const TokenSeq& document, const TokenSeq& question,
                      TokenSpan gold) const {
  if (gold.start > gold.end || gold.end >= document.size())
    throw InvalidArgument("span QA: gold span outside the document");
  const Logits l = logits(g, document, question);
  return nn::add(nn::nll_from_logits(l.start, static_cast<Index>(gold.start)),
                 nn::nll_from_logits(l.end, static_cast<Index>(gold.end)));
}

TokenSpan SpanQAModel::predict(const TokenSeq& document, const TokenSeq& question,
                               std::size_t max_answer_length) const {
  return best_span(span_distributions(document, question), max_answer_length);
}

Checkpoint SpanQAModel::to_checkpoint(const nlohmann::json& metadata) const {
  return make_checkpoint("qa", config_, vocab_, *params_, metadata);
}

SpanQAModel SpanQAModel::from_checkpoint(const Checkpoint& ckpt) {
  return restore_model<SpanQAModel>(ckpt);
}

double token_f1(const TokenSeq& prediction, const TokenSeq& gold) {
  if (prediction.empty() || gold.empty()) return prediction == gold ? 1.0 : 0.0;
  std::map<std::string, long> counts;
  for (const auto& t : gold) ++counts[t];
  long common = 0;
  for (const auto& t : prediction) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) return 0.0;
  const double p = static_cast<double>(common) / static_cast<double>(prediction.size());
  const double r = static_cast<double>(common) / static_cast<double>(gold.size());
  return 2 * p * r / (p + r);
}

namespace {

TokenSeq slice(const TokenSeq& tokens, TokenSpan span) {
  return TokenSeq(tokens.begin() + static_cast<std::ptrdiff_t>(span.start),
                  tokens.begin() + static_cast<std::ptrdiff_t>(span.end + 1));
}

std::vector<const Example*> answered(const Corpus& corpus) {
  std::vector<const Example*> out;
  for (const auto& ex : corpus.examples)
    if (ex.answer && !ex.question.empty()) out.push_back(&ex);
  return out;
}

}  // namespace

QaScores evaluate_qa(const SpanQAModel& qa, const Corpus& corpus, std::size_t max_answer_length) {
  QaScores s;
  for (const Example* ex : answered(corpus)) {
    const TokenSpan pred = qa.predict(ex->document, ex->question, max_answer_length);
    const TokenSeq p = slice(ex->document, pred);
    const TokenSeq gold = slice(ex->document, *ex->answer);
    if (p == gold) s.exact_match += 1.0;
    s.f1 += token_f1(p, gold);
    ++s.count;
  }
  if (s.count == 0) throw InvalidArgument("evaluate_qa: no examples with answer spans");
  s.exact_match /= static_cast<double>(s.count);
  s.f1 /= static_cast<double>(s.count);
  return s;
}

QaTrainResult train_qa(const Corpus& train, const Corpus& dev, const Vocabulary& vocab,
                       const OracleModelConfig& model_cfg, const OracleTrainConfig& cfg,
                       std::size_t max_answer_length) {
  const auto train_ex = answered(train);
  if (train_ex.empty()) throw InvalidArgument("train_qa: no examples with answer spans");
  auto dev_ex = answered(dev);
  const Corpus& eval_corpus = dev_ex.empty() ? train : dev;
  if (dev_ex.empty()) dev_ex = train_ex;
  SpanQAModel model(model_cfg, vocab, cfg.seed);
  auto log = fit(
      model.params(), train_ex.size(), cfg,
      [&](Graph& g, std::size_t i) {
        const Example& ex = *train_ex[i];
        return model.loss(g, ex.document, ex.question, *ex.answer);
      },
      [&] {
        double total = 0.0;
        for (const Example* ex : dev_ex) {
          Graph g(Graph::Mode::kInference);
          total += model.loss(g, ex->document, ex->question, *ex->answer).scalar();
        }
        return total / static_cast<double>(dev_ex.size());
      },
      "train_qa");
  const QaScores scores = evaluate_qa(model, eval_corpus, max_answer_length);
  return QaTrainResult{std::move(model), scores, std::move(log)};
}

}  // namespace qgrl
