// SPDX-License-Identifier: Apache-2.0
#include "qgrl/generator.hpp"

#include <cmath>

#include "qgrl/error.hpp"
#include "qgrl/rng.hpp"

namespace qgrl {

using nn::Graph;
using nn::Index;
using nn::Matrix;
using nn::Var;
using nn::Vector;

double SampledSequence::mean_log_prob() const {
  if (log_probs.empty()) return 0.0;
  double s = 0.0;
  for (double lp : log_probs) s += lp;
  return s / static_cast<double>(log_probs.size());
}

// ---------------------------------------------------------------------------
// Config

void GeneratorConfig::validate() const {
  if (hidden_size == 0 || embedding_size == 0 || max_decode_length == 0 || max_input_length == 0 ||
      beam_size == 0)
    throw ConfigError("generator sizes must be positive");
  if (!(coverage_weight >= 0.0) || !std::isfinite(coverage_weight))
    throw ConfigError("coverage weight must be >= 0");
}

nlohmann::json GeneratorConfig::to_json() const {
  return {{"hidden_size", hidden_size},         {"embedding_size", embedding_size},
          {"max_decode_length", max_decode_length}, {"max_input_length", max_input_length},
          {"coverage_weight", coverage_weight},  {"beam_size", beam_size}};
}

GeneratorConfig GeneratorConfig::from_json(const nlohmann::json& j) {
  GeneratorConfig c;
  c.hidden_size = j.at("hidden_size").get<std::size_t>();
  c.embedding_size = j.at("embedding_size").get<std::size_t>();
  c.max_decode_length = j.at("max_decode_length").get<std::size_t>();
  c.max_input_length = j.at("max_input_length").get<std::size_t>();
  c.coverage_weight = j.at("coverage_weight").get<double>();
  c.beam_size = j.at("beam_size").get<std::size_t>();
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// SourceDocument

TokenId SourceDocument::extended_id(const std::string& token, const Vocabulary& vocab) const {
  if (vocab.contains(token)) return vocab.id(token);
  for (std::size_t k = 0; k < oov_tokens.size(); ++k)
    if (oov_tokens[k] == token) return static_cast<TokenId>(vocab_size + k);
  return Vocabulary::kUnk;
}

std::string SourceDocument::token(TokenId id, const Vocabulary& vocab) const {
  if (id >= 0 && static_cast<std::size_t>(id) < vocab_size) return vocab.token(id);
  const std::size_t k = static_cast<std::size_t>(id) - vocab_size;
  if (id < 0 || k >= oov_tokens.size()) throw InvalidArgument("extended id out of range");
  return oov_tokens[k];
}

// ---------------------------------------------------------------------------
// Generator

Generator::Generator(GeneratorConfig config, Vocabulary vocab, std::uint64_t seed)
    : config_(config), vocab_(std::move(vocab)), params_(std::make_unique<nn::ParameterStore>()) {
  config_.validate();
  nn::ParameterStore& store = *params_;
  Rng rng(seed);
  const Index h = static_cast<Index>(config_.hidden_size);
  const Index e = static_cast<Index>(config_.embedding_size);
  const Index v = static_cast<Index>(vocab_.size());
  embedding_ = nn::Embedding(store, "embedding", v, e, rng);
  encoder_ = nn::BiGru(store, "encoder", e, h, rng);
  bridge_ = nn::Linear(store, "bridge", 2 * h, h, rng);
  decoder_ = nn::GruCell(store, "decoder", e, h, rng);
  attn_states_ = nn::Linear(store, "attention.states", 2 * h, h, rng, /*bias=*/false);
  attn_query_ = nn::Linear(store, "attention.query", h, h, rng);
  attn_coverage_ = &store.add("attention.coverage", h, 1, nn::Init::kGlorotUniform, rng);
  attn_vector_ = &store.add("attention.v", 1, h, nn::Init::kGlorotUniform, rng);
  output_ = nn::Linear(store, "output", 3 * h, h, rng);
  vocab_proj_ = nn::Linear(store, "vocab", h, v, rng);
  gate_ = nn::Linear(store, "copy_gate", 2 * h + h + e, 1, rng);
}

SourceDocument Generator::prepare(const TokenSeq& document) const {
  if (document.empty()) throw InvalidArgument("generator: empty document");
  SourceDocument src;
  src.vocab_size = vocab_.size();
  const std::size_t n = std::min(document.size(), config_.max_input_length);
  src.tokens.assign(document.begin(), document.begin() + static_cast<std::ptrdiff_t>(n));
  for (const auto& tok : src.tokens) {
    const TokenId id = vocab_.id(tok);
    src.input_ids.push_back(id);
    if (vocab_.contains(tok)) {
      src.extended_ids.push_back(id);
      continue;
    }
    std::size_t k = 0;
    while (k < src.oov_tokens.size() && src.oov_tokens[k] != tok) ++k;
    if (k == src.oov_tokens.size()) src.oov_tokens.push_back(tok);
    src.extended_ids.push_back(static_cast<Index>(src.vocab_size + k));
  }
  return src;
}

std::vector<TokenId> Generator::target_ids(const SourceDocument& src,
                                           const TokenSeq& question) const {
  std::vector<TokenId> ids;
  ids.reserve(question.size() + 1);
  for (const auto& tok : question) ids.push_back(src.extended_id(tok, vocab_));
  ids.push_back(Vocabulary::kEos);
  return ids;
}

TokenSeq Generator::to_tokens(const SourceDocument& src, const std::vector<TokenId>& ids) const {
  TokenSeq out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == Vocabulary::kEos && i + 1 == ids.size()) break;
    out.push_back(src.token(ids[i], vocab_));
  }
  return out;
}

Generator::Encoded Generator::encode(Graph& g, const SourceDocument& src) const {
  std::vector<Var> inputs;
  inputs.reserve(src.input_ids.size());
  for (TokenId id : src.input_ids) inputs.push_back(embedding_(g, id));
  auto out = encoder_.run(g, inputs);
  Encoded enc;
  enc.states = out.states;
  enc.features = attn_states_.apply_columns(g, out.states);
  enc.initial_state = nn::tanh(bridge_(g, nn::vcat({out.last_forward, out.first_backward})));
  enc.source = &src;
  return enc;
}

Generator::StepVars Generator::decode_step(Graph& g, const Encoded& enc, TokenId prev_token,
                                           Var state, Var coverage,
                                           std::optional<double> force_p_gen) const {
  const SourceDocument& src = *enc.source;
  const Index n = static_cast<Index>(src.tokens.size());
  if (coverage.rows() != n || coverage.cols() != 1)
    throw InvalidArgument("decode_step: coverage needs one entry per document position");
  const TokenId input_id =
      (prev_token >= 0 && static_cast<std::size_t>(prev_token) < vocab_.size()) ? prev_token
                                                                                 : Vocabulary::kUnk;
  Var x = embedding_(g, input_id);
  Var s = decoder_.step(g, x, state);

  // e_i = v^T tanh(W_h h_i + W_s s + b + w_c c_i)
  Var pre = nn::add_col(enc.features, attn_query_(g, s));
  pre = nn::add(pre, nn::matmul(g.param(*attn_coverage_), nn::transpose(coverage)));
  Var energies = nn::transpose(nn::matmul(g.param(*attn_vector_), nn::tanh(pre)));
  Var attention = nn::softmax(energies);
  Var context = nn::matmul(enc.states, attention);

  Var hidden = nn::tanh(output_(g, nn::vcat({s, context})));
  Var p_vocab = nn::softmax(vocab_proj_(g, hidden));
  Var p_gen = force_p_gen ? g.scalar(*force_p_gen)
                          : nn::sigmoid(gate_(g, nn::vcat({context, s, x})));

  const Index ext = static_cast<Index>(src.extended_size());
  Var generated = nn::scalar_mul(p_gen, nn::pad(p_vocab, ext));
  Var copied = nn::scalar_mul(nn::one_minus(p_gen), nn::scatter(attention, src.extended_ids, ext));
  return StepVars{nn::add(generated, copied), attention, p_gen, s};
}

Var Generator::mle_loss(Graph& g, const Example& example) const {
  const SourceDocument src = prepare(example.document);
  return mle_loss(g, src, example.question);
}

Var Generator::mle_loss(Graph& g, const SourceDocument& src, const TokenSeq& question) const {
  if (question.empty()) throw InvalidArgument("mle_loss: empty question");
  const std::vector<TokenId> targets = target_ids(src, question);
  Encoded enc = encode(g, src);
  Var state = enc.initial_state;
  Var coverage = g.constant(Matrix::Zero(static_cast<Index>(src.tokens.size()), 1));
  TokenId prev = Vocabulary::kBos;
  std::vector<Var> terms;
  terms.reserve(targets.size());
  for (TokenId y : targets) {
    StepVars step = decode_step(g, enc, prev, state, coverage);
    Var nll = nn::scale(nn::log(nn::pick(step.distribution, y)), -1.0);
    if (config_.coverage_weight > 0.0) {
      Var penalty = nn::sum(nn::minimum(step.attention, coverage));
      nll = nn::add(nll, nn::scale(penalty, config_.coverage_weight));
    }
    terms.push_back(nll);
    coverage = nn::add(coverage, step.attention);
    state = step.state;
    prev = y;
  }
  return nn::scale(nn::sum(nn::vcat(terms)), 1.0 / static_cast<double>(terms.size()));
}

std::vector<Var> Generator::sequence_log_probs(Graph& g, const SourceDocument& src,
                                               const std::vector<TokenId>& tokens) const {
  Encoded enc = encode(g, src);
  Var state = enc.initial_state;
  Var coverage = g.constant(Matrix::Zero(static_cast<Index>(src.tokens.size()), 1));
  TokenId prev = Vocabulary::kBos;
  std::vector<Var> out;
  out.reserve(tokens.size());
  for (TokenId y : tokens) {
    if (y < 0 || static_cast<std::size_t>(y) >= src.extended_size())
      throw InvalidArgument("sequence_log_probs: token outside the extended vocabulary");
    StepVars step = decode_step(g, enc, prev, state, coverage);
    out.push_back(nn::log(nn::pick(step.distribution, y)));
    coverage = nn::add(coverage, step.attention);
    state = step.state;
    prev = y;
  }
  return out;
}

Var Generator::mean_log_prob(Graph& g, const SourceDocument& src,
                             const std::vector<TokenId>& tokens) const {
  if (tokens.empty()) throw InvalidArgument("mean_log_prob: empty sequence");
  auto lps = sequence_log_probs(g, src, tokens);
  return nn::scale(nn::sum(nn::vcat(lps)), 1.0 / static_cast<double>(lps.size()));
}

Matrix Generator::encode_states(const TokenSeq& document) const {
  GeneratorSession session(*this, document);
  return session.encoder_states();
}

SampledSequence Generator::sample(const TokenSeq& document, std::size_t max_len, Rng& rng) const {
  GeneratorSession session(*this, document);
  return sample_sequence(session, max_len, rng);
}

SampledSequence Generator::sample(const TokenSeq& document, std::size_t max_len,
                                  std::uint64_t seed) const {
  Rng rng(seed);
  return sample(document, max_len, rng);
}

std::vector<TokenId> Generator::greedy(const TokenSeq& document, std::size_t max_len) const {
  GeneratorSession session(*this, document);
  return greedy_decode(session, max_len).tokens;
}

std::vector<TokenId> Generator::beam_search(const TokenSeq& document, std::size_t beam_size,
                                            std::size_t max_len) const {
  GeneratorSession session(*this, document);
  return qgrl::beam_search(session, beam_size, max_len).tokens;
}

TokenSeq Generator::generate(const TokenSeq& document) const {
  return generate(document, config_.beam_size, config_.max_decode_length);
}

TokenSeq Generator::generate(const TokenSeq& document, std::size_t beam_size,
                             std::size_t max_len) const {
  GeneratorSession session(*this, document);
  auto hyp = qgrl::beam_search(session, beam_size, max_len);
  return to_tokens(session.source(), hyp.tokens);
}

double Generator::perplexity(const Corpus& corpus) const {
  if (corpus.empty()) throw InvalidArgument("perplexity: empty corpus");
  double nll = 0.0;
  double count = 0.0;
  for (const auto& ex : corpus.examples) {
    Graph g(Graph::Mode::kInference);
    const SourceDocument src = prepare(ex.document);
    const auto targets = target_ids(src, ex.question);
    for (Var lp : sequence_log_probs(g, src, targets)) nll -= lp.scalar();
    count += static_cast<double>(targets.size());
  }
  return std::exp(nll / count);
}

double Generator::mean_loss(const Corpus& corpus) const {
  if (corpus.empty()) throw InvalidArgument("mean_loss: empty corpus");
  double total = 0.0;
  for (const auto& ex : corpus.examples) {
    Graph g(Graph::Mode::kInference);
    total += mle_loss(g, ex).scalar();
  }
  return total / static_cast<double>(corpus.size());
}

Checkpoint Generator::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.kind = "generator";
  ckpt.config = config_.to_json();
  ckpt.vocab = vocab_;
  ckpt.store(*params_);
  return ckpt;
}

Generator Generator::from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != "generator") throw CheckpointError("not a generator checkpoint");
  Generator g(GeneratorConfig::from_json(ckpt.config), ckpt.vocab, 0);
  ckpt.restore(*g.params_);
  return g;
}

// ---------------------------------------------------------------------------
// GeneratorSession

GeneratorSession::GeneratorSession(const Generator& generator, const TokenSeq& document)
    : generator_(&generator),
      source_(generator.prepare(document)),
      graph_(std::make_unique<Graph>(Graph::Mode::kInference)) {
  encoded_ = generator.encode(*graph_, source_);
}

DecoderStep GeneratorSession::first_step(std::optional<double> force_p_gen) const {
  return step(Vocabulary::kBos, encoded_.initial_state.value(),
              Vector::Zero(static_cast<Index>(source_.tokens.size())), force_p_gen);
}

DecoderStep GeneratorSession::step(TokenId prev_token, const Vector& state,
                                   const Vector& coverage,
                                   std::optional<double> force_p_gen) const {
  Graph& g = *graph_;
  Var s = g.constant(state);
  Var c = g.constant(coverage);
  auto out = generator_->decode_step(g, encoded_, prev_token, s, c, force_p_gen);
  DecoderStep step;
  step.distribution = out.distribution.value();
  step.attention = out.attention.value();
  step.coverage = coverage;
  step.p_gen = out.p_gen.scalar();
  step.state = out.state.value();
  return step;
}

}  // namespace qgrl
