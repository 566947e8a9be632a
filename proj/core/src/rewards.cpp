// SPDX-License-Identifier: Apache-2.0
#include "qgrl/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "qgrl/error.hpp"

namespace qgrl {

void RewardConfig::validate() const {
  if (!(epsilon > 0.0 && epsilon <= 1e-6)) throw ConfigError("epsilon must be in (0, 1e-6]");
  if (max_answer_length < 1) throw ConfigError("max_answer_length must be >= 1");
}

nlohmann::json RewardConfig::to_json() const {
  return {{"epsilon", epsilon}, {"max_answer_length", max_answer_length}};
}

RewardConfig RewardConfig::from_json(const nlohmann::json& j) {
  RewardConfig c;
  c.epsilon = j.at("epsilon").get<double>();
  c.max_answer_length = j.at("max_answer_length").get<std::size_t>();
  c.validate();
  return c;
}

double fluency_reward(std::span<const double> token_probs, const RewardConfig& cfg) {
  if (token_probs.empty()) throw InvalidArgument("fluency_reward: no token probabilities");
  double s = 0.0;
  for (double p : token_probs) s += std::log(std::clamp(p, cfg.epsilon, 1.0));
  return -std::exp(-s / static_cast<double>(token_probs.size()));
}

double fluency_reward(const TokenSeq& question, const LanguageModelScorer& lm,
                      const RewardConfig& cfg) {
  if (question.empty()) throw InvalidArgument("fluency_reward: empty question");
  const auto probs = lm.token_probabilities(question);
  return fluency_reward(probs, cfg);
}

double relevance_reward(double p_rel, const RewardConfig& cfg) {
  return -std::log(1.0 - std::clamp(p_rel, 0.0, 1.0) + cfg.epsilon);
}

double relevance_reward(const TokenSeq& document, const TokenSeq& question,
                        const RelevanceScorer& disc, const RewardConfig& cfg) {
  return relevance_reward(disc.relevance_probability(document, question), cfg);
}

namespace {

void check_spans(const nn::Vector& start, const nn::Vector& end) {
  if (start.size() == 0 || start.size() != end.size())
    throw InvalidArgument("span distributions must be non-empty and of equal length");
}

}  // namespace

double max_span_score(const nn::Vector& start, const nn::Vector& end, std::size_t max_len) {
  check_spans(start, end);
  const auto n = static_cast<std::size_t>(start.size());
  // Monotone deque of start indices in the window [j - max_len, j].
  std::deque<std::size_t> window;
  double best = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    while (!window.empty() && start(window.back()) <= start(j)) window.pop_back();
    window.push_back(j);
    if (window.front() + max_len < j) window.pop_front();
    best = std::max(best, start(window.front()) * end(j));
  }
  return std::sqrt(best);
}

double max_span_score_exhaustive(const nn::Vector& start, const nn::Vector& end,
                                 std::size_t max_len) {
  check_spans(start, end);
  const auto n = static_cast<std::size_t>(start.size());
  double best = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n && j <= i + max_len; ++j)
      best = std::max(best, std::sqrt(start(i) * end(j)));
  return best;
}

TokenSpan best_span(const SpanDistributions& dists, std::size_t max_len) {
  check_spans(dists.start, dists.end);
  const auto n = static_cast<std::size_t>(dists.start.size());
  TokenSpan span;
  double best = -1.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n && j <= i + max_len; ++j) {
      const double s = dists.start(i) * dists.end(j);
      if (s > best) {
        best = s;
        span = {i, j};
      }
    }
  return span;
}

double answerability_from_score(double score, const RewardConfig& cfg) {
  return -std::log(1.0 - std::clamp(score, 0.0, 1.0) + cfg.epsilon);
}

double answerability_reward(const SpanDistributions& dists, const RewardConfig& cfg) {
  return answerability_from_score(max_span_score(dists.start, dists.end, cfg.max_answer_length),
                                  cfg);
}

double answerability_reward(const TokenSeq& document, const TokenSeq& question,
                            const SpanScorer& qa, const RewardConfig& cfg) {
  if (document.empty()) throw InvalidArgument("answerability_reward: empty document");
  return answerability_reward(qa.span_distributions(document, question), cfg);
}

void FocalParams::validate() const {
  if (!(alpha_positive > 0.0) || !(alpha_negative > 0.0))
    throw ConfigError("focal alpha must be positive");
  if (!(lambda >= 0.0)) throw ConfigError("focal lambda must be >= 0");
}

nlohmann::json FocalParams::to_json() const {
  return {{"alpha_positive", alpha_positive},
          {"alpha_negative", alpha_negative},
          {"lambda", lambda}};
}

FocalParams FocalParams::from_json(const nlohmann::json& j) {
  FocalParams f;
  f.alpha_positive = j.at("alpha_positive").get<double>();
  f.alpha_negative = j.at("alpha_negative").get<double>();
  f.lambda = j.at("lambda").get<double>();
  f.validate();
  return f;
}

double focal_loss(double p_true, double alpha, double lambda, double eps) {
  const double p = std::clamp(p_true, eps, 1.0);
  const double w = lambda == 0.0 ? 1.0 : std::pow(1.0 - p, lambda);
  return -alpha * w * std::log(p);
}

nn::Var focal_loss_from_logit(nn::Var logit, bool positive, const FocalParams& params) {
  if (logit.rows() != 1 || logit.cols() != 1)
    throw InvalidArgument("focal_loss_from_logit: logit must be 1x1");
  const double z = logit.scalar();
  // With s = +1 for the positive class and -1 otherwise, p_t = sigmoid(s z)
  // and log p_t = -log(1 + exp(-s z)) evaluated stably.
  const double sz = positive ? z : -z;
  const double log_pt = sz >= 0 ? -std::log1p(std::exp(-sz)) : sz - std::log1p(std::exp(sz));
  const double pt = std::exp(log_pt);
  const double q = sz >= 0 ? std::exp(-sz) / (1.0 + std::exp(-sz)) : 1.0 / (1.0 + std::exp(sz));
  const double alpha = params.alpha(positive);
  const double lambda = params.lambda;
  const double q_l = lambda == 0.0 ? 1.0 : std::pow(q, lambda);
  nn::Matrix value(1, 1);
  value(0, 0) = -alpha * q_l * log_pt;
  // d/dz = s * alpha * [lambda p_t q^lambda log p_t - q^(lambda+1)], q = 1 - p_t
  const double dz = (positive ? 1.0 : -1.0) * alpha * (lambda * pt * q_l * log_pt - q_l * q);
  return logit.graph->record(std::move(value), {logit}, [logit, dz](nn::Graph& g, int self) {
    g.accumulate(logit, nn::Matrix::Constant(1, 1, g.grad(self)(0, 0) * dz));
  });
}

std::string RewardOracles::fingerprint() const {
  std::string out;
  out += "flu:" + (fluency ? fluency->fingerprint() : std::string("-"));
  out += ";rel:" + (relevance ? relevance->fingerprint() : std::string("-"));
  out += ";ans:" + (answerability ? answerability->fingerprint() : std::string("-"));
  return out;
}

RewardScores score_rewards(const TokenSeq& document, const TokenSeq& question,
                           const RewardOracles& oracles, const RewardConfig& cfg) {
  RewardScores s;
  if (oracles.fluency) s.fluency = fluency_reward(oracles.fluency->token_probabilities(question), cfg);
  if (question.empty()) return s;
  if (oracles.relevance) s.relevance = relevance_reward(document, question, *oracles.relevance, cfg);
  if (oracles.answerability)
    s.answerability = answerability_reward(document, question, *oracles.answerability, cfg);
  return s;
}

}  // namespace qgrl
