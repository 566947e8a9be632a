// SPDX-License-Identifier: Apache-2.0
#include "qgrl/trainer.hpp"

#include <fstream>

#include "qgrl/error.hpp"
#include "qgrl/nn/optim.hpp"
#include "qgrl/rng.hpp"

namespace qgrl {

using nn::Graph;
using nn::Var;

namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw ConfigError(std::string(what) + " must be finite");
}

constexpr std::uint64_t kSampleSalt = 0x9e3779b97f4a7c15ULL;

}  // namespace

void BaselineConfig::validate() const {
  require_finite(fluency, "fluency baseline");
  require_finite(relevance, "relevance baseline");
  require_finite(answerability, "answerability baseline");
}

nlohmann::json BaselineConfig::to_json() const {
  return {{"fluency", fluency}, {"relevance", relevance}, {"answerability", answerability}};
}

BaselineConfig BaselineConfig::from_json(const nlohmann::json& j) {
  BaselineConfig b;
  b.fluency = j.at("fluency").get<double>();
  b.relevance = j.at("relevance").get<double>();
  b.answerability = j.at("answerability").get<double>();
  b.validate();
  return b;
}

void LossWeights::validate() const {
  for (double w : {coverage, fluency, relevance, answerability})
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("loss weights must be finite and >= 0");
}

nlohmann::json LossWeights::to_json() const {
  return {{"coverage", coverage},
          {"fluency", fluency},
          {"relevance", relevance},
          {"answerability", answerability}};
}

LossWeights LossWeights::from_json(const nlohmann::json& j) {
  LossWeights w;
  w.coverage = j.at("coverage").get<double>();
  w.fluency = j.at("fluency").get<double>();
  w.relevance = j.at("relevance").get<double>();
  w.answerability = j.at("answerability").get<double>();
  w.validate();
  return w;
}

RewardFlags RewardFlags::parse(std::string_view letters) {
  RewardFlags f;
  for (char c : letters) {
    switch (c) {
      case 'F': f.fluency = true; break;
      case 'R': f.relevance = true; break;
      case 'A': f.answerability = true; break;
      default: throw ConfigError("rewards must be letters from {F, R, A}, got '" + std::string(letters) + "'");
    }
  }
  return f;
}

std::string RewardFlags::to_string() const {
  std::string s;
  if (fluency) s += 'F';
  if (relevance) s += 'R';
  if (answerability) s += 'A';
  return s;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be > 0");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("lr_decay must be in (0, 1]");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (samples_per_example < 1) throw ConfigError("samples_per_example must be >= 1");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"batch_size", batch_size}, {"learning_rate", learning_rate},
          {"clip_norm", clip_norm},   {"lr_decay", lr_decay},
          {"patience", patience},     {"max_epochs", max_epochs},
          {"seed", seed},             {"rewards", rewards.to_string()},
          {"samples_per_example", samples_per_example}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.clip_norm = j.at("clip_norm").get<double>();
  c.lr_decay = j.at("lr_decay").get<double>();
  c.patience = j.at("patience").get<std::size_t>();
  c.max_epochs = j.at("max_epochs").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.rewards = RewardFlags::parse(j.at("rewards").get<std::string>());
  c.samples_per_example = j.at("samples_per_example").get<std::size_t>();
  c.validate();
  return c;
}

double rl_loss(const SampledSequence& sample, double reward, double baseline) {
  if (sample.log_probs.empty()) throw InvalidArgument("rl_loss: sample has no log-probabilities");
  return -(reward - baseline) * sample.mean_log_prob();
}

Var rl_loss(Var mean_log_prob, double reward, double baseline) {
  return nn::scale(mean_log_prob, -(reward - baseline));
}

double joint_loss(double l_base, double l_flu, double l_rel, double l_ans, const LossWeights& w,
                  const RewardFlags& enabled) {
  double total = l_base;
  if (enabled.fluency) total += w.fluency * l_flu;
  if (enabled.relevance) total += w.relevance * l_rel;
  if (enabled.answerability) total += w.answerability * l_ans;
  return total;
}

nlohmann::json StepLog::to_json() const {
  return {{"step", step},
          {"epoch", epoch},
          {"L_base", l_base},
          {"reward_mean", reward_mean},
          {"advantage", advantage_mean},
          {"reward_failures", reward_failures},
          {"joint", joint},
          {"grad_norm", grad_norm},
          {"lr", learning_rate}};
}

nlohmann::json EpochLog::to_json() const {
  return {{"epoch", epoch},
          {"train_loss", train_loss},
          {"dev_loss", dev_loss},
          {"lr", learning_rate},
          {"improved", improved}};
}

void TrainLog::write(std::ostream& out) const {
  for (const auto& s : steps) out << s.to_json().dump() << '\n';
  for (const auto& e : epochs) out << e.to_json().dump() << '\n';
  out << nlohmann::json{{"best_epoch", best_epoch},
                        {"best_dev_loss", best_dev_loss},
                        {"stopped_early", stopped_early}}
             .dump()
      << '\n';
}

void TrainLog::write(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  write(out);
}

namespace {

struct RewardTerm {
  const char* name;
  double weight;
  double baseline;
};

// Per-example contribution to one batch.
struct ExampleResult {
  Var joint;
  double l_base = 0.0;
  std::map<std::string, double> rewards;
  std::map<std::string, std::size_t> failures;
};

using Objective = std::function<ExampleResult(Graph&, const Example&, Rng&)>;

std::optional<double> score_one(const std::string& name, const TokenSeq& document,
                                const TokenSeq& question, const RewardContext& ctx) {
  try {
    if (name == "flu") {
      if (!ctx.oracles.fluency) throw DependencyError("no fluency oracle");
      return fluency_reward(ctx.oracles.fluency->token_probabilities(question), ctx.reward);
    }
    if (name == "rel") {
      if (!ctx.oracles.relevance) throw DependencyError("no relevance oracle");
      return relevance_reward(document, question, *ctx.oracles.relevance, ctx.reward);
    }
    if (!ctx.oracles.answerability) throw DependencyError("no answerability oracle");
    return answerability_reward(document, question, *ctx.oracles.answerability, ctx.reward);
  } catch (const DependencyError&) {
    throw;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::vector<RewardTerm> enabled_terms(const RewardFlags& flags, const RewardContext& ctx) {
  std::vector<RewardTerm> terms;
  if (flags.fluency) terms.push_back({"flu", ctx.weights.fluency, ctx.baselines.fluency});
  if (flags.relevance) terms.push_back({"rel", ctx.weights.relevance, ctx.baselines.relevance});
  if (flags.answerability)
    terms.push_back({"ans", ctx.weights.answerability, ctx.baselines.answerability});
  return terms;
}

TrainLog run_training(Generator& gen, const Corpus& train, const TrainConfig& cfg,
                      const TrainHooks& hooks, const Objective& objective,
                      const std::function<double()>& dev_loss, const std::string& what) {
  cfg.validate();
  if (train.empty()) throw InvalidArgument(what + ": empty training corpus");
  nn::ParameterStore& params = gen.params();
  Rng order_rng(cfg.seed);
  Rng sample_rng(cfg.seed ^ kSampleSalt);
  nn::Adam adam(params);
  nn::PlateauSchedule schedule(cfg.learning_rate, cfg.lr_decay);
  nn::ParameterStore best = params;
  TrainLog log;
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::size_t step = 0;

  auto abort = [&](const std::string& detail) {
    params.copy_values_from(best);
    throw TrainingError(what + ": " + detail + " at step " + std::to_string(step) +
                        "; parameters reset to the last good checkpoint (epoch " +
                        std::to_string(log.best_epoch) + ")");
  };

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    order_rng.shuffle(order);
    double epoch_total = 0.0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t e = std::min(order.size(), b + cfg.batch_size);
      const double inv = 1.0 / static_cast<double>(e - b);
      StepLog rec;
      rec.step = ++step;
      rec.epoch = epoch;
      rec.learning_rate = schedule.learning_rate();
      std::map<std::string, double> reward_sum;
      std::map<std::string, std::size_t> reward_count;
      params.zero_grad();
      for (std::size_t k = b; k < e; ++k) {
        Graph g;
        ExampleResult r = objective(g, train.examples[order[k]], sample_rng);
        const double joint = r.joint.scalar();
        if (!std::isfinite(joint)) abort("non-finite loss on example " + train.examples[order[k]].id);
        rec.l_base += r.l_base * inv;
        rec.joint += joint * inv;
        for (const auto& [name, v] : r.rewards) {
          reward_sum[name] += v;
          ++reward_count[name];
        }
        for (const auto& [name, n] : r.failures) rec.reward_failures[name] += n;
        g.backward(r.joint, inv);
      }
      for (const auto& [name, total] : reward_sum)
        rec.reward_mean[name] = total / static_cast<double>(reward_count[name]);
      rec.grad_norm = nn::clip_global_norm(params, cfg.clip_norm);
      if (!std::isfinite(rec.grad_norm)) abort("non-finite gradient");
      adam.step(schedule.learning_rate());
      epoch_total += rec.joint * static_cast<double>(e - b);
      log.steps.push_back(std::move(rec));
      if (hooks.every > 0 && hooks.periodic && step % hooks.every == 0) hooks.periodic(step, gen);
    }

    EpochLog ep;
    ep.epoch = epoch;
    ep.train_loss = epoch_total / static_cast<double>(order.size());
    ep.dev_loss = dev_loss();
    ep.learning_rate = schedule.learning_rate();
    if (!std::isfinite(ep.dev_loss)) abort("non-finite dev loss");
    ep.improved = schedule.observe(ep.dev_loss);
    log.epochs.push_back(ep);
    if (ep.improved) {
      best.copy_values_from(params);
      log.best_epoch = epoch;
      log.best_dev_loss = ep.dev_loss;
      if (hooks.on_best) hooks.on_best(epoch, gen);
    } else if (static_cast<std::size_t>(schedule.epochs_since_best()) > cfg.patience) {
      log.stopped_early = true;
      break;
    }
  }
  params.copy_values_from(best);
  return log;
}

}  // namespace

TrainLog pretrain(Generator& generator, const Corpus& train, const Corpus& dev,
                  const TrainConfig& cfg, const TrainHooks& hooks) {
  const Corpus& selection = dev.empty() ? train : dev;
  Objective objective = [&generator](Graph& g, const Example& ex, Rng&) {
    ExampleResult r;
    r.joint = generator.mle_loss(g, ex);
    r.l_base = r.joint.scalar();
    return r;
  };
  return run_training(generator, train, cfg, hooks, objective,
                      [&] { return generator.mean_loss(selection); }, "pretrain");
}

double dev_joint_loss(const Generator& generator, const Corpus& dev, const RewardContext& context,
                      const RewardFlags& flags, std::uint64_t seed) {
  if (dev.empty()) throw InvalidArgument("dev_joint_loss: empty corpus");
  const auto terms = enabled_terms(flags, context);
  Rng rng(seed);
  double total = 0.0;
  for (const auto& ex : dev.examples) {
    Graph g(Graph::Mode::kInference);
    double loss = generator.mle_loss(g, ex).scalar();
    if (!terms.empty()) {
      const SampledSequence s =
          generator.sample(ex.document, generator.config().max_decode_length, rng);
      const TokenSeq q = generator.to_tokens(generator.prepare(ex.document), s.tokens);
      // The surrogate -(R - b) * mean log p only matters through its
      // gradient; its value falls as bad samples get less likely, so model
      // selection scores the objective that gradient estimates instead.
      for (const auto& t : terms)
        if (auto r = score_one(t.name, ex.document, q, context))
          loss += t.weight * (t.baseline - *r);
    }
    total += loss;
  }
  return total / static_cast<double>(dev.size());
}

TrainLog finetune(Generator& generator, const Corpus& train, const Corpus& dev,
                  const RewardContext& context, const TrainConfig& cfg, const TrainHooks& hooks) {
  context.reward.validate();
  context.baselines.validate();
  context.weights.validate();
  const auto terms = enabled_terms(cfg.rewards, context);
  if (cfg.rewards.fluency && !context.oracles.fluency)
    throw DependencyError("finetune: fluency reward enabled without a language model");
  if (cfg.rewards.relevance && !context.oracles.relevance)
    throw DependencyError("finetune: relevance reward enabled without a discriminator");
  if (cfg.rewards.answerability && !context.oracles.answerability)
    throw DependencyError("finetune: answerability reward enabled without a QA model");
  const Corpus& selection = dev.empty() ? train : dev;
  const std::size_t samples = cfg.samples_per_example;

  Objective objective = [&](Graph& g, const Example& ex, Rng& rng) {
    ExampleResult r;
    const SourceDocument src = generator.prepare(ex.document);
    Var joint = generator.mle_loss(g, src, ex.question);
    r.l_base = joint.scalar();
    const double per_sample = 1.0 / static_cast<double>(samples);
    for (std::size_t s = 0; s < samples && !terms.empty(); ++s) {
      const SampledSequence smp =
          generator.sample(ex.document, generator.config().max_decode_length, rng);
      const TokenSeq q = generator.to_tokens(src, smp.tokens);
      Var mean_lp;
      for (const auto& t : terms) {
        const auto reward = score_one(t.name, ex.document, q, context);
        if (!reward) {
          ++r.failures[t.name];
          continue;
        }
        if (s == 0) r.rewards[t.name] = *reward;
        if (!mean_lp.valid()) mean_lp = generator.mean_log_prob(g, src, smp.tokens);
        joint = nn::add(joint, nn::scale(rl_loss(mean_lp, *reward, t.baseline), t.weight * per_sample));
      }
    }
    r.joint = joint;
    return r;
  };
  const std::uint64_t eval_seed = cfg.seed ^ 0xde7e11a1ULL;
  TrainLog log = run_training(
      generator, train, cfg, hooks, objective,
      [&] { return dev_joint_loss(generator, selection, context, cfg.rewards, eval_seed); },
      "finetune");
  // Advantages follow from the logged means and the constant baselines.
  for (auto& step : log.steps)
    for (const auto& t : terms)
      if (auto it = step.reward_mean.find(t.name); it != step.reward_mean.end())
        step.advantage_mean[t.name] = it->second - t.baseline;
  return log;
}

}  // namespace qgrl
