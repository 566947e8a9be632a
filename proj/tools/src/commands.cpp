// SPDX-License-Identifier: Apache-2.0
#include "qgrl_cli/commands.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>

#include "qgrl/analysis.hpp"
#include "qgrl/checkpoint.hpp"
#include "qgrl/error.hpp"
#include "qgrl/negatives.hpp"
#include "qgrl/report.hpp"

namespace qgrl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void require(const std::string& path, const std::string& what, const std::string& hint) {
  if (!fs::exists(path))
    throw DependencyError("missing " + what + ": " + path + " (" + hint + ")");
}

Corpus load_split(const RunConfig& cfg, const std::string& split) {
  const std::string path = cfg.paths.split_file(split);
  require(path, split + " data", "run synthesize or set paths." + split);
  Corpus c = load_dataset(path, LoadOptions{cfg.generator.max_input_length, {}});
  if (c.empty()) throw IngestionError(split + " data is empty", 1);
  return c;
}

Vocabulary vocabulary(const RunConfig& cfg, const Corpus& train) {
  return build_vocab(train, cfg.data.vocab_max_size, cfg.data.vocab_min_count);
}

std::ofstream open_out(const std::string& path) {
  fs::create_directories(fs::path(path).parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

void write_json(const std::string& path, const json& j) { open_out(path) << j.dump(2) << '\n'; }

void write_text(const std::string& path, const std::string& text) { open_out(path) << text; }

std::string lm_path(const RunConfig& cfg) { return join(cfg.paths.checkpoint_dir(), "lm.ckpt"); }
std::string disc_path(const RunConfig& cfg) {
  return join(cfg.paths.checkpoint_dir(), "discriminator.ckpt");
}
std::string qa_path(const RunConfig& cfg) { return join(cfg.paths.checkpoint_dir(), "qa.ckpt"); }

// Output locations are created before any training so a bad path fails fast.
void prepare_outputs(const RunConfig& cfg) {
  for (const auto& dir : {cfg.paths.checkpoint_dir(), cfg.paths.log_dir()}) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
  }
}

json fit_log(const OracleFitLog& log) {
  return {{"train_loss", log.train_loss},
          {"heldout_loss", log.heldout_loss},
          {"best_epoch", log.best_epoch}};
}

struct LoadedOracles {
  std::optional<LanguageModel> lm;
  std::optional<RelevanceDiscriminator> disc;
  std::optional<SpanQAModel> qa;

  RewardOracles view() const {
    return RewardOracles{lm ? &*lm : nullptr, disc ? &*disc : nullptr, qa ? &*qa : nullptr};
  }
};

LoadedOracles load_oracles(const RunConfig& cfg, const RewardFlags& needed) {
  if (needed.fluency) require(lm_path(cfg), "language model", "run train-lm");
  if (needed.relevance) require(disc_path(cfg), "discriminator", "run train-disc");
  if (needed.answerability) require(qa_path(cfg), "QA model", "run train-qa");
  LoadedOracles o;
  if (needed.fluency) o.lm.emplace(LanguageModel::from_checkpoint(load_checkpoint(lm_path(cfg), "lm")));
  if (needed.relevance)
    o.disc.emplace(RelevanceDiscriminator::from_checkpoint(load_checkpoint(disc_path(cfg), "discriminator")));
  if (needed.answerability)
    o.qa.emplace(SpanQAModel::from_checkpoint(load_checkpoint(qa_path(cfg), "qa")));
  return o;
}

json reward_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

std::string generator_path(const RunConfig& cfg, const std::string& name) {
  return join(cfg.paths.checkpoint_dir(), "generator-" + name + ".ckpt");
}

std::string outputs_path(const RunConfig& cfg, const std::string& model, const std::string& split) {
  return join(cfg.paths.outputs_dir(), model + "." + split + ".jsonl");
}

json cmd_synthesize(const RunConfig& cfg) {
  Rng rng(cfg.derived_seed("data"));
  const auto& opt = cfg.data.synthetic;
  const Corpus train = synthetic::generate(cfg.data.train_size, Split::kTrain, "train", rng, opt);
  const Corpus dev = synthetic::generate(cfg.data.dev_size, Split::kDev, "dev", rng, opt);
  const Corpus test = synthetic::generate(cfg.data.test_size, Split::kTest, "test", rng, opt);
  for (const auto& [corpus, path] : {std::pair{&train, cfg.paths.train_file()},
                                    std::pair{&dev, cfg.paths.dev_file()},
                                    std::pair{&test, cfg.paths.test_file()}}) {
    fs::create_directories(fs::path(path).parent_path());
    write_dataset(*corpus, path);
  }
  write_snapshot(cfg, cfg.paths.data_dir, "synthesize");
  return {{"command", "synthesize"},
          {"train", train.size()},
          {"dev", dev.size()},
          {"test", test.size()},
          {"vocab_size", vocabulary(cfg, train).size()},
          {"question_entropy_nats", synthetic::conditional_question_entropy(opt)}};
}

json cmd_train_lm(const RunConfig& cfg) {
  const Corpus train = load_split(cfg, "train");
  const Corpus dev = load_split(cfg, "dev");
  prepare_outputs(cfg);
  const Vocabulary vocab = vocabulary(cfg, train);
  LmTrainResult r = train_lm(train, dev, vocab, cfg.oracle_model, cfg.oracle_train_config("lm"));
  save_checkpoint(r.model.to_checkpoint({{"dev_perplexity", r.dev_perplexity}}), lm_path(cfg));
  json log = {{"dev_perplexity", r.dev_perplexity}, {"fit", fit_log(r.log)}};
  write_json(join(cfg.paths.log_dir(), "lm.json"), log);
  write_snapshot(cfg, cfg.paths.checkpoint_dir(), "train-lm");
  write_snapshot(cfg, cfg.paths.log_dir(), "train-lm");
  return {{"command", "train-lm"}, {"checkpoint", lm_path(cfg)}, {"dev_perplexity", r.dev_perplexity}};
}

json cmd_make_negatives(const RunConfig& cfg) {
  const Corpus train = load_split(cfg, "train");
  const Corpus dev = load_split(cfg, "dev");
  json summary = {{"command", "make-negatives"}};
  for (const auto& [name, corpus] : {std::pair<std::string, const Corpus*>{"train", &train},
                                    std::pair<std::string, const Corpus*>{"dev", &dev}}) {
    Rng rng(cfg.derived_seed("negatives/" + name));
    NegativeStats stats;
    const auto items = make_relevance_examples(*corpus, rng, &stats);
    const std::string path = join(cfg.paths.negatives_dir(), name + ".jsonl");
    fs::create_directories(cfg.paths.negatives_dir());
    write_labeled(*corpus, items, path);
    summary[name] = {{"file", path},
                     {"pairs", items.size()},
                     {"positives", stats.positives},
                     {"generated", stats.generated},
                     {"skipped", stats.skipped}};
  }
  write_json(join(cfg.paths.negatives_dir(), "stats.json"), summary);
  write_snapshot(cfg, cfg.paths.negatives_dir(), "make-negatives");
  return summary;
}

json cmd_train_disc(const RunConfig& cfg) {
  const std::string train_pairs = join(cfg.paths.negatives_dir(), "train.jsonl");
  const std::string dev_pairs = join(cfg.paths.negatives_dir(), "dev.jsonl");
  require(train_pairs, "labelled pairs", "run make-negatives");
  require(dev_pairs, "labelled pairs", "run make-negatives");
  const Corpus train = load_split(cfg, "train");
  const Vocabulary vocab = vocabulary(cfg, train);
  const auto tr = to_relevance_pairs(read_labeled(train_pairs));
  const auto dv = to_relevance_pairs(read_labeled(dev_pairs));
  prepare_outputs(cfg);
  DiscriminatorTrainResult r = train_relevance_discriminator(
      tr, dv, vocab, cfg.oracle_model, cfg.focal, cfg.oracle_train_config("discriminator"));
  const json scores = {{"precision", r.heldout.precision},
                       {"recall", r.heldout.recall},
                       {"f1", r.heldout.f1},
                       {"accuracy", r.heldout.accuracy}};
  save_checkpoint(r.model.to_checkpoint({{"heldout", scores}}), disc_path(cfg));
  write_json(join(cfg.paths.log_dir(), "discriminator.json"),
             {{"heldout", scores}, {"fit", fit_log(r.log)}});
  write_snapshot(cfg, cfg.paths.checkpoint_dir(), "train-disc");
  write_snapshot(cfg, cfg.paths.log_dir(), "train-disc");
  return {{"command", "train-disc"}, {"checkpoint", disc_path(cfg)}, {"heldout", scores}};
}

json cmd_train_qa(const RunConfig& cfg) {
  const Corpus train = load_split(cfg, "train");
  const Corpus dev = load_split(cfg, "dev");
  prepare_outputs(cfg);
  const Vocabulary vocab = vocabulary(cfg, train);
  QaTrainResult r = train_qa(train, dev, vocab, cfg.oracle_model, cfg.oracle_train_config("qa"),
                             cfg.reward.max_answer_length);
  const json scores = {{"exact_match", r.dev.exact_match}, {"f1", r.dev.f1}, {"count", r.dev.count}};
  save_checkpoint(r.model.to_checkpoint({{"dev", scores}}), qa_path(cfg));
  write_json(join(cfg.paths.log_dir(), "qa.json"), {{"dev", scores}, {"fit", fit_log(r.log)}});
  write_snapshot(cfg, cfg.paths.checkpoint_dir(), "train-qa");
  write_snapshot(cfg, cfg.paths.log_dir(), "train-qa");
  return {{"command", "train-qa"}, {"checkpoint", qa_path(cfg)}, {"dev", scores}};
}

json cmd_pretrain(const RunConfig& cfg, const std::string& name) {
  const Corpus train = load_split(cfg, "train");
  const Corpus dev = load_split(cfg, "dev");
  prepare_outputs(cfg);
  Generator g(cfg.generator_config(), vocabulary(cfg, train), cfg.derived_seed("generator"));
  const TrainLog log = pretrain(g, train, dev, cfg.pretrain_config());
  const double ppl = g.perplexity(dev);
  Checkpoint ckpt = g.to_checkpoint();
  ckpt.metadata = {{"name", name},
                   {"rewards", ""},
                   {"dev_perplexity", ppl},
                   {"best_epoch", log.best_epoch}};
  save_checkpoint(ckpt, generator_path(cfg, name));
  log.write(join(cfg.paths.log_dir(), "pretrain-" + name + ".jsonl"));
  write_snapshot(cfg, cfg.paths.checkpoint_dir(), "pretrain-" + name);
  write_snapshot(cfg, cfg.paths.log_dir(), "pretrain-" + name);
  return {{"command", "pretrain"},
          {"checkpoint", generator_path(cfg, name)},
          {"parameters", g.params().scalar_count()},
          {"best_epoch", log.best_epoch},
          {"dev_loss", log.best_dev_loss},
          {"dev_perplexity", ppl}};
}

json cmd_finetune(const RunConfig& cfg, const std::string& name, const std::string& from) {
  const TrainConfig tc = cfg.finetune_config();
  const std::string base = generator_path(cfg, from);
  require(base, "pretrained checkpoint", "run pretrain first");
  const LoadedOracles oracles = load_oracles(cfg, tc.rewards);
  const Corpus train = load_split(cfg, "train");
  const Corpus dev = load_split(cfg, "dev");
  prepare_outputs(cfg);
  Generator g = Generator::from_checkpoint(load_checkpoint(base, "generator"));
  const RewardContext ctx{oracles.view(), cfg.reward, cfg.baselines, cfg.weights};
  const TrainLog log = finetune(g, train, dev, ctx, tc);
  Checkpoint ckpt = g.to_checkpoint();
  ckpt.metadata = {{"name", name},
                   {"rewards", tc.rewards.to_string()},
                   {"from", from},
                   {"best_epoch", log.best_epoch},
                   {"dev_joint_loss", log.best_dev_loss}};
  save_checkpoint(ckpt, generator_path(cfg, name));
  log.write(join(cfg.paths.log_dir(), "finetune-" + name + ".jsonl"));
  write_snapshot(cfg, cfg.paths.checkpoint_dir(), "finetune-" + name);
  write_snapshot(cfg, cfg.paths.log_dir(), "finetune-" + name);
  return {{"command", "finetune"},
          {"checkpoint", generator_path(cfg, name)},
          {"rewards", tc.rewards.to_string()},
          {"best_epoch", log.best_epoch},
          {"dev_joint_loss", log.best_dev_loss}};
}

json cmd_generate(const RunConfig& cfg, const std::string& model, const std::string& split) {
  const std::string path = generator_path(cfg, model);
  require(path, "generator checkpoint", "run pretrain or finetune --name " + model);
  const Corpus corpus = load_split(cfg, split);
  const Checkpoint ckpt = load_checkpoint(path, "generator");
  const Generator g = Generator::from_checkpoint(ckpt);
  const std::size_t beam = cfg.generator.beam_size;
  const std::size_t max_len = cfg.generator.max_decode_length;
  const json decode = {{"model", model},
                       {"rewards", ckpt.metadata.value("rewards", "")},
                       {"split", split},
                       {"strategy", beam == 1 ? "greedy" : "beam"},
                       {"beam_size", beam},
                       {"max_decode_length", max_len},
                       {"score", "log-probability / length"}};
  const std::string out_path = outputs_path(cfg, model, split);
  auto out = open_out(out_path);
  out << json{{"decode", decode}}.dump() << '\n';
  for (const auto& ex : corpus.examples)
    out << json{{"id", ex.id}, {"question", detokenize(g.generate(ex.document, beam, max_len))}}.dump()
        << '\n';
  out.close();
  write_snapshot(cfg, cfg.paths.outputs_dir(), "generate-" + model + "." + split);
  return {{"command", "generate"}, {"file", out_path}, {"questions", corpus.size()}};
}

OutputFile read_outputs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DependencyError("missing generated questions: " + path + " (run generate)");
  OutputFile f;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& ex) {
      throw IngestionError(path + ": " + ex.what(), n);
    }
    if (n == 1) {
      if (!j.contains("decode")) throw IngestionError(path + ": missing decode header", n);
      f.decode = j.at("decode");
      continue;
    }
    if (!j.contains("id") || !j.contains("question") || !j.at("id").is_string() ||
        !j.at("question").is_string())
      throw IngestionError(path + ": records need string 'id' and 'question'", n);
    f.ids.push_back(j.at("id").get<std::string>());
    const std::string q = j.at("question").get<std::string>();
    f.questions.push_back(q.empty() ? TokenSeq{} : tokenize(q));
  }
  if (f.decode.is_null()) throw IngestionError(path + ": empty file", 1);
  return f;
}

namespace {

// Outputs must cover the split one-to-one and in order.
void check_aligned(const OutputFile& f, const Corpus& corpus, const std::string& path) {
  if (f.ids.size() != corpus.size())
    throw IngestionError(path + ": " + std::to_string(f.ids.size()) + " questions for " +
                             std::to_string(corpus.size()) + " documents",
                         1);
  for (std::size_t i = 0; i < f.ids.size(); ++i)
    if (f.ids[i] != corpus.examples[i].id)
      throw IngestionError(path + ": id '" + f.ids[i] + "' does not match '" +
                               corpus.examples[i].id + "'",
                           i + 2);
}

}  // namespace

json cmd_evaluate(const RunConfig& cfg) {
  const std::string& split = cfg.evaluate.split;
  std::vector<std::string> files;
  for (const auto& s : cfg.evaluate.systems) {
    files.push_back(outputs_path(cfg, s, split));
    require(files.back(), "generated questions", "run generate --model " + s);
  }
  const LoadedOracles oracles = load_oracles(cfg, RewardFlags{true, true, true});
  const Corpus corpus = load_split(cfg, split);
  TextSet docs, refs;
  for (const auto& ex : corpus.examples) {
    docs.push_back(ex.document);
    refs.push_back(ex.question);
  }
  std::vector<SystemOutputs> systems;
  for (std::size_t i = 0; i < files.size(); ++i) {
    OutputFile f = read_outputs(files[i]);
    check_aligned(f, corpus, files[i]);
    const RewardFlags flags = RewardFlags::parse(f.decode.value("rewards", ""));
    systems.push_back(SystemOutputs{cfg.evaluate.systems[i], flags.fluency, flags.relevance,
                                    flags.answerability, std::move(f.questions)});
  }
  ReportOptions options;
  options.resamples = cfg.evaluate.resamples;
  options.seed = cfg.derived_seed("bootstrap");
  options.significance = cfg.evaluate.significance;
  options.reward = cfg.reward;
  const ReportTable table = build_report(docs, refs, systems, oracles.view(), options);
  const std::string dir = cfg.paths.report_dir();
  write_text(join(dir, "report.tsv"), table.to_tsv());
  write_text(join(dir, "report.txt"), table.to_text());
  write_text(join(dir, "report_details.tsv"), table.details_tsv());
  write_snapshot(cfg, dir, "evaluate");
  return {{"command", "evaluate"}, {"report", join(dir, "report.tsv")}, {"systems", cfg.evaluate.systems}};
}

json cmd_simulate_ratings(const RunConfig& cfg, const std::string& model) {
  const std::string& split = cfg.evaluate.split;
  const std::string path = outputs_path(cfg, model, split);
  const OutputFile f = read_outputs(path);
  const Corpus corpus = load_split(cfg, split);
  check_aligned(f, corpus, path);
  std::map<std::string, TokenSeq> hyps;
  for (std::size_t i = 0; i < f.ids.size(); ++i) hyps[f.ids[i]] = f.questions[i];
  Rng rng(cfg.derived_seed("ratings"));
  const auto rows = synthetic::simulate_ratings(corpus, hyps, cfg.evaluate.raters, rng);
  auto out = open_out(cfg.paths.ratings_file());
  out << "id,fluency,relevance,answerability,complexity,raters\n";
  for (const auto& r : rows) out << r << '\n';
  return {{"command", "simulate-ratings"}, {"file", cfg.paths.ratings_file()}, {"rows", rows.size()}};
}

json cmd_analyze(const RunConfig& cfg, const std::string& model) {
  const std::string& split = cfg.evaluate.split;
  const std::string path = outputs_path(cfg, model, split);
  require(cfg.paths.ratings_file(), "ratings file", "provide paths.ratings or run simulate-ratings");
  require(path, "generated questions", "run generate --model " + model);
  const LoadedOracles oracles = load_oracles(cfg, RewardFlags{true, true, true});
  const HumanRatings ratings = load_human_ratings(cfg.paths.ratings_file());
  const OutputFile f = read_outputs(path);
  const Corpus corpus = load_split(cfg, split);
  check_aligned(f, corpus, path);

  std::map<std::string, double> r_flu, r_rel, r_ans, h_flu, h_rel, h_ans;
  std::vector<NamedSeries> columns = {{"R-FLU", {}}, {"R-REL", {}}, {"R-ANS", {}}, {"Flu", {}},
                                      {"Rel", {}},   {"Ans", {}},   {"Cpx", {}}};
  for (std::size_t i = 0; i < f.ids.size(); ++i) {
    auto it = ratings.find(f.ids[i]);
    if (it == ratings.end()) continue;
    const RewardScores s = score_rewards(corpus.examples[i].document, f.questions[i],
                                         oracles.view(), cfg.reward);
    const HumanRating& h = it->second;
    const std::string& id = f.ids[i];
    if (s.fluency) r_flu[id] = *s.fluency;
    if (s.relevance) r_rel[id] = *s.relevance;
    if (s.answerability) r_ans[id] = *s.answerability;
    if (h.fluency) h_flu[id] = *h.fluency;
    if (h.relevance) h_rel[id] = *h.relevance;
    if (h.answerability) h_ans[id] = *h.answerability;
    const std::optional<double> row[] = {s.fluency,  s.relevance,     s.answerability, h.fluency,
                                         h.relevance, h.answerability, h.complexity};
    for (std::size_t c = 0; c < columns.size(); ++c) columns[c].values.push_back(row[c]);
  }
  if (columns.front().values.size() < 2)
    throw IngestionError("fewer than two rated questions match " + path, 1);

  const std::string dir = cfg.paths.analysis_dir();
  fs::create_directories(dir);
  json summary = {{"command", "analyze"}, {"rated", columns.front().values.size()}};
  struct Panel {
    const char* file;
    const char* reward;
    const char* rating;
    const std::map<std::string, double>* scores;
    const std::map<std::string, double>* levels;
    RatingScale scale;
  };
  const Panel panels[] = {
      {"fluency.tsv", "R-FLU", "fluency", &r_flu, &h_flu, kFluencyScale},
      {"relevance.tsv", "R-REL", "relevance", &r_rel, &h_rel, kRelevanceScale},
      {"answerability.tsv", "R-ANS", "answerability", &r_ans, &h_ans, kAnswerabilityScale},
  };
  for (const auto& p : panels) {
    const auto dist = reward_rating_distribution(*p.scores, *p.levels, p.scale);
    write_rating_distribution(dist, p.reward, p.rating, join(dir, p.file));
    summary["files"].push_back(join(dir, p.file));
  }
  const CorrelationMatrix m = pearson_matrix(columns);
  write_correlation(m, join(dir, "correlation.tsv"));
  summary["files"].push_back(join(dir, "correlation.tsv"));
  summary["r_rel_flu_ratings"] = reward_json(m.r[4][3]);
  write_snapshot(cfg, dir, "analyze-" + model);
  return summary;
}

}  // namespace qgrl::cli
