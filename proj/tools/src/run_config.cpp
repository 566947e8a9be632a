// SPDX-License-Identifier: Apache-2.0
#include "qgrl_cli/run_config.hpp"

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qgrl/error.hpp"

#ifndef QGRL_VERSION
#define QGRL_VERSION "0.0.0"
#endif

namespace qgrl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view version() { return QGRL_VERSION; }

namespace {

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

std::string or_default(const std::string& explicit_path, const std::string& fallback) {
  return explicit_path.empty() ? fallback : explicit_path;
}

}  // namespace

std::string Paths::train_file() const { return or_default(train, join(data_dir, "train.jsonl")); }
std::string Paths::dev_file() const { return or_default(dev, join(data_dir, "dev.jsonl")); }
std::string Paths::test_file() const { return or_default(test, join(data_dir, "test.jsonl")); }

std::string Paths::split_file(std::string_view split) const {
  if (split == "train") return train_file();
  if (split == "dev") return dev_file();
  if (split == "test") return test_file();
  throw ConfigError("unknown split '" + std::string(split) + "' (expected train, dev or test)");
}

std::string Paths::ratings_file() const {
  return or_default(ratings, join(data_dir, "ratings.csv"));
}
std::string Paths::checkpoint_dir() const {
  return or_default(checkpoints, join(out_dir, "checkpoints"));
}
std::string Paths::report_dir() const { return or_default(reports, join(out_dir, "reports")); }
std::string Paths::log_dir() const { return join(out_dir, "logs"); }
std::string Paths::negatives_dir() const { return join(out_dir, "negatives"); }
std::string Paths::outputs_dir() const { return join(out_dir, "outputs"); }
std::string Paths::analysis_dir() const { return join(out_dir, "analysis"); }

std::uint64_t RunConfig::derived_seed(std::string_view component) const {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : component) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  // splitmix64 finaliser over seed and component hash
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (h | 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

GeneratorConfig RunConfig::generator_config() const {
  GeneratorConfig g = generator;
  g.coverage_weight = weights.coverage;
  g.validate();
  return g;
}

TrainConfig RunConfig::pretrain_config() const {
  TrainConfig c = pretrain;
  c.seed = derived_seed("pretrain");
  c.rewards = {};
  c.validate();
  return c;
}

TrainConfig RunConfig::finetune_config() const {
  TrainConfig c = finetune;
  c.seed = derived_seed("finetune");
  c.rewards = RewardFlags::parse(rewards);
  c.validate();
  return c;
}

OracleTrainConfig RunConfig::oracle_train_config(std::string_view oracle) const {
  OracleTrainConfig c = oracle_train;
  c.seed = derived_seed(std::string("oracle/") + std::string(oracle));
  c.validate();
  return c;
}

namespace {

json without(json j, std::initializer_list<const char*> keys) {
  for (const char* k : keys) j.erase(k);
  return j;
}

}  // namespace

json RunConfig::to_json() const {
  return {
      {"seed", seed},
      {"paths",
       {{"data_dir", paths.data_dir},
        {"out_dir", paths.out_dir},
        {"train", paths.train},
        {"dev", paths.dev},
        {"test", paths.test},
        {"ratings", paths.ratings},
        {"checkpoints", paths.checkpoints},
        {"reports", paths.reports}}},
      {"data",
       {{"train_size", data.train_size},
        {"dev_size", data.dev_size},
        {"test_size", data.test_size},
        {"names_per_type", data.synthetic.names_per_type},
        {"facts_per_document", data.synthetic.facts_per_document},
        {"filler_probability", data.synthetic.filler_probability},
        {"vocab_max_size", data.vocab_max_size},
        {"vocab_min_count", data.vocab_min_count}}},
      {"generator", without(generator.to_json(), {"coverage_weight"})},
      {"pretrain", without(pretrain.to_json(), {"seed", "rewards"})},
      {"finetune", without(finetune.to_json(), {"seed", "rewards"})},
      {"rewards", rewards},
      {"reward", reward.to_json()},
      {"baselines", baselines.to_json()},
      {"weights", weights.to_json()},
      {"oracle_model", oracle_model.to_json()},
      {"oracle_train", without(oracle_train.to_json(), {"seed"})},
      {"focal", focal.to_json()},
      {"evaluate",
       {{"split", evaluate.split},
        {"systems", evaluate.systems},
        {"resamples", evaluate.resamples},
        {"significance", evaluate.significance},
        {"raters", evaluate.raters},
        {"rated_system", evaluate.rated_system}}},
  };
}

namespace {

const json& defaults() {
  static const json d = RunConfig{}.to_json();
  return d;
}

std::string type_name(const json& v) {
  if (v.is_boolean()) return "a boolean";
  if (v.is_number_unsigned()) return "a non-negative integer";
  if (v.is_number()) return "a number";
  if (v.is_string()) return "a string";
  if (v.is_array()) return "a list of strings";
  return "an object";
}

bool same_kind(const json& value, const json& reference) {
  if (reference.is_object()) return value.is_object();
  if (reference.is_boolean()) return value.is_boolean();
  if (reference.is_number_unsigned()) return value.is_number_unsigned();
  if (reference.is_number()) return value.is_number();
  if (reference.is_string()) return value.is_string();
  if (reference.is_array()) {
    if (!value.is_array()) return false;
    for (const auto& e : value)
      if (!e.is_string()) return false;
    return true;
  }
  return false;
}

// Every key must exist in the defaults with a value of the same kind.
void check_against(const json& value, const json& reference, const std::string& prefix,
                   bool require_all) {
  for (auto it = value.begin(); it != value.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!reference.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
    const json& ref = reference.at(it.key());
    if (!same_kind(it.value(), ref))
      throw ConfigError("config key '" + key + "' must be " + type_name(ref));
    if (ref.is_object()) check_against(it.value(), ref, key, require_all);
  }
  if (!require_all) return;
  for (auto it = reference.begin(); it != reference.end(); ++it)
    if (!value.contains(it.key()))
      throw ConfigError("missing config key '" + (prefix.empty() ? it.key() : prefix + "." + it.key()) +
                        "'");
}

void collect_keys(const json& j, const std::string& prefix, std::vector<std::string>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it.value().is_object())
      collect_keys(it.value(), key, out);
    else
      out.push_back(key);
  }
}

json parse_override(const std::string& key, const std::string& text, const json& reference) {
  auto fail = [&] {
    return ConfigError("--" + key + ": '" + text + "' is not " + type_name(reference));
  };
  if (reference.is_boolean()) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw fail();
  }
  if (reference.is_number_unsigned()) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) throw fail();
    return v;
  }
  if (reference.is_number()) {
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) throw fail();
    return v;
  }
  if (reference.is_string()) return text;
  if (reference.is_array()) {
    json list = json::array();
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ','))
      if (!item.empty()) list.push_back(item);
    return list;
  }
  throw fail();
}

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  check_against(j, defaults(), "", true);
  try {
    RunConfig c;
    c.seed = j.at("seed").get<std::uint64_t>();
    const json& p = j.at("paths");
    c.paths.data_dir = p.at("data_dir").get<std::string>();
    c.paths.out_dir = p.at("out_dir").get<std::string>();
    c.paths.train = p.at("train").get<std::string>();
    c.paths.dev = p.at("dev").get<std::string>();
    c.paths.test = p.at("test").get<std::string>();
    c.paths.ratings = p.at("ratings").get<std::string>();
    c.paths.checkpoints = p.at("checkpoints").get<std::string>();
    c.paths.reports = p.at("reports").get<std::string>();

    const json& d = j.at("data");
    c.data.train_size = d.at("train_size").get<std::size_t>();
    c.data.dev_size = d.at("dev_size").get<std::size_t>();
    c.data.test_size = d.at("test_size").get<std::size_t>();
    c.data.synthetic.names_per_type = d.at("names_per_type").get<std::size_t>();
    c.data.synthetic.facts_per_document = d.at("facts_per_document").get<std::size_t>();
    c.data.synthetic.filler_probability = d.at("filler_probability").get<double>();
    c.data.vocab_max_size = d.at("vocab_max_size").get<std::size_t>();
    c.data.vocab_min_count = d.at("vocab_min_count").get<std::size_t>();

    json g = j.at("generator");
    g["coverage_weight"] = 0.0;  // taken from weights.coverage
    c.generator = GeneratorConfig::from_json(g);
    json pt = j.at("pretrain");
    pt["seed"] = 0;
    pt["rewards"] = "";
    c.pretrain = TrainConfig::from_json(pt);
    json ft = j.at("finetune");
    ft["seed"] = 0;
    ft["rewards"] = "";
    c.finetune = TrainConfig::from_json(ft);
    c.rewards = j.at("rewards").get<std::string>();
    RewardFlags::parse(c.rewards);
    c.reward = RewardConfig::from_json(j.at("reward"));
    c.baselines = BaselineConfig::from_json(j.at("baselines"));
    c.weights = LossWeights::from_json(j.at("weights"));
    c.oracle_model = OracleModelConfig::from_json(j.at("oracle_model"));
    json ot = j.at("oracle_train");
    ot["seed"] = 0;
    c.oracle_train = OracleTrainConfig::from_json(ot);
    c.focal = FocalParams::from_json(j.at("focal"));

    const json& e = j.at("evaluate");
    c.evaluate.split = e.at("split").get<std::string>();
    c.evaluate.systems = e.at("systems").get<std::vector<std::string>>();
    c.evaluate.resamples = e.at("resamples").get<std::size_t>();
    c.evaluate.significance = e.at("significance").get<double>();
    c.evaluate.raters = e.at("raters").get<std::size_t>();
    c.evaluate.rated_system = e.at("rated_system").get<std::string>();
    c.paths.split_file(c.evaluate.split);
    if (c.evaluate.systems.empty()) throw ConfigError("evaluate.systems must name at least one system");
    if (c.evaluate.raters < 1) throw ConfigError("evaluate.raters must be >= 1");
    if (!(c.evaluate.significance > 0.0 && c.evaluate.significance < 1.0))
      throw ConfigError("evaluate.significance must be in (0, 1)");
    c.baselines.validate();
    c.weights.validate();
    c.generator_config();
    return c;
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("config: ") + ex.what());
  }
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  collect_keys(defaults(), "", keys);
  return keys;
}

RunConfig resolve_config(const std::optional<std::string>& config_file,
                         const std::vector<std::pair<std::string, std::string>>& overrides) {
  json merged = defaults();
  if (config_file) {
    std::ifstream in(*config_file);
    if (!in) throw DependencyError("config file not found: " + *config_file);
    json file;
    try {
      file = json::parse(in);
    } catch (const json::parse_error& ex) {
      throw ConfigError(*config_file + ": " + ex.what());
    }
    if (!file.is_object()) throw ConfigError(*config_file + ": expected a JSON object");
    check_against(file, defaults(), "", false);
    merged.merge_patch(file);
  }
  for (const auto& [key, text] : overrides) {
    const json::json_pointer ptr("/" + [&] {
      std::string p = key;
      for (auto& ch : p)
        if (ch == '.') ch = '/';
      return p;
    }());
    if (!defaults().contains(ptr) || defaults().at(ptr).is_object())
      throw ConfigError("unknown config key '" + key + "'");
    merged[ptr] = parse_override(key, text, defaults().at(ptr));
  }
  return RunConfig::from_json(merged);
}

void write_snapshot(const RunConfig& cfg, const std::string& dir, const std::string& tag) {
  fs::create_directories(dir);
  const std::string path = join(dir, "config." + tag + ".json");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  const json snapshot = {{"version", std::string(version())}, {"command", tag}, {"config", cfg.to_json()}};
  out << snapshot.dump(2) << '\n';
}

}  // namespace qgrl::cli
