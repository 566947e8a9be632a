// SPDX-License-Identifier: Apache-2.0
// qgrl: question generation with reinforced rewards, end to end.
#include <CLI11.hpp>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>

#include "qgrl/error.hpp"
#include "qgrl_cli/commands.hpp"
#include "qgrl_cli/run_config.hpp"

namespace {

using nlohmann::json;

int fail(std::string_view kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << std::endl;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace qgrl::cli;
  CLI::App app{"Question generation with fluency, relevance and answerability rewards"};
  app.set_version_flag("--version", std::string(version()));
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::string> config_file;
  std::map<std::string, std::string> overrides;
  app.add_option("--config", config_file, "JSON config layered over the built-in defaults");
  auto shortcut = [&](const std::string& flag, const std::string& key, const std::string& help) {
    app.add_option_function<std::string>(
        flag, [&overrides, key](const std::string& v) { overrides[key] = v; }, help + " (" + key + ")");
  };
  shortcut("--seed", "seed", "Master seed");
  shortcut("--data-dir", "paths.data_dir", "Dataset directory");
  shortcut("--out-dir", "paths.out_dir", "Run output directory");
  shortcut("--rewards", "rewards", "Rewards enabled for finetune, letters from FRA");
  shortcut("--beam", "generator.beam_size", "Beam width for generate");
  for (const std::string& key : config_keys()) {
    if (app.get_option_no_throw("--" + key)) continue;  // seed, rewards
    app.add_option_function<std::string>(
           "--" + key, [&overrides, key](const std::string& v) { overrides[key] = v; })
        ->group("Config overrides");
  }

  std::string name = "B1";
  std::string from = "B1";
  std::string model = "B1";
  std::string split;
  std::optional<std::string> finetune_name;

  auto* synth = app.add_subcommand("synthesize", "Write the synthetic train/dev/test corpus");
  auto* pre = app.add_subcommand("pretrain", "MLE pre-training of the generator");
  pre->add_option("--name", name, "Checkpoint name")->capture_default_str();
  auto* lm = app.add_subcommand("train-lm", "Train the fluency language model");
  auto* neg = app.add_subcommand("make-negatives", "Build labelled pairs for the discriminator");
  auto* disc = app.add_subcommand("train-disc", "Train the relevance discriminator");
  auto* qa = app.add_subcommand("train-qa", "Train the span QA model");
  auto* ft = app.add_subcommand("finetune", "Reward fine-tuning of a pretrained generator");
  ft->add_option("--name", finetune_name, "Checkpoint name (default: the reward letters)");
  ft->add_option("--from", from, "Pretrained checkpoint name")->capture_default_str();
  auto* gen = app.add_subcommand("generate", "Decode questions for a split");
  gen->add_option("--model", model, "Generator checkpoint name")->capture_default_str();
  gen->add_option("--split", split, "Split (default: evaluate.split)");
  auto* eval = app.add_subcommand("evaluate", "Metric and reward-gain report");
  auto* rate = app.add_subcommand("simulate-ratings", "Simulated human ratings of one system");
  rate->add_option("--model", model, "System to rate (default: evaluate.rated_system)");
  auto* ana = app.add_subcommand("analyze", "Reward distributions per rating level and correlations");
  ana->add_option("--model", model, "Rated system (default: evaluate.rated_system)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what());
  }

  try {
    std::vector<std::pair<std::string, std::string>> ordered(overrides.begin(), overrides.end());
    const RunConfig cfg = resolve_config(config_file, ordered);
    const bool model_given = rate->count("--model") || ana->count("--model");
    const std::string rated = model_given ? model : cfg.evaluate.rated_system;
    json summary;
    if (*synth) summary = cmd_synthesize(cfg);
    else if (*pre) summary = cmd_pretrain(cfg, name);
    else if (*lm) summary = cmd_train_lm(cfg);
    else if (*neg) summary = cmd_make_negatives(cfg);
    else if (*disc) summary = cmd_train_disc(cfg);
    else if (*qa) summary = cmd_train_qa(cfg);
    else if (*ft) {
      std::string n = finetune_name.value_or(cfg.rewards);
      if (n.empty()) n = "none";
      summary = cmd_finetune(cfg, n, from);
    } else if (*gen) summary = cmd_generate(cfg, model, split.empty() ? cfg.evaluate.split : split);
    else if (*eval) summary = cmd_evaluate(cfg);
    else if (*rate) summary = cmd_simulate_ratings(cfg, rated);
    else if (*ana) summary = cmd_analyze(cfg, rated);
    std::cout << summary.dump() << std::endl;
    return 0;
  } catch (const qgrl::Error& e) {
    return fail(qgrl::to_string(e.kind()), e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
}
