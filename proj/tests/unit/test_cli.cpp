// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "qgrl/error.hpp"
#include "qgrl_cli/run_config.hpp"
#include "support/process.hpp"
#include "support/temp_dir.hpp"

using namespace qgrl;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::string kCli = QGRL_CLI_PATH;

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(line);
  return out;
}

/// A pipeline small enough to run in seconds.
std::vector<std::string> tiny_flags(const testing::TempDir& dir) {
  return {"--data-dir", dir.file("data"), "--out-dir", dir.file("run"), "--seed", "3",
          "--data.train_size", "60", "--data.dev_size", "12", "--data.test_size", "12",
          "--generator.hidden_size", "8", "--generator.embedding_size", "6",
          "--generator.max_decode_length", "10",
          "--pretrain.max_epochs", "1", "--pretrain.batch_size", "16",
          "--finetune.max_epochs", "1", "--finetune.batch_size", "16",
          "--oracle_model.hidden_size", "6", "--oracle_model.embedding_size", "5",
          "--oracle_train.epochs", "1", "--oracle_train.batch_size", "16"};
}

testing::RunResult run_cli(const testing::TempDir& dir, const std::string& command,
                       std::vector<std::string> extra = {}) {
  std::vector<std::string> args = {command};
  for (const auto& f : tiny_flags(dir)) args.push_back(f);
  for (auto& e : extra) args.push_back(std::move(e));
  return testing::run(kCli, args, dir.path().string());
}

void expect_ok(const testing::RunResult& r) {
  INFO(r.err);
  REQUIRE(r.exit_code == 0);
  CHECK(json::parse(r.out).is_object());
}

}  // namespace

TEST_CASE("configuration layers defaults, file and overrides") {
  testing::TempDir dir("cli-config");
  const auto file = dir.write("c.json", R"({"seed": 9, "pretrain": {"learning_rate": 0.5, "batch_size": 7}})");
  const auto cfg = cli::resolve_config(file, {{"pretrain.batch_size", "3"}, {"evaluate.systems", "B1,R"}});
  CHECK(cfg.seed == 9);
  CHECK(cfg.pretrain.learning_rate == 0.5);
  CHECK(cfg.pretrain.batch_size == 3);
  CHECK(cfg.finetune.batch_size == cli::RunConfig{}.finetune.batch_size);
  CHECK(cfg.evaluate.systems == std::vector<std::string>{"B1", "R"});
  CHECK(cli::RunConfig::from_json(cfg.to_json()).to_json() == cfg.to_json());

  CHECK_THROWS_AS(cli::resolve_config(dir.write("u.json", R"({"pretrain": {"learnin_rate": 1}})"), {}), ConfigError);
  CHECK_THROWS_AS(cli::resolve_config(dir.write("t.json", R"({"seed": "one"})"), {}), ConfigError);
  CHECK_THROWS_AS(cli::resolve_config(std::nullopt, {{"pretrain.batch_size", "many"}}), ConfigError);
  CHECK_THROWS_AS(cli::resolve_config(std::nullopt, {{"no.such_key", "1"}}), ConfigError);
  CHECK_THROWS_AS(cli::resolve_config(dir.file("absent.json"), {}), DependencyError);
}

TEST_CASE("derived seeds follow the master seed") {
  cli::RunConfig a, b;
  b.seed = 2;
  CHECK(a.derived_seed("generator") == cli::RunConfig{}.derived_seed("generator"));
  CHECK(a.derived_seed("generator") != a.derived_seed("bootstrap"));
  CHECK(a.derived_seed("generator") != b.derived_seed("generator"));
  CHECK(a.generator_config().coverage_weight == a.weights.coverage);
}

TEST_CASE("shipped profiles resolve") {
  for (const char* name : {"desk.json", "paper-defaults.json"}) {
    const auto cfg = cli::resolve_config(std::string(QGRL_CONFIG_DIR) + "/" + name, {});
    CHECK_FALSE(cfg.evaluate.systems.empty());
  }
  const auto paper = cli::resolve_config(std::string(QGRL_CONFIG_DIR) + "/paper-defaults.json", {});
  CHECK(paper.generator.hidden_size == 512);
  CHECK(paper.generator.embedding_size == 300);
  CHECK(paper.weights.fluency == 0.2);
}

TEST_CASE("command-line errors are single machine-readable lines") {
  testing::TempDir dir("cli-errors");
  SUBCASE("finetune without a pretrained checkpoint names the file") {
    const auto r = run_cli(dir, "finetune", {"--rewards", "R"});
    CHECK(r.exit_code != 0);
    const auto lines = lines_of(r.err);
    REQUIRE(lines.size() == 1);
    const auto err = json::parse(lines[0]);
    CHECK(err.at("error") == "dependency");
    CHECK(err.at("message").get<std::string>().find("generator-B1.ckpt") != std::string::npos);
  }
  SUBCASE("unknown flag") {
    const auto r = testing::run(kCli, {"evaluate", "--no-such-flag"}, dir.path().string());
    CHECK(r.exit_code != 0);
    CHECK(json::parse(lines_of(r.err).at(0)).at("error") == "usage");
  }
  SUBCASE("bad override value") {
    const auto r = testing::run(kCli, {"synthesize", "--pretrain.batch_size", "x"}, dir.path().string());
    CHECK(r.exit_code != 0);
    CHECK(json::parse(lines_of(r.err).at(0)).at("error") == "config");
  }
  SUBCASE("version") {
    const auto r = testing::run(kCli, {"--version"}, dir.path().string());
    CHECK(r.exit_code == 0);
    CHECK(r.out.find(cli::version()) != std::string::npos);
  }
}

TEST_CASE("tiny end-to-end pipeline") {
  testing::TempDir dir("cli-pipeline");
  expect_ok(run_cli(dir, "synthesize"));
  expect_ok(run_cli(dir, "train-lm"));
  expect_ok(run_cli(dir, "make-negatives"));
  expect_ok(run_cli(dir, "train-disc"));
  expect_ok(run_cli(dir, "train-qa"));
  expect_ok(run_cli(dir, "pretrain"));

  SUBCASE("fine-tuning with every reward disabled logs joint = L_base") {
    expect_ok(run_cli(dir, "finetune", {"--rewards", ""}));
    std::size_t steps = 0;
    for (const auto& line : lines_of(testing::read_file(dir.file("run/logs/finetune-none.jsonl")))) {
      const auto rec = json::parse(line);
      if (!rec.contains("step")) continue;
      CHECK(rec.at("joint").get<double>() == rec.at("L_base").get<double>());
      ++steps;
    }
    CHECK(steps > 0);
  }

  SUBCASE("evaluate on outputs identical to the references") {
    fs::create_directories(dir.file("run/outputs"));
    for (const char* system : {"B1", "R"}) {
      std::ofstream out(dir.file(std::string("run/outputs/") + system + ".test.jsonl"));
      out << json{{"decode", {{"model", system}, {"rewards", system == std::string("R") ? "R" : ""}}}}.dump() << '\n';
      for (const auto& line : lines_of(testing::read_file(dir.file("data/test.jsonl")))) {
        const auto rec = json::parse(line);
        if (rec.contains("corpus")) continue;
        out << json{{"id", rec.at("id")}, {"question", rec.at("question")}}.dump() << '\n';
      }
    }
    expect_ok(run_cli(dir, "evaluate", {"--evaluate.systems", "B1,R"}));
    const auto rows = lines_of(testing::read_file(dir.file("run/reports/report.tsv")));
    REQUIRE(rows.size() == 3);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      std::istringstream cells(rows[i]);
      std::vector<std::string> c;
      std::string cell;
      while (std::getline(cells, cell, '\t')) c.push_back(cell);
      CHECK(c.at(4) == "100.00");
    }
  }

  SUBCASE("every stage leaves its artifacts and a config snapshot") {
    expect_ok(run_cli(dir, "finetune", {"--rewards", "RA"}));
    expect_ok(run_cli(dir, "generate", {"--model", "B1"}));
    expect_ok(run_cli(dir, "generate", {"--model", "RA"}));
    expect_ok(run_cli(dir, "evaluate", {"--evaluate.systems", "B1,RA"}));
    expect_ok(run_cli(dir, "simulate-ratings"));
    expect_ok(run_cli(dir, "analyze"));
    for (const char* f : {"data/train.jsonl", "data/dev.jsonl", "data/test.jsonl", "data/ratings.csv",
                          "run/checkpoints/lm.ckpt", "run/checkpoints/discriminator.ckpt",
                          "run/checkpoints/qa.ckpt", "run/checkpoints/generator-B1.ckpt",
                          "run/checkpoints/generator-RA.ckpt", "run/negatives/train.jsonl",
                          "run/negatives/dev.jsonl", "run/logs/pretrain-B1.jsonl", "run/logs/finetune-RA.jsonl",
                          "run/outputs/B1.test.jsonl", "run/outputs/RA.test.jsonl", "run/reports/report.tsv",
                          "run/reports/report.txt", "run/reports/report_details.tsv",
                          "run/analysis/correlation.tsv", "run/analysis/fluency.tsv",
                          "run/analysis/relevance.tsv", "run/analysis/answerability.tsv"}) {
      INFO(f);
      CHECK(fs::exists(dir.file(f)));
    }
    for (const char* d : {"data", "run/checkpoints", "run/logs", "run/negatives", "run/outputs", "run/reports",
                          "run/analysis"}) {
      bool snapshot = false;
      for (const auto& e : fs::directory_iterator(dir.file(d))) {
        const auto name = e.path().filename().string();
        if (name.rfind("config.", 0) != 0) continue;
        const auto j = json::parse(testing::read_file(e.path().string()));
        snapshot = j.at("version") == std::string(cli::version()) && j.contains("config");
      }
      INFO(d);
      CHECK(snapshot);
    }
    const auto header = json::parse(lines_of(testing::read_file(dir.file("run/outputs/RA.test.jsonl"))).at(0));
    CHECK(header.at("decode").at("beam_size") == 3);
    CHECK(header.at("decode").at("rewards") == "RA");
  }
}
