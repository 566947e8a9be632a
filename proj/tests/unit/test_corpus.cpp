// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <set>
#include <sstream>

#include "qgrl/checkpoint.hpp"
#include "qgrl/corpus.hpp"
#include "qgrl/error.hpp"
#include "qgrl/synthetic.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

using namespace qgrl;

TEST_CASE("tokenize splits punctuation off words") {
  CHECK(tokenize("Who wrote it?") == TokenSeq{"Who", "wrote", "it", "?"});
  CHECK(tokenize("Who wrote it?", "whitespace") == TokenSeq{"Who", "wrote", "it?"});
  CHECK_THROWS_AS(tokenize(""), InvalidArgument);
  CHECK_THROWS_AS(tokenize("a b", "bpe"), ConfigError);
}

TEST_CASE("tokenize counts a paragraph as hand-tokenized") {
  const std::string text =
      "Austen wrote Emma in 1815. It was her fourth novel, published in December. "
      "Critics (mostly) liked it!";
  // Austen wrote Emma in 1815 . | It was her fourth novel , published in December . |
  // Critics ( mostly ) liked it !
  CHECK(tokenize(text).size() == 6 + 10 + 7);
}

TEST_CASE("tokenize is pure and detokenize inverts it") {
  const std::string text = "Hana founded Helix in 1972 . who was the founder of Helix ?";
  CHECK(tokenize(text) == tokenize(text));
  CHECK(tokenize(detokenize(tokenize(text))) == tokenize(text));
}

TEST_CASE("vocabulary keeps reserved ids and respects frequency and size") {
  const std::vector<TokenSeq> texts = {{"a", "b", "a"}};
  Vocabulary v = build_vocab(std::span<const TokenSeq>(texts), 100, 2);
  CHECK(v.tokens() == std::vector<std::string>{"<pad>", "<unk>", "<s>", "</s>", "a"});
  CHECK(v.id("b") == Vocabulary::kUnk);

  const std::vector<TokenSeq> none;
  CHECK(build_vocab(std::span<const TokenSeq>(none), 100, 1).size() == Vocabulary::kReserved);

  TokenSeq many;
  for (int i = 0; i < 100; ++i) many.push_back("w" + std::to_string(i));
  const std::vector<TokenSeq> big = {many};
  CHECK(build_vocab(std::span<const TokenSeq>(big), 5, 1).size() == 5);
}

TEST_CASE("vocabulary round-trips and rejects a bad token list") {
  const std::vector<TokenSeq> texts = {tokenize("x y z x")};
  const Vocabulary v = build_vocab(std::span<const TokenSeq>(texts), 10, 1);
  CHECK(Vocabulary::from_tokens(v.tokens()) == v);
  CHECK(Vocabulary::from_tokens(v.tokens()).hash() == v.hash());
  CHECK_THROWS_AS(Vocabulary::from_tokens({"x", "y"}), CheckpointError);
  CHECK(v.decode(v.encode(TokenSeq{"x", "q"})) == TokenSeq{"x", "<unk>"});
}

TEST_CASE("dataset loading") {
  SUBCASE("empty file gives an empty corpus") {
    std::istringstream in("");
    CHECK(read_dataset(in).empty());
  }
  SUBCASE("three records") {
    std::istringstream in(
        R"({"corpus": {"tokenizer": "ws-punct", "entity_types": ["PER"], "split": "train"}})"
        "\n"
        R"({"id": "a", "document": "Ann wrote it .", "question": "who wrote it ?", "answer_start": 0, "answer_end": 0, "entities": [{"start": 0, "end": 0, "type": "PER"}]})"
        "\n"
        R"({"id": "b", "document": "Bo sang .", "question": "who sang ?"})"
        "\n\n"
        R"({"id": "c", "document": "Cy ran .", "question": "who ran ?"})"
        "\n");
    const Corpus c = read_dataset(in);
    CHECK(c.size() == 3);
    CHECK(c.split == Split::kTrain);
    CHECK(c.examples[0].answer == TokenSpan{0, 0});
    CHECK(c.examples[0].entity_tokens(c.examples[0].entities[0]) == TokenSeq{"Ann"});
  }
  SUBCASE("missing question fails on that line") {
    std::istringstream in(
        R"({"id": "a", "document": "x .", "question": "y ?"})"
        "\n"
        R"({"id": "b", "document": "x ."})"
        "\n");
    try {
      read_dataset(in);
      FAIL("expected an ingestion error");
    } catch (const IngestionError& e) {
      CHECK(e.line() == 2);
      CHECK(std::string(e.what()).find("question") != std::string::npos);
    }
  }
  SUBCASE("long documents are truncated with their annotations") {
    std::istringstream in(R"({"id": "a", "document": "a b c d e", "question": "q ?", "answer_start": 4, "answer_end": 4})");
    LoadOptions opts;
    opts.max_document_length = 3;
    const Corpus c = read_dataset(in, opts);
    CHECK(c.examples[0].document.size() == 3);
    CHECK_FALSE(c.examples[0].answer.has_value());
  }
  SUBCASE("duplicate ids are rejected") {
    std::istringstream in(R"({"id": "a", "document": "x", "question": "y"})" "\n" R"({"id": "a", "document": "x", "question": "y"})");
    CHECK_THROWS_AS(read_dataset(in), IngestionError);
  }
}

TEST_CASE("dataset write and read round-trip") {
  Rng rng(3);
  const Corpus c = synthetic::generate(20, Split::kDev, "dev", rng);
  std::stringstream buf;
  write_dataset(c, buf);
  CHECK(read_dataset(buf) == c);
}

TEST_CASE("synthetic corpus") {
  Rng a(11), b(11);
  const Corpus c = synthetic::generate(300, Split::kTrain, "t", a);
  CHECK(c == synthetic::generate(300, Split::kTrain, "t", b));
  std::set<std::string> vocab;
  for (const auto& ex : c.examples) {
    CHECK(ex.question.size() == 7);
    REQUIRE(ex.answer.has_value());
    CHECK(ex.answer->start == ex.answer->end);
    // The one entity in the question is mentioned in the document.
    std::size_t mentioned = 0;
    for (const auto& e : ex.entities)
      if (std::count(ex.question.begin(), ex.question.end(), ex.document[e.start])) ++mentioned;
    CHECK(mentioned == 1);
    vocab.insert(ex.document.begin(), ex.document.end());
    vocab.insert(ex.question.begin(), ex.question.end());
  }
  CHECK(vocab.size() > 100);
  CHECK(vocab.size() < 300);
  CHECK(synthetic::conditional_question_entropy() == doctest::Approx(std::log(9.0)));
  // log 9 nats over 8 predicted tokens per question.
  CHECK(synthetic::perplexity_bound(c, std::log(9.0)) == doctest::Approx(std::exp(std::log(9.0) / 8.0)));
}

TEST_CASE("checkpoints round-trip and guard their contents") {
  testing::TempDir dir("ckpt");
  Generator g = oracle::tiny_generator(5);
  const std::string path = dir.file("g.ckpt");
  save_checkpoint(g.to_checkpoint(), path);
  const Generator back = Generator::from_checkpoint(load_checkpoint(path, "generator"));
  CHECK(back.params().fingerprint() == g.params().fingerprint());
  CHECK(back.vocab() == g.vocab());
  CHECK(back.config().hidden_size == g.config().hidden_size);

  CHECK_THROWS_AS(load_checkpoint(path, "language_model"), CheckpointError);
  CHECK_THROWS_AS(load_checkpoint(path, "generator", g.vocab().hash() + 1), CheckpointError);
  CHECK_THROWS_AS(load_checkpoint(dir.file("missing.ckpt"), "generator"), DependencyError);
  dir.write("junk.ckpt", "not a checkpoint at all");
  CHECK_THROWS_AS(load_checkpoint(dir.file("junk.ckpt"), "generator"), CheckpointError);
}
