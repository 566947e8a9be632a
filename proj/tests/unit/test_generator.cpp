// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <map>

#include "qgrl/error.hpp"
#include "qgrl/generator.hpp"
#include "support/oracles.hpp"

using namespace qgrl;

TEST_CASE("encoder states have one 2h column per token and are deterministic") {
  const Generator g = oracle::tiny_generator(1);
  const TokenSeq doc = tokenize("Austen wrote Emma in Bath . ?");
  const nn::Matrix s = g.encode_states(doc);
  CHECK(s.rows() == 2 * static_cast<nn::Index>(g.config().hidden_size));
  CHECK(s.cols() == 7);
  CHECK(s == g.encode_states(doc));

  TokenSeq swapped = doc;
  std::swap(swapped[0], swapped[2]);
  CHECK((g.encode_states(swapped) - s).cwiseAbs().maxCoeff() > 0.0);
  CHECK_THROWS_AS(g.encode_states({}), InvalidArgument);
}

TEST_CASE("decode step distributions are normalised over the extended vocabulary") {
  const Generator g = oracle::tiny_generator(2);
  Rng rng(9);
  for (int d = 0; d < 20; ++d) {
    GeneratorSession session(g, oracle::random_document(rng, 3 + rng.index(8)));
    const auto& src = session.source();
    DecoderStep s = session.first_step();
    for (int t = 0; t < 10; ++t) {
      CHECK(s.distribution.size() == static_cast<nn::Index>(src.extended_size()));
      CHECK(std::abs(s.distribution.sum() - 1.0) <= 1e-6);
      CHECK(std::abs(s.attention.sum() - 1.0) <= 1e-6);
      CHECK(s.distribution.minCoeff() >= 0.0);
      s = session.advance(s, static_cast<TokenId>(rng.index(src.extended_size())));
    }
  }
}

TEST_CASE("copy gate limits") {
  const Generator g = oracle::tiny_generator(3);
  // Lyme and Persuasion are outside the vocabulary; "Emma" appears twice.
  const TokenSeq doc = {"Emma", "Lyme", "Emma", "Persuasion"};
  GeneratorSession session(g, doc);
  const auto& src = session.source();
  REQUIRE(src.oov_tokens.size() == 2);

  SUBCASE("p_gen = 1 puts no mass on document-only tokens") {
    const DecoderStep s = session.first_step(1.0);
    for (std::size_t k = src.vocab_size; k < src.extended_size(); ++k)
      CHECK(s.distribution(static_cast<nn::Index>(k)) == 0.0);
  }
  SUBCASE("p_gen = 0 is attention summed by token") {
    const DecoderStep s = session.first_step(0.0);
    std::map<nn::Index, double> by_token;
    for (std::size_t i = 0; i < doc.size(); ++i)
      by_token[src.extended_ids[i]] += s.attention(static_cast<nn::Index>(i));
    for (nn::Index k = 0; k < s.distribution.size(); ++k) {
      const double expect = by_token.count(k) ? by_token[k] : 0.0;
      CHECK(s.distribution(k) == doctest::Approx(expect).epsilon(1e-12));
    }
    const nn::Index emma = g.vocab().id("Emma");
    CHECK(s.distribution(emma) == doctest::Approx(s.attention(0) + s.attention(2)).epsilon(1e-12));
  }
}

TEST_CASE("coverage is the running sum of attention") {
  const Generator g = oracle::tiny_generator(4);
  Rng rng(2);
  GeneratorSession session(g, oracle::random_document(rng, 6));
  DecoderStep s = session.first_step();
  CHECK(s.coverage.isZero());
  nn::Vector expect = nn::Vector::Zero(s.attention.size());
  for (int t = 0; t < 8; ++t) {
    CHECK(s.coverage == expect);
    expect += s.attention;
    CHECK(s.next_coverage() == expect);
    s = session.advance(s, static_cast<TokenId>(rng.index(session.source().extended_size())));
  }
}

TEST_CASE("mle_loss matches a hand evaluation from the decoder steps") {
  const Generator g = oracle::tiny_generator(6, 5, 4, 0.25);
  const TokenSeq doc = tokenize("Austen wrote Emma in Lyme .");
  const TokenSeq question = {"who", "wrote"};
  GeneratorSession session(g, doc);
  const auto targets = g.target_ids(session.source(), question);
  REQUIRE(targets.size() == 3);

  double total = 0.0;
  DecoderStep s = session.first_step();
  for (std::size_t t = 0; t < targets.size(); ++t) {
    double cov = 0.0;
    for (nn::Index i = 0; i < s.attention.size(); ++i) cov += std::min(s.attention(i), s.coverage(i));
    if (t == 0) CHECK(cov == 0.0);
    total += -std::log(s.distribution(targets[t])) + 0.25 * cov;
    if (t + 1 < targets.size()) s = session.advance(s, targets[t]);
  }
  nn::Graph graph(nn::Graph::Mode::kInference);
  CHECK(g.mle_loss(graph, g.prepare(doc), question).scalar() ==
        doctest::Approx(total / 3.0).epsilon(1e-12));
}

TEST_CASE("mle_loss rejects an empty question") {
  const Generator g = oracle::tiny_generator(7);
  nn::Graph graph(nn::Graph::Mode::kInference);
  CHECK_THROWS_AS(g.mle_loss(graph, g.prepare(tokenize("Emma .")), TokenSeq{}), InvalidArgument);
}

TEST_CASE("mle_loss gradient matches central differences") {
  Generator g = oracle::tiny_generator(8);
  REQUIRE(g.params().scalar_count() <= 5000);
  const TokenSeq doc = tokenize("Austen wrote Emma in Lyme .");
  const TokenSeq question = tokenize("who wrote Lyme ?");
  const auto result = oracle::gradient_check(g.params(), [&](nn::Graph& graph) {
    return g.mle_loss(graph, g.prepare(doc), question);
  });
  CHECK(result.pass_rate() >= 0.95);
}

TEST_CASE("sampling, greedy and beam decoding on the generator") {
  const Generator g = oracle::tiny_generator(9);
  const TokenSeq doc = tokenize("Austen wrote Emma in Bath .");
  const auto a = g.sample(doc, 8, 42), b = g.sample(doc, 8, 42);
  CHECK(a.tokens == b.tokens);
  CHECK(a.log_probs == b.log_probs);
  CHECK(g.beam_search(doc, 1, 8) == g.greedy(doc, 8));
}
