// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "qgrl/error.hpp"
#include "qgrl/rewards.hpp"
#include "support/oracles.hpp"

using namespace qgrl;

namespace {
const RewardConfig kCfg;
const double kEps = kCfg.epsilon;
}  // namespace

TEST_CASE("fluency reward") {
  CHECK(fluency_reward(std::vector<double>{1, 1, 1, 1}) == -1.0);
  CHECK(fluency_reward(std::vector<double>(6, 1.0 / 8)) == doctest::Approx(-8.0).epsilon(1e-12));
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> p(5);
    for (auto& x : p) x = rng.uniform(0.01, 1.0);
    CHECK(std::abs(fluency_reward(p) - oracle::fluency(p, kEps)) <= 1e-9);
  }
  CHECK_THROWS_AS(fluency_reward(std::vector<double>{}), InvalidArgument);

  oracle::FixedLm lm;
  lm.fn = [](const TokenSeq& q) { return std::vector<double>(q.size() + 1, 0.5); };
  CHECK(fluency_reward(TokenSeq{"a", "b"}, lm) == doctest::Approx(-2.0).epsilon(1e-12));
}

TEST_CASE("relevance reward") {
  CHECK(relevance_reward(0.0) == -std::log(1.0 + kEps));
  CHECK(relevance_reward(0.5) == -std::log(0.5 + kEps));
  CHECK(relevance_reward(0.5) == doctest::Approx(std::log(2.0)).epsilon(1e-10));
  CHECK(relevance_reward(0.9) == doctest::Approx(2.302585).epsilon(1e-6));
  CHECK(relevance_reward(1.0) == -std::log(kEps));
}

TEST_CASE("answerability reward") {
  SUBCASE("aligned point masses") {
    nn::Vector s = nn::Vector::Zero(6), e = nn::Vector::Zero(6);
    s(2) = 1.0;
    e(3) = 1.0;
    CHECK(answerability_reward(SpanDistributions{s, e}) == -std::log(kEps));
    SUBCASE("end before start scores lower") {
      nn::Vector late = nn::Vector::Zero(6);
      late(1) = 1.0;
      CHECK(answerability_reward(SpanDistributions{s, late}) < -std::log(kEps));
      CHECK(max_span_score(s, late, 30) == 0.0);
    }
  }
  SUBCASE("uniform over ten tokens") {
    const nn::Vector u = nn::Vector::Constant(10, 0.1);
    CHECK(answerability_reward(SpanDistributions{u, u}) ==
          doctest::Approx(-std::log(0.9 + kEps)).epsilon(1e-12));
    CHECK(answerability_reward(SpanDistributions{u, u}) == doctest::Approx(0.10536).epsilon(1e-4));
  }
  SUBCASE("window maximum equals enumeration") {
    Rng rng(4);
    for (int i = 0; i < 200; ++i) {
      const nn::Index n = 1 + static_cast<nn::Index>(rng.index(30));
      const nn::Vector s = oracle::random_distribution(rng, n, 4.0);
      const nn::Vector e = oracle::random_distribution(rng, n, 4.0);
      const std::size_t l = rng.index(12);
      CHECK(max_span_score(s, e, l) == oracle::max_span(s, e, l));
      CHECK(max_span_score(s, e, l) == max_span_score_exhaustive(s, e, l));
    }
  }
  SUBCASE("best span obeys the length limit") {
    nn::Vector s(4), e(4);
    s << 0.7, 0.1, 0.1, 0.1;
    e << 0.05, 0.05, 0.1, 0.8;
    CHECK(best_span(SpanDistributions{s, e}, 3) == TokenSpan{0, 3});
    CHECK(best_span(SpanDistributions{s, e}, 1) == TokenSpan{2, 3});
  }
}

TEST_CASE("relevance and answerability rewards increase strictly") {
  double prev_rel = -1e300, prev_ans = -1e300;
  for (int i = 0; i < 100; ++i) {
    const double p = i / 100.0;
    CHECK(relevance_reward(p) > prev_rel);
    CHECK(answerability_from_score(p) > prev_ans);
    prev_rel = relevance_reward(p);
    prev_ans = answerability_from_score(p);
  }
}

TEST_CASE("focal loss") {
  CHECK(focal_loss(0.5, 1.0, 0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(focal_loss(1.0, 0.75, 2.0) == 0.0);
  CHECK(focal_loss(0.9, 0.25, 2.0) == doctest::Approx(2.634e-4).epsilon(1e-3));
  Rng rng(8);
  for (int i = 0; i < 100; ++i) {
    const double p = rng.uniform(1e-6, 1.0);
    CHECK(std::abs(focal_loss(p, 1.0, 0.0) + std::log(p)) <= 1e-9);
  }
}

TEST_CASE("focal loss from a logit") {
  const FocalParams params;
  for (double z : {-4.0, -0.3, 0.0, 1.7, 6.0}) {
    for (bool positive : {true, false}) {
      nn::Graph g;
      nn::Parameter p{"z", nn::Matrix::Constant(1, 1, z), nn::Matrix::Zero(1, 1)};
      const nn::Var loss = focal_loss_from_logit(g.param(p), positive, params);
      const double prob = 1.0 / (1.0 + std::exp(-z));
      const double p_true = positive ? prob : 1.0 - prob;
      CHECK(loss.scalar() == doctest::Approx(oracle::focal(p_true, params.alpha(positive), params.lambda)).epsilon(1e-10));

      g.backward(loss);
      auto at = [&](double x) {
        nn::Graph h(nn::Graph::Mode::kInference);
        return focal_loss_from_logit(h.constant(nn::Matrix::Constant(1, 1, x)), positive, params).scalar();
      };
      const double numeric = (at(z + 1e-6) - at(z - 1e-6)) / 2e-6;
      CHECK(p.grad(0, 0) == doctest::Approx(numeric).epsilon(1e-5));
    }
  }
}

TEST_CASE("score_rewards consults each present oracle") {
  oracle::FixedLm lm;
  lm.fn = [](const TokenSeq& q) { return std::vector<double>(q.size() + 1, 0.25); };
  oracle::FixedRelevance rel;
  rel.fn = [](const TokenSeq&, const TokenSeq&) { return 0.5; };
  oracle::FixedSpan span;
  span.fn = [](const TokenSeq& d, const TokenSeq&) {
    const auto n = static_cast<nn::Index>(d.size());
    return SpanDistributions{nn::Vector::Constant(n, 1.0 / n), nn::Vector::Constant(n, 1.0 / n)};
  };
  const TokenSeq doc = tokenize("a b c d .");

  RewardOracles none;
  const auto empty = score_rewards(doc, {"q"}, none);
  CHECK_FALSE(empty.fluency);
  CHECK_FALSE(empty.relevance);

  const RewardOracles all{&lm, &rel, &span};
  const auto s = score_rewards(doc, {"q", "?"}, all);
  CHECK(*s.fluency == doctest::Approx(-4.0));
  CHECK(*s.relevance == doctest::Approx(std::log(2.0)));
  CHECK(*s.answerability == doctest::Approx(-std::log(0.8 + kEps)));

  const auto blank = score_rewards(doc, {}, all);
  CHECK_FALSE(blank.relevance);
  CHECK_FALSE(blank.answerability);
  CHECK(all.fingerprint() != none.fingerprint());
}
