// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "qgrl/generator.hpp"
#include "qgrl/metrics.hpp"
#include "qgrl/rewards.hpp"
#include "qgrl/synthetic.hpp"

using namespace qgrl;

namespace {

struct World {
  Corpus corpus;
  Vocabulary vocab;
  World() {
    Rng rng(7);
    corpus = synthetic::generate(200, Split::kTrain, "bench", rng);
    vocab = build_vocab(corpus, 1000, 1);
  }
};

const World& world() {
  static const World w;
  return w;
}

Generator desk_generator() {
  GeneratorConfig cfg;
  cfg.hidden_size = 48;
  cfg.embedding_size = 32;
  return Generator(cfg, world().vocab, 1);
}

nn::Vector peaked(Rng& rng, nn::Index n) {
  nn::Vector v(n);
  for (nn::Index i = 0; i < n; ++i) v(i) = std::exp(4.0 * rng.uniform());
  return v / v.sum();
}

}  // namespace

static void BM_DecodeStep(benchmark::State& state) {
  const Generator g = desk_generator();
  GeneratorSession session(g, world().corpus.examples[0].document);
  const DecoderStep first = session.first_step();
  for (auto _ : state) benchmark::DoNotOptimize(session.advance(first, Vocabulary::kUnk));
}
BENCHMARK(BM_DecodeStep);

static void BM_BeamSearch(benchmark::State& state) {
  const Generator g = desk_generator();
  const TokenSeq& doc = world().corpus.examples[0].document;
  for (auto _ : state) benchmark::DoNotOptimize(g.beam_search(doc, static_cast<std::size_t>(state.range(0)), 20));
}
BENCHMARK(BM_BeamSearch)->Arg(1)->Arg(3)->Arg(9);

static void BM_MleLoss(benchmark::State& state) {
  Generator g = desk_generator();
  const Example& ex = world().corpus.examples[0];
  const SourceDocument src = g.prepare(ex.document);
  for (auto _ : state) {
    nn::Graph graph;
    graph.backward(g.mle_loss(graph, src, ex.question));
  }
}
BENCHMARK(BM_MleLoss);

static void BM_CorpusBleu(benchmark::State& state) {
  TextSet hyps, refs;
  for (const auto& ex : world().corpus.examples) {
    refs.push_back(ex.question);
    hyps.push_back(TokenSeq(ex.question.rbegin(), ex.question.rend()));
  }
  for (auto _ : state) benchmark::DoNotOptimize(bleu(hyps, refs, 4));
}
BENCHMARK(BM_CorpusBleu);

static void BM_MaxSpanScore(benchmark::State& state) {
  Rng rng(3);
  const nn::Index n = state.range(0);
  const nn::Vector s = peaked(rng, n), e = peaked(rng, n);
  for (auto _ : state) benchmark::DoNotOptimize(max_span_score(s, e, 30));
  state.SetComplexityN(n);
}
BENCHMARK(BM_MaxSpanScore)->Range(32, 4096)->Complexity();

static void BM_MaxSpanScoreExhaustive(benchmark::State& state) {
  Rng rng(3);
  const nn::Index n = state.range(0);
  const nn::Vector s = peaked(rng, n), e = peaked(rng, n);
  for (auto _ : state) benchmark::DoNotOptimize(max_span_score_exhaustive(s, e, 30));
  state.SetComplexityN(n);
}
BENCHMARK(BM_MaxSpanScoreExhaustive)->Range(32, 512)->Complexity();

BENCHMARK_MAIN();
