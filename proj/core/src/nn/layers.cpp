// SPDX-License-Identifier: Apache-2.0
#include "qgrl/nn/layers.hpp"

#include "qgrl/error.hpp"

namespace qgrl::nn {

Linear::Linear(ParameterStore& store, const std::string& name, Index in, Index out, Rng& rng,
               bool bias) {
  weight_ = &store.add(name + ".weight", out, in, Init::kGlorotUniform, rng);
  if (bias) bias_ = &store.add(name + ".bias", out, 1, Init::kZero, rng);
}

Var Linear::operator()(Graph& g, Var x) const {
  Var y = matmul(g.param(*weight_), x);
  return bias_ ? add(y, g.param(*bias_)) : y;
}

Var Linear::apply_columns(Graph& g, Var x) const {
  Var y = matmul(g.param(*weight_), x);
  return bias_ ? add_col(y, g.param(*bias_)) : y;
}

Embedding::Embedding(ParameterStore& store, const std::string& name, Index vocab, Index dim,
                     Rng& rng) {
  table_ = &store.add(name, dim, vocab, Init::kUniformSmall, rng);
}

Var Embedding::operator()(Graph& g, Index token) const { return g.lookup(*table_, token); }

GruCell::GruCell(ParameterStore& store, const std::string& name, Index in, Index hidden,
                 Rng& rng)
    : hidden_(hidden) {
  w_ = &store.add(name + ".w", 3 * hidden, in, Init::kGlorotUniform, rng);
  u_ = &store.add(name + ".u", 3 * hidden, hidden, Init::kGlorotUniform, rng);
  bw_ = &store.add(name + ".bw", 3 * hidden, 1, Init::kZero, rng);
  bu_ = &store.add(name + ".bu", 3 * hidden, 1, Init::kZero, rng);
}

Var GruCell::step(Graph& g, Var x, Var h) const {
  const Index n = hidden_;
  Var wx = add(matmul(g.param(*w_), x), g.param(*bw_));
  Var uh = add(matmul(g.param(*u_), h), g.param(*bu_));
  Var r = sigmoid(add(rows(wx, 0, n), rows(uh, 0, n)));
  Var z = sigmoid(add(rows(wx, n, n), rows(uh, n, n)));
  Var cand = tanh(add(rows(wx, 2 * n, n), mul(r, rows(uh, 2 * n, n))));
  return add(mul(one_minus(z), cand), mul(z, h));
}

BiGru::BiGru(ParameterStore& store, const std::string& name, Index in, Index hidden, Rng& rng)
    : forward_(store, name + ".fwd", in, hidden, rng),
      backward_(store, name + ".bwd", in, hidden, rng) {}

BiGru::Output BiGru::run(Graph& g, const std::vector<Var>& inputs) const {
  if (inputs.empty()) throw InvalidArgument("BiGru::run: empty input");
  const std::size_t n = inputs.size();
  std::vector<Var> fwd(n), bwd(n);
  Var h = forward_.zero_state(g);
  for (std::size_t i = 0; i < n; ++i) fwd[i] = h = forward_.step(g, inputs[i], h);
  h = backward_.zero_state(g);
  for (std::size_t i = n; i-- > 0;) bwd[i] = h = backward_.step(g, inputs[i], h);
  std::vector<Var> cols(n);
  for (std::size_t i = 0; i < n; ++i) cols[i] = vcat({fwd[i], bwd[i]});
  return Output{hcat(cols), fwd.back(), bwd.front()};
}

}  // namespace qgrl::nn
