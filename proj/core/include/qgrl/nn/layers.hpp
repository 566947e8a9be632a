// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "qgrl/nn/graph.hpp"

namespace qgrl::nn {

/// y = W x + b
class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, Index in, Index out, Rng& rng,
         bool bias = true);

  Var operator()(Graph& g, Var x) const;
  /// Applies the map to every column of x.
  Var apply_columns(Graph& g, Var x) const;

  Index in() const { return weight_->value.cols(); }
  Index out() const { return weight_->value.rows(); }

 private:
  Parameter* weight_ = nullptr;
  Parameter* bias_ = nullptr;
};

/// Token embedding table stored one column per token id.
class Embedding {
 public:
  Embedding() = default;
  Embedding(ParameterStore& store, const std::string& name, Index vocab, Index dim, Rng& rng);

  Var operator()(Graph& g, Index token) const;
  Index dim() const { return table_->value.rows(); }
  Index vocab_size() const { return table_->value.cols(); }

 private:
  Parameter* table_ = nullptr;
};

/// Gated recurrent unit with the reset gate applied after the recurrent
/// projection:
///   r = σ(W_r x + b_r + U_r h + c_r)
///   z = σ(W_z x + b_z + U_z h + c_z)
///   n = tanh(W_n x + b_n + r ⊙ (U_n h + c_n))
///   h' = (1 - z) ⊙ n + z ⊙ h
class GruCell {
 public:
  GruCell() = default;
  GruCell(ParameterStore& store, const std::string& name, Index in, Index hidden, Rng& rng);

  Var step(Graph& g, Var x, Var h) const;
  Index hidden() const { return hidden_; }
  Var zero_state(Graph& g) const { return g.constant(Matrix::Zero(hidden_, 1)); }

 private:
  Parameter* w_ = nullptr;
  Parameter* u_ = nullptr;
  Parameter* bw_ = nullptr;
  Parameter* bu_ = nullptr;
  Index hidden_ = 0;
};

/// Bidirectional single-layer GRU encoder.
class BiGru {
 public:
  struct Output {
    Var states;          // 2h x n, column i = [fwd_i ; bwd_i]
    Var last_forward;    // h
    Var first_backward;  // h
  };

  BiGru() = default;
  BiGru(ParameterStore& store, const std::string& name, Index in, Index hidden, Rng& rng);

  Output run(Graph& g, const std::vector<Var>& inputs) const;
  Index hidden() const { return forward_.hidden(); }

 private:
  GruCell forward_;
  GruCell backward_;
};

}  // namespace qgrl::nn
