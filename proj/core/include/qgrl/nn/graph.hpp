// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <deque>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

namespace qgrl {
class Rng;
}

namespace qgrl::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// A named trainable array with its gradient accumulator.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
};

enum class Init { kZero, kGlorotUniform, kUniformSmall };

/// Owns the parameters of one model in registration order. References handed
/// out by add() stay valid for the lifetime of the store.
class ParameterStore {
 public:
  Parameter& add(const std::string& name, Index rows, Index cols, Init init, Rng& rng);

  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();
  double grad_norm() const;
  void scale_grad(double factor);

  Vector flat_values() const;
  Vector flat_grads() const;
  void set_flat_values(const Vector& flat);

  /// Copies values (not gradients) from a store with identical layout.
  void copy_values_from(const ParameterStore& other);

  /// FNV-1a over names, shapes and raw value bytes.
  std::uint64_t fingerprint() const;

 private:
  std::deque<Parameter> params_;
};

class Graph;

/// Handle to a node on a Graph tape.
struct Var {
  Graph* graph = nullptr;
  int id = -1;

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
  bool valid() const { return graph != nullptr && id >= 0; }
};

/// Reverse-mode tape. Nodes are appended in topological order; backward()
/// walks them in reverse. In inference mode no closures or gradients are
/// kept and the graph is a plain evaluator.
class Graph {
 public:
  enum class Mode { kTrain, kInference };
  using Backward = std::function<void(Graph&, int self)>;

  explicit Graph(Mode mode = Mode::kTrain) : mode_(mode) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Mode mode() const { return mode_; }
  bool training() const { return mode_ == Mode::kTrain; }

  Var constant(Matrix value);
  Var scalar(double v);
  Var param(Parameter& p);
  /// Column `column` of `table`; the gradient flows only into that column.
  Var lookup(Parameter& table, Index column);

  /// Appends a node computed from `inputs`. The closure is dropped when no
  /// input needs a gradient.
  Var record(Matrix value, std::initializer_list<Var> inputs, Backward backward);
  Var record(Matrix value, const std::vector<Var>& inputs, Backward backward);

  const Matrix& value(int id) const {
    const Node& n = nodes_[id];
    return n.external ? *n.external : n.value;
  }
  const Matrix& value(Var v) const { return value(v.id); }
  const Matrix& grad(int id) const { return nodes_[id].grad; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  /// Adds `delta` into the gradient of `v` (no-op for constants).
  void accumulate(Var v, const Matrix& delta);

  /// Seeds d(loss)/d(loss) = seed and propagates into parameter gradients.
  void backward(Var loss, double seed = 1.0);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    const Matrix* external = nullptr;
    Matrix grad;
    bool requires_grad = false;
    Backward backward;
  };

  Mode mode_;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_nodes_;
};

inline const Matrix& Var::value() const { return graph->value(id); }

// Elementwise and linear-algebra ops. Shapes follow Eigen conventions;
// vectors are single columns.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var matmul(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double c);
Var one_minus(Var a);
/// s must be 1x1.
Var scalar_mul(Var s, Var m);
/// Adds column vector v to every column of m.
Var add_col(Var m, Var v);
Var sigmoid(Var a);
Var tanh(Var a);
Var exp(Var a);
/// Natural log of max(a, floor).
Var log(Var a, double floor = 1e-300);
Var minimum(Var a, Var b);
/// Softmax down each column.
Var softmax(Var a);
/// -log softmax(logits)[target] for a column vector of logits.
Var nll_from_logits(Var logits, Index target);
Var transpose(Var a);
Var vcat(const std::vector<Var>& parts);
Var hcat(const std::vector<Var>& columns);
Var rows(Var a, Index start, Index count);
Var column(Var a, Index j);
Var pick(Var a, Index i);
Var sum(Var a);
Var mean(Var a);
/// Mean across columns (result is a column vector).
Var row_mean(Var m);
/// Max across columns (result is a column vector).
Var row_max(Var m);
/// out[indices[i]] += v[i]; out has `size` rows.
Var scatter(Var v, const std::vector<Index>& indices, Index size);
/// Zero-pads a column vector to `size` rows.
Var pad(Var v, Index size);

}  // namespace qgrl::nn
