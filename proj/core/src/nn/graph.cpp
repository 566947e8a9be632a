// SPDX-License-Identifier: Apache-2.0
#include "qgrl/nn/graph.hpp"

#include <cmath>
#include <cstring>

#include "qgrl/error.hpp"
#include "qgrl/rng.hpp"

namespace qgrl::nn {

namespace {

void require_same_graph(Var a, Var b) {
  if (a.graph != b.graph) throw InvalidArgument("nn: operands live on different graphs");
}

void require_shape(bool ok, const char* op) {
  if (!ok) throw InvalidArgument(std::string("nn: shape mismatch in ") + op);
}

constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

void fnv(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// ParameterStore

Parameter& ParameterStore::add(const std::string& name, Index rows, Index cols, Init init,
                               Rng& rng) {
  if (find(name) != nullptr) throw InvalidArgument("duplicate parameter name: " + name);
  Parameter& p = params_.emplace_back();
  p.name = name;
  p.value = Matrix::Zero(rows, cols);
  p.grad = Matrix::Zero(rows, cols);
  double bound = 0.0;
  switch (init) {
    case Init::kZero: break;
    case Init::kGlorotUniform:
      bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
      break;
    case Init::kUniformSmall: bound = 0.1; break;
  }
  if (bound > 0.0) {
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) p.value(i, j) = rng.uniform(-bound, bound);
  }
  return p;
}

Parameter* ParameterStore::find(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

const Parameter* ParameterStore::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.grad.setZero();
}

double ParameterStore::grad_norm() const {
  double sq = 0.0;
  for (const auto& p : params_) sq += p.grad.squaredNorm();
  return std::sqrt(sq);
}

void ParameterStore::scale_grad(double factor) {
  for (auto& p : params_) p.grad *= factor;
}

Vector ParameterStore::flat_values() const {
  Vector out(static_cast<Index>(scalar_count()));
  Index k = 0;
  for (const auto& p : params_) {
    out.segment(k, p.value.size()) = p.value.reshaped();
    k += p.value.size();
  }
  return out;
}

Vector ParameterStore::flat_grads() const {
  Vector out(static_cast<Index>(scalar_count()));
  Index k = 0;
  for (const auto& p : params_) {
    out.segment(k, p.grad.size()) = p.grad.reshaped();
    k += p.grad.size();
  }
  return out;
}

void ParameterStore::set_flat_values(const Vector& flat) {
  if (flat.size() != static_cast<Index>(scalar_count()))
    throw InvalidArgument("set_flat_values: size mismatch");
  Index k = 0;
  for (auto& p : params_) {
    p.value.reshaped() = flat.segment(k, p.value.size());
    k += p.value.size();
  }
}

void ParameterStore::copy_values_from(const ParameterStore& other) {
  if (other.params_.size() != params_.size())
    throw InvalidArgument("copy_values_from: layout mismatch");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& src = other.params_[i];
    auto& dst = params_[i];
    if (src.name != dst.name || src.value.rows() != dst.value.rows() ||
        src.value.cols() != dst.value.cols())
      throw InvalidArgument("copy_values_from: layout mismatch at " + dst.name);
    dst.value = src.value;
  }
}

std::uint64_t ParameterStore::fingerprint() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& p : params_) {
    fnv(h, p.name.data(), p.name.size());
    const std::int64_t shape[2] = {p.value.rows(), p.value.cols()};
    fnv(h, shape, sizeof(shape));
    fnv(h, p.value.data(), sizeof(double) * static_cast<std::size_t>(p.value.size()));
  }
  return h;
}

// ---------------------------------------------------------------------------
// Graph

Var Graph::constant(Matrix value) {
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Graph::scalar(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

Var Graph::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var{this, it->second};
  Node& n = nodes_.emplace_back();
  n.external = &p.value;
  n.requires_grad = training();
  if (n.requires_grad) {
    n.backward = [&p](Graph& g, int self) { p.grad += g.nodes_[self].grad; };
  }
  const int id = static_cast<int>(nodes_.size() - 1);
  param_nodes_.emplace(&p, id);
  return Var{this, id};
}

Var Graph::lookup(Parameter& table, Index column) {
  if (column < 0 || column >= table.value.cols())
    throw InvalidArgument("lookup: index out of range in " + table.name);
  Node& n = nodes_.emplace_back();
  n.value = table.value.col(column);
  n.requires_grad = training();
  if (n.requires_grad) {
    n.backward = [&table, column](Graph& g, int self) {
      table.grad.col(column) += g.nodes_[self].grad;
    };
  }
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Graph::record(Matrix value, std::initializer_list<Var> inputs, Backward backward) {
  bool needs = false;
  if (training()) {
    for (const Var& v : inputs) {
      if (v.graph != this) throw InvalidArgument("nn: operand from another graph");
      needs = needs || nodes_[v.id].requires_grad;
    }
  }
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  n.requires_grad = needs;
  if (needs) n.backward = std::move(backward);
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Graph::record(Matrix value, const std::vector<Var>& inputs, Backward backward) {
  bool needs = false;
  if (training()) {
    for (const Var& v : inputs) {
      if (v.graph != this) throw InvalidArgument("nn: operand from another graph");
      needs = needs || nodes_[v.id].requires_grad;
    }
  }
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  n.requires_grad = needs;
  if (needs) n.backward = std::move(backward);
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

void Graph::accumulate(Var v, const Matrix& delta) {
  Node& n = nodes_[v.id];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0)
    n.grad = delta;
  else
    n.grad += delta;
}

void Graph::backward(Var loss, double seed) {
  if (!training()) throw InvalidArgument("backward() on an inference graph");
  if (loss.graph != this) throw InvalidArgument("backward(): loss from another graph");
  Node& root = nodes_[loss.id];
  if (root.value.size() != 1 && !(root.external && root.external->size() == 1))
    throw InvalidArgument("backward(): loss must be a scalar");
  if (!root.requires_grad) return;
  for (auto& n : nodes_) n.grad.resize(0, 0);
  root.grad = Matrix::Constant(1, 1, seed);
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.size() == 0 || !n.backward) continue;
    n.backward(*this, id);
  }
}

// ---------------------------------------------------------------------------
// Ops

Var add(Var a, Var b) {
  require_same_graph(a, b);
  Graph& g = *a.graph;
  require_shape(a.rows() == b.rows() && a.cols() == b.cols(), "add");
  return g.record(a.value() + b.value(), {a, b}, [a, b](Graph& g, int self) {
    g.accumulate(a, g.grad(self));
    g.accumulate(b, g.grad(self));
  });
}

Var sub(Var a, Var b) {
  require_same_graph(a, b);
  Graph& g = *a.graph;
  require_shape(a.rows() == b.rows() && a.cols() == b.cols(), "sub");
  return g.record(a.value() - b.value(), {a, b}, [a, b](Graph& g, int self) {
    g.accumulate(a, g.grad(self));
    g.accumulate(b, -g.grad(self));
  });
}

Var mul(Var a, Var b) {
  require_same_graph(a, b);
  Graph& g = *a.graph;
  require_shape(a.rows() == b.rows() && a.cols() == b.cols(), "mul");
  return g.record(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Graph& g, int self) {
    g.accumulate(a, g.grad(self).cwiseProduct(g.value(b)));
    g.accumulate(b, g.grad(self).cwiseProduct(g.value(a)));
  });
}

Var matmul(Var a, Var b) {
  require_same_graph(a, b);
  Graph& g = *a.graph;
  require_shape(a.cols() == b.rows(), "matmul");
  Matrix out = a.value() * b.value();
  return g.record(std::move(out), {a, b}, [a, b](Graph& g, int self) {
    const Matrix& go = g.grad(self);
    if (g.requires_grad(a)) g.accumulate(a, go * g.value(b).transpose());
    if (g.requires_grad(b)) g.accumulate(b, g.value(a).transpose() * go);
  });
}

Var scale(Var a, double factor) {
  Graph& g = *a.graph;
  return g.record(a.value() * factor, {a}, [a, factor](Graph& g, int self) {
    g.accumulate(a, g.grad(self) * factor);
  });
}

Var add_scalar(Var a, double c) {
  Graph& g = *a.graph;
  return g.record((a.value().array() + c).matrix(), {a},
                  [a](Graph& g, int self) { g.accumulate(a, g.grad(self)); });
}

Var one_minus(Var a) {
  Graph& g = *a.graph;
  return g.record((1.0 - a.value().array()).matrix(), {a},
                  [a](Graph& g, int self) { g.accumulate(a, -g.grad(self)); });
}

Var scalar_mul(Var s, Var m) {
  require_same_graph(s, m);
  Graph& g = *s.graph;
  require_shape(s.rows() == 1 && s.cols() == 1, "scalar_mul");
  return g.record(m.value() * s.scalar(), {s, m}, [s, m](Graph& g, int self) {
    const Matrix& go = g.grad(self);
    if (g.requires_grad(s)) {
      Matrix ds(1, 1);
      ds(0, 0) = go.cwiseProduct(g.value(m)).sum();
      g.accumulate(s, ds);
    }
    g.accumulate(m, go * g.value(s)(0, 0));
  });
}

Var add_col(Var m, Var v) {
  require_same_graph(m, v);
  Graph& g = *m.graph;
  require_shape(v.cols() == 1 && v.rows() == m.rows(), "add_col");
  Matrix out = m.value().colwise() + v.value().col(0);
  return g.record(std::move(out), {m, v}, [m, v](Graph& g, int self) {
    const Matrix& go = g.grad(self);
    g.accumulate(m, go);
    if (g.requires_grad(v)) g.accumulate(v, go.rowwise().sum());
  });
}

Var sigmoid(Var a) {
  Graph& g = *a.graph;
  Matrix out = a.value().unaryExpr([](double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  return g.record(std::move(out), {a}, [a](Graph& g, int self) {
    const Matrix& y = g.value(self);
    g.accumulate(a, g.grad(self).cwiseProduct((y.array() * (1.0 - y.array())).matrix()));
  });
}

Var tanh(Var a) {
  Graph& g = *a.graph;
  Matrix out = a.value().array().tanh().matrix();
  return g.record(std::move(out), {a}, [a](Graph& g, int self) {
    const Matrix& y = g.value(self);
    g.accumulate(a, g.grad(self).cwiseProduct((1.0 - y.array().square()).matrix()));
  });
}

Var exp(Var a) {
  Graph& g = *a.graph;
  Matrix out = a.value().array().exp().matrix();
  return g.record(std::move(out), {a}, [a](Graph& g, int self) {
    g.accumulate(a, g.grad(self).cwiseProduct(g.value(self)));
  });
}

Var log(Var a, double floor) {
  Graph& g = *a.graph;
  Matrix clamped = a.value().cwiseMax(floor);
  Matrix out = clamped.array().log().matrix();
  return g.record(std::move(out), {a}, [a, floor](Graph& g, int self) {
    const Matrix& x = g.value(a);
    Matrix d = g.grad(self);
    for (Index j = 0; j < d.cols(); ++j)
      for (Index i = 0; i < d.rows(); ++i)
        d(i, j) = x(i, j) > floor ? d(i, j) / x(i, j) : 0.0;
    g.accumulate(a, d);
  });
}

Var minimum(Var a, Var b) {
  require_same_graph(a, b);
  Graph& g = *a.graph;
  require_shape(a.rows() == b.rows() && a.cols() == b.cols(), "minimum");
  Matrix out = a.value().cwiseMin(b.value());
  return g.record(std::move(out), {a, b}, [a, b](Graph& g, int self) {
    const Matrix& go = g.grad(self);
    const Matrix& x = g.value(a);
    const Matrix& y = g.value(b);
    Matrix da = Matrix::Zero(go.rows(), go.cols());
    Matrix db = Matrix::Zero(go.rows(), go.cols());
    // Ties route the gradient to the first operand.
    for (Index j = 0; j < go.cols(); ++j)
      for (Index i = 0; i < go.rows(); ++i) {
        if (x(i, j) <= y(i, j))
          da(i, j) = go(i, j);
        else
          db(i, j) = go(i, j);
      }
    g.accumulate(a, da);
    g.accumulate(b, db);
  });
}

Var softmax(Var a) {
  Graph& g = *a.graph;
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (Index j = 0; j < x.cols(); ++j) {
    const double mx = x.col(j).maxCoeff();
    out.col(j) = (x.col(j).array() - mx).exp().matrix();
    out.col(j) /= out.col(j).sum();
  }
  return g.record(std::move(out), {a}, [a](Graph& g, int self) {
    const Matrix& y = g.value(self);
    const Matrix& go = g.grad(self);
    Matrix d(y.rows(), y.cols());
    for (Index j = 0; j < y.cols(); ++j) {
      const double dot = go.col(j).dot(y.col(j));
      d.col(j) = y.col(j).cwiseProduct((go.col(j).array() - dot).matrix());
    }
    g.accumulate(a, d);
  });
}

Var nll_from_logits(Var logits, Index target) {
  Graph& g = *logits.graph;
  const Matrix& x = logits.value();
  require_shape(x.cols() == 1 && target >= 0 && target < x.rows(), "nll_from_logits");
  const double mx = x.maxCoeff();
  const double lse = mx + std::log((x.array() - mx).exp().sum());
  Matrix out(1, 1);
  out(0, 0) = lse - x(target, 0);
  return g.record(std::move(out), {logits}, [logits, target, lse](Graph& g, int self) {
    const double go = g.grad(self)(0, 0);
    Matrix d = (g.value(logits).array() - lse).exp().matrix();
    d(target, 0) -= 1.0;
    g.accumulate(logits, d * go);
  });
}

Var transpose(Var a) {
  Graph& g = *a.graph;
  return g.record(a.value().transpose(), {a}, [a](Graph& g, int self) {
    g.accumulate(a, g.grad(self).transpose());
  });
}

Var vcat(const std::vector<Var>& parts) {
  if (parts.empty()) throw InvalidArgument("vcat: no operands");
  Graph& g = *parts.front().graph;
  Index total = 0;
  const Index cols = parts.front().cols();
  for (const Var& p : parts) {
    require_shape(p.cols() == cols, "vcat");
    total += p.rows();
  }
  Matrix out(total, cols);
  Index r = 0;
  for (const Var& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return g.record(std::move(out), parts, [parts](Graph& g, int self) {
    const Matrix& go = g.grad(self);
    Index r = 0;
    for (const Var& p : parts) {
      const Index n = g.value(p).rows();
      if (g.requires_grad(p)) g.accumulate(p, go.middleRows(r, n));
      r += n;
    }
  });
}

Var hcat(const std::vector<Var>& columns) {
  if (columns.empty()) throw InvalidArgument("hcat: no operands");
  Graph& g = *columns.front().graph;
  Index total = 0;
  const Index rows = columns.front().rows();
  for (const Var& c : columns) {
    require_shape(c.rows() == rows, "hcat");
    total += c.cols();
  }
  Matrix out(rows, total);
  Index k = 0;
  for (const Var& c : columns) {
    out.middleCols(k, c.cols()) = c.value();
    k += c.cols();
  }
  return g.record(std::move(out), columns, [columns](Graph& g, int self) {
    const Matrix& go = g.grad(self);
    Index k = 0;
    for (const Var& c : columns) {
      const Index n = g.value(c).cols();
      if (g.requires_grad(c)) g.accumulate(c, go.middleCols(k, n));
      k += n;
    }
  });
}

Var rows(Var a, Index start, Index count) {
  Graph& g = *a.graph;
  require_shape(start >= 0 && count >= 0 && start + count <= a.rows(), "rows");
  return g.record(a.value().middleRows(start, count), {a},
                  [a, start, count](Graph& g, int self) {
                    const Matrix& x = g.value(a);
                    Matrix d = Matrix::Zero(x.rows(), x.cols());
                    d.middleRows(start, count) = g.grad(self);
                    g.accumulate(a, d);
                  });
}

Var column(Var a, Index j) {
  Graph& g = *a.graph;
  require_shape(j >= 0 && j < a.cols(), "column");
  return g.record(a.value().col(j), {a}, [a, j](Graph& g, int self) {
    const Matrix& x = g.value(a);
    Matrix d = Matrix::Zero(x.rows(), x.cols());
    d.col(j) = g.grad(self);
    g.accumulate(a, d);
  });
}

Var pick(Var a, Index i) {
  Graph& g = *a.graph;
  require_shape(a.cols() == 1 && i >= 0 && i < a.rows(), "pick");
  Matrix out(1, 1);
  out(0, 0) = a.value()(i, 0);
  return g.record(std::move(out), {a}, [a, i](Graph& g, int self) {
    Matrix d = Matrix::Zero(g.value(a).rows(), 1);
    d(i, 0) = g.grad(self)(0, 0);
    g.accumulate(a, d);
  });
}

Var sum(Var a) {
  Graph& g = *a.graph;
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return g.record(std::move(out), {a}, [a](Graph& g, int self) {
    const Matrix& x = g.value(a);
    g.accumulate(a, Matrix::Constant(x.rows(), x.cols(), g.grad(self)(0, 0)));
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var row_mean(Var m) {
  Graph& g = *m.graph;
  const double n = static_cast<double>(m.cols());
  return g.record(m.value().rowwise().mean(), {m}, [m, n](Graph& g, int self) {
    const Matrix& go = g.grad(self);
    Matrix d = go.col(0).replicate(1, g.value(m).cols()) / n;
    g.accumulate(m, d);
  });
}

Var row_max(Var m) {
  Graph& g = *m.graph;
  const Matrix& x = m.value();
  Matrix out(x.rows(), 1);
  std::vector<Index> arg(static_cast<std::size_t>(x.rows()));
  for (Index i = 0; i < x.rows(); ++i) {
    Index best = 0;
    out(i, 0) = x.row(i).maxCoeff(&best);
    arg[static_cast<std::size_t>(i)] = best;
  }
  return g.record(std::move(out), {m}, [m, arg](Graph& g, int self) {
    const Matrix& go = g.grad(self);
    const Matrix& x = g.value(m);
    Matrix d = Matrix::Zero(x.rows(), x.cols());
    for (Index i = 0; i < x.rows(); ++i) d(i, arg[static_cast<std::size_t>(i)]) = go(i, 0);
    g.accumulate(m, d);
  });
}

Var scatter(Var v, const std::vector<Index>& indices, Index size) {
  Graph& g = *v.graph;
  require_shape(v.cols() == 1 && static_cast<std::size_t>(v.rows()) == indices.size(), "scatter");
  Matrix out = Matrix::Zero(size, 1);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require_shape(indices[i] >= 0 && indices[i] < size, "scatter");
    out(indices[i], 0) += v.value()(static_cast<Index>(i), 0);
  }
  return g.record(std::move(out), {v}, [v, indices](Graph& g, int self) {
    const Matrix& go = g.grad(self);
    Matrix d(static_cast<Index>(indices.size()), 1);
    for (std::size_t i = 0; i < indices.size(); ++i) d(static_cast<Index>(i), 0) = go(indices[i], 0);
    g.accumulate(v, d);
  });
}

Var pad(Var v, Index size) {
  Graph& g = *v.graph;
  require_shape(v.cols() == 1 && v.rows() <= size, "pad");
  Matrix out = Matrix::Zero(size, 1);
  out.topRows(v.rows()) = v.value();
  return g.record(std::move(out), {v}, [v](Graph& g, int self) {
    g.accumulate(v, g.grad(self).topRows(g.value(v).rows()));
  });
}

}  // namespace qgrl::nn
