// SPDX-License-Identifier: Apache-2.0
#include "qgrl/nn/optim.hpp"

#include <cmath>

namespace qgrl::nn {

Adam::Adam(ParameterStore& store, AdamConfig config) : store_(&store), config_(config) {
  for (const auto& p : store) {
    m_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    v_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
  }
}

void Adam::step(double learning_rate) {
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  std::size_t k = 0;
  for (auto& p : *store_) {
    Matrix& m = m_[k];
    Matrix& v = v_[k];
    m = b1 * m + (1.0 - b1) * p.grad;
    v = b2 * v + (1.0 - b2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -=
        learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + config_.epsilon);
    ++k;
  }
}

double clip_global_norm(ParameterStore& store, double max_norm) {
  const double norm = store.grad_norm();
  if (norm > max_norm && norm > 0.0) store.scale_grad(max_norm / norm);
  return norm;
}

bool PlateauSchedule::observe(double loss) {
  if (!has_best_ || loss < best_) {
    has_best_ = true;
    best_ = loss;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  lr_ *= factor_;
  return false;
}

}  // namespace qgrl::nn
