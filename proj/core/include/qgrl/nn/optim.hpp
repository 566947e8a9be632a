// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "qgrl/nn/graph.hpp"

namespace qgrl::nn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam(ParameterStore& store, AdamConfig config = {});

  /// One update from the gradients currently held in the store.
  void step(double learning_rate);
  long steps() const { return t_; }

 private:
  ParameterStore* store_;
  AdamConfig config_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  long t_ = 0;
};

/// Rescales all gradients so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_global_norm(ParameterStore& store, double max_norm);

/// Halves (by `factor`) the learning rate whenever the monitored loss fails to
/// improve on its best value.
class PlateauSchedule {
 public:
  PlateauSchedule(double initial_lr, double factor) : lr_(initial_lr), factor_(factor) {}

  /// Returns true when `loss` is a new best.
  bool observe(double loss);
  double learning_rate() const { return lr_; }
  double best() const { return best_; }
  int epochs_since_best() const { return since_best_; }

 private:
  double lr_;
  double factor_;
  double best_ = 0.0;
  bool has_best_ = false;
  int since_best_ = 0;
};

}  // namespace qgrl::nn
