#pragma once

#include <map>
#include <string>

#include "finemotion/nn/graph.hpp"

namespace finemotion::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 1.0;  // global grad-norm clip; <= 0 disables
};

// Adam over the trainable parameters of a store. Non-trainable parameters
// are never written.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  // Applies one update from the accumulated grads; returns the pre-clip
  // global gradient norm.
  double step(ParameterStore& store);
  long steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }

 private:
  AdamConfig cfg_;
  long t_ = 0;
  std::map<std::string, std::pair<Matrix, Matrix>> moments_;
};

}  // namespace finemotion::nn
