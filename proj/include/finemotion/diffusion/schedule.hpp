#pragma once

#include <vector>

#include "finemotion/common/error.hpp"
#include "finemotion/nn/graph.hpp"

namespace finemotion::diffusion {

enum class DiffusionErrc { BadRange, ShapeMismatch, TOutOfRange, NonFiniteLoss, VariantInputMismatch, BadConfig };
using DiffusionError = Error<DiffusionErrc>;

struct NoiseSchedule {
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;

  int steps() const { return static_cast<int>(beta.size()); }
  void check_t(int t) const;
};

// Linear beta from beta_start to beta_end over `steps` entries. The running
// product is accumulated as a compensated sum of logs.
NoiseSchedule make_schedule(int steps, double beta_start = 1e-4, double beta_end = 0.02);

// sqrt(alpha_bar[t]) * x0 + sqrt(1 - alpha_bar[t]) * eps
nn::Matrix q_sample(const nn::Matrix& x0, int t, const nn::Matrix& eps, const NoiseSchedule& sched);

}  // namespace finemotion::diffusion
