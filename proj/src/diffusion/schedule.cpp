#include "finemotion/diffusion/schedule.hpp"

#include <cmath>
#include <string>

namespace finemotion::diffusion {

void NoiseSchedule::check_t(int t) const {
  if (t < 0 || t >= steps())
    throw DiffusionError(DiffusionErrc::TOutOfRange,
                         "timestep " + std::to_string(t) + " outside [0, " + std::to_string(steps()) + ")");
}

NoiseSchedule make_schedule(int steps, double beta_start, double beta_end) {
  if (steps < 1 || !(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
    throw DiffusionError(DiffusionErrc::BadRange, "need steps >= 1 and 0 < beta_start <= beta_end < 1");
  NoiseSchedule s;
  s.beta.resize(static_cast<std::size_t>(steps));
  s.alpha.resize(s.beta.size());
  s.alpha_bar.resize(s.beta.size());
  double log_sum = 0.0, carry = 0.0;
  for (int t = 0; t < steps; ++t) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(t) / (steps - 1);
    const double b = beta_start + (beta_end - beta_start) * frac;
    const auto i = static_cast<std::size_t>(t);
    s.beta[i] = b;
    s.alpha[i] = 1.0 - b;
    // Kahan summation of log(alpha).
    const double y = std::log1p(-b) - carry;
    const double next = log_sum + y;
    carry = (next - log_sum) - y;
    log_sum = next;
    s.alpha_bar[i] = t == 0 ? s.alpha[0] : std::exp(log_sum);
  }
  return s;
}

nn::Matrix q_sample(const nn::Matrix& x0, int t, const nn::Matrix& eps, const NoiseSchedule& sched) {
  sched.check_t(t);
  if (x0.rows() != eps.rows() || x0.cols() != eps.cols())
    throw DiffusionError(DiffusionErrc::ShapeMismatch, "eps must match x0");
  const double ab = sched.alpha_bar[static_cast<std::size_t>(t)];
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

}  // namespace finemotion::diffusion
