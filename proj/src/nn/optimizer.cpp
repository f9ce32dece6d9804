#include "finemotion/nn/optimizer.hpp"

#include <cmath>

namespace finemotion::nn {

double Adam::step(ParameterStore& store) {
  double sq = 0.0;
  store.for_each([&](const std::string&, Parameter& p) {
    if (p.trainable) sq += p.grad.squaredNorm();
  });
  const double norm = std::sqrt(sq);
  const double clip = (cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm) ? cfg_.clip_norm / norm : 1.0;
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  store.for_each([&](const std::string& name, Parameter& p) {
    if (!p.trainable) return;
    auto [it, inserted] = moments_.try_emplace(name);
    auto& [m, v] = it->second;
    if (inserted) {
      m = Matrix::Zero(p.value.rows(), p.value.cols());
      v = Matrix::Zero(p.value.rows(), p.value.cols());
    }
    const Matrix gr = p.grad * clip;
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * gr;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * gr.cwiseProduct(gr);
    p.value.array() -=
        cfg_.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg_.eps);
  });
  return norm;
}

}  // namespace finemotion::nn
