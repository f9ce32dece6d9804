#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>

#include "finemotion/nn/graph.hpp"

namespace finemotion::testing {

// Central finite differences against the analytic gradients of every
// trainable parameter in `store`. Returns per-parameter relative errors
// ||g_analytic - g_numeric|| / max(||g_analytic||, ||g_numeric||, tiny) over
// up to `max_entries` probed entries per tensor.
inline std::map<std::string, double> gradient_check(
    nn::ParameterStore& store, const std::function<nn::NodeId(nn::Graph&)>& loss_fn, double h = 1e-6,
    int max_entries = 24) {
  store.zero_grad();
  {
    nn::Graph g;
    g.backward(loss_fn(g));
  }
  std::map<std::string, double> errors;
  store.for_each([&](const std::string& name, nn::Parameter& p) {
    if (!p.trainable) return;
    const Eigen::Index n = p.value.size();
    const Eigen::Index stride = std::max<Eigen::Index>(1, n / max_entries);
    double diff = 0.0, na = 0.0, nn_ = 0.0;
    for (Eigen::Index i = 0; i < n; i += stride) {
      const double orig = p.value.data()[i];
      p.value.data()[i] = orig + h;
      double lp, lm;
      {
        nn::Graph g(false);
        lp = g.value(loss_fn(g))(0, 0);
      }
      p.value.data()[i] = orig - h;
      {
        nn::Graph g(false);
        lm = g.value(loss_fn(g))(0, 0);
      }
      p.value.data()[i] = orig;
      const double num = (lp - lm) / (2.0 * h);
      const double ana = p.grad.data()[i];
      diff += (num - ana) * (num - ana);
      na += ana * ana;
      nn_ += num * num;
    }
    const double scale = std::max({std::sqrt(na), std::sqrt(nn_), 1e-10});
    errors[name] = std::sqrt(diff) / scale;
  });
  return errors;
}

}  // namespace finemotion::testing
