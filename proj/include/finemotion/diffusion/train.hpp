#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "finemotion/diffusion/model.hpp"

namespace finemotion::diffusion {

struct TrainConfig {
  int steps = 2000;
  int batch = 32;
  double lr = 3e-3;
  double final_lr_fraction = 0.1;  // cosine decay to lr * fraction
  int warmup = 50;
  double clip_norm = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

// Raw (denormalized) motion with its text.
struct TrainSample {
  motion::MotionSequence motion;
  TextRequest text;
};

struct TrainLog {
  std::vector<double> losses;
  double seconds = 0.0;
};

double learning_rate(const TrainConfig& cfg, int step);

// Sets the model's normalization statistics from `data`, then runs
// cfg.steps updates on batches drawn from reshuffled epochs.
TrainLog fit(FineMotionModel& model, std::span<const TrainSample> data, const TrainConfig& cfg,
             const std::function<void(int step, const StepReport&)>& on_step = {});

// A model built from `cfg` carrying the weights and normalization of
// `trained`, e.g. to apply inference-only ablations. Throws BadConfig when
// the parameter layouts differ.
std::unique_ptr<FineMotionModel> rebind(const FineMotionModel& trained, ModelConfig cfg);

}  // namespace finemotion::diffusion
