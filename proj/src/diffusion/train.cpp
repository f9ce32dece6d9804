#include "finemotion/diffusion/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

namespace finemotion::diffusion {

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw DiffusionError(DiffusionErrc::BadConfig, what); };
  if (steps < 0) fail("steps must be >= 0");
  if (batch < 1) fail("batch must be >= 1");
  if (!(lr > 0.0)) fail("lr must be positive");
  if (final_lr_fraction < 0.0 || final_lr_fraction > 1.0) fail("final_lr_fraction must be in [0, 1]");
  if (warmup < 0) fail("warmup must be >= 0");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"steps", steps}, {"batch", batch},         {"lr", lr},  {"final_lr_fraction", final_lr_fraction},
          {"warmup", warmup}, {"clip_norm", clip_norm}, {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.steps = j.value("steps", c.steps);
  c.batch = j.value("batch", c.batch);
  c.lr = j.value("lr", c.lr);
  c.final_lr_fraction = j.value("final_lr_fraction", c.final_lr_fraction);
  c.warmup = j.value("warmup", c.warmup);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

double learning_rate(const TrainConfig& cfg, int step) {
  if (step < cfg.warmup) return cfg.lr * (step + 1) / static_cast<double>(cfg.warmup);
  const int span = std::max(cfg.steps - cfg.warmup, 1);
  const double progress = std::min(1.0, static_cast<double>(step - cfg.warmup) / span);
  const double floor = cfg.lr * cfg.final_lr_fraction;
  return floor + (cfg.lr - floor) * 0.5 * (1.0 + std::cos(M_PI * progress));
}

TrainLog fit(FineMotionModel& model, std::span<const TrainSample> data, const TrainConfig& cfg,
             const std::function<void(int, const StepReport&)>& on_step) {
  cfg.validate();
  if (data.empty()) throw DiffusionError(DiffusionErrc::ShapeMismatch, "no training data");
  std::vector<motion::MotionSequence> raw;
  raw.reserve(data.size());
  for (const auto& s : data) raw.push_back(s.motion);
  model.set_norm_stats(motion::NormStats::compute(raw));
  std::vector<motion::MotionSequence> normed;
  normed.reserve(raw.size());
  for (const auto& m : raw) normed.push_back(motion::normalize(m, model.norm_stats()));

  const auto start = std::chrono::steady_clock::now();
  Trainer trainer(model, {.lr = cfg.lr, .clip_norm = cfg.clip_norm}, cfg.seed);
  std::mt19937_64 rng(cfg.seed ^ 0x5bd1e995ULL);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  const std::size_t batch = std::min<std::size_t>(cfg.batch, data.size());

  TrainLog log;
  log.losses.reserve(cfg.steps);
  std::vector<TrainingExample> examples(batch);
  for (int step = 0; step < cfg.steps; ++step) {
    for (auto& ex : examples) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const std::size_t i = order[cursor++];
      ex = {&normed[i], data[i].text};
    }
    trainer.optimizer().set_lr(learning_rate(cfg, step));
    const StepReport r = trainer.step(examples);
    log.losses.push_back(r.loss);
    if (on_step) on_step(step, r);
  }
  log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return log;
}

std::unique_ptr<FineMotionModel> rebind(const FineMotionModel& trained, ModelConfig cfg) {
  auto model = std::make_unique<FineMotionModel>(std::move(cfg));
  if (model->parameters().size() != trained.parameters().size())
    throw DiffusionError(DiffusionErrc::BadConfig, "parameter layouts differ");
  trained.parameters().for_each([&](const std::string& name, const nn::Parameter& p) {
    if (!model->parameters().contains(name)) throw DiffusionError(DiffusionErrc::BadConfig, "missing parameter " + name);
    nn::Parameter& dst = model->parameters().at(name);
    if (dst.value.rows() != p.value.rows() || dst.value.cols() != p.value.cols())
      throw DiffusionError(DiffusionErrc::BadConfig, "shape mismatch for " + name);
    dst.value = p.value;
  });
  model->set_norm_stats(trained.norm_stats());
  return model;
}

}  // namespace finemotion::diffusion
