#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "finemotion/eval/metrics.hpp"
#include "finemotion/motion/motion.hpp"
#include "finemotion/nn/layers.hpp"
#include "finemotion/text/token_encoder.hpp"

namespace finemotion::eval {

struct ContrastiveConfig {
  int d_eval = 32;
  int width = 32;
  int heads = 4;
  int layers = 1;
  int ffn = 64;
  int max_tokens = 32;
  double margin = 0.5;
  int steps = 400;
  int batch = 16;
  double lr = 2e-3;
  std::uint64_t seed = 5;

  void validate() const;
  nlohmann::json to_json() const;
  static ContrastiveConfig from_json(const nlohmann::json& j);
};

struct ContrastivePair {
  std::string text;
  const motion::MotionSequence* motion = nullptr;  // raw (denormalized) features
};

// Text branch: hashed token vectors, a transformer layer stack, mean pooling
// and a projection. Motion branch: per-frame projection plus positions, the
// same kind of stack, mean pooling and a projection. Both outputs are unit
// norm.
class ContrastiveModel {
 public:
  ContrastiveModel(ContrastiveConfig cfg, int motion_dim);
  ContrastiveModel(const ContrastiveModel&) = delete;
  ContrastiveModel& operator=(const ContrastiveModel&) = delete;

  const ContrastiveConfig& config() const { return cfg_; }
  int motion_dim() const { return motion_dim_; }
  nn::ParameterStore& parameters() { return store_; }
  const nn::ParameterStore& parameters() const { return store_; }
  void set_norm_stats(motion::NormStats stats) { norm_ = std::move(stats); }
  const motion::NormStats& norm_stats() const { return norm_; }

  nn::NodeId embed_texts(nn::Graph& g, const std::vector<std::string>& texts) const;
  // `motions` are raw features; normalization happens here.
  nn::NodeId embed_motions(nn::Graph& g, std::span<const motion::MotionSequence* const> motions) const;

  EvalFeatures encode_texts(const std::vector<std::string>& texts) const;
  EvalFeatures encode_motions(std::span<const motion::MotionSequence> motions) const;

  void save(const std::filesystem::path& path) const;
  static std::unique_ptr<ContrastiveModel> load(const std::filesystem::path& path);

 private:
  ContrastiveConfig cfg_;
  int motion_dim_;
  nn::ParameterStore store_;
  text::HashStubEncoder tokens_;
  std::vector<nn::EncoderLayer> text_layers_, motion_layers_;
  nn::LayerNorm text_ln_, motion_ln_;
  nn::Linear text_out_, motion_in_, motion_out_;
  motion::NormStats norm_;
};

// Hinge-margin training on batches of distinct texts. Deterministic under
// cfg.seed. `on_step(step, loss)` is called after every update when set.
std::unique_ptr<ContrastiveModel> train_contrastive(std::span<const ContrastivePair> pairs,
                                                    const ContrastiveConfig& cfg,
                                                    const std::function<void(int, double)>& on_step = {});

}  // namespace finemotion::eval
