#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "finemotion/diffusion/config.hpp"
#include "finemotion/diffusion/schedule.hpp"
#include "finemotion/motion/motion.hpp"
#include "finemotion/nn/layers.hpp"
#include "finemotion/nn/optimizer.hpp"
#include "finemotion/text/fine_text.hpp"

namespace finemotion::diffusion {

// Elementwise sum of the coarse matrix and every step matrix (all L x d).
nn::NodeId addfc_fuse(nn::Graph& g, nn::NodeId coarse, const std::vector<nn::NodeId>& steps);

struct Conditioning {
  text::TextEmbeddings emb;
  std::vector<bool> truncated;  // per sample: some text hit the context limit
};

// One transformer block over motion-frame tokens: timestep injection, self
// attention, cross attention to the text condition, FFN.
class DenoiserLayer {
 public:
  DenoiserLayer() = default;
  DenoiserLayer(nn::ParameterStore& store, const std::string& name, int width, int heads, int ffn, nn::Rng& rng);
  nn::NodeId forward(nn::Graph& g, nn::NodeId h, nn::NodeId step_emb, nn::NodeId cond, const nn::Segments& frame_segs,
                     const nn::Segments& cond_segs) const;

 private:
  nn::Linear emb_proj_;
  nn::LayerNorm ln_self_, ln_cross_, ln_ctx_, ln_ffn_;
  nn::MultiHeadAttention self_attn_, cross_attn_;
  nn::FeedForward ffn_;
};

class FineMotionModel {
 public:
  explicit FineMotionModel(ModelConfig cfg);
  FineMotionModel(const FineMotionModel&) = delete;
  FineMotionModel& operator=(const FineMotionModel&) = delete;

  const ModelConfig& config() const { return cfg_; }
  const NoiseSchedule& schedule() const { return sched_; }
  nn::ParameterStore& parameters() { return store_; }
  const nn::ParameterStore& parameters() const { return store_; }
  const text::TokenEncoder& encoder() const { return *encoder_; }
  // Routes text encoding through `enc` (e.g. an instrumented wrapper around
  // encoder()); nullptr restores the built-in encoder.
  void set_encoder_override(const text::TokenEncoder* enc) { encoder_override_ = enc; }

  // The text condition for a batch, dispatched on variant and ablations.
  Conditioning build_cond(nn::Graph& g, std::span<const TextRequest> texts, Phase phase) const;

  // Predicted noise for stacked noisy motions (sum of frames x motion_dim).
  nn::NodeId denoise(nn::Graph& g, nn::NodeId x_t, const nn::Segments& frame_segs, const std::vector<int>& timesteps,
                     const text::TextEmbeddings& cond) const;

  // Fine text after the truncation ablations active in `phase`.
  std::optional<stepmark::StepMarkedText> effective_fine(const TextRequest& req, Phase phase) const;

  void set_norm_stats(motion::NormStats stats) { norm_ = std::move(stats); }
  const motion::NormStats& norm_stats() const { return norm_; }

  void save(const std::filesystem::path& path) const;
  static std::unique_ptr<FineMotionModel> load(const std::filesystem::path& path);

 private:
  const text::TokenEncoder& active_encoder() const { return encoder_override_ ? *encoder_override_ : *encoder_; }
  text::EncodedText encode_text(nn::Graph& g, std::string_view text, bool pad) const;
  nn::NodeId project_text(nn::Graph& g, nn::NodeId rows) const;

  ModelConfig cfg_;
  NoiseSchedule sched_;
  nn::ParameterStore store_;
  std::unique_ptr<text::TokenEncoder> encoder_;
  const text::TokenEncoder* encoder_override_ = nullptr;
  mutable text::EncodingCache cache_;
  std::optional<nn::Linear> text_proj_;
  text::StepSelfAttention step_attn_;
  text::FineCoarseCrossAttention fusion_;
  text::DiffusionStepEmbedding step_embedding_;
  nn::Linear in_proj_;
  std::vector<DenoiserLayer> layers_;
  nn::LayerNorm out_ln_;
  nn::Linear out_proj_;
  motion::NormStats norm_;
};

// Signature of a noise predictor, so the objective can run against stubs.
using DenoiseFn = std::function<nn::NodeId(nn::Graph&, nn::NodeId x_t, const nn::Segments& frame_segs,
                                           const std::vector<int>& timesteps)>;

// MSE between `eps` and the prediction on q_sample(x0, t, eps).
nn::NodeId diffusion_loss(nn::Graph& g, const nn::Matrix& x0, const nn::Matrix& eps, const nn::Segments& frame_segs,
                          const std::vector<int>& timesteps, const NoiseSchedule& sched, const DenoiseFn& denoise);

struct TrainingExample {
  const motion::MotionSequence* motion = nullptr;  // normalized features
  TextRequest text;
};

struct StepReport {
  double loss = 0.0;
  double grad_norm = 0.0;
};

class Trainer {
 public:
  Trainer(FineMotionModel& model, nn::AdamConfig adam, std::uint64_t seed);
  // One optimizer update over the batch. Throws DiffusionError(NonFiniteLoss).
  StepReport step(std::span<const TrainingExample> batch);
  long steps() const { return adam_.steps(); }
  nn::Adam& optimizer() { return adam_; }

 private:
  FineMotionModel& model_;
  nn::Adam adam_;
  std::mt19937_64 rng_;
};

// Ancestral sampling. Each request draws its noise from its own seed, so
// results do not depend on how requests are batched. Returns denormalized
// motions.
std::vector<motion::MotionSequence> sample(const FineMotionModel& model, std::span<const GenerationRequest> reqs);
motion::MotionSequence sample(const FineMotionModel& model, const GenerationRequest& req);

}  // namespace finemotion::diffusion
