#pragma once

#include <string_view>
#include <vector>

#include "finemotion/nn/layers.hpp"
#include "finemotion/stepmark/stepmark.hpp"
#include "finemotion/text/token_encoder.hpp"

namespace finemotion::text {

enum class StepPooling {
  Mean,      // average of the real token rows
  EndToken,  // the [E] row only
};

struct PooledStep {
  nn::NodeId row = -1;  // 1 x width
  bool truncated = false;
};

// Encodes one step body to a single row. `cache` may be null.
PooledStep encode_step(nn::Graph& g, std::string_view step_text, const TokenEncoder& enc,
                       StepPooling pooling = StepPooling::Mean, EncodingCache* cache = nullptr);

struct RawSteps {
  nn::NodeId rows = -1;  // n x width, one row per step in order
  int truncated_steps = 0;
};

// Each step is encoded on its own, so no step is lost to the context limit.
RawSteps encode_fine(nn::Graph& g, const stepmark::StepMarkedText& s, const TokenEncoder& enc,
                     StepPooling pooling = StepPooling::Mean, EncodingCache* cache = nullptr);

struct CoarseFeatures {
  nn::NodeId rows = -1;  // L x width
  int length = 0;
  int s_index = 0;
  int e_index = 0;
  bool truncated = false;
};

CoarseFeatures encode_coarse(nn::Graph& g, std::string_view text, const TokenEncoder& enc,
                             EncodingCache* cache = nullptr);

struct BlockConfig {
  int width = 256;
  int layers = 4;
  int heads = 4;
  int ffn = 512;
};

// Stack of encoder layers over step rows plus hard sinusoidal positions.
// Batched input is a stack of per-sample step matrices described by `segs`.
class StepSelfAttention {
 public:
  StepSelfAttention() = default;
  StepSelfAttention(nn::ParameterStore& store, const std::string& name, const BlockConfig& cfg, nn::Rng& rng);
  nn::NodeId forward(nn::Graph& g, nn::NodeId raw_steps, const nn::Segments& segs, bool add_positions = true) const;
  int width() const { return width_; }

 private:
  std::vector<nn::EncoderLayer> layers_;
  int width_ = 0;
};

// Coarse rows query fine rows through cross-attention layers, then a final
// residual FFN. Output has the coarse layout.
class FineCoarseCrossAttention {
 public:
  FineCoarseCrossAttention() = default;
  FineCoarseCrossAttention(nn::ParameterStore& store, const std::string& name, const BlockConfig& cfg, nn::Rng& rng);
  nn::NodeId forward(nn::Graph& g, nn::NodeId coarse, nn::NodeId fine, const nn::Segments& coarse_segs,
                     const nn::Segments& fine_segs) const;
  int width() const { return width_; }

 private:
  std::vector<nn::CrossAttentionLayer> layers_;
  nn::LayerNorm final_ln_;
  nn::FeedForward final_ffn_;
  int width_ = 0;
};

struct TextEmbeddings {
  nn::NodeId cond = -1;       // stacked conditioning rows of the batch
  nn::Segments segs;          // one segment per sample
  std::vector<int> e_rows;    // row of [E] inside `cond`, per sample
  nn::NodeId e_embed = -1;    // B x width, row b = cond[e_rows[b]]
};

// Gathers the [E] rows of `cond` into an e_embed matrix.
TextEmbeddings make_text_embeddings(nn::Graph& g, nn::NodeId cond, nn::Segments segs, std::vector<int> e_rows);

// Linear(e_embed + sinusoid(t)), one row per sample.
class DiffusionStepEmbedding {
 public:
  DiffusionStepEmbedding() = default;
  DiffusionStepEmbedding(nn::ParameterStore& store, const std::string& name, int width, nn::Rng& rng);
  // Throws TextError(TOutOfRange) unless 0 <= t < steps for every t.
  nn::NodeId forward(nn::Graph& g, nn::NodeId e_embed, const std::vector<int>& timesteps, int steps) const;

 private:
  nn::Linear proj_;
  int width_ = 0;
};

}  // namespace finemotion::text
