#pragma once

#include <random>
#include <string>

#include "finemotion/nn/graph.hpp"
#include "finemotion/nn/ops.hpp"

namespace finemotion::nn {

using Rng = std::mt19937_64;

// Gaussian init with std = gain / sqrt(fan_in).
Matrix init_normal(int rows, int cols, double gain, Rng& rng);

class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, int in, int out, Rng& rng,
         bool bias = true, double gain = 1.0);

  NodeId forward(Graph& g, NodeId x) const;
  int in_features() const { return static_cast<int>(w_->value.rows()); }
  int out_features() const { return static_cast<int>(w_->value.cols()); }

 private:
  Parameter* w_ = nullptr;
  Parameter* b_ = nullptr;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParameterStore& store, const std::string& name, int width);
  NodeId forward(Graph& g, NodeId x) const;

 private:
  Parameter* gamma_ = nullptr;
  Parameter* beta_ = nullptr;
};

// The key projection has no bias: softmax is invariant to it.
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(ParameterStore& store, const std::string& name, int width, int heads,
                     Rng& rng);

  // Queries from `x`, keys/values from `context`.
  NodeId forward(Graph& g, NodeId x, NodeId context, const Segments& x_segs,
                 const Segments& ctx_segs, bool causal = false) const;

 private:
  Linear q_, k_, v_, o_;
  int heads_ = 1;
};

// Linear -> GELU -> Linear.
class FeedForward {
 public:
  FeedForward() = default;
  FeedForward(ParameterStore& store, const std::string& name, int width, int hidden, Rng& rng);
  NodeId forward(Graph& g, NodeId x) const;

 private:
  Linear fc1_, fc2_;
};

// Pre-norm transformer encoder layer:
//   x += SelfAttn(LN(x)); x += FFN(LN(x))
class EncoderLayer {
 public:
  EncoderLayer() = default;
  EncoderLayer(ParameterStore& store, const std::string& name, int width, int heads, int ffn,
               Rng& rng);
  NodeId forward(Graph& g, NodeId x, const Segments& segs, bool causal = false) const;

 private:
  LayerNorm ln1_, ln2_;
  MultiHeadAttention attn_;
  FeedForward ffn_;
};

// Pre-norm cross-attention layer:
//   x += CrossAttn(LN(x), LN_ctx(ctx)); x += FFN(LN(x))
class CrossAttentionLayer {
 public:
  CrossAttentionLayer() = default;
  CrossAttentionLayer(ParameterStore& store, const std::string& name, int width, int heads,
                      int ffn, Rng& rng);
  NodeId forward(Graph& g, NodeId x, NodeId context, const Segments& x_segs,
                 const Segments& ctx_segs) const;

 private:
  LayerNorm ln_q_, ln_ctx_, ln2_;
  MultiHeadAttention attn_;
  FeedForward ffn_;
};

}  // namespace finemotion::nn
