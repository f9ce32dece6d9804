#include "finemotion/nn/layers.hpp"

#include <cmath>

namespace finemotion::nn {

Matrix init_normal(int rows, int cols, double gain, Rng& rng) {
  std::normal_distribution<double> dist(0.0, gain / std::sqrt(static_cast<double>(rows)));
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

Linear::Linear(ParameterStore& store, const std::string& name, int in, int out, Rng& rng,
               bool bias, double gain) {
  w_ = &store.add(name + ".weight", init_normal(in, out, gain, rng));
  if (bias) b_ = &store.add(name + ".bias", Matrix::Zero(1, out));
}

NodeId Linear::forward(Graph& g, NodeId x) const {
  NodeId y = matmul(g, x, g.param(*w_));
  if (b_) y = add_row(g, y, g.param(*b_));
  return y;
}

LayerNorm::LayerNorm(ParameterStore& store, const std::string& name, int width) {
  gamma_ = &store.add(name + ".gamma", Matrix::Ones(1, width));
  beta_ = &store.add(name + ".beta", Matrix::Zero(1, width));
}

NodeId LayerNorm::forward(Graph& g, NodeId x) const {
  return layer_norm(g, x, g.param(*gamma_), g.param(*beta_));
}

MultiHeadAttention::MultiHeadAttention(ParameterStore& store, const std::string& name, int width,
                                       int heads, Rng& rng)
    : q_(store, name + ".q", width, width, rng),
      k_(store, name + ".k", width, width, rng, /*bias=*/false),
      v_(store, name + ".v", width, width, rng),
      o_(store, name + ".o", width, width, rng),
      heads_(heads) {}

NodeId MultiHeadAttention::forward(Graph& g, NodeId x, NodeId context, const Segments& x_segs,
                                   const Segments& ctx_segs, bool causal) const {
  NodeId q = q_.forward(g, x);
  NodeId k = k_.forward(g, context);
  NodeId v = v_.forward(g, context);
  return o_.forward(g, attention(g, q, k, v, x_segs, ctx_segs, heads_, causal));
}

FeedForward::FeedForward(ParameterStore& store, const std::string& name, int width, int hidden,
                         Rng& rng)
    : fc1_(store, name + ".fc1", width, hidden, rng), fc2_(store, name + ".fc2", hidden, width, rng) {}

NodeId FeedForward::forward(Graph& g, NodeId x) const {
  return fc2_.forward(g, gelu(g, fc1_.forward(g, x)));
}

EncoderLayer::EncoderLayer(ParameterStore& store, const std::string& name, int width, int heads,
                           int ffn, Rng& rng)
    : ln1_(store, name + ".ln1", width),
      ln2_(store, name + ".ln2", width),
      attn_(store, name + ".attn", width, heads, rng),
      ffn_(store, name + ".ffn", width, ffn, rng) {}

NodeId EncoderLayer::forward(Graph& g, NodeId x, const Segments& segs, bool causal) const {
  NodeId h = ln1_.forward(g, x);
  x = add(g, x, attn_.forward(g, h, h, segs, segs, causal));
  return add(g, x, ffn_.forward(g, ln2_.forward(g, x)));
}

CrossAttentionLayer::CrossAttentionLayer(ParameterStore& store, const std::string& name,
                                         int width, int heads, int ffn, Rng& rng)
    : ln_q_(store, name + ".ln_q", width),
      ln_ctx_(store, name + ".ln_ctx", width),
      ln2_(store, name + ".ln2", width),
      attn_(store, name + ".attn", width, heads, rng),
      ffn_(store, name + ".ffn", width, ffn, rng) {}

NodeId CrossAttentionLayer::forward(Graph& g, NodeId x, NodeId context, const Segments& x_segs,
                                    const Segments& ctx_segs) const {
  NodeId ctx = ln_ctx_.forward(g, context);
  x = add(g, x, attn_.forward(g, ln_q_.forward(g, x), ctx, x_segs, ctx_segs));
  return add(g, x, ffn_.forward(g, ln2_.forward(g, x)));
}

}  // namespace finemotion::nn
