#include "finemotion/text/fine_text.hpp"

#include "finemotion/text/positional.hpp"

namespace finemotion::text {
namespace {

EncodedText run_encoder(nn::Graph& g, std::string_view text, const TokenEncoder& enc, EncodingCache* cache) {
  return cache ? cache->encode(g, enc, text) : enc.encode(g, text);
}

}  // namespace

PooledStep encode_step(nn::Graph& g, std::string_view step_text, const TokenEncoder& enc, StepPooling pooling,
                       EncodingCache* cache) {
  if (stepmark::trim(step_text).empty()) throw TextError(TextErrc::EmptyStep, "empty step text");
  const EncodedText e = run_encoder(g, step_text, enc, cache);
  PooledStep out;
  out.truncated = e.truncated;
  if (pooling == StepPooling::EndToken) {
    out.row = nn::gather_rows(g, e.rows, {e.e_index});
  } else {
    std::vector<int> real(static_cast<std::size_t>(e.count));
    for (int i = 0; i < e.count; ++i) real[static_cast<std::size_t>(i)] = i;
    nn::NodeId rows = static_cast<int>(g.value(e.rows).rows()) == e.count ? e.rows : nn::gather_rows(g, e.rows, real);
    out.row = nn::mean_rows(g, rows);
  }
  return out;
}

RawSteps encode_fine(nn::Graph& g, const stepmark::StepMarkedText& s, const TokenEncoder& enc, StepPooling pooling,
                     EncodingCache* cache) {
  s.validate();
  RawSteps out;
  std::vector<nn::NodeId> rows;
  for (const std::string& body : stepmark::strip_steps(s)) {
    PooledStep p = encode_step(g, body, enc, pooling, cache);
    out.truncated_steps += p.truncated ? 1 : 0;
    rows.push_back(p.row);
  }
  out.rows = nn::concat_rows(g, rows);
  return out;
}

CoarseFeatures encode_coarse(nn::Graph& g, std::string_view text, const TokenEncoder& enc, EncodingCache* cache) {
  const EncodedText e = run_encoder(g, text, enc, cache);
  return CoarseFeatures{e.rows, e.count, e.s_index, e.e_index, e.truncated};
}

StepSelfAttention::StepSelfAttention(nn::ParameterStore& store, const std::string& name, const BlockConfig& cfg,
                                     nn::Rng& rng)
    : width_(cfg.width) {
  for (int l = 0; l < cfg.layers; ++l)
    layers_.emplace_back(store, name + ".layer" + std::to_string(l), cfg.width, cfg.heads, cfg.ffn, rng);
}

nn::NodeId StepSelfAttention::forward(nn::Graph& g, nn::NodeId raw_steps, const nn::Segments& segs,
                                      bool add_positions) const {
  const nn::Matrix& raw = g.value(raw_steps);
  if (raw.cols() != width_ || raw.rows() != segs.total())
    throw TextError(TextErrc::ShapeMismatch, "step matrix does not match block width or segments");
  nn::NodeId x = raw_steps;
  if (add_positions) x = nn::add(g, x, g.constant(segment_positional_encoding(segs, width_)));
  for (const auto& layer : layers_) x = layer.forward(g, x, segs);
  return x;
}

FineCoarseCrossAttention::FineCoarseCrossAttention(nn::ParameterStore& store, const std::string& name,
                                                   const BlockConfig& cfg, nn::Rng& rng)
    : final_ln_(store, name + ".final_ln", cfg.width),
      final_ffn_(store, name + ".final_ffn", cfg.width, cfg.ffn, rng),
      width_(cfg.width) {
  for (int l = 0; l < cfg.layers; ++l)
    layers_.emplace_back(store, name + ".layer" + std::to_string(l), cfg.width, cfg.heads, cfg.ffn, rng);
}

nn::NodeId FineCoarseCrossAttention::forward(nn::Graph& g, nn::NodeId coarse, nn::NodeId fine,
                                             const nn::Segments& coarse_segs, const nn::Segments& fine_segs) const {
  const nn::Matrix& c = g.value(coarse);
  const nn::Matrix& f = g.value(fine);
  if (c.cols() != width_ || f.cols() != width_ || c.rows() != coarse_segs.total() || f.rows() != fine_segs.total() ||
      coarse_segs.count() != fine_segs.count())
    throw TextError(TextErrc::ShapeMismatch, "coarse/fine shapes are inconsistent");
  nn::NodeId x = coarse;
  for (const auto& layer : layers_) x = layer.forward(g, x, fine, coarse_segs, fine_segs);
  return nn::add(g, x, final_ffn_.forward(g, final_ln_.forward(g, x)));
}

TextEmbeddings make_text_embeddings(nn::Graph& g, nn::NodeId cond, nn::Segments segs, std::vector<int> e_rows) {
  if (static_cast<int>(e_rows.size()) != segs.count())
    throw TextError(TextErrc::ShapeMismatch, "one [E] row per sample expected");
  for (int b = 0; b < segs.count(); ++b) {
    const int r = e_rows[static_cast<std::size_t>(b)];
    if (r < segs.begin(b) || r >= segs.begin(b) + segs.size(b))
      throw TextError(TextErrc::ShapeMismatch, "[E] row outside its sample");
  }
  TextEmbeddings out;
  out.cond = cond;
  out.e_embed = nn::gather_rows(g, cond, e_rows);
  out.segs = std::move(segs);
  out.e_rows = std::move(e_rows);
  return out;
}

DiffusionStepEmbedding::DiffusionStepEmbedding(nn::ParameterStore& store, const std::string& name, int width,
                                               nn::Rng& rng)
    : proj_(store, name, width, width, rng), width_(width) {}

nn::NodeId DiffusionStepEmbedding::forward(nn::Graph& g, nn::NodeId e_embed, const std::vector<int>& timesteps,
                                           int steps) const {
  const nn::Matrix& e = g.value(e_embed);
  if (e.cols() != width_ || e.rows() != static_cast<Eigen::Index>(timesteps.size()))
    throw TextError(TextErrc::ShapeMismatch, "e_embed rows must match the timestep count");
  for (int t : timesteps)
    if (t < 0 || t >= steps)
      throw TextError(TextErrc::TOutOfRange, "timestep " + std::to_string(t) + " outside [0, " + std::to_string(steps) + ")");
  return proj_.forward(g, nn::add(g, e_embed, g.constant(timestep_encoding(timesteps, width_))));
}

}  // namespace finemotion::text
