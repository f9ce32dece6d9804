#include "finemotion/diffusion/model.hpp"

#include <cmath>

#include "finemotion/nn/checkpoint.hpp"
#include "finemotion/text/positional.hpp"

namespace finemotion::diffusion {
namespace {

std::string join_steps(const stepmark::StepMarkedText& s) {
  std::string out;
  for (const std::string& body : stepmark::strip_steps(s)) {
    if (!out.empty()) out.push_back(' ');
    out += body;
  }
  return out;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw DiffusionError(DiffusionErrc::VariantInputMismatch, what);
}

}  // namespace

nn::NodeId addfc_fuse(nn::Graph& g, nn::NodeId coarse, const std::vector<nn::NodeId>& steps) {
  const nn::Matrix& c = g.value(coarse);
  nn::NodeId sum = coarse;
  for (nn::NodeId s : steps) {
    const nn::Matrix& m = g.value(s);
    if (m.rows() != c.rows() || m.cols() != c.cols())
      throw DiffusionError(DiffusionErrc::ShapeMismatch, "AddFC needs every step encoded to the full context");
    sum = nn::add(g, sum, s);
  }
  return sum;
}

DenoiserLayer::DenoiserLayer(nn::ParameterStore& store, const std::string& name, int width, int heads, int ffn,
                             nn::Rng& rng)
    : emb_proj_(store, name + ".emb_proj", width, width, rng),
      ln_self_(store, name + ".ln_self", width),
      ln_cross_(store, name + ".ln_cross", width),
      ln_ctx_(store, name + ".ln_ctx", width),
      ln_ffn_(store, name + ".ln_ffn", width),
      self_attn_(store, name + ".self_attn", width, heads, rng),
      cross_attn_(store, name + ".cross_attn", width, heads, rng),
      ffn_(store, name + ".ffn", width, ffn, rng) {}

nn::NodeId DenoiserLayer::forward(nn::Graph& g, nn::NodeId h, nn::NodeId step_emb, nn::NodeId cond,
                                  const nn::Segments& frame_segs, const nn::Segments& cond_segs) const {
  h = nn::add_segment_rows(g, h, emb_proj_.forward(g, nn::silu(g, step_emb)), frame_segs);
  const nn::NodeId hs = ln_self_.forward(g, h);
  h = nn::add(g, h, self_attn_.forward(g, hs, hs, frame_segs, frame_segs));
  h = nn::add(g, h, cross_attn_.forward(g, ln_cross_.forward(g, h), ln_ctx_.forward(g, cond), frame_segs, cond_segs));
  return nn::add(g, h, ffn_.forward(g, ln_ffn_.forward(g, h)));
}

FineMotionModel::FineMotionModel(ModelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  sched_ = make_schedule(cfg_.diffusion_steps, cfg_.beta_start, cfg_.beta_end);
  nn::Rng rng(cfg_.seed);

  if (cfg_.encoder_profile == "toy_clip") {
    text::ToyEncoderConfig ec = cfg_.encoder;
    ec.frozen = !cfg_.has(Ablation::ClipUnfrozen);
    auto enc = std::make_unique<text::ToyClipEncoder>(store_, "text_encoder", ec);
    if (!cfg_.encoder_weights.empty()) enc->load_pretrained(cfg_.encoder_weights);
    encoder_ = std::move(enc);
  } else {
    encoder_ = std::make_unique<text::HashStubEncoder>(cfg_.encoder.width, cfg_.encoder.max_tokens);
  }
  if (encoder_->width() != cfg_.d_model) text_proj_.emplace(store_, "text_proj", encoder_->width(), cfg_.d_model, rng);

  const int d = cfg_.d_model;
  if (cfg_.variant == Variant::FineMotionDiffuse) {
    step_attn_ = text::StepSelfAttention(store_, "step_attn", {d, cfg_.step_layers, cfg_.heads, cfg_.ffn}, rng);
    if (!cfg_.has(Ablation::NoCrossAttention))
      fusion_ = text::FineCoarseCrossAttention(store_, "fusion", {d, cfg_.fusion_layers, cfg_.heads, cfg_.ffn}, rng);
  }
  step_embedding_ = text::DiffusionStepEmbedding(store_, "step_embedding", d, rng);
  in_proj_ = nn::Linear(store_, "denoiser.in_proj", cfg_.motion_dim, d, rng);
  for (int l = 0; l < cfg_.denoiser_layers; ++l)
    layers_.emplace_back(store_, "denoiser.layer" + std::to_string(l), d, cfg_.heads, cfg_.ffn, rng);
  out_ln_ = nn::LayerNorm(store_, "denoiser.out_ln", d);
  out_proj_ = nn::Linear(store_, "denoiser.out_proj", d, cfg_.motion_dim, rng, true, 0.1);
  norm_ = motion::NormStats::identity(cfg_.motion_dim);
}

text::EncodedText FineMotionModel::encode_text(nn::Graph& g, std::string_view text, bool pad) const {
  if (encoder_override_) return encoder_override_->encode(g, text, pad);
  return cache_.encode(g, *encoder_, text, pad);
}

nn::NodeId FineMotionModel::project_text(nn::Graph& g, nn::NodeId rows) const {
  return text_proj_ ? text_proj_->forward(g, rows) : rows;
}

std::optional<stepmark::StepMarkedText> FineMotionModel::effective_fine(const TextRequest& req, Phase phase) const {
  if (!req.fine) return std::nullopt;
  stepmark::StepMarkedText s = *req.fine;
  auto apply = [&](stepmark::TruncateMode mode) {
    // Texts too short for the truncation are kept whole.
    try {
      s = stepmark::truncate_steps(s, mode);
    } catch (const stepmark::StepmarkError&) {
    }
  };
  if (cfg_.has(Ablation::DelFirstLast)) apply(stepmark::TruncateMode::DelFirstLast);
  if (cfg_.has(Ablation::DelInner)) apply(stepmark::TruncateMode::DelInner);
  if (phase == Phase::Inference) {
    if (cfg_.has(Ablation::DelFirstLastInput)) apply(stepmark::TruncateMode::DelFirstLast);
    if (cfg_.has(Ablation::DelInnerInput)) apply(stepmark::TruncateMode::DelInner);
  }
  return s;
}

Conditioning FineMotionModel::build_cond(nn::Graph& g, std::span<const TextRequest> texts, Phase phase) const {
  if (texts.empty()) throw DiffusionError(DiffusionErrc::ShapeMismatch, "empty batch");
  Conditioning out;
  std::vector<nn::NodeId> cond_parts;
  std::vector<int> sizes, e_rows;
  int offset = 0;
  auto push = [&](nn::NodeId rows, int e_index, bool truncated) {
    const int n = static_cast<int>(g.value(rows).rows());
    cond_parts.push_back(rows);
    sizes.push_back(n);
    e_rows.push_back(offset + e_index);
    offset += n;
    out.truncated.push_back(truncated);
  };

  switch (cfg_.variant) {
    case Variant::MotionDiffuseCoarse:
      for (const auto& t : texts) {
        require(!stepmark::trim(t.coarse).empty(), "coarse text required");
        const auto e = encode_text(g, t.coarse, false);
        push(project_text(g, e.rows), e.e_index, e.truncated);
      }
      break;
    case Variant::MotionDiffuseDetailed:
      for (const auto& t : texts) {
        const auto fine = effective_fine(t, phase);
        require(fine.has_value(), "fine text required");
        const auto e = encode_text(g, join_steps(*fine), false);
        push(project_text(g, e.rows), e.e_index, e.truncated);
      }
      break;
    case Variant::AddFC:
      for (const auto& t : texts) {
        const auto fine = effective_fine(t, phase);
        require(fine.has_value() && !stepmark::trim(t.coarse).empty(), "coarse and fine texts required");
        const auto c = encode_text(g, t.coarse, true);
        std::vector<nn::NodeId> steps;
        bool truncated = c.truncated;
        for (const std::string& body : stepmark::strip_steps(*fine)) {
          const auto s = encode_text(g, body, true);
          truncated = truncated || s.truncated;
          steps.push_back(s.rows);
        }
        push(project_text(g, addfc_fuse(g, c.rows, steps)), c.e_index, truncated);
      }
      break;
    case Variant::FineMotionDiffuse: {
      const bool bypass = cfg_.has(Ablation::NoCrossAttention);
      const auto pooling = cfg_.has(Ablation::UseEPerStep) ? text::StepPooling::EndToken : text::StepPooling::Mean;
      text::EncodingCache* cache = encoder_override_ ? nullptr : &cache_;
      const text::TokenEncoder& enc = active_encoder();
      std::vector<nn::NodeId> raw_parts, coarse_parts;
      std::vector<int> fine_sizes, coarse_sizes, coarse_e;
      for (const auto& t : texts) {
        const auto fine = effective_fine(t, phase);
        require(fine.has_value(), "fine text required");
        const auto raw = text::encode_fine(g, *fine, enc, pooling, cache);
        raw_parts.push_back(raw.rows);
        fine_sizes.push_back(fine->size());
        bool truncated = raw.truncated_steps > 0;
        if (!bypass) {
          require(!stepmark::trim(t.coarse).empty(), "coarse text required");
          const auto c = text::encode_coarse(g, t.coarse, enc, cache);
          coarse_parts.push_back(c.rows);
          coarse_sizes.push_back(c.length);
          coarse_e.push_back(c.e_index);
          truncated = truncated || c.truncated;
        }
        out.truncated.push_back(truncated);
      }
      const nn::Segments fine_segs = nn::Segments::from_sizes(fine_sizes);
      const nn::NodeId fine_feats =
          step_attn_.forward(g, project_text(g, nn::concat_rows(g, raw_parts)), fine_segs);
      if (bypass) {
        out.emb.cond = fine_feats;
        out.emb.segs = fine_segs;
        out.emb.e_embed = nn::segment_mean(g, fine_feats, fine_segs);
        return out;
      }
      const nn::Segments coarse_segs = nn::Segments::from_sizes(coarse_sizes);
      std::vector<int> rows(coarse_e.size());
      for (std::size_t b = 0; b < rows.size(); ++b) rows[b] = coarse_segs.begin(static_cast<int>(b)) + coarse_e[b];
      const nn::NodeId cond =
          fusion_.forward(g, project_text(g, nn::concat_rows(g, coarse_parts)), fine_feats, coarse_segs, fine_segs);
      out.emb = text::make_text_embeddings(g, cond, coarse_segs, std::move(rows));
      return out;
    }
  }
  const std::vector<bool> truncated = std::move(out.truncated);
  out.emb = text::make_text_embeddings(g, nn::concat_rows(g, cond_parts), nn::Segments::from_sizes(sizes),
                                       std::move(e_rows));
  out.truncated = truncated;
  return out;
}

nn::NodeId FineMotionModel::denoise(nn::Graph& g, nn::NodeId x_t, const nn::Segments& frame_segs,
                                    const std::vector<int>& timesteps, const text::TextEmbeddings& cond) const {
  const nn::Matrix& x = g.value(x_t);
  if (x.cols() != cfg_.motion_dim || x.rows() != frame_segs.total() ||
      static_cast<int>(timesteps.size()) != frame_segs.count() || cond.segs.count() != frame_segs.count())
    throw DiffusionError(DiffusionErrc::ShapeMismatch, "noisy motion, timesteps and condition disagree");
  for (int t : timesteps) sched_.check_t(t);
  nn::NodeId h = in_proj_.forward(g, x_t);
  h = nn::add(g, h, g.constant(text::segment_positional_encoding(frame_segs, cfg_.d_model)));
  const nn::NodeId emb = step_embedding_.forward(g, cond.e_embed, timesteps, sched_.steps());
  for (const auto& layer : layers_) h = layer.forward(g, h, emb, cond.cond, frame_segs, cond.segs);
  return out_proj_.forward(g, out_ln_.forward(g, h));
}

void FineMotionModel::save(const std::filesystem::path& path) const {
  nn::Checkpoint ck = nn::snapshot(store_, {{"format", "finemotion-model"},
                                            {"config", cfg_.to_json()},
                                            {"encoder_profile", encoder_->describe()}});
  ck.tensors["norm.mean"] = norm_.mean;
  ck.tensors["norm.std"] = norm_.std;
  nn::save_checkpoint(ck, path);
}

std::unique_ptr<FineMotionModel> FineMotionModel::load(const std::filesystem::path& path) {
  const nn::Checkpoint ck = nn::load_checkpoint(path);
  if (!ck.metadata.contains("config"))
    throw nn::CheckpointError(nn::CheckpointErrc::Corrupt, "checkpoint has no model config");
  ModelConfig cfg = ModelConfig::from_json(ck.metadata.at("config"));
  // Weights come from this checkpoint, not from the original pretrained file.
  cfg.encoder_weights.clear();
  auto model = std::make_unique<FineMotionModel>(cfg);
  nn::restore(model->store_, ck);
  model->cfg_.encoder_weights = ck.metadata.at("config").value("encoder_weights", std::string());
  auto it_m = ck.tensors.find("norm.mean");
  auto it_s = ck.tensors.find("norm.std");
  if (it_m != ck.tensors.end() && it_s != ck.tensors.end())
    model->norm_ = motion::NormStats{it_m->second.row(0), it_s->second.row(0)};
  return model;
}

nn::NodeId diffusion_loss(nn::Graph& g, const nn::Matrix& x0, const nn::Matrix& eps, const nn::Segments& frame_segs,
                          const std::vector<int>& timesteps, const NoiseSchedule& sched, const DenoiseFn& denoise) {
  if (x0.rows() != frame_segs.total() || static_cast<int>(timesteps.size()) != frame_segs.count())
    throw DiffusionError(DiffusionErrc::ShapeMismatch, "segments do not describe the batch");
  nn::Matrix x_t(x0.rows(), x0.cols());
  for (int b = 0; b < frame_segs.count(); ++b) {
    const int r0 = frame_segs.begin(b), n = frame_segs.size(b);
    x_t.middleRows(r0, n) = q_sample(x0.middleRows(r0, n), timesteps[static_cast<std::size_t>(b)],
                                     eps.middleRows(r0, n), sched);
  }
  const nn::NodeId pred = denoise(g, g.constant(std::move(x_t)), frame_segs, timesteps);
  return nn::mse(g, pred, g.constant(eps));
}

Trainer::Trainer(FineMotionModel& model, nn::AdamConfig adam, std::uint64_t seed)
    : model_(model), adam_(adam), rng_(seed) {}

StepReport Trainer::step(std::span<const TrainingExample> batch) {
  if (batch.empty()) throw DiffusionError(DiffusionErrc::ShapeMismatch, "empty batch");
  const int dim = model_.config().motion_dim;
  const int steps = model_.schedule().steps();
  std::vector<int> sizes, timesteps;
  std::vector<TextRequest> texts;
  int total = 0;
  for (const auto& ex : batch) {
    if (!ex.motion || ex.motion->dim() != dim)
      throw DiffusionError(DiffusionErrc::ShapeMismatch, "training motion has the wrong feature dimension");
    sizes.push_back(ex.motion->frames());
    total += ex.motion->frames();
    texts.push_back(ex.text);
  }
  const nn::Segments segs = nn::Segments::from_sizes(sizes);
  nn::Matrix x0(total, dim), eps(total, dim);
  std::uniform_int_distribution<int> pick_t(0, steps - 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    timesteps.push_back(pick_t(rng_));
    const int r0 = segs.begin(static_cast<int>(b));
    x0.middleRows(r0, sizes[b]) = batch[b].motion->features;
    for (int r = 0; r < sizes[b]; ++r)
      for (int c = 0; c < dim; ++c) eps(r0 + r, c) = normal(rng_);
  }

  nn::Graph g;
  const Conditioning cond = model_.build_cond(g, texts, Phase::Train);
  const nn::NodeId loss = diffusion_loss(
      g, x0, eps, segs, timesteps, model_.schedule(),
      [&](nn::Graph& gg, nn::NodeId x_t, const nn::Segments& fs, const std::vector<int>& ts) {
        return model_.denoise(gg, x_t, fs, ts, cond.emb);
      });
  const double value = g.value(loss)(0, 0);
  if (!std::isfinite(value))
    throw DiffusionError(DiffusionErrc::NonFiniteLoss,
                         "non-finite loss at step " + std::to_string(adam_.steps() + 1) + " (batch of " +
                             std::to_string(batch.size()) + ")");
  model_.parameters().zero_grad();
  g.backward(loss);
  StepReport report;
  report.loss = value;
  report.grad_norm = adam_.step(model_.parameters());
  return report;
}

std::vector<motion::MotionSequence> sample(const FineMotionModel& model, std::span<const GenerationRequest> reqs) {
  if (reqs.empty()) return {};
  const ModelConfig& cfg = model.config();
  const NoiseSchedule& sched = model.schedule();
  const int dim = cfg.motion_dim;
  std::vector<int> sizes;
  std::vector<TextRequest> texts;
  std::vector<std::mt19937_64> rngs;
  for (const auto& r : reqs) {
    if (r.frames < 1) throw DiffusionError(DiffusionErrc::ShapeMismatch, "requested frame count must be >= 1");
    sizes.push_back(r.frames);
    texts.push_back(r.text);
    rngs.emplace_back(r.seed);
  }
  const nn::Segments segs = nn::Segments::from_sizes(sizes);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&](nn::Matrix& m) {
    for (int b = 0; b < segs.count(); ++b)
      for (int r = segs.begin(b); r < segs.begin(b) + segs.size(b); ++r)
        for (int c = 0; c < dim; ++c) m(r, c) = normal(rngs[static_cast<std::size_t>(b)]);
  };

  nn::Matrix cond_rows, e_embed;
  nn::Segments cond_segs;
  {
    nn::Graph g(false);
    const Conditioning c = model.build_cond(g, texts, Phase::Inference);
    cond_rows = g.value(c.emb.cond);
    e_embed = g.value(c.emb.e_embed);
    cond_segs = c.emb.segs;
  }

  nn::Matrix x(segs.total(), dim), z(segs.total(), dim);
  draw(x);
  std::vector<int> ts(reqs.size());
  for (int t = sched.steps() - 1; t >= 0; --t) {
    std::fill(ts.begin(), ts.end(), t);
    nn::Graph g(false);
    text::TextEmbeddings emb;
    emb.cond = g.constant(cond_rows);
    emb.e_embed = g.constant(e_embed);
    emb.segs = cond_segs;
    const nn::Matrix eps = g.value(model.denoise(g, g.constant(x), segs, ts, emb));
    const auto i = static_cast<std::size_t>(t);
    const double beta = sched.beta[i];
    x = (x - (beta / std::sqrt(1.0 - sched.alpha_bar[i])) * eps) / std::sqrt(sched.alpha[i]);
    if (t > 0) {
      draw(z);
      x += std::sqrt(beta) * z;
    }
  }

  std::vector<motion::MotionSequence> out;
  for (int b = 0; b < segs.count(); ++b) {
    motion::MotionSequence m;
    m.features = x.middleRows(segs.begin(b), segs.size(b));
    m.normalized = true;
    m.schema_id = cfg.schema_id;
    out.push_back(motion::denormalize(m, model.norm_stats()));
  }
  return out;
}

motion::MotionSequence sample(const FineMotionModel& model, const GenerationRequest& req) {
  return sample(model, std::span<const GenerationRequest>(&req, 1)).front();
}

}  // namespace finemotion::diffusion
