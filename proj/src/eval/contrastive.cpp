#include "finemotion/eval/contrastive.hpp"

#include <cmath>
#include <random>
#include <set>

#include "finemotion/nn/checkpoint.hpp"
#include "finemotion/nn/optimizer.hpp"
#include "finemotion/text/positional.hpp"

namespace finemotion::eval {

void ContrastiveConfig::validate() const {
  auto bad = [](const std::string& why) { throw EvalError(EvalErrc::BadConfig, why); };
  if (d_eval < 1 || width < 2 || width % 2 != 0) bad("width must be even and d_eval positive");
  if (heads < 1 || width % heads != 0) bad("width must be divisible by heads");
  if (layers < 0 || ffn < 1 || max_tokens < 3) bad("bad layer sizes");
  if (steps < 0 || batch < 2 || lr <= 0.0 || margin < 0.0) bad("bad training parameters");
}

nlohmann::json ContrastiveConfig::to_json() const {
  return {{"d_eval", d_eval}, {"width", width},   {"heads", heads}, {"layers", layers},
          {"ffn", ffn},       {"max_tokens", max_tokens}, {"margin", margin}, {"steps", steps},
          {"batch", batch},   {"lr", lr},         {"seed", seed}};
}

ContrastiveConfig ContrastiveConfig::from_json(const nlohmann::json& j) {
  ContrastiveConfig c;
  c.d_eval = j.value("d_eval", c.d_eval);
  c.width = j.value("width", c.width);
  c.heads = j.value("heads", c.heads);
  c.layers = j.value("layers", c.layers);
  c.ffn = j.value("ffn", c.ffn);
  c.max_tokens = j.value("max_tokens", c.max_tokens);
  c.margin = j.value("margin", c.margin);
  c.steps = j.value("steps", c.steps);
  c.batch = j.value("batch", c.batch);
  c.lr = j.value("lr", c.lr);
  c.seed = j.value("seed", c.seed);
  return c;
}

ContrastiveModel::ContrastiveModel(ContrastiveConfig cfg, int motion_dim)
    : cfg_(std::move(cfg)), motion_dim_(motion_dim), tokens_(cfg_.width, cfg_.max_tokens) {
  cfg_.validate();
  if (motion_dim < 1) throw EvalError(EvalErrc::BadConfig, "motion_dim must be positive");
  nn::Rng rng(cfg_.seed);
  for (int l = 0; l < cfg_.layers; ++l)
    text_layers_.emplace_back(store_, "text.layer" + std::to_string(l), cfg_.width, cfg_.heads, cfg_.ffn, rng);
  text_ln_ = nn::LayerNorm(store_, "text.ln", cfg_.width);
  text_out_ = nn::Linear(store_, "text.out", cfg_.width, cfg_.d_eval, rng);
  motion_in_ = nn::Linear(store_, "motion.in", motion_dim, cfg_.width, rng);
  for (int l = 0; l < cfg_.layers; ++l)
    motion_layers_.emplace_back(store_, "motion.layer" + std::to_string(l), cfg_.width, cfg_.heads, cfg_.ffn, rng);
  motion_ln_ = nn::LayerNorm(store_, "motion.ln", cfg_.width);
  motion_out_ = nn::Linear(store_, "motion.out", cfg_.width, cfg_.d_eval, rng);
  norm_ = motion::NormStats::identity(motion_dim);
}

nn::NodeId ContrastiveModel::embed_texts(nn::Graph& g, const std::vector<std::string>& texts) const {
  std::vector<nn::NodeId> parts;
  std::vector<int> sizes;
  for (const auto& t : texts) {
    const text::EncodedText enc = tokens_.encode(g, t);
    parts.push_back(enc.rows);
    sizes.push_back(enc.count);
  }
  const nn::Segments segs = nn::Segments::from_sizes(sizes);
  nn::NodeId h = nn::concat_rows(g, parts);
  h = nn::add(g, h, g.constant(text::segment_positional_encoding(segs, cfg_.width)));
  for (const auto& layer : text_layers_) h = layer.forward(g, h, segs);
  h = nn::segment_mean(g, text_ln_.forward(g, h), segs);
  return nn::normalize_rows(g, text_out_.forward(g, h));
}

nn::NodeId ContrastiveModel::embed_motions(nn::Graph& g,
                                           std::span<const motion::MotionSequence* const> motions) const {
  std::vector<int> sizes;
  int total = 0;
  for (const auto* m : motions) {
    if (m->dim() != motion_dim_) throw EvalError(EvalErrc::ShapeMismatch, "motion has the wrong feature dimension");
    sizes.push_back(m->frames());
    total += m->frames();
  }
  nn::Matrix x(total, motion_dim_);
  int r = 0;
  for (const auto* m : motions) {
    x.middleRows(r, m->frames()) = m->normalized ? m->features : motion::normalize(*m, norm_).features;
    r += m->frames();
  }
  const nn::Segments segs = nn::Segments::from_sizes(sizes);
  nn::NodeId h = motion_in_.forward(g, g.constant(std::move(x)));
  h = nn::add(g, h, g.constant(text::segment_positional_encoding(segs, cfg_.width)));
  for (const auto& layer : motion_layers_) h = layer.forward(g, h, segs);
  h = nn::segment_mean(g, motion_ln_.forward(g, h), segs);
  return nn::normalize_rows(g, motion_out_.forward(g, h));
}

EvalFeatures ContrastiveModel::encode_texts(const std::vector<std::string>& texts) const {
  EvalFeatures out;
  out.rows.resize(static_cast<Eigen::Index>(texts.size()), cfg_.d_eval);
  constexpr std::size_t kChunk = 64;
  for (std::size_t i = 0; i < texts.size(); i += kChunk) {
    const std::vector<std::string> chunk(texts.begin() + static_cast<std::ptrdiff_t>(i),
                                         texts.begin() + static_cast<std::ptrdiff_t>(std::min(texts.size(), i + kChunk)));
    nn::Graph g(false);
    out.rows.middleRows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(chunk.size())) =
        g.value(embed_texts(g, chunk));
  }
  out.ids = texts;
  return out;
}

EvalFeatures ContrastiveModel::encode_motions(std::span<const motion::MotionSequence> motions) const {
  EvalFeatures out;
  out.rows.resize(static_cast<Eigen::Index>(motions.size()), cfg_.d_eval);
  constexpr std::size_t kChunk = 64;
  for (std::size_t i = 0; i < motions.size(); i += kChunk) {
    std::vector<const motion::MotionSequence*> chunk;
    for (std::size_t j = i; j < std::min(motions.size(), i + kChunk); ++j) chunk.push_back(&motions[j]);
    nn::Graph g(false);
    out.rows.middleRows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(chunk.size())) =
        g.value(embed_motions(g, chunk));
  }
  for (std::size_t i = 0; i < motions.size(); ++i) out.ids.push_back("motion" + std::to_string(i));
  return out;
}

void ContrastiveModel::save(const std::filesystem::path& path) const {
  nn::Checkpoint ck = nn::snapshot(
      store_, {{"format", "finemotion-evaluator"}, {"config", cfg_.to_json()}, {"motion_dim", motion_dim_}});
  ck.tensors["norm.mean"] = norm_.mean;
  ck.tensors["norm.std"] = norm_.std;
  nn::save_checkpoint(ck, path);
}

std::unique_ptr<ContrastiveModel> ContrastiveModel::load(const std::filesystem::path& path) {
  const nn::Checkpoint ck = nn::load_checkpoint(path);
  if (ck.metadata.value("format", std::string()) != "finemotion-evaluator")
    throw nn::CheckpointError(nn::CheckpointErrc::Corrupt, "not an evaluator checkpoint");
  auto model = std::make_unique<ContrastiveModel>(ContrastiveConfig::from_json(ck.metadata.at("config")),
                                                  ck.metadata.at("motion_dim").get<int>());
  nn::restore(model->store_, ck);
  model->norm_ = motion::NormStats{ck.tensors.at("norm.mean").row(0), ck.tensors.at("norm.std").row(0)};
  return model;
}

std::unique_ptr<ContrastiveModel> train_contrastive(std::span<const ContrastivePair> pairs,
                                                    const ContrastiveConfig& cfg,
                                                    const std::function<void(int, double)>& on_step) {
  if (pairs.size() < 2) throw EvalError(EvalErrc::TooFewSamples, "contrastive training needs at least 2 pairs");
  const int dim = pairs.front().motion->dim();
  auto model = std::make_unique<ContrastiveModel>(cfg, dim);

  std::vector<motion::MotionSequence> raw;
  for (const auto& p : pairs) raw.push_back(*p.motion);
  model->set_norm_stats(motion::NormStats::compute(raw));

  nn::Adam adam({.lr = cfg.lr});
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_int_distribution<std::size_t> pick(0, pairs.size() - 1);
  for (int step = 0; step < cfg.steps; ++step) {
    // Distinct texts only: a repeated text would be a false negative.
    std::set<std::string> seen;
    std::vector<std::string> texts;
    std::vector<const motion::MotionSequence*> motions;
    for (int attempt = 0; attempt < 8 * cfg.batch && static_cast<int>(texts.size()) < cfg.batch; ++attempt) {
      const auto& p = pairs[pick(rng)];
      if (!seen.insert(p.text).second) continue;
      texts.push_back(p.text);
      motions.push_back(p.motion);
    }
    if (texts.size() < 2) throw EvalError(EvalErrc::TooFewSamples, "fewer than 2 distinct texts");

    nn::Graph g;
    const nn::NodeId sim = nn::matmul_bt(g, model->embed_motions(g, motions), model->embed_texts(g, texts));
    const nn::NodeId loss = nn::hinge_contrastive(g, sim, cfg.margin);
    const double value = g.value(loss)(0, 0);
    if (!std::isfinite(value))
      throw EvalError(EvalErrc::NonFiniteLoss, "non-finite contrastive loss at step " + std::to_string(step + 1));
    model->parameters().zero_grad();
    g.backward(loss);
    adam.step(model->parameters());
    if (on_step) on_step(step, value);
  }
  return model;
}

}  // namespace finemotion::eval
