#include "finemotion/diffusion/config.hpp"

#include <array>
#include <utility>

#include "finemotion/diffusion/schedule.hpp"

namespace finemotion::diffusion {
namespace {

constexpr std::array<std::pair<Variant, std::string_view>, 4> kVariants{{
    {Variant::FineMotionDiffuse, "FineMotionDiffuse"},
    {Variant::MotionDiffuseCoarse, "MotionDiffuse_coarse"},
    {Variant::MotionDiffuseDetailed, "MotionDiffuse_detailed"},
    {Variant::AddFC, "MotionDiffuse_AddFC"},
}};

constexpr std::array<std::pair<Ablation, std::string_view>, 7> kAblations{{
    {Ablation::ClipUnfrozen, "clip_unfrozen"},
    {Ablation::UseEPerStep, "use_E_per_step"},
    {Ablation::NoCrossAttention, "no_cross_attention"},
    {Ablation::DelFirstLast, "delFirstLast"},
    {Ablation::DelInner, "delInner"},
    {Ablation::DelFirstLastInput, "delFirstLast_input"},
    {Ablation::DelInnerInput, "delInner_input"},
}};

}  // namespace

std::string to_string(Variant v) {
  for (const auto& [k, name] : kVariants)
    if (k == v) return std::string(name);
  return "unknown";
}

std::string to_string(Ablation a) {
  for (const auto& [k, name] : kAblations)
    if (k == a) return std::string(name);
  return "unknown";
}

Variant variant_from_string(std::string_view s) {
  for (const auto& [k, name] : kVariants)
    if (name == s) return k;
  if (s == "AddFC") return Variant::AddFC;
  throw DiffusionError(DiffusionErrc::BadConfig, "unknown variant '" + std::string(s) + "'");
}

Ablation ablation_from_string(std::string_view s) {
  for (const auto& [k, name] : kAblations)
    if (name == s) return k;
  throw DiffusionError(DiffusionErrc::BadConfig, "unknown ablation '" + std::string(s) + "'");
}

const std::vector<Ablation>& all_ablations() {
  static const std::vector<Ablation> v = [] {
    std::vector<Ablation> out;
    for (const auto& [k, name] : kAblations) out.push_back(k);
    return out;
  }();
  return v;
}

void ModelConfig::validate() const {
  auto bad = [](const std::string& why) { throw DiffusionError(DiffusionErrc::BadConfig, why); };
  if (d_model < 2 || d_model % 2 != 0) bad("d_model must be even and >= 2");
  if (heads < 1 || d_model % heads != 0) bad("d_model must be divisible by heads");
  if (ffn < 1 || denoiser_layers < 1 || step_layers < 0 || fusion_layers < 0) bad("bad layer sizes");
  if (motion_dim < 1 || max_frames < 1) bad("bad motion dimensions");
  if (encoder_profile != "toy_clip" && encoder_profile != "hash_stub")
    bad("unknown encoder profile '" + encoder_profile + "'");
  if (encoder_profile == "hash_stub" && has(Ablation::ClipUnfrozen)) bad("the hash stub encoder has no parameters");
  if (has(Ablation::DelFirstLast) && has(Ablation::DelInner)) bad("delFirstLast and delInner are exclusive");
  if (has(Ablation::DelFirstLastInput) && has(Ablation::DelInnerInput))
    bad("delFirstLast_input and delInner_input are exclusive");
  const bool fine_ablation = has(Ablation::UseEPerStep) || has(Ablation::NoCrossAttention);
  if (fine_ablation && variant != Variant::FineMotionDiffuse)
    bad("use_E_per_step / no_cross_attention only apply to FineMotionDiffuse");
  make_schedule(diffusion_steps, beta_start, beta_end);
}

nlohmann::json ModelConfig::to_json() const {
  nlohmann::json abl = nlohmann::json::array();
  for (Ablation a : all_ablations())
    if (has(a)) abl.push_back(to_string(a));
  return {{"variant", to_string(variant)},
          {"ablations", abl},
          {"d_model", d_model},
          {"heads", heads},
          {"ffn", ffn},
          {"denoiser_layers", denoiser_layers},
          {"step_layers", step_layers},
          {"fusion_layers", fusion_layers},
          {"motion_dim", motion_dim},
          {"schema_id", schema_id},
          {"max_frames", max_frames},
          {"schedule", {{"steps", diffusion_steps}, {"beta_start", beta_start}, {"beta_end", beta_end}}},
          {"encoder_profile", encoder_profile},
          {"encoder", encoder.to_json()},
          {"encoder_weights", encoder_weights},
          {"seed", seed}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  if (j.contains("variant")) c.variant = variant_from_string(j.at("variant").get<std::string>());
  if (j.contains("ablations"))
    for (const auto& a : j.at("ablations")) c.ablations.insert(ablation_from_string(a.get<std::string>()));
  c.d_model = j.value("d_model", c.d_model);
  c.heads = j.value("heads", c.heads);
  c.ffn = j.value("ffn", c.ffn);
  c.denoiser_layers = j.value("denoiser_layers", c.denoiser_layers);
  c.step_layers = j.value("step_layers", c.step_layers);
  c.fusion_layers = j.value("fusion_layers", c.fusion_layers);
  c.motion_dim = j.value("motion_dim", c.motion_dim);
  c.schema_id = j.value("schema_id", c.schema_id);
  c.max_frames = j.value("max_frames", c.max_frames);
  if (j.contains("schedule")) {
    const auto& s = j.at("schedule");
    c.diffusion_steps = s.value("steps", c.diffusion_steps);
    c.beta_start = s.value("beta_start", c.beta_start);
    c.beta_end = s.value("beta_end", c.beta_end);
  }
  c.encoder_profile = j.value("encoder_profile", c.encoder_profile);
  if (j.contains("encoder")) c.encoder = text::ToyEncoderConfig::from_json(j.at("encoder"));
  c.encoder_weights = j.value("encoder_weights", c.encoder_weights);
  c.seed = j.value("seed", c.seed);
  return c;
}

}  // namespace finemotion::diffusion
