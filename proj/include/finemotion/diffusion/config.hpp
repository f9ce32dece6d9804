#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "finemotion/stepmark/stepmark.hpp"
#include "finemotion/text/token_encoder.hpp"

namespace finemotion::diffusion {

enum class Variant { FineMotionDiffuse, MotionDiffuseCoarse, MotionDiffuseDetailed, AddFC };

enum class Ablation {
  ClipUnfrozen,
  UseEPerStep,
  NoCrossAttention,
  DelFirstLast,
  DelInner,
  DelFirstLastInput,
  DelInnerInput,
};

std::string to_string(Variant v);
std::string to_string(Ablation a);
// Throw DiffusionError(BadConfig) on unknown names.
Variant variant_from_string(std::string_view s);
Ablation ablation_from_string(std::string_view s);
const std::vector<Ablation>& all_ablations();

enum class Phase { Train, Inference };

struct ModelConfig {
  Variant variant = Variant::FineMotionDiffuse;
  std::set<Ablation> ablations;

  int d_model = 64;
  int heads = 4;
  int ffn = 128;
  int denoiser_layers = 2;
  int step_layers = 4;
  int fusion_layers = 4;
  int motion_dim = 16;
  std::string schema_id = "stick5";
  int max_frames = 60;

  // The 1e-4..0.02 range of a 1000-step schedule rescaled by 1000/50, so
  // that alpha_bar reaches ~1e-5 at the last step.
  int diffusion_steps = 50;
  double beta_start = 2e-3;
  double beta_end = 0.4;

  std::string encoder_profile = "toy_clip";  // toy_clip | hash_stub
  text::ToyEncoderConfig encoder;
  std::string encoder_weights;  // optional pretrained checkpoint

  std::uint64_t seed = 1;

  bool has(Ablation a) const { return ablations.count(a) != 0; }
  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

struct TextRequest {
  std::string coarse;
  std::optional<stepmark::StepMarkedText> fine;
};

struct GenerationRequest {
  TextRequest text;
  int frames = 60;
  std::uint64_t seed = 0;
};

}  // namespace finemotion::diffusion
