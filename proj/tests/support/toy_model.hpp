#pragma once

#include "finemotion/diffusion/config.hpp"

namespace finemotion::testing {

// Tiny dimensions for gradient checks and wiring probes.
inline diffusion::ModelConfig toy_config(diffusion::Variant variant = diffusion::Variant::FineMotionDiffuse) {
  diffusion::ModelConfig c;
  c.variant = variant;
  c.d_model = 8;
  c.heads = 2;
  c.ffn = 12;
  c.denoiser_layers = 1;
  c.step_layers = 1;
  c.fusion_layers = 1;
  c.motion_dim = 4;
  c.schema_id = "custom4";
  c.max_frames = 8;
  c.diffusion_steps = 10;
  c.beta_start = 0.01;
  c.beta_end = 0.3;
  c.encoder.width = 8;
  c.encoder.heads = 2;
  c.encoder.vocab_buckets = 40;
  c.encoder.max_tokens = 24;
  c.seed = 3;
  return c;
}

}  // namespace finemotion::testing
