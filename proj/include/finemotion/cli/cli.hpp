#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "finemotion/dataset/synthetic.hpp"
#include "finemotion/diffusion/config.hpp"
#include "finemotion/diffusion/train.hpp"
#include "finemotion/eval/contrastive.hpp"
#include "finemotion/eval/evaluate.hpp"
#include "finemotion/prompt/client.hpp"
#include "finemotion/render/render.hpp"

namespace finemotion::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kTransport = 2, kAllDropped = 3 };

struct BuildOptions {
  bool mirror = true;
  double test_fraction = 0.18;
};

// Every option a command may read, resolved as defaults <- config file <-
// flags before any work starts. Sub-seeds derive from `seed`.
struct RunConfig {
  std::string command;
  std::uint64_t seed = 1;
  diffusion::ModelConfig model;
  diffusion::TrainConfig train;
  eval::ContrastiveConfig evaluator;
  eval::EvalOptions eval;
  prompt::LlmClientConfig client;
  std::string template_id = "P8";
  BuildOptions build;
  dataset::SyntheticConfig synth;
  render::RenderConfig render;
  std::map<std::string, std::string> paths;

  // Desk-scale defaults.
  static RunConfig defaults();
  // Overlays the sections present in `j`.
  void merge(const nlohmann::json& j);
  // Pushes `seed` into every component seed.
  void apply_seed();
  nlohmann::json to_json() const;
  void write(const std::filesystem::path& out_dir) const;
};

// Runs one command line (args[0] is the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace finemotion::cli
