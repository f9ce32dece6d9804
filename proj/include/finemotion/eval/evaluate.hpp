#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "finemotion/diffusion/model.hpp"
#include "finemotion/eval/contrastive.hpp"
#include "finemotion/eval/metrics.hpp"

namespace finemotion::eval {

struct EvalItem {
  diffusion::TextRequest text;        // generator input
  std::string eval_text;              // evaluator text (the coarse description)
  const motion::MotionSequence* real = nullptr;
};

using Generator =
    std::function<std::vector<motion::MotionSequence>(std::span<const diffusion::GenerationRequest>)>;

struct EvalOptions {
  int runs = 1;
  int max_k = 3;
  int negatives = 31;
  int diversity_pairs = 300;  // clamped to half the item count
  std::uint64_t seed = 11;
};

struct EvalReport {
  std::map<std::string, MetricSummary> metrics;  // fid, top1..topK, diversity
  int items = 0;
  bool fid_regularized = false;
  nlohmann::json to_json() const;
};

// Generates one motion per item per run (fresh generation seeds each run)
// and scores it against the real motions. Metric seeds are fixed across runs.
EvalReport evaluate(const ContrastiveModel& evaluator, std::span<const EvalItem> items, const Generator& generate,
                    const EvalOptions& opts);

// `evaluate` with the diffusion sampler as generator.
EvalReport evaluate_model(const diffusion::FineMotionModel& model, const ContrastiveModel& evaluator,
                          std::span<const EvalItem> items, const EvalOptions& opts);

// Text table: FID (lower is better), R-precision Top1/Top2 (higher is
// better), Diversity (closer to real is better).
std::string render_table(const std::vector<std::pair<std::string, EvalReport>>& rows);

}  // namespace finemotion::eval
