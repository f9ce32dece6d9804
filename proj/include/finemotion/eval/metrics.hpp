#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "finemotion/common/error.hpp"
#include "finemotion/nn/graph.hpp"

namespace finemotion::eval {

enum class EvalErrc { TooFewSamples, PoolTooSmall, NonFiniteLoss, ShapeMismatch, BadConfig };
using EvalError = Error<EvalErrc>;

// One embedding per row, in the shared evaluator space.
struct EvalFeatures {
  nn::Matrix rows;
  std::vector<std::string> ids;

  int size() const { return static_cast<int>(rows.rows()); }
  int dim() const { return static_cast<int>(rows.cols()); }
  // Throws ShapeMismatch on non-finite rows or when `unit` and some row is
  // not unit norm within 1e-5.
  void validate(bool unit = true) const;
};

struct FidResult {
  double value = 0.0;
  // 1e-6 I was added to both covariances (fewer than dim+1 samples).
  bool regularized = false;
};

// Frechet distance between Gaussian fits (sample covariance, N-1).
// Throws TooFewSamples below two rows per side.
FidResult fid_detailed(const nn::Matrix& real, const nn::Matrix& gen);
inline double fid(const EvalFeatures& real, const EvalFeatures& gen) { return fid_detailed(real.rows, gen.rows).value; }

// Top-k retrieval accuracy for k = 1..max_k. Row i of `texts` is the match
// of row i of `motions`; each motion ranks its text against `negatives`
// other texts drawn without replacement. With `text_groups`, negatives come
// only from items of a different group (items sharing a text string share a
// group). Ties count against the match.
std::vector<double> r_precision(const nn::Matrix& texts, const nn::Matrix& motions, int max_k, int negatives,
                                std::uint64_t seed, std::span<const int> text_groups = {});

// Mean Euclidean distance over explicit row pairs.
double pair_distance(const nn::Matrix& features, const std::vector<std::pair<int, int>>& pairs);
// Mean distance over `n_pairs` disjoint random pairs.
double diversity(const nn::Matrix& features, int n_pairs, std::uint64_t seed);

struct MetricSummary {
  double mean = 0.0;
  double ci95 = 0.0;  // normal approximation, 1.96 * sd / sqrt(runs)
  int runs = 0;
  bool single_run() const { return runs == 1; }
};

MetricSummary summarize(const std::vector<double>& values);
nlohmann::json to_json(const MetricSummary& s);

}  // namespace finemotion::eval
