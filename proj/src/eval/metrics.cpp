#include "finemotion/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Eigenvalues>

namespace finemotion::eval {
namespace {

using Dense = Eigen::MatrixXd;

Dense covariance(const nn::Matrix& x, const Eigen::RowVectorXd& mean) {
  const Dense centered = x.rowwise() - mean;
  return centered.transpose() * centered / static_cast<double>(x.rows() - 1);
}

// Square root of a symmetric PSD matrix; negative round-off eigenvalues are
// clipped to zero.
Dense sqrt_psd(const Dense& m) {
  Eigen::SelfAdjointEigenSolver<Dense> es(0.5 * (m + m.transpose()));
  const Eigen::VectorXd roots = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

void EvalFeatures::validate(bool unit) const {
  if (!ids.empty() && static_cast<Eigen::Index>(ids.size()) != rows.rows())
    throw EvalError(EvalErrc::ShapeMismatch, "feature ids do not match rows");
  if (!rows.allFinite()) throw EvalError(EvalErrc::ShapeMismatch, "non-finite features");
  if (!unit) return;
  for (Eigen::Index i = 0; i < rows.rows(); ++i)
    if (std::abs(rows.row(i).norm() - 1.0) > 1e-5)
      throw EvalError(EvalErrc::ShapeMismatch, "feature row " + std::to_string(i) + " is not unit norm");
}

FidResult fid_detailed(const nn::Matrix& real, const nn::Matrix& gen) {
  if (real.rows() < 2 || gen.rows() < 2) throw EvalError(EvalErrc::TooFewSamples, "FID needs at least 2 samples per side");
  if (real.cols() != gen.cols()) throw EvalError(EvalErrc::ShapeMismatch, "FID feature widths differ");
  const Eigen::RowVectorXd mu_r = real.colwise().mean(), mu_g = gen.colwise().mean();
  Dense cov_r = covariance(real, mu_r), cov_g = covariance(gen, mu_g);
  FidResult out;
  const Eigen::Index d = real.cols();
  if (real.rows() < d + 1 || gen.rows() < d + 1) {
    cov_r += 1e-6 * Dense::Identity(d, d);
    cov_g += 1e-6 * Dense::Identity(d, d);
    out.regularized = true;
  }
  // Tr((S_r S_g)^1/2) = Tr((S_r^1/2 S_g S_r^1/2)^1/2), and the inner matrix
  // is symmetric.
  const Dense root_r = sqrt_psd(cov_r);
  Eigen::SelfAdjointEigenSolver<Dense> es(root_r * cov_g * root_r, Eigen::EigenvaluesOnly);
  const double tr_cross = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  out.value = (mu_r - mu_g).squaredNorm() + cov_r.trace() + cov_g.trace() - 2.0 * tr_cross;
  return out;
}

std::vector<double> r_precision(const nn::Matrix& texts, const nn::Matrix& motions, int max_k, int negatives,
                                std::uint64_t seed, std::span<const int> text_groups) {
  if (texts.rows() != motions.rows() || texts.cols() != motions.cols())
    throw EvalError(EvalErrc::ShapeMismatch, "text and motion embeddings differ in shape");
  if (max_k < 1 || negatives < 0) throw EvalError(EvalErrc::BadConfig, "bad retrieval parameters");
  const int n = static_cast<int>(texts.rows());
  if (!text_groups.empty() && static_cast<int>(text_groups.size()) != n)
    throw EvalError(EvalErrc::ShapeMismatch, "one text group per item");

  std::mt19937_64 rng(seed);
  std::vector<int> pool;
  std::vector<long> hits(static_cast<std::size_t>(max_k), 0);
  for (int i = 0; i < n; ++i) {
    pool.clear();
    for (int j = 0; j < n; ++j) {
      const bool same = text_groups.empty() ? j == i
                                            : text_groups[static_cast<std::size_t>(j)] ==
                                                  text_groups[static_cast<std::size_t>(i)];
      if (!same) pool.push_back(j);
    }
    if (static_cast<int>(pool.size()) < negatives)
      throw EvalError(EvalErrc::PoolTooSmall, "item " + std::to_string(i) + " has " + std::to_string(pool.size()) +
                                                  " candidate negatives, need " + std::to_string(negatives));
    // Partial Fisher-Yates: the first `negatives` entries become the sample.
    for (int j = 0; j < negatives; ++j) {
      std::uniform_int_distribution<int> pick(j, static_cast<int>(pool.size()) - 1);
      std::swap(pool[static_cast<std::size_t>(j)], pool[static_cast<std::size_t>(pick(rng))]);
    }
    const double own = texts.row(i).dot(motions.row(i));
    int rank = 0;
    for (int j = 0; j < negatives; ++j)
      if (texts.row(pool[static_cast<std::size_t>(j)]).dot(motions.row(i)) >= own) ++rank;
    for (int k = rank; k < max_k; ++k) ++hits[static_cast<std::size_t>(k)];
  }
  std::vector<double> out;
  for (long h : hits) out.push_back(static_cast<double>(h) / n);
  return out;
}

double pair_distance(const nn::Matrix& features, const std::vector<std::pair<int, int>>& pairs) {
  if (pairs.empty()) throw EvalError(EvalErrc::TooFewSamples, "no pairs");
  double sum = 0.0;
  for (auto [a, b] : pairs) sum += (features.row(a) - features.row(b)).norm();
  return sum / static_cast<double>(pairs.size());
}

double diversity(const nn::Matrix& features, int n_pairs, std::uint64_t seed) {
  if (n_pairs < 1 || features.rows() < 2 * n_pairs)
    throw EvalError(EvalErrc::TooFewSamples, "diversity needs 2 * n_pairs samples");
  std::vector<int> order(static_cast<std::size_t>(features.rows()));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::pair<int, int>> pairs;
  for (int p = 0; p < n_pairs; ++p)
    pairs.emplace_back(order[static_cast<std::size_t>(2 * p)], order[static_cast<std::size_t>(2 * p + 1)]);
  return pair_distance(features, pairs);
}

MetricSummary summarize(const std::vector<double>& values) {
  MetricSummary s;
  s.runs = static_cast<int>(values.size());
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / s.runs;
  if (s.runs < 2) return s;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.ci95 = 1.96 * std::sqrt(ss / (s.runs - 1)) / std::sqrt(static_cast<double>(s.runs));
  return s;
}

nlohmann::json to_json(const MetricSummary& s) {
  nlohmann::json j = {{"mean", s.mean}, {"ci95", s.ci95}, {"runs", s.runs}};
  if (s.single_run()) j["single_run"] = true;
  return j;
}

}  // namespace finemotion::eval
