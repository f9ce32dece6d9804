#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <filesystem>
#include <random>

#include "finemotion/eval/contrastive.hpp"
#include "finemotion/eval/evaluate.hpp"
#include "finemotion/eval/metrics.hpp"
#include "finemotion/nn/checkpoint.hpp"

namespace ev = finemotion::eval;
namespace nn = finemotion::nn;
namespace mo = finemotion::motion;

namespace {

nn::Matrix gaussian(int rows, int cols, std::uint64_t seed, double mean = 0.0, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(mean, sd);
  nn::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

nn::Matrix unit_rows(int rows, int cols, std::uint64_t seed) {
  nn::Matrix m = gaussian(rows, cols, seed);
  m.rowwise().normalize();
  return m;
}

// Loops instead of Eigen reductions, and the general (non-symmetric)
// eigen solver on the covariance product.
double brute_force_fid(const nn::Matrix& a, const nn::Matrix& b) {
  auto stats = [](const nn::Matrix& x) {
    const int n = static_cast<int>(x.rows()), d = static_cast<int>(x.cols());
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) mu(j) += x(i, j) / n;
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k) cov(j, k) += (x(i, j) - mu(j)) * (x(i, k) - mu(k)) / (n - 1);
    return std::pair{mu, cov};
  };
  const auto [mu_a, cov_a] = stats(a);
  const auto [mu_b, cov_b] = stats(b);
  Eigen::EigenSolver<Eigen::MatrixXd> es(cov_a * cov_b);
  double tr_sqrt = 0.0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) tr_sqrt += std::sqrt(std::max(0.0, es.eigenvalues()(i).real()));
  return (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * tr_sqrt;
}

Eigen::MatrixXd random_rotation(int d, std::uint64_t seed) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(Eigen::MatrixXd(gaussian(d, d, seed)));
  return qr.householderQ();
}

}  // namespace

TEST(Fid, IdenticalSetsAreZero) {
  const nn::Matrix a = gaussian(200, 8, 1);
  EXPECT_LE(std::abs(ev::fid_detailed(a, a).value), 1e-8);
  const nn::Matrix small = unit_rows(20, 32, 2);
  const auto r = ev::fid_detailed(small, small);
  EXPECT_TRUE(r.regularized);
  EXPECT_LE(std::abs(r.value), 1e-8);
}

TEST(Fid, OneDimensionalClosedForm) {
  const nn::Matrix z = gaussian(500, 1, 3);
  for (auto [m1, m2, sd] : {std::tuple{0.0, 1.0, 1.0}, std::tuple{-2.5, 0.75, 0.3}, std::tuple{4.0, 4.0, 2.0}}) {
    const nn::Matrix a = (z.array() * sd + m1).matrix(), b = (z.array() * sd + m2).matrix();
    EXPECT_NEAR(ev::fid_detailed(a, b).value, (m1 - m2) * (m1 - m2), 1e-10);
  }
}

TEST(Fid, MatchesBruteForce) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const nn::Matrix a = gaussian(60, 8, 10 + s), b = gaussian(45, 8, 20 + s, 0.3, 1.4);
    EXPECT_NEAR(ev::fid_detailed(a, b).value, brute_force_fid(a, b), 1e-6);
  }
}

TEST(Fid, SymmetricAndNonNegative) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const nn::Matrix a = unit_rows(40, 6, 100 + s), b = unit_rows(25 + static_cast<int>(s), 6, 200 + s);
    const double ab = ev::fid_detailed(a, b).value, ba = ev::fid_detailed(b, a).value;
    EXPECT_NEAR(ab, ba, 1e-8);
    EXPECT_GE(ab, -1e-8);
  }
}

TEST(Fid, TooFewSamples) {
  try {
    ev::fid_detailed(gaussian(1, 3, 1), gaussian(5, 3, 2));
    FAIL();
  } catch (const ev::EvalError& e) {
    EXPECT_EQ(e.code(), ev::EvalErrc::TooFewSamples);
  }
}

TEST(RPrecision, OracleEmbeddingsArePerfect) {
  const nn::Matrix e = unit_rows(100, 16, 4);
  const auto tops = ev::r_precision(e, e, 3, 31, 1);
  for (double t : tops) EXPECT_EQ(t, 1.0);
}

TEST(RPrecision, RandomEmbeddingsAtChance) {
  const int n = 2000;
  const auto tops = ev::r_precision(unit_rows(n, 16, 5), unit_rows(n, 16, 6), 2, 31, 2);
  const double p = 1.0 / 32.0, sigma = std::sqrt(p * (1 - p) / n);
  EXPECT_NEAR(tops[0], p, 3 * sigma);
  EXPECT_NEAR(tops[1], 2 * p, 3 * std::sqrt(2 * p * (1 - 2 * p) / n));
}

TEST(RPrecision, MonotoneAndDeterministic) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const nn::Matrix t = unit_rows(64, 8, 300 + s), m = unit_rows(64, 8, 400 + s);
    const auto tops = ev::r_precision(t, m, 5, 31, s);
    for (std::size_t k = 1; k < tops.size(); ++k) EXPECT_LE(tops[k - 1], tops[k]);
    EXPECT_LE(tops.back(), 1.0);
    EXPECT_EQ(tops, ev::r_precision(t, m, 5, 31, s));
  }
}

TEST(RPrecision, PoolTooSmall) {
  const nn::Matrix e = unit_rows(31, 4, 1);
  try {
    ev::r_precision(e, e, 1, 31, 0);
    FAIL();
  } catch (const ev::EvalError& err) {
    EXPECT_EQ(err.code(), ev::EvalErrc::PoolTooSmall);
  }
  EXPECT_NO_THROW(ev::r_precision(unit_rows(32, 4, 1), unit_rows(32, 4, 2), 1, 31, 0));
}

TEST(RPrecision, SharedTextsAreNotNegatives) {
  // 40 distinct texts, each used by two items with identical embeddings.
  const nn::Matrix base = unit_rows(40, 16, 8);
  const nn::Matrix e = base.replicate(2, 1);
  std::vector<int> groups;
  for (int i = 0; i < 80; ++i) groups.push_back(i % 40);
  EXPECT_EQ(ev::r_precision(e, e, 1, 31, 3, groups)[0], 1.0);
  // Without groups the duplicate ties and counts against the match.
  EXPECT_LT(ev::r_precision(e, e, 1, 31, 3)[0], 1.0);
  const std::vector<int> few(80, 0);
  EXPECT_THROW(ev::r_precision(e, e, 1, 31, 3, few), ev::EvalError);
}

TEST(Diversity, IdenticalIsZero) {
  const nn::Matrix row = unit_rows(1, 8, 1);
  EXPECT_EQ(ev::diversity(row.replicate(50, 1), 20, 3), 0.0);
}

TEST(Diversity, AntipodalClusters) {
  const nn::Matrix v = unit_rows(1, 8, 2);
  nn::Matrix f(20, 8);
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < 10; ++i) {
    f.row(i) = v;
    f.row(10 + i) = -v;
    pairs.emplace_back(i, 10 + i);
  }
  EXPECT_NEAR(ev::pair_distance(f, pairs), 2.0, 1e-12);
}

TEST(Diversity, MatchesExhaustiveMean) {
  const nn::Matrix f = unit_rows(800, 8, 7);
  double all = 0.0;
  long count = 0;
  for (Eigen::Index i = 0; i < f.rows(); ++i)
    for (Eigen::Index j = i + 1; j < f.rows(); ++j, ++count) all += (f.row(i) - f.row(j)).norm();
  all /= static_cast<double>(count);
  EXPECT_NEAR(ev::diversity(f, 300, 9), all, 0.05 * all);
}

TEST(Diversity, RotationInvariant) {
  const nn::Matrix f = gaussian(100, 8, 8);
  const nn::Matrix rotated = f * random_rotation(8, 9);
  EXPECT_NEAR(ev::diversity(f, 40, 1), ev::diversity(rotated, 40, 1), 1e-6);
  EXPECT_THROW(ev::diversity(f, 51, 1), ev::EvalError);
}

TEST(Summary, ConfidenceInterval) {
  const auto one = ev::summarize({0.7});
  EXPECT_TRUE(one.single_run());
  EXPECT_EQ(one.ci95, 0.0);
  EXPECT_TRUE(ev::to_json(one).value("single_run", false));
  const auto s = ev::summarize({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_NEAR(s.ci95, 1.96 * std::sqrt(5.0 / 3.0) / 2.0, 1e-12);
}

namespace {

// Four separable families: family k lifts channel k over a short ramp.
struct ToyCorpus {
  std::vector<mo::MotionSequence> motions;
  std::vector<std::string> texts;
  std::vector<int> family;
};

ToyCorpus toy_corpus(int per_family, std::uint64_t seed) {
  static const char* kTexts[] = {"a person squats down", "a person waves an arm", "a person jumps up",
                                 "a person kicks forward"};
  ToyCorpus c;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.1);
  std::uniform_int_distribution<int> frames(8, 14);
  for (int k = 0; k < 4; ++k)
    for (int i = 0; i < per_family; ++i) {
      mo::MotionSequence m;
      m.schema_id = "custom4";
      const int n = frames(rng);
      m.features = nn::Matrix::Zero(n, 4);
      for (int r = 0; r < n; ++r) {
        for (int ch = 0; ch < 4; ++ch) m.features(r, ch) = noise(rng);
        m.features(r, k) += static_cast<double>(r) / n;
      }
      c.motions.push_back(std::move(m));
      c.texts.push_back(kTexts[k]);
      c.family.push_back(k);
    }
  return c;
}

double matched_fraction(const ev::ContrastiveModel& model, const ToyCorpus& c) {
  const auto t = model.encode_texts(c.texts), m = model.encode_motions(c.motions);
  long good = 0, total = 0;
  for (int i = 0; i < m.size(); ++i)
    for (int j = 0; j < m.size(); ++j) {
      if (c.family[static_cast<std::size_t>(i)] == c.family[static_cast<std::size_t>(j)]) continue;
      ++total;
      if (m.rows.row(i).dot(t.rows.row(i)) > m.rows.row(i).dot(t.rows.row(j))) ++good;
    }
  return static_cast<double>(good) / static_cast<double>(total);
}

std::vector<ev::ContrastivePair> pairs_of(const ToyCorpus& c) {
  std::vector<ev::ContrastivePair> out;
  for (std::size_t i = 0; i < c.motions.size(); ++i) out.push_back({c.texts[i], &c.motions[i]});
  return out;
}

ev::ContrastiveConfig small_config() {
  ev::ContrastiveConfig cfg;
  cfg.d_eval = 8;
  cfg.width = 16;
  cfg.heads = 2;
  cfg.ffn = 32;
  cfg.steps = 150;
  cfg.batch = 4;
  cfg.lr = 5e-3;
  return cfg;
}

}  // namespace

TEST(Contrastive, OutputsAreUnitNorm) {
  ev::ContrastiveModel model(small_config(), 4);
  const auto c = toy_corpus(3, 1);
  model.encode_texts(c.texts).validate();
  model.encode_motions(c.motions).validate();
}

TEST(Contrastive, UntrainedIsUninformative) {
  ev::ContrastiveModel model(small_config(), 4);
  const auto c = toy_corpus(10, 2);
  EXPECT_NEAR(matched_fraction(model, c), 0.5, 0.3);
}

TEST(Contrastive, SeparatesFamilies) {
  const auto train = toy_corpus(12, 3), test = toy_corpus(6, 4);
  const auto pairs = pairs_of(train);
  const auto model = ev::train_contrastive(pairs, small_config());
  EXPECT_GE(matched_fraction(*model, test), 0.95);
}

TEST(Contrastive, DeterministicAndRoundTrips) {
  const auto c = toy_corpus(4, 5);
  const auto pairs = pairs_of(c);
  auto cfg = small_config();
  cfg.steps = 10;
  const auto a = ev::train_contrastive(pairs, cfg), b = ev::train_contrastive(pairs, cfg);
  const auto bytes = [](const ev::ContrastiveModel& m) {
    return nn::serialize_checkpoint(nn::snapshot(m.parameters(), {}));
  };
  EXPECT_EQ(bytes(*a), bytes(*b));

  const auto path = std::filesystem::temp_directory_path() / "finemotion_eval_ckpt.fmck";
  a->save(path);
  const auto loaded = ev::ContrastiveModel::load(path);
  // Weights are stored as float32.
  EXPECT_LT((loaded->encode_motions(c.motions).rows - a->encode_motions(c.motions).rows).cwiseAbs().maxCoeff(), 1e-5);
  EXPECT_LT((loaded->encode_texts(c.texts).rows - a->encode_texts(c.texts).rows).cwiseAbs().maxCoeff(), 1e-5);
  std::filesystem::remove(path);
}

TEST(Evaluate, DeterministicGeneratorHasZeroInterval) {
  const auto c = toy_corpus(10, 6);
  ev::ContrastiveModel evaluator(small_config(), 4);
  std::vector<ev::EvalItem> items;
  for (std::size_t i = 0; i < c.motions.size(); ++i) items.push_back({{c.texts[i], std::nullopt}, c.texts[i], &c.motions[i]});
  const ev::Generator copy_real = [&](std::span<const finemotion::diffusion::GenerationRequest> reqs) {
    std::vector<mo::MotionSequence> out;
    for (std::size_t i = 0; i < reqs.size(); ++i) out.push_back(c.motions[i]);
    return out;
  };
  const auto report = ev::evaluate(evaluator, items, copy_real, {.runs = 4, .negatives = 3});
  EXPECT_EQ(report.metrics.at("fid").ci95, 0.0);
  EXPECT_LE(std::abs(report.metrics.at("fid").mean), 1e-8);
  EXPECT_EQ(report.metrics.at("top1").ci95, 0.0);
  EXPECT_EQ(report.metrics.at("diversity").runs, 4);
  const auto single = ev::evaluate(evaluator, items, copy_real, {.runs = 1, .negatives = 3});
  EXPECT_TRUE(single.metrics.at("top2").single_run());
  const std::string table = ev::render_table({{"Real motions", report}});
  EXPECT_NE(table.find("Real motions"), std::string::npos);
  EXPECT_NE(table.find("Top2"), std::string::npos);
}

TEST(Evaluate, FreshSeedsPerRun) {
  const auto c = toy_corpus(10, 7);
  ev::ContrastiveModel evaluator(small_config(), 4);
  std::vector<ev::EvalItem> items;
  for (std::size_t i = 0; i < c.motions.size(); ++i) items.push_back({{c.texts[i], std::nullopt}, c.texts[i], &c.motions[i]});
  std::set<std::uint64_t> seeds;
  const ev::Generator noise = [&](std::span<const finemotion::diffusion::GenerationRequest> reqs) {
    std::vector<mo::MotionSequence> out;
    for (const auto& r : reqs) {
      seeds.insert(r.seed);
      mo::MotionSequence m;
      m.features = gaussian(r.frames, 4, r.seed);
      out.push_back(std::move(m));
    }
    return out;
  };
  const auto report = ev::evaluate(evaluator, items, noise, {.runs = 3, .negatives = 3});
  EXPECT_EQ(seeds.size(), 3 * items.size());
  EXPECT_GT(report.metrics.at("fid").ci95, 0.0);
}
