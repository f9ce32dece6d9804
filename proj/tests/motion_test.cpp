#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "finemotion/motion/lr_words.hpp"
#include "finemotion/motion/motion.hpp"

namespace fm = finemotion::motion;
namespace s5 = finemotion::motion::stick5;

namespace {

fm::MotionSequence random_motion(int frames, int dim, std::uint64_t seed, std::string schema = "stick5") {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 3.0);
  fm::MotionSequence m;
  m.schema_id = std::move(schema);
  m.features.resize(frames, dim);
  for (Eigen::Index i = 0; i < m.features.size(); ++i) m.features.data()[i] = d(rng) + 5.0;
  return m;
}

// Left hand goes up over 10 frames, everything else is still.
fm::MotionSequence left_arm_raise() {
  fm::MotionSequence m;
  m.features = fm::Frames::Zero(10, s5::kDim);
  for (int f = 0; f < 10; ++f) {
    m.features(f, s5::y(s5::kRoot)) = 1.0;
    m.features(f, s5::x(s5::kLeftHand)) = 0.3;
    m.features(f, s5::y(s5::kLeftHand)) = 1.0 + 0.1 * f;
    m.features(f, s5::x(s5::kRightHand)) = -0.3;
    m.features(f, s5::y(s5::kRightHand)) = 1.0;
    m.features(f, s5::x(s5::kLeftFoot)) = 0.1;
    m.features(f, s5::x(s5::kRightFoot)) = -0.1;
    m.features(f, s5::kRootHeight) = 1.0;
  }
  return m;
}

}  // namespace

TEST(Normalize, MeanRowsBecomeZero) {
  fm::NormStats s{Eigen::RowVectorXd::LinSpaced(4, 1, 4), Eigen::RowVectorXd::Constant(4, 2.0)};
  fm::MotionSequence m;
  m.features = s.mean.replicate(3, 1);
  const auto n = fm::normalize(m, s);
  EXPECT_TRUE(n.normalized);
  EXPECT_EQ(n.features.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Normalize, IdentityStats) {
  const auto m = random_motion(5, 16, 1);
  const auto n = fm::normalize(m, fm::NormStats::identity(16));
  EXPECT_EQ(n.features, m.features);
}

TEST(Normalize, RoundTripRandom) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto m = random_motion(7, 16, seed);
    const auto s = fm::NormStats::compute({random_motion(30, 16, seed + 100)});
    const auto back = fm::denormalize(fm::normalize(m, s), s);
    EXPECT_LE((back.features - m.features).norm() / m.features.norm(), 1e-6);
    const auto n = fm::normalize(m, s);
    const auto again = fm::normalize(fm::denormalize(n, s), s);
    EXPECT_LE((again.features - n.features).norm() / n.features.norm(), 1e-6);
  }
}

TEST(Normalize, ClampedFloorRoundTrips) {
  fm::MotionSequence constant_channel = random_motion(20, 4, 3);
  constant_channel.features.col(2).setConstant(7.0);
  const auto s = fm::NormStats::compute({constant_channel});
  EXPECT_EQ(s.std(2), fm::kStdFloor);
  const auto back = fm::denormalize(fm::normalize(constant_channel, s), s);
  EXPECT_LE((back.features - constant_channel.features).norm() / constant_channel.features.norm(), 1e-6);
}

TEST(Normalize, Errors) {
  const auto m = random_motion(3, 16, 1);
  EXPECT_THROW(fm::normalize(m, fm::NormStats::identity(15)), fm::MotionError);
  const auto n = fm::normalize(m, fm::NormStats::identity(16));
  try {
    fm::normalize(n, fm::NormStats::identity(16));
    FAIL();
  } catch (const fm::MotionError& e) {
    EXPECT_EQ(e.code(), fm::MotionErrc::AlreadyNormalized);
  }
  try {
    fm::denormalize(m, fm::NormStats::identity(16));
    FAIL();
  } catch (const fm::MotionError& e) {
    EXPECT_EQ(e.code(), fm::MotionErrc::NotNormalized);
  }
}

TEST(Denormalize, ZeroGivesMean) {
  fm::NormStats s{Eigen::RowVectorXd::LinSpaced(3, -1, 1), Eigen::RowVectorXd::Constant(3, 4.0)};
  fm::MotionSequence z;
  z.features = fm::Frames::Zero(4, 3);
  z.normalized = true;
  const auto d = fm::denormalize(z, s);
  for (int f = 0; f < 4; ++f) EXPECT_EQ(d.features.row(f), s.mean);
}

TEST(Mirror, SymmetricMotionIsFixedPoint) {
  fm::MotionSequence m = left_arm_raise();
  for (int f = 0; f < m.frames(); ++f) {
    m.features(f, s5::y(s5::kRightHand)) = m.features(f, s5::y(s5::kLeftHand));
  }
  EXPECT_EQ(fm::mirror_motion(m).features, m.features);
}

TEST(Mirror, InvolutionStick5And263) {
  const auto a = random_motion(9, s5::kDim, 4);
  EXPECT_EQ(fm::mirror_motion(fm::mirror_motion(a)).features, a.features);
  const auto b = random_motion(6, 263, 5, "humanml3d_263");
  EXPECT_EQ(fm::mirror_motion(fm::mirror_motion(b)).features, b.features);
}

TEST(Mirror, PreservesShapeAndFrameEnergy) {
  for (const char* id : {"stick5", "humanml3d_263"}) {
    const auto& schema = fm::find_schema(id);
    const auto m = random_motion(8, schema.dim, 6, id);
    const auto r = fm::mirror_motion(m);
    EXPECT_EQ(r.frames(), m.frames());
    EXPECT_EQ(r.dim(), m.dim());
    EXPECT_EQ(r.fps, m.fps);
    for (int f = 0; f < m.frames(); ++f)
      EXPECT_NEAR(r.features.row(f).squaredNorm(), m.features.row(f).squaredNorm(), 1e-6);
  }
}

TEST(Mirror, LeftArmRaiseBecomesRightArmRaise) {
  const auto m = left_arm_raise();
  const auto r = fm::mirror_motion(m);
  auto activity = [](const fm::MotionSequence& x, int channel) {
    return x.features.col(channel).maxCoeff() - x.features.col(channel).minCoeff();
  };
  EXPECT_NEAR(activity(r, s5::y(s5::kRightHand)), 0.9, 1e-12);
  EXPECT_EQ(activity(r, s5::y(s5::kLeftHand)), 0.0);
  for (int f = 0; f < m.frames(); ++f) {
    EXPECT_EQ(r.features(f, s5::y(s5::kRightHand)), m.features(f, s5::y(s5::kLeftHand)));
    EXPECT_EQ(r.features(f, s5::x(s5::kRightHand)), -m.features(f, s5::x(s5::kLeftHand)));
    EXPECT_EQ(r.features(f, s5::x(s5::kLeftFoot)), -m.features(f, s5::x(s5::kRightFoot)));
    EXPECT_EQ(r.features(f, s5::kRootHeight), m.features(f, s5::kRootHeight));
  }
}

TEST(Mirror, UnknownSchema) {
  auto m = random_motion(2, 16, 1, "no_such_schema");
  try {
    fm::mirror_motion(m);
    FAIL();
  } catch (const fm::MotionError& e) {
    EXPECT_EQ(e.code(), fm::MotionErrc::UnknownSchema);
  }
}

TEST(Skeleton, Validation) {
  EXPECT_NO_THROW(fm::find_schema("stick5").skeleton.validate());
  fm::Skeleton bad = fm::find_schema("stick5").skeleton;
  bad.parent[2] = 2;
  EXPECT_THROW(bad.validate(), fm::MotionError);
  fm::Skeleton twice = fm::find_schema("stick5").skeleton;
  twice.lr_pairs.push_back({1, 3});
  EXPECT_THROW(twice.validate(), fm::MotionError);
}

TEST(MotionFile, RoundTripAndLengthCheck) {
  const auto dir = std::filesystem::temp_directory_path() / "finemotion_motion_test";
  std::filesystem::create_directories(dir);
  auto m = random_motion(11, 16, 9);
  m.features = m.features.cast<float>().cast<double>();
  m.fps = 30.0;
  fm::save_motion(m, dir / "a.json");
  const auto back = fm::load_motion(dir / "a.json");
  EXPECT_EQ(back.features, m.features);
  EXPECT_EQ(back.fps, 30.0);
  EXPECT_EQ(back.schema_id, "stick5");

  std::filesystem::resize_file(dir / "a.bin", 4 * 11 * 16 - 4);
  try {
    fm::load_motion(dir / "a.json");
    FAIL();
  } catch (const fm::MotionError& e) {
    EXPECT_EQ(e.code(), fm::MotionErrc::Io);
  }
  std::filesystem::remove_all(dir);
}

TEST(SwapWords, Examples) {
  EXPECT_EQ(fm::swap_lr_words("raises left arm"), "raises right arm");
  EXPECT_EQ(fm::swap_lr_words("walks forward"), "walks forward");
  EXPECT_EQ(fm::swap_lr_words("Left hand, RIGHT foot; turns leftward."), "Right hand, LEFT foot; turns rightward.");
  EXPECT_EQ(fm::swap_lr_words("leftover bright"), "leftover bright");
}

TEST(SwapWords, InvolutionSweep) {
  std::mt19937_64 rng(11);
  const std::vector<std::string> vocab = {"left", "Left", "LEFT", "right", "Right", "leftward", "rightmost",
                                          "LeFt", "arm", "the", "leftovers", "upright", ",", ".", " ", "\n"};
  std::uniform_int_distribution<int> pick(0, static_cast<int>(vocab.size()) - 1), len(1, 20);
  for (int i = 0; i < 1000; ++i) {
    std::string s;
    const int n = len(rng);
    for (int k = 0; k < n; ++k) s += vocab[static_cast<std::size_t>(pick(rng))] + (k % 2 ? " " : "");
    EXPECT_EQ(fm::swap_lr_words(fm::swap_lr_words(s)), s);
  }
}
