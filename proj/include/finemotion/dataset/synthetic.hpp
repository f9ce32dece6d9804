#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "finemotion/motion/motion.hpp"
#include "finemotion/prompt/record.hpp"
#include "finemotion/stepmark/stepmark.hpp"

namespace finemotion::dataset {

enum class Family { Squat, ArmRaise, Walk, Kick };
enum class Side { Left, Right, Both };

std::string to_string(Family f);
Family family_from_string(const std::string& s);

// Parameters of one stick5 motion. `level` (0..2) is squat depth, arm
// height (0..1), walking speed or kick height; `count` is the number of
// repetitions (walks: steps, 2..4).
struct MotionParams {
  Family family = Family::Squat;
  Side side = Side::Both;
  int level = 1;
  int count = 1;
  int frames = 50;
};

// Deterministic trajectory plus per-frame Gaussian jitter of std `noise`.
motion::MotionSequence synthesize_motion(const MotionParams& p, std::mt19937_64& rng, double noise = 0.003);
std::string coarse_text(const MotionParams& p);
stepmark::StepMarkedText fine_text(const MotionParams& p);

struct SyntheticSample {
  std::string id;
  MotionParams params;
  motion::MotionSequence motion;
  std::string coarse;
  stepmark::StepMarkedText fine;
};

struct SyntheticConfig {
  int motions = 200;
  std::vector<Family> families = {Family::Squat, Family::ArmRaise, Family::Walk, Family::Kick};
  int min_frames = 40;
  int max_frames = 60;
  double noise = 0.003;
  bool single_repetition = false;  // count 1 for squats, arm raises and kicks
  std::uint64_t seed = 1;
};

// Round-robin over families; the other parameters are drawn from the seed.
std::vector<SyntheticSample> make_synthetic_corpus(const SyntheticConfig& cfg);

// `dir/expansions.jsonl` and `dir/motions/<id>.{json,bin}`, the inputs of
// build_corpus, plus `dir/coarse.jsonl` and `dir/fixtures/responses.jsonl`
// for running the expansion step offline.
std::vector<prompt::ExpansionRecord> write_synthetic(const std::vector<SyntheticSample>& samples,
                                                     const std::filesystem::path& dir);

// The fine text as an expansion response with a pseudo-code section.
std::string synthetic_response(const stepmark::StepMarkedText& fine);

// Texts for a squat performed with both arms held above the head, a
// combination absent from the single-family corpora.
struct CombinedText {
  std::string coarse;
  stepmark::StepMarkedText fine;
};
CombinedText squat_with_raised_arms_text();

// Probe channels per frame: root height, and mean hand height relative to
// the root.
Eigen::VectorXd squat_channel(const motion::MotionSequence& m);
Eigen::VectorXd arm_channel(const motion::MotionSequence& m);
// Linear resampling to `n` points over the same time span.
Eigen::VectorXd resample(const Eigen::VectorXd& v, int n);
double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace finemotion::dataset
