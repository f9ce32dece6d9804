#include "finemotion/dataset/synthetic.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>

#include "finemotion/dataset/corpus.hpp"

namespace finemotion::dataset {
namespace {

namespace s5 = motion::stick5;
constexpr double kPi = std::numbers::pi;
constexpr double kStand = 1.0;    // root height when standing
constexpr double kHandX = 0.25;   // lateral hand offset
constexpr double kFootX = 0.15;   // lateral foot offset

const char* kCounts[] = {"once", "twice", "three times", "four times"};
const char* kNumbers[] = {"one", "two", "three", "four"};

std::string side_word(Side s) { return s == Side::Left ? "left" : s == Side::Right ? "right" : "both"; }
std::string other_word(Side s) { return s == Side::Left ? "right" : "left"; }

std::string arm_phrase(Side s) { return s == Side::Both ? "arms" : side_word(s) + " arm"; }

// Time inside the action window [0.15, 0.85], rescaled to [0, 1].
double action_time(int f, int frames) {
  const double t = frames > 1 ? static_cast<double>(f) / (frames - 1) : 0.0;
  return std::clamp((t - 0.15) / 0.7, 0.0, 1.0);
}

// `count` smooth bumps over the action window, each rising 0 -> 1 -> 0.
double bumps(double u, int count) {
  const double s = std::sin(kPi * count * u);
  return s * s;
}

void set_joint(motion::Frames& x, int f, int joint, double px, double py, double pz) {
  x(f, s5::x(joint)) = px;
  x(f, s5::y(joint)) = py;
  x(f, s5::z(joint)) = pz;
}

stepmark::StepMarkedText steps(std::vector<std::pair<std::string, std::string>> parts) {
  stepmark::StepMarkedText t;
  int k = 0;
  for (auto& [name, body] : parts) t.steps.push_back({++k, std::move(name), std::move(body)});
  return t;
}

}  // namespace

std::string to_string(Family f) {
  switch (f) {
    case Family::Squat: return "squat";
    case Family::ArmRaise: return "arm_raise";
    case Family::Walk: return "walk";
    case Family::Kick: return "kick";
  }
  return "unknown";
}

Family family_from_string(const std::string& s) {
  for (Family f : {Family::Squat, Family::ArmRaise, Family::Walk, Family::Kick})
    if (to_string(f) == s) return f;
  throw DatasetError(DatasetErrc::ParseFailure, "unknown motion family '" + s + "'");
}

motion::MotionSequence synthesize_motion(const MotionParams& p, std::mt19937_64& rng, double noise) {
  motion::MotionSequence m;
  m.schema_id = "stick5";
  m.features = motion::Frames::Zero(p.frames, s5::kDim);
  for (int f = 0; f < p.frames; ++f) {
    const double u = action_time(f, p.frames);
    double root_y = kStand, root_z = 0.0;
    double lh[3] = {kHandX, kStand - 0.05, 0.0}, rh[3] = {-kHandX, kStand - 0.05, 0.0};
    double lf[3] = {kFootX, 0.0, 0.0}, rf[3] = {-kFootX, 0.0, 0.0};
    switch (p.family) {
      case Family::Squat: {
        const double depth = 0.15 + 0.15 * p.level;
        const double e = bumps(u, p.count);
        root_y = kStand - depth * e;
        lh[1] = rh[1] = root_y - 0.05;
        lh[2] = rh[2] = 0.25 * e;
        break;
      }
      case Family::ArmRaise: {
        const double lift = p.level == 0 ? 0.45 : 0.85;
        const double e = bumps(u, p.count);
        if (p.side != Side::Right) {
          lh[1] += lift * e;
          lh[0] += 0.05 * e;
        }
        if (p.side != Side::Left) {
          rh[1] += lift * e;
          rh[0] -= 0.05 * e;
        }
        break;
      }
      case Family::Walk: {
        const double speed = 0.4 + 0.3 * p.level;  // metres per step
        const double smooth = u * u * (3.0 - 2.0 * u);
        root_z = speed * p.count * smooth;
        const double phase = kPi * p.count * u;
        const double lead = std::sin(phase);
        // The starting foot lifts during the first half cycle.
        double* first = p.side == Side::Right ? rf : lf;
        double* second = p.side == Side::Right ? lf : rf;
        first[1] = 0.12 * std::max(0.0, lead);
        second[1] = 0.12 * std::max(0.0, -lead);
        first[2] = root_z + 0.25 * lead;
        second[2] = root_z - 0.25 * lead;
        double* hand_first = p.side == Side::Right ? rh : lh;
        double* hand_second = p.side == Side::Right ? lh : rh;
        hand_first[2] = -0.15 * lead;
        hand_second[2] = 0.15 * lead;
        root_y = kStand - 0.03 * std::abs(lead);
        lh[1] = rh[1] = root_y - 0.05;
        break;
      }
      case Family::Kick: {
        const double height = 0.3 + 0.3 * p.level;
        const double e = bumps(u, p.count);
        double* foot = p.side == Side::Right ? rf : lf;
        double* hand = p.side == Side::Right ? lh : rh;  // opposite arm swings for balance
        foot[1] = height * e;
        foot[2] = 0.7 * std::sqrt(height) * e;
        hand[2] = 0.15 * e;
        root_z = -0.06 * e;
        break;
      }
    }
    set_joint(m.features, f, s5::kRoot, 0.0, root_y, root_z);
    // Hand z is stored relative to the root, foot z absolute.
    set_joint(m.features, f, s5::kLeftHand, lh[0], lh[1], root_z + lh[2]);
    set_joint(m.features, f, s5::kRightHand, rh[0], rh[1], root_z + rh[2]);
    set_joint(m.features, f, s5::kLeftFoot, lf[0], lf[1], lf[2]);
    set_joint(m.features, f, s5::kRightFoot, rf[0], rf[1], rf[2]);
    m.features(f, s5::kRootHeight) = root_y;
  }
  if (noise > 0.0) {
    std::normal_distribution<double> jitter(0.0, noise);
    for (Eigen::Index i = 0; i < m.features.size(); ++i) m.features.data()[i] += jitter(rng);
  }
  return m;
}

std::string coarse_text(const MotionParams& p) {
  static const char* kDepth[] = {"squats slightly", "squats halfway down", "squats deeply"};
  static const char* kSpeed[] = {"slowly", "steadily", "briskly"};
  static const char* kKick[] = {"low", "to waist height", "high"};
  const std::string count = kCounts[std::clamp(p.count, 1, 4) - 1];
  switch (p.family) {
    case Family::Squat: return std::string("A man ") + kDepth[p.level] + " " + count + ".";
    case Family::ArmRaise:
      return "A man raises his " + arm_phrase(p.side) + (p.level == 0 ? " to shoulder height " : " above his head ") +
             count + ".";
    case Family::Walk:
      return std::string("A man walks forward ") + kSpeed[p.level] + " for " + kNumbers[p.count - 1] +
             " steps, starting with his " + side_word(p.side) + " foot.";
    case Family::Kick:
      return std::string("A man kicks ") + kKick[p.level] + " with his " + side_word(p.side) + " leg " + count + ".";
  }
  return {};
}

stepmark::StepMarkedText fine_text(const MotionParams& p) {
  static const char* kBend[] = {"slightly, lowering his hips a little", "halfway, lowering his hips toward his knees",
                                "deeply, lowering his hips close to the ground"};
  static const char* kPace[] = {"slowly", "steadily", "briskly"};
  static const char* kKick[] = {"low, near the ground", "to waist height", "high, above his waist"};
  static const char* kMore[] = {"", " He repeats this once more.", " He repeats this two more times.",
                                " He repeats this three more times."};
  const int reps = std::clamp(p.count, 1, 4);
  switch (p.family) {
    case Family::Squat:
      return steps({{"beginning pose", "The man stands upright with his feet shoulder-width apart and his arms at his sides."},
                    {"squat", std::string("He bends his knees ") + kBend[p.level] + " while his arms reach forward."},
                    {"rise", std::string("He straightens his legs and rises back to standing.") + kMore[reps - 1]},
                    {"end pose", "He stands still with his arms at his sides."}});
    case Family::ArmRaise: {
      const std::string arm = arm_phrase(p.side);
      return steps({{"beginning pose", "The man stands upright with his arms relaxed at his sides."},
                    {"raise " + arm, "He lifts his " + arm + (p.level == 0 ? " up to shoulder height." : " straight above his head.")},
                    {"lower " + arm, "He lowers his " + arm + " back down to his " +
                                         (p.side == Side::Both ? "sides." : "side.") + kMore[reps - 1]},
                    {"end pose", "He stands still with his hands at his sides."}});
    }
    case Family::Walk:
      return steps({{"beginning pose", "The man stands upright with his feet together."},
                    {"lift foot", "He lifts his " + side_word(p.side) + " foot and steps forward " + kPace[p.level] + "."},
                    {"place foot", "He plants his " + side_word(p.side) + " foot and swings his " + other_word(p.side) +
                                       " foot forward, alternating his feet for " + kNumbers[p.count - 1] + " steps."},
                    {"end pose", "He stops and stands with his feet together."}});
    case Family::Kick:
      return steps({{"beginning pose", "The man stands upright with his feet together and his arms at his sides."},
                    {"lift leg", "He lifts his " + side_word(p.side) + " leg, bending at the knee."},
                    {"kick", "He kicks his " + side_word(p.side) + " foot forward " + kKick[p.level] + "." + kMore[reps - 1]},
                    {"lower leg", "He lowers his " + side_word(p.side) + " leg back to the ground."}});
  }
  return {};
}

std::vector<SyntheticSample> make_synthetic_corpus(const SyntheticConfig& cfg) {
  if (cfg.families.empty() || cfg.motions < 0 || cfg.min_frames < 2 || cfg.max_frames < cfg.min_frames)
    throw DatasetError(DatasetErrc::InvariantViolation, "bad synthetic corpus config");
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<int> frames(cfg.min_frames, cfg.max_frames), level3(0, 2), level2(0, 1);
  std::uniform_int_distribution<int> side2(0, 1), side3(0, 2), count3(1, 3), count2(1, 2), steps(2, 4);
  std::vector<SyntheticSample> out;
  for (int i = 0; i < cfg.motions; ++i) {
    MotionParams p;
    p.family = cfg.families[static_cast<std::size_t>(i) % cfg.families.size()];
    p.frames = frames(rng);
    switch (p.family) {
      case Family::Squat:
        p.side = Side::Both;
        p.level = level3(rng);
        p.count = count3(rng);
        break;
      case Family::ArmRaise:
        p.side = static_cast<Side>(side3(rng));
        p.level = level2(rng);
        p.count = count2(rng);
        break;
      case Family::Walk:
        p.side = static_cast<Side>(side2(rng));
        p.level = level3(rng);
        p.count = steps(rng);
        break;
      case Family::Kick:
        p.side = static_cast<Side>(side2(rng));
        p.level = level3(rng);
        p.count = count2(rng);
        break;
    }
    if (cfg.single_repetition && p.family != Family::Walk) p.count = 1;
    SyntheticSample s;
    char id[32];
    std::snprintf(id, sizeof id, "syn%04d", i);
    s.id = id;
    s.params = p;
    s.motion = synthesize_motion(p, rng, cfg.noise);
    s.coarse = coarse_text(p);
    s.fine = fine_text(p);
    s.fine.coarse = s.coarse;
    s.fine.source_id = s.id;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<prompt::ExpansionRecord> write_synthetic(const std::vector<SyntheticSample>& samples,
                                                     const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "motions");
  std::vector<prompt::ExpansionRecord> records;
  for (const auto& s : samples) {
    motion::save_motion(s.motion, dir / "motions" / (s.id + ".json"));
    records.push_back({s.id, s.id, s.coarse, stepmark::serialize(s.fine), "synthetic"});
  }
  prompt::write_expansions(records, dir / "expansions.jsonl");

  std::ofstream coarse(dir / "coarse.jsonl", std::ios::binary);
  for (const auto& s : samples) coarse << nlohmann::json{{"source_id", s.id}, {"coarse", s.coarse}}.dump() << '\n';
  std::filesystem::create_directories(dir / "fixtures");
  std::ofstream fixtures(dir / "fixtures" / "responses.jsonl", std::ios::binary);
  for (const auto& s : samples)
    fixtures << nlohmann::json{{"source_id", s.id}, {"responses", {synthetic_response(s.fine)}}}.dump() << '\n';
  if (!coarse || !fixtures) throw DatasetError(DatasetErrc::Io, "cannot write synthetic inputs under " + dir.string());
  return records;
}

std::string synthetic_response(const stepmark::StepMarkedText& fine) {
  std::string out = stepmark::serialize(fine) + "\nPseudo-code:\n";
  for (const auto& st : fine.steps) {
    std::string verb;
    for (char c : st.name) verb.push_back(std::isalnum(static_cast<unsigned char>(c)) ? static_cast<char>(std::tolower(c)) : '_');
    if (verb.empty() || std::isdigit(static_cast<unsigned char>(verb[0]))) verb = "step_" + verb;
    out += "step " + std::to_string(st.index) + ": " + st.name + "\n" + verb + "(step=" + std::to_string(st.index) + ")\n";
  }
  return out;
}

CombinedText squat_with_raised_arms_text() {
  CombinedText t;
  t.coarse = "A man squats deeply with his arms raised above his head.";
  t.fine = steps({{"beginning pose", "The man stands upright with his arms relaxed at his sides."},
                  {"raise arms", "He lifts his arms straight above his head."},
                  {"squat", "He bends his knees deeply, lowering his hips close to the ground while his arms stay above his head."},
                  {"rise", "He straightens his legs and rises back to standing, then lowers his arms back down to his sides."}});
  t.fine.coarse = t.coarse;
  return t;
}

Eigen::VectorXd squat_channel(const motion::MotionSequence& m) {
  return m.features.col(s5::kRootHeight);
}

Eigen::VectorXd arm_channel(const motion::MotionSequence& m) {
  return 0.5 * (m.features.col(s5::y(s5::kLeftHand)) + m.features.col(s5::y(s5::kRightHand))) -
         m.features.col(s5::y(s5::kRoot));
}

Eigen::VectorXd resample(const Eigen::VectorXd& v, int n) {
  Eigen::VectorXd out(n);
  if (v.size() == 1 || n == 1) return Eigen::VectorXd::Constant(n, v(0));
  for (int i = 0; i < n; ++i) {
    const double pos = static_cast<double>(i) * static_cast<double>(v.size() - 1) / (n - 1);
    const auto lo = static_cast<Eigen::Index>(std::floor(pos));
    const Eigen::Index hi = std::min<Eigen::Index>(lo + 1, v.size() - 1);
    const double w = pos - static_cast<double>(lo);
    out(i) = (1.0 - w) * v(lo) + w * v(hi);
  }
  return out;
}

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd ca = a.array() - a.mean(), cb = b.array() - b.mean();
  const double denom = ca.norm() * cb.norm();
  return denom > 0.0 ? ca.dot(cb) / denom : 0.0;
}

}  // namespace finemotion::dataset
