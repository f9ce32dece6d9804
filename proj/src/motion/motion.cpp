#include "finemotion/motion/motion.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

#include <nlohmann/json.hpp>

namespace finemotion::motion {
namespace {

Skeleton stick5_skeleton() {
  Skeleton sk;
  sk.joint_names = {"root", "left_hand", "right_hand", "left_foot", "right_foot"};
  sk.parent = {-1, 0, 0, 0, 0};
  sk.lr_pairs = {{stick5::kLeftHand, stick5::kRightHand}, {stick5::kLeftFoot, stick5::kRightFoot}};
  return sk;
}

FeatureSchema make_stick5() {
  FeatureSchema s;
  s.id = "stick5";
  s.dim = stick5::kDim;
  s.skeleton = stick5_skeleton();
  for (int j = 0; j < stick5::kJoints; ++j) s.joint_xyz.push_back(stick5::x(j));
  s.mirror = make_channel_map(s.dim, s.skeleton, s.joint_xyz);
  return s;
}

// HumanML3D 263-d layout: root rot vel (1), root linear vel xz (2), root y
// (1), joint positions relative to root for joints 1..21 (63), 6D joint
// rotations for joints 1..21 (126), joint velocities for joints 0..21 (66),
// foot contacts [l_ankle, l_foot, r_ankle, r_foot] (4).
FeatureSchema make_humanml3d() {
  FeatureSchema s;
  s.id = "humanml3d_263";
  s.dim = 263;
  Skeleton& sk = s.skeleton;
  sk.joint_names = {"pelvis",     "left_hip",      "right_hip",      "spine1",     "left_knee",
                    "right_knee", "spine2",        "left_ankle",     "right_ankle", "spine3",
                    "left_foot",  "right_foot",    "neck",           "left_collar", "right_collar",
                    "head",       "left_shoulder", "right_shoulder", "left_elbow", "right_elbow",
                    "left_wrist", "right_wrist"};
  sk.parent = {-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19};
  sk.lr_pairs = {{1, 2}, {4, 5}, {7, 8}, {10, 11}, {13, 14}, {16, 17}, {18, 19}, {20, 21}};

  ChannelMap& cm = s.mirror;
  cm.source.resize(263);
  cm.sign.assign(263, 1.0);
  for (int c = 0; c < 263; ++c) cm.source[c] = c;
  cm.sign[0] = -1.0;  // yaw velocity
  cm.sign[1] = -1.0;  // lateral root velocity
  for (int j = 1; j < 22; ++j) {
    const int o = sk.counterpart(j);
    for (int c = 0; c < 3; ++c) cm.source[4 + (j - 1) * 3 + c] = 4 + (o - 1) * 3 + c;
    cm.sign[4 + (j - 1) * 3] = -1.0;
    // Reflection R' = M R M with M = diag(-1, 1, 1) on the two stored columns.
    static constexpr double rot_sign[6] = {1, -1, -1, -1, 1, 1};
    for (int c = 0; c < 6; ++c) {
      cm.source[67 + (j - 1) * 6 + c] = 67 + (o - 1) * 6 + c;
      cm.sign[67 + (j - 1) * 6 + c] = rot_sign[c];
    }
  }
  for (int j = 0; j < 22; ++j) {
    const int o = sk.counterpart(j);
    for (int c = 0; c < 3; ++c) cm.source[193 + j * 3 + c] = 193 + o * 3 + c;
    cm.sign[193 + j * 3] = -1.0;
  }
  cm.source[259] = 261;
  cm.source[260] = 262;
  cm.source[261] = 259;
  cm.source[262] = 260;
  return s;
}

struct Registry {
  std::mutex mu;
  std::map<std::string, FeatureSchema, std::less<>> schemas;
  Registry() {
    auto a = make_stick5();
    schemas.emplace(a.id, std::move(a));
    auto b = make_humanml3d();
    schemas.emplace(b.id, std::move(b));
  }
};

Registry& registry() {
  static Registry r;
  return r;
}

void check_dims(const MotionSequence& m, const NormStats& s) {
  if (m.dim() != s.dim() || s.std.size() != s.mean.size())
    throw MotionError(MotionErrc::DimensionMismatch,
                      "motion has " + std::to_string(m.dim()) + " channels, stats have " +
                          std::to_string(s.dim()));
}

Eigen::RowVectorXd floored(const Eigen::RowVectorXd& std) {
  return std.array().max(kStdFloor).matrix();
}

}  // namespace

void Skeleton::validate() const {
  const int n = joint_count();
  if (n < 1 || static_cast<int>(parent.size()) != n)
    throw MotionError(MotionErrc::InvalidSkeleton, "parent list does not match joint list");
  if (parent[0] != -1) throw MotionError(MotionErrc::InvalidSkeleton, "joint 0 must be the root");
  for (int j = 1; j < n; ++j) {
    // Walk to the root; a cycle or dangling index never reaches it.
    int cur = j, hops = 0;
    while (cur != 0) {
      const int p = parent[cur];
      if (p < 0 || p >= n || ++hops > n)
        throw MotionError(MotionErrc::InvalidSkeleton, "joint " + std::to_string(j) + " is not rooted at 0");
      cur = p;
    }
  }
  std::vector<int> seen(static_cast<std::size_t>(n), 0);
  for (auto [l, r] : lr_pairs) {
    if (l < 0 || r < 0 || l >= n || r >= n || l == r)
      throw MotionError(MotionErrc::InvalidSkeleton, "bad left/right pair");
    if (seen[l]++ || seen[r]++)
      throw MotionError(MotionErrc::InvalidSkeleton, "joint appears in two left/right pairs");
  }
}

int Skeleton::counterpart(int joint) const {
  for (auto [l, r] : lr_pairs) {
    if (l == joint) return r;
    if (r == joint) return l;
  }
  return joint;
}

const FeatureSchema& find_schema(std::string_view id) {
  auto& r = registry();
  std::lock_guard lock(r.mu);
  auto it = r.schemas.find(id);
  if (it == r.schemas.end())
    throw MotionError(MotionErrc::UnknownSchema, "unknown feature schema: " + std::string(id));
  return it->second;
}

void register_schema(FeatureSchema schema) {
  schema.skeleton.validate();
  if (static_cast<int>(schema.mirror.source.size()) != schema.dim ||
      schema.mirror.sign.size() != schema.mirror.source.size())
    throw MotionError(MotionErrc::UnknownSchema, "mirror map does not cover the schema");
  auto& r = registry();
  std::lock_guard lock(r.mu);
  r.schemas.insert_or_assign(schema.id, std::move(schema));
}

std::vector<std::string> schema_ids() {
  auto& r = registry();
  std::lock_guard lock(r.mu);
  std::vector<std::string> ids;
  for (const auto& [id, _] : r.schemas) ids.push_back(id);
  return ids;
}

void MotionSequence::validate() const {
  if (features.rows() < 1) throw MotionError(MotionErrc::InvalidMotion, "motion has no frames");
  if (!features.allFinite()) throw MotionError(MotionErrc::InvalidMotion, "motion has non-finite entries");
}

NormStats NormStats::compute(const std::vector<MotionSequence>& motions, double floor) {
  if (motions.empty()) throw MotionError(MotionErrc::InvalidMotion, "no motions for statistics");
  const int d = motions.front().dim();
  Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(d);
  double n = 0;
  for (const auto& m : motions) {
    if (m.dim() != d) throw MotionError(MotionErrc::DimensionMismatch, "mixed motion dimensions");
    sum += m.features.colwise().sum();
    n += m.frames();
  }
  NormStats s;
  s.mean = sum / n;
  Eigen::RowVectorXd sq = Eigen::RowVectorXd::Zero(d);
  for (const auto& m : motions) sq += (m.features.rowwise() - s.mean).array().square().matrix().colwise().sum();
  s.std = (sq / n).array().sqrt().max(floor).matrix();
  return s;
}

NormStats NormStats::identity(int dim) {
  return NormStats{Eigen::RowVectorXd::Zero(dim), Eigen::RowVectorXd::Ones(dim)};
}

MotionSequence normalize(const MotionSequence& m, const NormStats& s) {
  if (m.normalized) throw MotionError(MotionErrc::AlreadyNormalized, "motion is already normalized");
  check_dims(m, s);
  MotionSequence out = m;
  out.features = ((m.features.rowwise() - s.mean).array().rowwise() / floored(s.std).array()).matrix();
  out.normalized = true;
  return out;
}

MotionSequence denormalize(const MotionSequence& m, const NormStats& s) {
  if (!m.normalized) throw MotionError(MotionErrc::NotNormalized, "motion is not normalized");
  check_dims(m, s);
  MotionSequence out = m;
  out.features = ((m.features.array().rowwise() * floored(s.std).array()).matrix().rowwise() + s.mean);
  out.normalized = false;
  return out;
}

ChannelMap make_channel_map(int dim, const Skeleton& sk, const std::vector<int>& joint_xyz,
                            const std::vector<int>& extra_negated) {
  sk.validate();
  ChannelMap cm;
  cm.source.resize(static_cast<std::size_t>(dim));
  cm.sign.assign(static_cast<std::size_t>(dim), 1.0);
  for (int c = 0; c < dim; ++c) cm.source[c] = c;
  for (int j = 0; j < static_cast<int>(joint_xyz.size()); ++j) {
    const int o = sk.counterpart(j);
    for (int c = 0; c < 3; ++c) cm.source[joint_xyz[j] + c] = joint_xyz[o] + c;
    cm.sign[joint_xyz[j]] = -1.0;
  }
  for (int c : extra_negated) cm.sign[c] = -cm.sign[c];
  return cm;
}

MotionSequence mirror_motion(const MotionSequence& m, const FeatureSchema& schema) {
  if (m.dim() != schema.dim)
    throw MotionError(MotionErrc::UnknownSchema,
                      "motion has " + std::to_string(m.dim()) + " channels but schema " + schema.id +
                          " expects " + std::to_string(schema.dim));
  MotionSequence out = m;
  const auto& cm = schema.mirror;
  for (int c = 0; c < schema.dim; ++c) out.features.col(c) = cm.sign[c] * m.features.col(cm.source[c]);
  return out;
}

MotionSequence mirror_motion(const MotionSequence& m) { return mirror_motion(m, find_schema(m.schema_id)); }

void save_motion(const MotionSequence& m, const std::filesystem::path& sidecar) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  m.validate();
  std::filesystem::path bin = sidecar;
  bin.replace_extension(".bin");
  nlohmann::json meta;
  meta["fps"] = m.fps;
  meta["dim"] = m.dim();
  meta["frames"] = m.frames();
  meta["schema"] = m.schema_id;
  meta["normalized"] = m.normalized;
  meta["data"] = bin.filename().string();
  try {
    const auto& sk = find_schema(m.schema_id).skeleton;
    meta["skeleton"] = {{"joints", sk.joint_names}, {"parents", sk.parent}, {"lr_pairs", sk.lr_pairs}};
  } catch (const MotionError&) {
    meta["skeleton"] = nullptr;
  }
  {
    std::ofstream out(sidecar);
    if (!out) throw MotionError(MotionErrc::Io, "cannot write " + sidecar.string());
    out << meta.dump(2) << "\n";
  }
  std::ofstream out(bin, std::ios::binary);
  if (!out) throw MotionError(MotionErrc::Io, "cannot write " + bin.string());
  for (Eigen::Index i = 0; i < m.features.size(); ++i) {
    const float f = static_cast<float>(m.features.data()[i]);
    out.write(reinterpret_cast<const char*>(&f), 4);
  }
  if (!out) throw MotionError(MotionErrc::Io, "write failed: " + bin.string());
}

MotionSequence load_motion(const std::filesystem::path& sidecar) {
  std::ifstream in(sidecar);
  if (!in) throw MotionError(MotionErrc::Io, "cannot read " + sidecar.string());
  nlohmann::json meta;
  try {
    in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw MotionError(MotionErrc::Io, "bad motion sidecar " + sidecar.string() + ": " + e.what());
  }
  MotionSequence m;
  m.fps = meta.value("fps", kDefaultFps);
  m.normalized = meta.value("normalized", false);
  m.schema_id = meta.value("schema", std::string("stick5"));
  const long frames = meta.at("frames").get<long>();
  const long dim = meta.at("dim").get<long>();
  if (frames < 1 || dim < 1) throw MotionError(MotionErrc::InvalidMotion, "bad motion shape in " + sidecar.string());
  std::filesystem::path bin = sidecar.parent_path() / meta.value("data", sidecar.stem().string() + ".bin");
  std::ifstream bf(bin, std::ios::binary);
  if (!bf) throw MotionError(MotionErrc::Io, "cannot read " + bin.string());
  std::ostringstream ss;
  ss << bf.rdbuf();
  const std::string bytes = ss.str();
  if (bytes.size() != static_cast<std::size_t>(4 * frames * dim))
    throw MotionError(MotionErrc::Io, "payload of " + bin.string() + " has " + std::to_string(bytes.size()) +
                                          " bytes, expected " + std::to_string(4 * frames * dim));
  m.features.resize(frames, dim);
  for (Eigen::Index i = 0; i < m.features.size(); ++i) {
    float f;
    std::memcpy(&f, bytes.data() + 4 * i, 4);
    m.features.data()[i] = f;
  }
  m.validate();
  return m;
}

}  // namespace finemotion::motion
