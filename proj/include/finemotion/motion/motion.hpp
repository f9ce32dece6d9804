#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "finemotion/common/error.hpp"

namespace finemotion::motion {

enum class MotionErrc {
  DimensionMismatch,
  AlreadyNormalized,
  NotNormalized,
  UnknownSchema,
  InvalidMotion,
  InvalidSkeleton,
  Io,
};
using MotionError = Error<MotionErrc>;

using Frames = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kDefaultFps = 20.0;
inline constexpr double kStdFloor = 1e-8;

struct Skeleton {
  std::vector<std::string> joint_names;
  std::vector<int> parent;  // -1 for the root (index 0)
  std::vector<std::pair<int, int>> lr_pairs;

  int joint_count() const { return static_cast<int>(joint_names.size()); }
  // Throws InvalidSkeleton unless parents form one tree rooted at 0 and each
  // joint is in at most one left/right pair.
  void validate() const;
  // Index of the lateral counterpart of `joint` (itself when unpaired).
  int counterpart(int joint) const;
};

// Mirroring as a signed channel permutation: out[c] = sign[c] * in[source[c]].
struct ChannelMap {
  std::vector<int> source;
  std::vector<double> sign;
};

// A motion feature layout. `joint_xyz` lists the first channel of each
// joint's world-space XYZ triple when the layout carries one (used by the
// renderer); it is empty for opaque layouts.
struct FeatureSchema {
  std::string id;
  int dim = 0;
  Skeleton skeleton;
  ChannelMap mirror;
  std::vector<int> joint_xyz;
};

// Built-in ids: "stick5" (5-joint stick figure, D = 16) and "humanml3d_263".
const FeatureSchema& find_schema(std::string_view id);
void register_schema(FeatureSchema schema);
std::vector<std::string> schema_ids();

// Desk-scale layout: joints root, left_hand, right_hand, left_foot,
// right_foot; channels 3j..3j+2 hold joint j's XYZ (X lateral, left = +X,
// Y up, Z forward); channel 15 is root height.
namespace stick5 {
inline constexpr int kRoot = 0, kLeftHand = 1, kRightHand = 2, kLeftFoot = 3, kRightFoot = 4;
inline constexpr int kJoints = 5;
inline constexpr int kDim = 16;
inline constexpr int kRootHeight = 15;
inline constexpr int x(int joint) { return 3 * joint; }
inline constexpr int y(int joint) { return 3 * joint + 1; }
inline constexpr int z(int joint) { return 3 * joint + 2; }
}  // namespace stick5

struct MotionSequence {
  Frames features;
  double fps = kDefaultFps;
  bool normalized = false;
  std::string schema_id = "stick5";

  int frames() const { return static_cast<int>(features.rows()); }
  int dim() const { return static_cast<int>(features.cols()); }
  // Throws InvalidMotion when F < 1 or any entry is non-finite.
  void validate() const;
};

struct NormStats {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd std;

  int dim() const { return static_cast<int>(mean.size()); }
  // Per-channel mean/std over all frames of all motions; std clamped to `floor`.
  static NormStats compute(const std::vector<MotionSequence>& motions, double floor = kStdFloor);
  static NormStats identity(int dim);
};

MotionSequence normalize(const MotionSequence& m, const NormStats& s);
MotionSequence denormalize(const MotionSequence& m, const NormStats& s);

ChannelMap make_channel_map(int dim, const Skeleton& sk, const std::vector<int>& joint_xyz,
                            const std::vector<int>& extra_negated = {});

// Negates lateral coordinates and exchanges left/right channels according to
// the motion's schema. An involution.
MotionSequence mirror_motion(const MotionSequence& m, const FeatureSchema& schema);
MotionSequence mirror_motion(const MotionSequence& m);

// Motion files: `<stem>.json` sidecar + `<stem>.bin` raw little-endian
// float32, row-major frames x features. The sidecar path is the handle.
void save_motion(const MotionSequence& m, const std::filesystem::path& sidecar);
MotionSequence load_motion(const std::filesystem::path& sidecar);

}  // namespace finemotion::motion
