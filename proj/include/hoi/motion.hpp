#pragma once

#include <array>
#include <string_view>

#include "hoi/common.hpp"
#include "hoi/geometry.hpp"

namespace hoi::motion {

// 22-joint skeleton, SMPL joint order.
inline constexpr int kNumJoints = 22;

enum Joint : int {
  kPelvis = 0,
  kLeftHip = 1,
  kRightHip = 2,
  kSpine1 = 3,
  kLeftKnee = 4,
  kRightKnee = 5,
  kSpine2 = 6,
  kLeftAnkle = 7,
  kRightAnkle = 8,
  kSpine3 = 9,
  kLeftFoot = 10,
  kRightFoot = 11,
  kNeck = 12,
  kLeftCollar = 13,
  kRightCollar = 14,
  kHead = 15,
  kLeftShoulder = 16,
  kRightShoulder = 17,
  kLeftElbow = 18,
  kRightElbow = 19,
  kLeftWrist = 20,
  kRightWrist = 21,
};

inline constexpr std::array<int, kNumJoints> kParents = {
    -1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19};

// Candidate contact joints, in the order used by affordance label vectors:
// pelvis, neck, left/right foot, left/right shoulder, left/right hand.
inline constexpr int kNumPrimaryJoints = 8;
inline constexpr std::array<int, kNumPrimaryJoints> kPrimaryJoints = {
    kPelvis, kNeck, kLeftFoot, kRightFoot, kLeftShoulder, kRightShoulder, kLeftWrist, kRightWrist};

// Feet channels used for contact flags and the skate metric:
// left ankle, left foot, right ankle, right foot.
inline constexpr std::array<int, 4> kFootJoints = {kLeftAnkle, kLeftFoot, kRightAnkle, kRightFoot};

// Rest-pose offsets from each joint's parent (meters, +y up, facing +z).
const std::array<Vec3, kNumJoints>& rest_offsets();

// World-space rest pose joint positions with the pelvis at the given height.
std::array<Vec3, kNumJoints> rest_pose(double pelvis_height);

// Feature channel layout of a human motion frame (width 263):
//   [0]        root yaw rate, rad/frame
//   [1..2]     root planar velocity (x, z) in the heading-local frame, m/frame
//   [3]        root height, m
//   [4..66]    joints 1..21 positions, heading-local, relative to the root
//   [67..192]  joints 1..21 bone rotations, 6D representation
//   [193..258] all 22 joint velocities in the heading-local frame, m/frame
//   [259..262] foot contact flags (left ankle, left foot, right ankle, right foot)
namespace chan {
inline constexpr int kYawRate = 0;
inline constexpr int kVelX = 1;
inline constexpr int kVelZ = 2;
inline constexpr int kHeight = 3;
inline constexpr int kLocalPos = 4;
inline constexpr int kRot6D = 67;
inline constexpr int kVel = 193;
inline constexpr int kContact = 259;
inline constexpr int kDim = 263;
}  // namespace chan

// Object pose feature layout (width 6): axis-angle rotation, then translation.
namespace obj {
inline constexpr int kRot = 0;
inline constexpr int kTrans = 3;
inline constexpr int kDim = 6;
}  // namespace obj

struct GlobalJoints {
  Mat positions;  // L x 66, row l = 22 joints x (x, y, z)

  GlobalJoints() = default;
  explicit GlobalJoints(Eigen::Index frames) : positions(Mat::Zero(frames, 3 * kNumJoints)) {}

  Eigen::Index num_frames() const { return positions.rows(); }
  Vec3 joint(Eigen::Index l, int j) const { return positions.block<1, 3>(l, 3 * j).transpose(); }
  void set_joint(Eigen::Index l, int j, const Vec3& p) {
    positions.block<1, 3>(l, 3 * j) = p.transpose();
  }
};

struct HumanMotionSeq {
  Mat frames;  // L x 263
  double fps = 20.0;

  Eigen::Index num_frames() const { return frames.rows(); }
};

struct ObjectMotionSeq {
  Mat frames;  // L x 6

  Eigen::Index num_frames() const { return frames.rows(); }
  Vec3 rotation(Eigen::Index l) const { return frames.block<1, 3>(l, obj::kRot).transpose(); }
  Vec3 translation(Eigen::Index l) const { return frames.block<1, 3>(l, obj::kTrans).transpose(); }
};

// Heading angle (rotation about +y from the +z axis) implied by the hip axis.
double frame_heading(const GlobalJoints& joints, Eigen::Index l);

// Encode global joint positions into the feature representation. Velocity and
// yaw channels describe the step from frame l to l+1; the final frame repeats
// the previous step so every row is populated.
HumanMotionSeq encode_human(const GlobalJoints& joints, double fps = 20.0);

// Invert the representation back to global joint positions. Only the yaw,
// velocity, height, and local-position channels participate; the decoded clip
// starts at the origin facing +z.
GlobalJoints recover_global_joints(const HumanMotionSeq& seq);

// Foot-contact flag thresholds: a foot is planted when its per-frame
// displacement stays below the speed threshold (meters per frame) while the
// joint sits below the height threshold (meters).
inline constexpr double kContactSpeedThreshold = 0.025;
inline constexpr double kContactHeightThreshold = 0.05;

// World trajectories of two object-frame points under a pose sequence.
// rest_points is 2 x 3; the result is L x 6 (point 0 xyz, point 1 xyz).
Mat object_contact_trajectory(const ObjectMotionSeq& obj_seq, const Mat& rest_points);

}  // namespace hoi::motion
