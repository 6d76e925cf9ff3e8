#include "hoi/motion.hpp"

#include <cmath>

namespace hoi::motion {
namespace {

double wrap_angle(double a) { return std::remainder(a, 2.0 * M_PI); }

// Minimal rotation carrying direction `from` onto direction `to` (both unit).
Eigen::Matrix3d min_rotation(const Vec3& from, const Vec3& to) {
  const Vec3 axis = from.cross(to);
  const double s = axis.norm();
  const double c = from.dot(to);
  if (s < 1e-12) {
    if (c > 0.0) return Eigen::Matrix3d::Identity();
    // Antiparallel: pi about a deterministic perpendicular axis.
    Vec3 perp = from.cross(Vec3(1, 0, 0));
    if (perp.norm() < 1e-6) perp = from.cross(Vec3(0, 1, 0));
    perp.normalize();
    return geom::rodrigues(perp * M_PI);
  }
  const double angle = std::atan2(s, c);
  return geom::rodrigues(axis / s * angle);
}

}  // namespace

const std::array<Vec3, kNumJoints>& rest_offsets() {
  static const std::array<Vec3, kNumJoints> offsets = {
      Vec3(0, 0, 0),          // pelvis
      Vec3(0.10, -0.06, 0),   // l_hip
      Vec3(-0.10, -0.06, 0),  // r_hip
      Vec3(0, 0.11, 0),       // spine1
      Vec3(0, -0.40, 0),      // l_knee
      Vec3(0, -0.40, 0),      // r_knee
      Vec3(0, 0.12, 0),       // spine2
      Vec3(0, -0.40, 0),      // l_ankle
      Vec3(0, -0.40, 0),      // r_ankle
      Vec3(0, 0.12, 0),       // spine3
      Vec3(0, -0.06, 0.13),   // l_foot
      Vec3(0, -0.06, 0.13),   // r_foot
      Vec3(0, 0.09, 0),       // neck
      Vec3(0.07, 0.03, 0),    // l_collar
      Vec3(-0.07, 0.03, 0),   // r_collar
      Vec3(0, 0.12, 0),       // head
      Vec3(0.10, 0.01, 0),    // l_shoulder
      Vec3(-0.10, 0.01, 0),   // r_shoulder
      Vec3(0.28, 0, 0),       // l_elbow
      Vec3(-0.28, 0, 0),      // r_elbow
      Vec3(0.25, 0, 0),       // l_wrist
      Vec3(-0.25, 0, 0),      // r_wrist
  };
  return offsets;
}

std::array<Vec3, kNumJoints> rest_pose(double pelvis_height) {
  std::array<Vec3, kNumJoints> out;
  out[0] = Vec3(0, pelvis_height, 0);
  for (int j = 1; j < kNumJoints; ++j) out[j] = out[kParents[j]] + rest_offsets()[j];
  return out;
}

double frame_heading(const GlobalJoints& joints, Eigen::Index l) {
  Vec3 across = joints.joint(l, kLeftHip) - joints.joint(l, kRightHip);
  across.y() = 0.0;
  if (across.norm() < 1e-9) return 0.0;
  const Vec3 forward = across.cross(Vec3(0, 1, 0)).normalized();
  // rot_y(h) maps +z to (sin h, 0, cos h).
  return std::atan2(forward.x(), forward.z());
}

HumanMotionSeq encode_human(const GlobalJoints& joints, double fps) {
  const Eigen::Index L = joints.num_frames();
  require(L >= 2, "encode_human: need at least 2 frames");
  require_finite(joints.positions, "encode_human joints");

  HumanMotionSeq seq;
  seq.fps = fps;
  seq.frames = Mat::Zero(L, chan::kDim);

  std::vector<double> heading(L);
  for (Eigen::Index l = 0; l < L; ++l) heading[l] = frame_heading(joints, l);

  const auto& offsets = rest_offsets();
  for (Eigen::Index l = 0; l < L; ++l) {
    const Eigen::Index lc = (l == L - 1) ? L - 2 : l;  // step source for the last row
    const Eigen::Matrix3d inv_head = geom::rot_y(-heading[lc]);

    seq.frames(l, chan::kYawRate) = wrap_angle(heading[lc + 1] - heading[lc]);
    const Vec3 root_step =
        inv_head * (joints.joint(lc + 1, kPelvis) - joints.joint(lc, kPelvis));
    seq.frames(l, chan::kVelX) = root_step.x();
    seq.frames(l, chan::kVelZ) = root_step.z();
    seq.frames(l, chan::kHeight) = joints.joint(l, kPelvis).y();

    const Eigen::Matrix3d inv_head_l = geom::rot_y(-heading[l]);
    const Vec3 root = joints.joint(l, kPelvis);
    for (int j = 1; j < kNumJoints; ++j) {
      const Vec3 rel = joints.joint(l, j) - root;
      seq.frames.block<1, 3>(l, chan::kLocalPos + 3 * (j - 1)) = (inv_head_l * rel).transpose();
    }

    for (int j = 1; j < kNumJoints; ++j) {
      const Vec3 bone = joints.joint(l, j) - joints.joint(l, kParents[j]);
      Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
      if (bone.norm() > 1e-9) {
        const Vec3 cur = (inv_head_l * bone).normalized();
        const Vec3 rest = offsets[j].normalized();
        r = min_rotation(rest, cur);
      }
      Eigen::Matrix<double, 6, 1> sixd;
      sixd << r.col(0), r.col(1);
      seq.frames.block<1, 6>(l, chan::kRot6D + 6 * (j - 1)) = sixd.transpose();
    }

    for (int j = 0; j < kNumJoints; ++j) {
      const Vec3 step = inv_head * (joints.joint(lc + 1, j) - joints.joint(lc, j));
      seq.frames.block<1, 3>(l, chan::kVel + 3 * j) = step.transpose();
    }

    for (int f = 0; f < 4; ++f) {
      const int j = kFootJoints[f];
      const double disp = (joints.joint(lc + 1, j) - joints.joint(lc, j)).norm();
      const bool grounded = joints.joint(lc, j).y() < kContactHeightThreshold;
      seq.frames(l, chan::kContact + f) =
          (disp < kContactSpeedThreshold && grounded) ? 1.0 : 0.0;
    }
  }
  return seq;
}

GlobalJoints recover_global_joints(const HumanMotionSeq& seq) {
  const Eigen::Index L = seq.num_frames();
  require(L >= 1, "recover_global_joints: empty sequence");
  require(seq.frames.cols() == chan::kDim, "recover_global_joints: bad feature width");
  require_finite(seq.frames, "recover_global_joints features");

  GlobalJoints joints(L);
  double heading = 0.0;
  double rx = 0.0, rz = 0.0;
  for (Eigen::Index l = 0; l < L; ++l) {
    const Eigen::Matrix3d head = geom::rot_y(heading);
    const double ry = seq.frames(l, chan::kHeight);
    joints.set_joint(l, kPelvis, Vec3(rx, ry, rz));
    for (int j = 1; j < kNumJoints; ++j) {
      const Vec3 local = seq.frames.block<1, 3>(l, chan::kLocalPos + 3 * (j - 1)).transpose();
      const Vec3 world = head * local + Vec3(rx, ry, rz);
      joints.set_joint(l, j, world);
    }
    if (l + 1 < L) {
      const Vec3 step =
          head * Vec3(seq.frames(l, chan::kVelX), 0.0, seq.frames(l, chan::kVelZ));
      rx += step.x();
      rz += step.z();
      heading += seq.frames(l, chan::kYawRate);
    }
  }
  return joints;
}

Mat object_contact_trajectory(const ObjectMotionSeq& obj_seq, const Mat& rest_points) {
  require(rest_points.rows() == 2 && rest_points.cols() == 3,
          "object_contact_trajectory: rest_points must be 2 x 3");
  require(obj_seq.frames.cols() == obj::kDim, "object_contact_trajectory: bad pose width");
  require_finite(obj_seq.frames, "object_contact_trajectory poses");
  const Eigen::Index L = obj_seq.num_frames();
  Mat out(L, 6);
  for (Eigen::Index l = 0; l < L; ++l) {
    const Eigen::Matrix3d r = geom::rodrigues(obj_seq.rotation(l));
    const Vec3 t = obj_seq.translation(l);
    for (int i = 0; i < 2; ++i) {
      const Vec3 p = r * rest_points.row(i).transpose() + t;
      out.block<1, 3>(l, 3 * i) = p.transpose();
    }
  }
  return out;
}

}  // namespace hoi::motion
