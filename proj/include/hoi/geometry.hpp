#pragma once

#include <Eigen/Dense>
#include <optional>
#include <utility>

#include "hoi/common.hpp"

namespace hoi::geom {

// Rigid pose: axis-angle rotation (axis * angle, radians) plus translation.
struct Pose6DoF {
  Vec3 rotation = Vec3::Zero();
  Vec3 translation = Vec3::Zero();

  // Wrap the rotation so its angle lies in [0, pi], flipping the axis when
  // needed. The represented rotation is unchanged.
  Pose6DoF canonicalized() const;
};

struct PointCloud {
  Mat points;   // n x 3
  Mat normals;  // n x 3 when present, else 0 x 3

  bool has_normals() const { return normals.rows() == points.rows() && points.rows() > 0; }
  Eigen::Index size() const { return points.rows(); }
  Vec3 centroid() const;
};

// Rotation matrix for an axis-angle vector (Rodrigues), with a series branch
// near zero so the map is smooth through the origin.
Eigen::Matrix3d rodrigues(const Vec3& omega);

// Value and Jacobian of omega -> R(omega) * p. The Jacobian columns are
// d(Rp)/d(omega_j); the small-angle branch keeps it accurate below 1e-4 rad.
std::pair<Vec3, Eigen::Matrix3d> rotate_point_with_jacobian(const Vec3& omega, const Vec3& p);

// Rotation about +y by `angle` (used for heading frames).
Eigen::Matrix3d rot_y(double angle);

// Transform an n x 3 point set by the pose. Throws on non-finite input.
Mat apply_pose(const Pose6DoF& pose, const Mat& points);

// Symmetric Chamfer distance between point sets (unsquared member distances):
// [mean_a min_b |a-b| + mean_b min_a |b-a|] / 2. Throws if either set is empty.
double chamfer_distance(const Mat& a, const Mat& b);

struct SnapResult {
  Eigen::Index index;
  Vec3 point;
};

// Nearest cloud point to the query; ties resolve to the lowest index.
SnapResult snap_to_cloud(const Vec3& query, const PointCloud& cloud);

// Per-point normals from a k-nearest-neighbor PCA (smallest-eigenvalue
// direction), oriented away from the cloud centroid. Degenerate neighborhoods
// (covariance rank < 2) fall back to the centroid-to-point direction; a
// normal orthogonal to that direction keeps a canonical sign so parallel
// normals stay consistent.
void estimate_normals(PointCloud& cloud, int k = 16);

// Surface point pushed `distance` along its normal, with the normal first
// re-oriented away from the cloud centroid. Requires normals to be present.
Vec3 offset_outward(const PointCloud& cloud, Eigen::Index index, double distance);

}  // namespace hoi::geom
