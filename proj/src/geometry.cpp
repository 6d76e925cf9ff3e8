#include "hoi/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace hoi::geom {
namespace {

constexpr double kTwoPi = 2.0 * M_PI;

struct RodriguesCoeffs {
  double a;        // sin(t)/t
  double b;        // (1-cos(t))/t^2
  double da_over;  // a'(t)/t
  double db_over;  // b'(t)/t
};

RodriguesCoeffs rodrigues_coeffs(double theta) {
  RodriguesCoeffs c;
  const double t2 = theta * theta;
  if (theta < 1e-4) {
    c.a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0;
    c.b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
    c.da_over = -1.0 / 3.0 + t2 / 30.0;
    c.db_over = -1.0 / 12.0 + t2 / 180.0;
  } else {
    const double s = std::sin(theta);
    const double co = std::cos(theta);
    c.a = s / theta;
    c.b = (1.0 - co) / t2;
    c.da_over = (theta * co - s) / (t2 * theta);
    c.db_over = (theta * s - 2.0 * (1.0 - co)) / (t2 * t2);
  }
  return c;
}

Eigen::Matrix3d skew(const Vec3& v) {
  Eigen::Matrix3d m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

}  // namespace

Pose6DoF Pose6DoF::canonicalized() const {
  Pose6DoF out = *this;
  const double theta = rotation.norm();
  if (theta == 0.0) return out;
  Vec3 axis = rotation / theta;
  double w = std::fmod(theta, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  if (w > M_PI) {
    w = kTwoPi - w;
    axis = -axis;
  }
  out.rotation = axis * w;
  return out;
}

Vec3 PointCloud::centroid() const {
  require(points.rows() > 0, "PointCloud::centroid: empty cloud");
  return points.colwise().mean().transpose();
}

Eigen::Matrix3d rodrigues(const Vec3& omega) {
  const double theta = omega.norm();
  const RodriguesCoeffs c = rodrigues_coeffs(theta);
  const Eigen::Matrix3d k = skew(omega);
  return Eigen::Matrix3d::Identity() + c.a * k + c.b * (k * k);
}

std::pair<Vec3, Eigen::Matrix3d> rotate_point_with_jacobian(const Vec3& omega, const Vec3& p) {
  const double theta = omega.norm();
  const double t2 = theta * theta;
  const RodriguesCoeffs c = rodrigues_coeffs(theta);
  const Vec3 wxp = omega.cross(p);
  const double wdp = omega.dot(p);
  const Vec3 value = p + c.a * wxp + c.b * (omega * wdp - p * t2);

  Eigen::Matrix3d jac = -c.a * skew(p);
  jac.noalias() += c.da_over * wxp * omega.transpose();
  jac.noalias() += c.db_over * (omega * wdp - p * t2) * omega.transpose();
  jac.noalias() += c.b * (wdp * Eigen::Matrix3d::Identity() + omega * p.transpose() -
                          2.0 * p * omega.transpose());
  return {value, jac};
}

Eigen::Matrix3d rot_y(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Eigen::Matrix3d m;
  m << c, 0, s, 0, 1, 0, -s, 0, c;
  return m;
}

Mat apply_pose(const Pose6DoF& pose, const Mat& points) {
  require(points.cols() == 3, "apply_pose: points must be n x 3");
  require_finite(points, "apply_pose points");
  require(pose.rotation.allFinite() && pose.translation.allFinite(),
          "apply_pose: non-finite pose");
  const Eigen::Matrix3d r = rodrigues(pose.rotation);
  Mat out = points * r.transpose();
  out.rowwise() += pose.translation.transpose();
  return out;
}

double chamfer_distance(const Mat& a, const Mat& b) {
  require(a.cols() == 3 && b.cols() == 3, "chamfer_distance: point sets must be n x 3");
  require(a.rows() > 0 && b.rows() > 0, "chamfer_distance: empty point set");
  auto side = [](const Mat& from, const Mat& to) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < from.rows(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < to.rows(); ++j) {
        const double d = (from.row(i) - to.row(j)).norm();
        if (d < best) best = d;
      }
      acc += best;
    }
    return acc / static_cast<double>(from.rows());
  };
  return 0.5 * (side(a, b) + side(b, a));
}

SnapResult snap_to_cloud(const Vec3& query, const PointCloud& cloud) {
  require(cloud.size() > 0, "snap_to_cloud: empty cloud");
  require(query.allFinite(), "snap_to_cloud: non-finite query");
  Eigen::Index best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    const double d2 = (cloud.points.row(i).transpose() - query).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  return {best, cloud.points.row(best).transpose()};
}

void estimate_normals(PointCloud& cloud, int k) {
  const Eigen::Index n = cloud.size();
  require(n > 0, "estimate_normals: empty cloud");
  require(k >= 2, "estimate_normals: k must be >= 2");
  const Vec3 c = cloud.centroid();
  cloud.normals.resize(n, 3);

  const int kk = static_cast<int>(std::min<Eigen::Index>(k, n));
  std::vector<Eigen::Index> order(n);
  std::vector<double> d2(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3 p = cloud.points.row(i).transpose();
    for (Eigen::Index j = 0; j < n; ++j)
      d2[j] = (cloud.points.row(j).transpose() - p).squaredNorm();
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::partial_sort(order.begin(), order.begin() + kk, order.end(),
                      [&](Eigen::Index x, Eigen::Index y) {
                        return d2[x] != d2[y] ? d2[x] < d2[y] : x < y;
                      });

    Vec3 mean = Vec3::Zero();
    for (int j = 0; j < kk; ++j) mean += cloud.points.row(order[j]).transpose();
    mean /= kk;
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (int j = 0; j < kk; ++j) {
      const Vec3 q = cloud.points.row(order[j]).transpose() - mean;
      cov += q * q.transpose();
    }
    cov /= kk;

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    const Vec3 evals = eig.eigenvalues();  // ascending
    Vec3 normal;
    const double degenerate_tol = std::max(evals[2] * 1e-9, 1e-18);
    if (evals[1] <= degenerate_tol) {
      // Rank < 2 neighborhood: no well-defined tangent plane.
      Vec3 dir = p - c;
      normal = dir.norm() > 1e-12 ? Vec3(dir.normalized()) : Vec3(0, 1, 0);
    } else {
      normal = eig.eigenvectors().col(0);
    }

    const double side = normal.dot(p - c);
    if (side < -1e-12) {
      normal = -normal;
    } else if (side <= 1e-12) {
      // Orthogonal to the outward direction (e.g. planar cloud): canonical
      // sign keeps parallel normals consistent across the cloud.
      int axis = 0;
      normal.cwiseAbs().maxCoeff(&axis);
      if (normal[axis] < 0.0) normal = -normal;
    }
    cloud.normals.row(i) = normal.transpose();
  }
}

Vec3 offset_outward(const PointCloud& cloud, Eigen::Index index, double distance) {
  require(cloud.has_normals(), "offset_outward: cloud has no normals");
  require(index >= 0 && index < cloud.size(), "offset_outward: index out of range");
  const Vec3 p = cloud.points.row(index).transpose();
  Vec3 n = cloud.normals.row(index).transpose();
  if (n.dot(p - cloud.centroid()) < -1e-12) n = -n;
  return p + distance * n;
}

}  // namespace hoi::geom
