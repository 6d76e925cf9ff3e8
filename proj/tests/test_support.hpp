#pragma once

#include <Eigen/Geometry>
#include <cmath>
#include <functional>

#include "hoi/common.hpp"

namespace testsup {

using hoi::Mat;
using hoi::Rng;
using hoi::Vec3;

// Independent rotation oracle: quaternion built from the axis-angle vector,
// applied via Eigen's quaternion product. Exercises a different code path
// than the Rodrigues-matrix implementation under test.
inline Vec3 quat_rotate(const Vec3& omega, const Vec3& p) {
  const double angle = omega.norm();
  if (angle < 1e-300) return p;
  const Eigen::Quaterniond q(Eigen::AngleAxisd(angle, omega / angle));
  return q * p;
}

inline Mat random_mat(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  return scale * rng.normal_mat(rows, cols);
}

// Central finite difference of a scalar function along one coordinate of x.
inline double central_diff(const std::function<double(const Mat&)>& f, Mat x, Eigen::Index r,
                           Eigen::Index c, double h) {
  const double keep = x(r, c);
  x(r, c) = keep + h;
  const double up = f(x);
  x(r, c) = keep - h;
  const double down = f(x);
  return (up - down) / (2.0 * h);
}

// Relative error with an absolute floor so near-zero pairs compare sanely.
inline double rel_err(double got, double want, double floor_ = 1e-8) {
  return std::abs(got - want) / std::max({std::abs(got), std::abs(want), floor_});
}

}  // namespace testsup
