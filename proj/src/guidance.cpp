#include "hoi/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "hoi/geometry.hpp"

namespace hoi::guidance {
namespace {

namespace chan = motion::chan;
namespace obj = motion::obj;

constexpr double kTwoPi = 2.0 * M_PI;

struct Contact {
  int joint;        // skeleton joint index
  Vec3 rest_point;  // object rest frame
};

// The k-th active label (ascending) pairs with contact-point row min(k, 1);
// a single-contact record therefore uses row 0 only.
std::vector<Contact> contact_list(const affordance::AffordanceRecord& rec) {
  std::vector<Contact> out;
  const std::vector<int> idx = rec.label_indices();
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const int row = static_cast<int>(std::min<std::size_t>(k, 1));
    out.push_back({motion::kPrimaryJoints[idx[k]], rec.contact_points.row(row).transpose()});
  }
  return out;
}

// Shared forward pass over the root channels: integrated heading and world
// root position per frame, mirroring recover_global_joints.
struct RootForward {
  std::vector<double> cos_h, sin_h;
  Mat root;  // L x 3
};

RootForward root_forward(const Mat& mu_h) {
  const Eigen::Index L = mu_h.rows();
  RootForward f;
  f.cos_h.resize(L);
  f.sin_h.resize(L);
  f.root.resize(L, 3);
  double h = 0.0, rx = 0.0, rz = 0.0;
  for (Eigen::Index l = 0; l < L; ++l) {
    f.cos_h[l] = std::cos(h);
    f.sin_h[l] = std::sin(h);
    f.root(l, 0) = rx;
    f.root(l, 1) = mu_h(l, chan::kHeight);
    f.root(l, 2) = rz;
    const double vx = mu_h(l, chan::kVelX);
    const double vz = mu_h(l, chan::kVelZ);
    rx += f.cos_h[l] * vx + f.sin_h[l] * vz;
    rz += -f.sin_h[l] * vx + f.cos_h[l] * vz;
    h += mu_h(l, chan::kYawRate);
  }
  return f;
}

Vec3 joint_world(const Mat& mu_h, const RootForward& f, Eigen::Index l, int joint) {
  const Vec3 root = f.root.row(l).transpose();
  if (joint == motion::kPelvis) return root;
  const Vec3 local = mu_h.block<1, 3>(l, chan::kLocalPos + 3 * (joint - 1)).transpose();
  const double c = f.cos_h[l], s = f.sin_h[l];
  return Vec3(c * local.x() + s * local.z(), local.y(), -s * local.x() + c * local.z()) + root;
}

// Canonical axis-angle (angle folded into [0, pi]) with the exact jacobian of
// the fold. Within a branch the fold is c = omega * (1 - m/theta) for a
// constant removed angle m, so J = (1 - m/theta) I + (m/theta) u u^T.
struct CanonRot {
  Vec3 value;
  Eigen::Matrix3d jac;
};

CanonRot canonical_rotation(const Vec3& omega) {
  CanonRot out{omega, Eigen::Matrix3d::Identity()};
  const double theta = omega.norm();
  if (theta <= M_PI) return out;
  const Vec3 axis = omega / theta;
  double w = std::fmod(theta, kTwoPi);
  double removed;
  if (w > M_PI) {
    out.value = -axis * (kTwoPi - w);
    removed = theta - w + kTwoPi;
  } else {
    out.value = axis * w;
    removed = theta - w;
  }
  const double r = removed / theta;
  out.jac = (1.0 - r) * Eigen::Matrix3d::Identity() + r * (axis * axis.transpose());
  return out;
}

void check_shapes(const Mat& mu_h, const Mat& mu_o) {
  require(mu_h.cols() == chan::kDim, "guidance: human mean must have 263 columns");
  require(mu_o.cols() == obj::kDim, "guidance: object mean must have 6 columns");
  require(mu_h.rows() == mu_o.rows() && mu_h.rows() >= 1,
          "guidance: human/object frame counts must match and be nonzero");
  require_finite(mu_h, "guidance human mean");
  require_finite(mu_o, "guidance object mean");
}

double stationary_value(const Mat& mu_o) {
  const RowVec mean = mu_o.colwise().mean();
  return (mu_o.rowwise() - mean).squaredNorm();
}

double smooth_value(const Mat& mu_o) {
  const Eigen::Index L = mu_o.rows();
  Mat canon(L, obj::kDim);
  for (Eigen::Index l = 0; l < L; ++l) {
    const CanonRot cr = canonical_rotation(mu_o.block<1, 3>(l, obj::kRot).transpose());
    canon.block<1, 3>(l, obj::kRot) = cr.value.transpose();
    canon.block<1, 3>(l, obj::kTrans) = mu_o.block<1, 3>(l, obj::kTrans);
  }
  double out = 0.0;
  for (Eigen::Index l = 0; l + 1 < L; ++l) out += (canon.row(l + 1) - canon.row(l)).squaredNorm();
  return out;
}

}  // namespace

double sigma_tilde(int t, const diffusion::NoiseSchedule& sched, const GuidanceConfig& cfg) {
  require(t >= 1 && t <= sched.T, "sigma_tilde: step index out of range");
  if (t == 1) return cfg.sigma_clamp;
  return std::min(sched.sigma[t], cfg.sigma_clamp);
}

ObjectiveTerms objective_G(const Mat& mu_h, const Mat& mu_o,
                           const affordance::AffordanceRecord& rec, const GuidanceConfig& cfg) {
  check_shapes(mu_h, mu_o);
  const Eigen::Index L = mu_h.rows();
  ObjectiveTerms terms;

  const std::vector<Contact> contacts = contact_list(rec);
  if (!contacts.empty()) {
    const RootForward fwd = root_forward(mu_h);
    for (const Contact& c : contacts) {
      for (Eigen::Index l = 0; l < L; ++l) {
        const Eigen::Matrix3d rot = geom::rodrigues(mu_o.block<1, 3>(l, obj::kRot).transpose());
        const Vec3 q = rot * c.rest_point + mu_o.block<1, 3>(l, obj::kTrans).transpose();
        terms.contact += (joint_world(mu_h, fwd, l, c.joint) - q).squaredNorm();
      }
    }
  }

  terms.stationary = stationary_value(mu_o);
  terms.smooth = smooth_value(mu_o);
  const bool is_static = rec.object_state < 0.5;
  terms.total = terms.contact + (is_static ? cfg.alpha_sta * terms.stationary : 0.0) +
                cfg.beta_smo * terms.smooth;
  return terms;
}

ObjectiveGradient grad_G(const Mat& mu_h, const Mat& mu_o,
                         const affordance::AffordanceRecord& rec, const GuidanceConfig& cfg) {
  check_shapes(mu_h, mu_o);
  const Eigen::Index L = mu_h.rows();
  ObjectiveGradient out;
  out.grad_h = Mat::Zero(L, chan::kDim);
  out.grad_o = Mat::Zero(L, obj::kDim);

  const std::vector<Contact> contacts = contact_list(rec);
  const RootForward fwd = root_forward(mu_h);

  // Planar root and heading adjoints accumulated over contacts, then pulled
  // back through the cumulative integration with suffix sums.
  Mat root_adj = Mat::Zero(L, 2);  // (x, z) adjoint of the world root position
  Vec head_adj = Vec::Zero(L);     // adjoint of the per-frame heading

  for (const Contact& c : contacts) {
    for (Eigen::Index l = 0; l < L; ++l) {
      const Vec3 omega = mu_o.block<1, 3>(l, obj::kRot).transpose();
      const auto [rotated, jac] = geom::rotate_point_with_jacobian(omega, c.rest_point);
      const Vec3 q = rotated + mu_o.block<1, 3>(l, obj::kTrans).transpose();
      const Vec3 p = joint_world(mu_h, fwd, l, c.joint);
      const Vec3 e = p - q;
      out.terms.contact += e.squaredNorm();
      const Vec3 g = 2.0 * e;

      out.grad_o.block<1, 3>(l, obj::kTrans) -= g.transpose();
      out.grad_o.block<1, 3>(l, obj::kRot) -= (jac.transpose() * g).transpose();

      out.grad_h(l, chan::kHeight) += g.y();
      root_adj(l, 0) += g.x();
      root_adj(l, 1) += g.z();
      if (c.joint != motion::kPelvis) {
        const double ch = fwd.cos_h[l], sh = fwd.sin_h[l];
        const Vec3 local = mu_h.block<1, 3>(l, chan::kLocalPos + 3 * (c.joint - 1)).transpose();
        // R_y(h)^T g
        out.grad_h.block<1, 3>(l, chan::kLocalPos + 3 * (c.joint - 1)) +=
            Eigen::RowVector3d(ch * g.x() - sh * g.z(), g.y(), sh * g.x() + ch * g.z());
        // g . (dR_y/dh * local)
        head_adj(l) += g.x() * (-sh * local.x() + ch * local.z()) +
                       g.z() * (-ch * local.x() - sh * local.z());
      }
    }
  }

  if (!cfg.detach_root_integration && !contacts.empty()) {
    // The world root at frame l sums the rotated planar velocities of frames
    // m < l, and the heading at frame l sums the yaw rates of frames m < l.
    Eigen::Vector2d suffix(0.0, 0.0);  // sum_{l > m} root_adj(l)
    for (Eigen::Index m = L - 1; m >= 0; --m) {
      const double ch = fwd.cos_h[m], sh = fwd.sin_h[m];
      const double vx = mu_h(m, chan::kVelX);
      const double vz = mu_h(m, chan::kVelZ);
      out.grad_h(m, chan::kVelX) += ch * suffix.x() - sh * suffix.y();
      out.grad_h(m, chan::kVelZ) += sh * suffix.x() + ch * suffix.y();
      head_adj(m) += suffix.x() * (-sh * vx + ch * vz) + suffix.y() * (-ch * vx - sh * vz);
      suffix += root_adj.row(m).transpose();
    }
    double yaw_suffix = 0.0;  // sum_{l > m} head_adj(l)
    for (Eigen::Index m = L - 1; m >= 0; --m) {
      out.grad_h(m, chan::kYawRate) += yaw_suffix;
      yaw_suffix += head_adj(m);
    }
  }

  out.terms.stationary = stationary_value(mu_o);
  const bool is_static = rec.object_state < 0.5;
  if (is_static) {
    const RowVec mean = mu_o.colwise().mean();
    out.grad_o += (2.0 * cfg.alpha_sta) * (mu_o.rowwise() - mean);
  }

  std::vector<CanonRot> canon(L);
  Mat canon_pose(L, obj::kDim);
  for (Eigen::Index l = 0; l < L; ++l) {
    canon[l] = canonical_rotation(mu_o.block<1, 3>(l, obj::kRot).transpose());
    canon_pose.block<1, 3>(l, obj::kRot) = canon[l].value.transpose();
    canon_pose.block<1, 3>(l, obj::kTrans) = mu_o.block<1, 3>(l, obj::kTrans);
  }
  Mat canon_grad = Mat::Zero(L, obj::kDim);
  for (Eigen::Index l = 0; l + 1 < L; ++l) {
    const RowVec d = canon_pose.row(l + 1) - canon_pose.row(l);
    out.terms.smooth += d.squaredNorm();
    canon_grad.row(l + 1) += 2.0 * d;
    canon_grad.row(l) -= 2.0 * d;
  }
  for (Eigen::Index l = 0; l < L; ++l) {
    const Vec3 gr = canon_grad.block<1, 3>(l, obj::kRot).transpose();
    out.grad_o.block<1, 3>(l, obj::kRot) +=
        cfg.beta_smo * (canon[l].jac.transpose() * gr).transpose();
    out.grad_o.block<1, 3>(l, obj::kTrans) +=
        cfg.beta_smo * canon_grad.block<1, 3>(l, obj::kTrans);
  }

  out.terms.total = out.terms.contact + (is_static ? cfg.alpha_sta * out.terms.stationary : 0.0) +
                    cfg.beta_smo * out.terms.smooth;
  return out;
}

CorrectionResult correct_means(const Mat& mu_h, const Mat& mu_o, int t,
                               const affordance::AffordanceRecord& rec,
                               const diffusion::NoiseSchedule& sched, const GuidanceConfig& cfg) {
  check_shapes(mu_h, mu_o);
  CorrectionResult res;
  res.mu_h = mu_h;
  res.mu_o = mu_o;
  res.before = objective_G(mu_h, mu_o, rec, cfg);
  res.after = res.before;
  if (cfg.tau1 == 0.0 && cfg.tau2 == 0.0) return res;

  const double step = sigma_tilde(t, sched, cfg);
  const int passes = (t == 1) ? cfg.k_final : 1;
  double g_total = res.before.total;

  // Backtracking half-step: accept the first halved scale that strictly
  // lowers the objective, keep the mean unchanged if none does.
  const auto half_step = [&](Mat& target, const Mat& grad, double tau,
                             const auto& eval) -> bool {
    if (tau == 0.0) return false;
    double s = tau * step;
    for (int b = 0;; ++b) {
      const Mat cand = target - s * grad;
      const double g_new = eval(cand);
      if (g_new < g_total) {
        target = cand;
        g_total = g_new;
        return true;
      }
      if (b >= cfg.max_backtracks) return false;
      s *= 0.5;
      ++res.halvings;
    }
  };

  for (int k = 0; k < passes; ++k) {
    bool moved = false;
    {
      const ObjectiveGradient g = grad_G(res.mu_h, res.mu_o, rec, cfg);
      require_finite(g.grad_h, "guidance human gradient at t=" + std::to_string(t));
      g_total = g.terms.total;
      moved |= half_step(res.mu_h, g.grad_h, cfg.tau1, [&](const Mat& cand) {
        return objective_G(cand, res.mu_o, rec, cfg).total;
      });
    }
    {
      const ObjectiveGradient g = grad_G(res.mu_h, res.mu_o, rec, cfg);
      require_finite(g.grad_o, "guidance object gradient at t=" + std::to_string(t));
      g_total = g.terms.total;
      moved |= half_step(res.mu_o, g.grad_o, cfg.tau2, [&](const Mat& cand) {
        return objective_G(res.mu_h, cand, rec, cfg).total;
      });
    }
    ++res.iterations;
    if (!moved) break;  // both half-steps stalled; further passes are identical
  }
  res.after = objective_G(res.mu_h, res.mu_o, rec, cfg);
  return res;
}

}  // namespace hoi::guidance
