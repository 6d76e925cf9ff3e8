#include "hoi/metrics.hpp"

#include <cmath>

#include "hoi/geometry.hpp"

namespace hoi::metrics {
namespace {

// Symmetric PSD square root via eigendecomposition, eigenvalues clamped at 0.
Mat sqrtm_psd(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (m + m.transpose()));
  require(es.info() == Eigen::Success, "fid: eigendecomposition failed");
  Vec vals = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().transpose();
}

Mat sample_covariance(const Mat& feats) {
  const Eigen::Index n = feats.rows();
  const RowVec mean = feats.colwise().mean();
  const Mat centered = feats.rowwise() - mean;
  return centered.transpose() * centered / static_cast<double>(n - 1);
}

}  // namespace

std::optional<double> contact_distance(const motion::HumanMotionSeq& human,
                                       const motion::ObjectMotionSeq& object,
                                       const affordance::AffordanceRecord& rec) {
  if (!rec.has_contact()) return std::nullopt;
  require(human.num_frames() == object.num_frames(),
          "contact_distance: human/object frame counts must match");
  const motion::GlobalJoints joints = motion::recover_global_joints(human);
  const Mat points = motion::object_contact_trajectory(object, rec.contact_points);

  const std::vector<int> labels = rec.label_indices();
  const Eigen::Index L = human.num_frames();
  double sum = 0.0;
  for (Eigen::Index l = 0; l < L; ++l) {
    Mat joint_set(static_cast<Eigen::Index>(labels.size()), 3);
    for (std::size_t i = 0; i < labels.size(); ++i)
      joint_set.row(static_cast<Eigen::Index>(i)) =
          joints.joint(l, motion::kPrimaryJoints[labels[i]]).transpose();
    Mat point_set(2, 3);
    point_set.row(0) = points.block<1, 3>(l, 0);
    point_set.row(1) = points.block<1, 3>(l, 3);
    sum += geom::chamfer_distance(joint_set, point_set);
  }
  return sum / static_cast<double>(L);
}

double foot_skate_ratio(const motion::HumanMotionSeq& human, double ground_height,
                        double skid_threshold) {
  const Eigen::Index L = human.num_frames();
  require(L >= 2, "foot_skate_ratio: need at least 2 frames");
  const motion::GlobalJoints joints = motion::recover_global_joints(human);
  int skating = 0;
  for (Eigen::Index l = 0; l + 1 < L; ++l) {
    bool skid = false;
    for (int f = 0; f < 4 && !skid; ++f) {
      const int j = motion::kFootJoints[f];
      const Vec3 now = joints.joint(l, j);
      if (now.y() >= ground_height) continue;
      const Vec3 next = joints.joint(l + 1, j);
      const double dx = next.x() - now.x();
      const double dz = next.z() - now.z();
      skid = std::sqrt(dx * dx + dz * dz) > skid_threshold;
    }
    if (skid) ++skating;
  }
  return static_cast<double>(skating) / static_cast<double>(L - 1);
}

double diversity(const std::vector<Vec>& features, int pairs, Rng& rng) {
  require(features.size() >= 2, "diversity: need at least 2 samples");
  require(pairs >= 1, "diversity: pair count must be positive");
  const Eigen::Index dim = features.front().size();
  for (const Vec& f : features)
    require(f.size() == dim, "diversity: feature vectors must share a dimension");
  const int n = static_cast<int>(features.size());
  double sum = 0.0;
  for (int p = 0; p < pairs; ++p) {
    const int i = rng.uniform_int(0, n - 1);
    int j = rng.uniform_int(0, n - 2);
    if (j >= i) ++j;  // uniform over unordered distinct pairs
    sum += (features[static_cast<std::size_t>(i)] - features[static_cast<std::size_t>(j)]).norm();
  }
  return sum / static_cast<double>(pairs);
}

double fid(const Mat& real_feats, const Mat& gen_feats) {
  require(real_feats.cols() == gen_feats.cols(), "fid: feature dimensions must match");
  require(real_feats.rows() >= 2 && gen_feats.rows() >= 2, "fid: need at least 2 samples per side");
  require_finite(real_feats, "fid real features");
  require_finite(gen_feats, "fid generated features");

  const Eigen::Index d = real_feats.cols();
  const RowVec mu_r = real_feats.colwise().mean();
  const RowVec mu_g = gen_feats.colwise().mean();
  const Mat reg = 1e-6 * Mat::Identity(d, d);
  const Mat cov_r = sample_covariance(real_feats) + reg;
  const Mat cov_g = sample_covariance(gen_feats) + reg;

  // Tr((S_r S_g)^1/2) = Tr((A S_g A)^1/2) with A = S_r^1/2, keeping the
  // problem symmetric.
  const Mat root_r = sqrtm_psd(cov_r);
  const Mat cross = sqrtm_psd(root_r * cov_g * root_r);
  const double mean_term = (mu_r - mu_g).squaredNorm();
  const double trace_term = cov_r.trace() + cov_g.trace() - 2.0 * cross.trace();
  return mean_term + trace_term;
}

}  // namespace hoi::metrics
