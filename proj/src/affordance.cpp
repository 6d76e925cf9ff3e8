#include "hoi/affordance.hpp"

#include <algorithm>
#include <limits>

namespace hoi::affordance {

std::vector<int> AffordanceRecord::label_indices() const {
  std::vector<int> out;
  for (int i = 0; i < motion::kNumPrimaryJoints; ++i)
    if (labels[i] > 0.5) out.push_back(i);
  return out;
}

Vec AffordanceRecord::to_vector() const {
  Vec y(15);
  y.head<8>() = labels;
  y.segment<3>(8) = contact_points.row(0).transpose();
  y.segment<3>(11) = contact_points.row(1).transpose();
  y[14] = object_state;
  return y;
}

AffordanceRecord AffordanceRecord::from_vector_raw(const Vec& y) {
  require(y.size() == 15, "AffordanceRecord: vector must have 15 entries");
  AffordanceRecord rec;
  rec.labels = y.head<8>();
  rec.contact_points.row(0) = y.segment<3>(8).transpose();
  rec.contact_points.row(1) = y.segment<3>(11).transpose();
  rec.object_state = y[14];
  return rec;
}

AffordanceRecord record_from_vector(const Vec& y) {
  require(y.size() == 15, "record_from_vector: vector must have 15 entries");
  AffordanceRecord rec = AffordanceRecord::from_vector_raw(y);

  std::vector<std::pair<double, int>> active;
  for (int i = 0; i < motion::kNumPrimaryJoints; ++i)
    if (y[i] >= 0.5) active.emplace_back(y[i], i);
  if (active.size() > 2) {
    std::sort(active.begin(), active.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    active.resize(2);
  }
  rec.labels.setZero();
  for (const auto& [act, idx] : active) rec.labels[idx] = 1.0;
  rec.object_state = y[14] >= 0.5 ? 1.0 : 0.0;
  return rec;
}

AffordanceRecord extract_gt_affordance(const motion::GlobalJoints& joints,
                                       const motion::ObjectMotionSeq& obj_seq,
                                       const geom::PointCloud& cloud, double gamma,
                                       double state_threshold) {
  const Eigen::Index L = joints.num_frames();
  require(L == obj_seq.num_frames(), "extract_gt_affordance: frame count mismatch");
  require(cloud.size() > 0, "extract_gt_affordance: empty cloud");

  struct Best {
    double d2 = std::numeric_limits<double>::infinity();
    Eigen::Index point = 0;
  };
  std::array<Best, motion::kNumPrimaryJoints> best;

  for (Eigen::Index l = 0; l < L; ++l) {
    geom::Pose6DoF pose;
    pose.rotation = obj_seq.rotation(l);
    pose.translation = obj_seq.translation(l);
    const Mat posed = geom::apply_pose(pose, cloud.points);
    for (int c = 0; c < motion::kNumPrimaryJoints; ++c) {
      const Vec3 jp = joints.joint(l, motion::kPrimaryJoints[c]);
      for (Eigen::Index i = 0; i < posed.rows(); ++i) {
        const double d2 = (posed.row(i).transpose() - jp).squaredNorm();
        if (d2 < best[c].d2) {
          best[c].d2 = d2;
          best[c].point = i;
        }
      }
    }
  }

  std::vector<std::pair<double, int>> candidates;  // (min distance, candidate index)
  for (int c = 0; c < motion::kNumPrimaryJoints; ++c) {
    const double d = std::sqrt(best[c].d2);
    if (d < gamma) candidates.emplace_back(d, c);
  }
  std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first < b.first : a.second < b.second;
  });
  if (candidates.size() > 2) candidates.resize(2);

  AffordanceRecord rec;
  std::vector<int> kept;
  for (const auto& [d, c] : candidates) kept.push_back(c);
  std::sort(kept.begin(), kept.end());
  for (int c : kept) rec.labels[c] = 1.0;
  if (kept.size() == 1) {
    const Vec3 p = cloud.points.row(best[static_cast<std::size_t>(kept[0])].point).transpose();
    rec.contact_points.row(0) = p.transpose();
    rec.contact_points.row(1) = p.transpose();
  } else if (kept.size() == 2) {
    for (int i = 0; i < 2; ++i)
      rec.contact_points.row(i) =
          cloud.points.row(best[static_cast<std::size_t>(kept[static_cast<std::size_t>(i)])].point);
  }

  Vec3 mean_t = Vec3::Zero();
  for (Eigen::Index l = 0; l < L; ++l) mean_t += obj_seq.translation(l);
  mean_t /= static_cast<double>(L);
  double max_dev = 0.0;
  for (Eigen::Index l = 0; l < L; ++l)
    max_dev = std::max(max_dev, (obj_seq.translation(l) - mean_t).norm());
  rec.object_state = max_dev > state_threshold ? 1.0 : 0.0;
  return rec;
}

AffordanceRecord postprocess_contacts(const AffordanceRecord& rec, const geom::PointCloud& cloud,
                                      double offset) {
  if (!rec.has_contact()) return rec;
  require(cloud.size() > 0, "postprocess_contacts: empty cloud");

  const geom::PointCloud* use = &cloud;
  geom::PointCloud local;
  if (!cloud.has_normals()) {
    local = cloud;
    geom::estimate_normals(local);
    use = &local;
  }

  AffordanceRecord out = rec;
  for (int i = 0; i < 2; ++i) {
    const Vec3 q = rec.contact_points.row(i).transpose();
    const auto snap = geom::snap_to_cloud(q, *use);
    out.contact_points.row(i) = geom::offset_outward(*use, snap.index, offset).transpose();
  }
  return out;
}

}  // namespace hoi::affordance
