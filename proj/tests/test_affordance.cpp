#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "hoi/affordance.hpp"
#include "hoi/geometry.hpp"
#include "hoi/motion.hpp"
#include "test_support.hpp"

using namespace hoi;
using affordance::AffordanceRecord;

namespace {

geom::PointCloud make_cloud(const Mat& points) {
  geom::PointCloud cloud;
  cloud.points = points;
  return cloud;
}

geom::PointCloud sphere_cloud(int n, std::uint64_t seed, double radius = 1.0) {
  Rng rng(seed);
  Mat pts(n, 3);
  for (int i = 0; i < n; ++i) {
    Vec3 v(rng.normal(), rng.normal(), rng.normal());
    while (v.norm() < 1e-6) v = Vec3(rng.normal(), rng.normal(), rng.normal());
    pts.row(i) = (radius * v.normalized()).transpose();
  }
  return make_cloud(pts);
}

// All joints parked far from the origin so no unintended candidate fires.
motion::GlobalJoints far_joints(Eigen::Index L) {
  motion::GlobalJoints joints(L);
  for (Eigen::Index l = 0; l < L; ++l)
    for (int j = 0; j < motion::kNumJoints; ++j)
      joints.set_joint(l, j, Vec3(10.0, 10.0, 10.0));
  return joints;
}

motion::ObjectMotionSeq static_object(Eigen::Index L) {
  motion::ObjectMotionSeq seq;
  seq.frames = Mat::Zero(L, 6);
  return seq;
}

// Straight-line re-derivation of the ground-truth rule, posing the cloud with
// the quaternion oracle instead of the rotation-matrix code under test.
AffordanceRecord brute_force_gt(const motion::GlobalJoints& joints,
                                const motion::ObjectMotionSeq& obj_seq,
                                const geom::PointCloud& cloud, double gamma,
                                double state_threshold) {
  const Eigen::Index L = joints.num_frames();
  std::array<double, motion::kNumPrimaryJoints> best_d;
  std::array<Eigen::Index, motion::kNumPrimaryJoints> best_p;
  best_d.fill(std::numeric_limits<double>::infinity());
  best_p.fill(0);

  for (Eigen::Index l = 0; l < L; ++l) {
    const Vec3 omega = obj_seq.rotation(l);
    const Vec3 trans = obj_seq.translation(l);
    for (int c = 0; c < motion::kNumPrimaryJoints; ++c) {
      const Vec3 jp = joints.joint(l, motion::kPrimaryJoints[c]);
      for (Eigen::Index i = 0; i < cloud.size(); ++i) {
        const Vec3 posed = testsup::quat_rotate(omega, cloud.points.row(i).transpose()) + trans;
        const double d = (posed - jp).norm();
        if (d < best_d[static_cast<std::size_t>(c)]) {
          best_d[static_cast<std::size_t>(c)] = d;
          best_p[static_cast<std::size_t>(c)] = i;
        }
      }
    }
  }

  std::vector<std::pair<double, int>> cands;
  for (int c = 0; c < motion::kNumPrimaryJoints; ++c)
    if (best_d[static_cast<std::size_t>(c)] < gamma)
      cands.emplace_back(best_d[static_cast<std::size_t>(c)], c);
  std::sort(cands.begin(), cands.end());
  if (cands.size() > 2) cands.resize(2);
  std::vector<int> kept;
  for (const auto& [d, c] : cands) kept.push_back(c);
  std::sort(kept.begin(), kept.end());

  AffordanceRecord rec;
  for (int c : kept) rec.labels[c] = 1.0;
  for (std::size_t i = 0; i < kept.size(); ++i)
    rec.contact_points.row(static_cast<Eigen::Index>(i)) =
        cloud.points.row(best_p[static_cast<std::size_t>(kept[i])]);
  if (kept.size() == 1) rec.contact_points.row(1) = rec.contact_points.row(0);

  Vec3 mean = Vec3::Zero();
  for (Eigen::Index l = 0; l < L; ++l) mean += obj_seq.translation(l);
  mean /= static_cast<double>(L);
  double dev = 0.0;
  for (Eigen::Index l = 0; l < L; ++l)
    dev = std::max(dev, (obj_seq.translation(l) - mean).norm());
  rec.object_state = dev > state_threshold ? 1.0 : 0.0;
  return rec;
}

}  // namespace

TEST_SUITE("affordance") {
  TEST_CASE("flattened vector layout round trips exactly") {
    Rng rng(3);
    AffordanceRecord rec;
    rec.labels = (testsup::random_mat(rng, 8, 1).col(0).array() > 0.0).cast<double>();
    rec.contact_points = testsup::random_mat(rng, 2, 3, 0.4);
    rec.object_state = 1.0;
    const Vec y = rec.to_vector();
    REQUIRE(y.size() == affordance::kAffordanceDim);
    const AffordanceRecord back = AffordanceRecord::from_vector_raw(y);
    CHECK(back.labels == rec.labels);
    CHECK(back.contact_points == rec.contact_points);
    CHECK(back.object_state == rec.object_state);
    CHECK_THROWS_AS(AffordanceRecord::from_vector_raw(Vec::Zero(14)), std::invalid_argument);
  }

  TEST_CASE("decision rule keeps the two strongest labels at or above one half") {
    Vec y = Vec::Zero(15);
    for (int i = 0; i < 8; ++i) y[i] = 0.9 - 0.05 * i;  // 0.9, 0.85, ..., 0.55
    const AffordanceRecord rec = affordance::record_from_vector(y);
    CHECK(rec.label_indices() == std::vector<int>{0, 1});

    Vec y2 = Vec::Zero(15);
    y2[1] = 0.9;
    y2[3] = 0.8;
    y2[0] = 0.4;   // below threshold despite being a "real" activation
    y2[5] = 0.45;
    CHECK(affordance::record_from_vector(y2).label_indices() == std::vector<int>{1, 3});

    Vec y3 = Vec::Zero(15);
    y3.head<8>().setConstant(0.49);
    const AffordanceRecord rec3 = affordance::record_from_vector(y3);
    CHECK(rec3.label_indices().empty());
    CHECK_FALSE(rec3.has_contact());
  }

  TEST_CASE("decision rule breaks activation ties toward the lower index") {
    Vec y = Vec::Zero(15);
    y[2] = 0.7;
    y[5] = 0.7;
    y[6] = 0.9;
    CHECK(affordance::record_from_vector(y).label_indices() == std::vector<int>{2, 6});
  }

  TEST_CASE("decision rule thresholds the state flag and passes points through") {
    Rng rng(5);
    Vec y = Vec::Zero(15);
    y.segment<6>(8) = testsup::random_mat(rng, 6, 1).col(0);
    y[14] = 0.49;
    AffordanceRecord rec = affordance::record_from_vector(y);
    CHECK(rec.object_state == 0.0);
    CHECK(rec.contact_points.row(0) == y.segment<3>(8).transpose());
    CHECK(rec.contact_points.row(1) == y.segment<3>(11).transpose());
    y[14] = 0.5;
    CHECK(affordance::record_from_vector(y).object_state == 1.0);
    CHECK_THROWS_AS(affordance::record_from_vector(Vec::Zero(16)), std::invalid_argument);
  }

  TEST_CASE("a joint resting on the surface is extracted with its exact point") {
    Rng rng(11);
    const geom::PointCloud cloud = make_cloud(testsup::random_mat(rng, 20, 3, 0.3));
    const Eigen::Index L = 5;
    motion::GlobalJoints joints = far_joints(L);
    // Left wrist (candidate 6) sits exactly on cloud point 3 in frame 2.
    joints.set_joint(2, 20, cloud.points.row(3).transpose());

    const auto rec = affordance::extract_gt_affordance(joints, static_object(L), cloud);
    CHECK(rec.label_indices() == std::vector<int>{6});
    CHECK(rec.contact_points.row(0) == cloud.points.row(3));
    CHECK(rec.contact_points.row(1) == cloud.points.row(3));
    CHECK(rec.has_contact());
    CHECK(rec.object_state == 0.0);
  }

  TEST_CASE("two touching joints produce labels in ascending order with paired points") {
    Rng rng(12);
    const geom::PointCloud cloud = make_cloud(testsup::random_mat(rng, 16, 3, 0.25));
    const Eigen::Index L = 4;
    motion::GlobalJoints joints = far_joints(L);
    // Right wrist (candidate 7) closer than pelvis (candidate 0); labels must
    // still come out ascending with their own nearest points.
    joints.set_joint(1, 21, (cloud.points.row(5).transpose() + Vec3(0.01, 0, 0)).eval());
    joints.set_joint(3, 0, (cloud.points.row(9).transpose() + Vec3(0, 0.04, 0)).eval());

    const auto rec = affordance::extract_gt_affordance(joints, static_object(L), cloud);
    CHECK(rec.label_indices() == std::vector<int>{0, 7});
    CHECK(rec.contact_points.row(0) == cloud.points.row(9));  // pelvis pairs with row 0
    CHECK(rec.contact_points.row(1) == cloud.points.row(5));
  }

  TEST_CASE("a distant human yields no contact and zero points") {
    const geom::PointCloud cloud = sphere_cloud(32, 21);
    const auto rec = affordance::extract_gt_affordance(far_joints(3), static_object(3), cloud);
    CHECK_FALSE(rec.has_contact());
    CHECK(rec.labels.cwiseAbs().maxCoeff() == 0.0);
    CHECK(rec.contact_points.cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("the state flag follows the object translation deviation") {
    const geom::PointCloud cloud = sphere_cloud(16, 22);
    const Eigen::Index L = 2;
    const auto joints = far_joints(L);

    motion::ObjectMotionSeq still = static_object(L);
    still.frames(1, motion::obj::kTrans) = 0.09;  // deviation 0.045 from the mean
    CHECK(affordance::extract_gt_affordance(joints, still, cloud).object_state == 0.0);

    motion::ObjectMotionSeq moving = static_object(L);
    moving.frames(1, motion::obj::kTrans) = 0.12;  // deviation 0.06
    CHECK(affordance::extract_gt_affordance(joints, moving, cloud).object_state == 1.0);
  }

  TEST_CASE("extraction is invariant under a shared rigid transform") {
    Rng rng(31);
    const geom::PointCloud cloud = make_cloud(testsup::random_mat(rng, 16, 3, 0.3));
    const Eigen::Index L = 4;

    motion::GlobalJoints joints = far_joints(L);
    joints.set_joint(2, 20, (cloud.points.row(2).transpose() + Vec3(0.015, 0, 0)).eval());
    joints.set_joint(0, 12, (cloud.points.row(7).transpose() + Vec3(0, 0.05, 0)).eval());
    motion::ObjectMotionSeq obj = static_object(L);
    const auto base = affordance::extract_gt_affordance(joints, obj, cloud);
    REQUIRE(base.label_indices() == std::vector<int>{1, 6});

    // Shared world transform: rotate about y and translate.
    const Eigen::Matrix3d R0 = geom::rot_y(1.1);
    const Vec3 t0(0.7, 0.2, -1.3);
    motion::GlobalJoints moved(L);
    for (Eigen::Index l = 0; l < L; ++l)
      for (int j = 0; j < motion::kNumJoints; ++j)
        moved.set_joint(l, j, (R0 * joints.joint(l, j) + t0).eval());
    motion::ObjectMotionSeq obj_moved = obj;
    for (Eigen::Index l = 0; l < L; ++l) {
      const Eigen::Matrix3d R = R0 * geom::rodrigues(obj.rotation(l));
      const Eigen::AngleAxisd aa(R);
      obj_moved.frames.block<1, 3>(l, motion::obj::kRot) = (aa.angle() * aa.axis()).transpose();
      obj_moved.frames.block<1, 3>(l, motion::obj::kTrans) =
          (R0 * obj.translation(l) + t0).transpose();
    }

    const auto rec = affordance::extract_gt_affordance(moved, obj_moved, cloud);
    CHECK(rec.label_indices() == base.label_indices());
    // Rest-frame points are independent of the world placement.
    CHECK((rec.contact_points - base.contact_points).cwiseAbs().maxCoeff() == 0.0);
    CHECK(rec.object_state == base.object_state);
  }

  TEST_CASE("extraction matches a brute-force re-derivation on random scenes") {
    for (std::uint64_t trial = 0; trial < 10; ++trial) {
      Rng rng(100 + trial);
      const geom::PointCloud cloud = make_cloud(testsup::random_mat(rng, 24, 3, 0.3));
      const Eigen::Index L = 6;

      motion::ObjectMotionSeq obj;
      obj.frames = Mat::Zero(L, 6);
      const double amp = (trial % 2 == 0) ? 0.01 : 0.2;  // clearly static / clearly moving
      for (Eigen::Index l = 0; l < L; ++l) {
        obj.frames.block<1, 3>(l, motion::obj::kRot) =
            0.4 * testsup::random_mat(rng, 1, 3);
        obj.frames.block<1, 3>(l, motion::obj::kTrans) =
            amp * static_cast<double>(l) * Vec3(1.0, 0.0, 0.5).transpose();
      }

      motion::GlobalJoints joints(L);
      for (Eigen::Index l = 0; l < L; ++l)
        for (int j = 0; j < motion::kNumJoints; ++j)
          joints.set_joint(l, j, Vec3(rng.normal(), rng.normal(), rng.normal()));

      const auto got = affordance::extract_gt_affordance(joints, obj, cloud);
      const auto want = brute_force_gt(joints, obj, cloud, affordance::kContactGamma,
                                       affordance::kStateThreshold);
      CAPTURE(trial);
      CHECK(got.labels == want.labels);
      CHECK(got.contact_points == want.contact_points);
      CHECK(got.object_state == want.object_state);
    }
  }

  TEST_CASE("postprocessing passes non-contact records through unchanged") {
    Rng rng(41);
    AffordanceRecord rec;
    rec.contact_points = testsup::random_mat(rng, 2, 3);
    const auto out = affordance::postprocess_contacts(rec, sphere_cloud(32, 42));
    CHECK(out.labels == rec.labels);
    CHECK(out.contact_points == rec.contact_points);
  }

  TEST_CASE("zero offset snapping of an on-surface point is the identity") {
    const geom::PointCloud cloud = sphere_cloud(64, 51);
    AffordanceRecord rec;
    rec.labels[2] = 1.0;
    rec.contact_points.row(0) = cloud.points.row(10);
    rec.contact_points.row(1) = cloud.points.row(10);
    const auto once = affordance::postprocess_contacts(rec, cloud, 0.0);
    CHECK((once.contact_points - rec.contact_points).cwiseAbs().maxCoeff() < 1e-12);
    const auto twice = affordance::postprocess_contacts(once, cloud, 0.0);
    CHECK(twice.contact_points == once.contact_points);
  }

  TEST_CASE("offset contacts end up the requested distance off the surface") {
    const geom::PointCloud cloud = sphere_cloud(128, 52);
    AffordanceRecord rec;
    rec.labels[0] = 1.0;
    rec.labels[6] = 1.0;
    rec.contact_points.row(0) = cloud.points.row(3);
    rec.contact_points.row(1) = cloud.points.row(90);
    const double offset = affordance::kDefaultContactOffset;
    const auto out = affordance::postprocess_contacts(rec, cloud, offset);
    for (int r = 0; r < 2; ++r) {
      const Vec3 snap = cloud.points.row(r == 0 ? 3 : 90).transpose();
      const Vec3 moved = out.contact_points.row(r).transpose();
      CHECK(std::abs((moved - snap).norm() - offset) < 1e-9);
      // Outward from a sphere means farther from its center.
      CHECK(moved.norm() > snap.norm());
    }
  }

  TEST_CASE("interior points snap out to the surface shell") {
    const geom::PointCloud cloud = sphere_cloud(256, 53);
    AffordanceRecord rec;
    rec.labels[4] = 1.0;
    rec.contact_points.row(0) = (0.5 * cloud.points.row(17)).eval();
    rec.contact_points.row(1) = rec.contact_points.row(0);
    const auto out = affordance::postprocess_contacts(rec, cloud, 0.02);
    const double radius = out.contact_points.row(0).norm();
    CHECK(radius > 0.95);
    CHECK(radius < 1.1);
  }
}
