#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "hoi/affordance.hpp"
#include "hoi/geometry.hpp"
#include "hoi/metrics.hpp"
#include "hoi/motion.hpp"
#include "test_support.hpp"

using namespace hoi;
using affordance::AffordanceRecord;

namespace {

namespace obj = motion::obj;

// Features of a person standing still at the origin, facing +z.
motion::HumanMotionSeq standing_clip(Eigen::Index L, double pelvis_height = 0.92) {
  const auto rest = motion::rest_pose(pelvis_height);
  motion::GlobalJoints joints(L);
  for (Eigen::Index l = 0; l < L; ++l)
    for (int j = 0; j < motion::kNumJoints; ++j) joints.set_joint(l, j, rest[j]);
  return motion::encode_human(joints);
}

// Rigid translation along x by per-frame offsets, whole body together.
motion::HumanMotionSeq translated_clip(const std::vector<double>& xs, double pelvis_height) {
  const auto rest = motion::rest_pose(pelvis_height);
  motion::GlobalJoints joints(static_cast<Eigen::Index>(xs.size()));
  for (std::size_t l = 0; l < xs.size(); ++l)
    for (int j = 0; j < motion::kNumJoints; ++j)
      joints.set_joint(static_cast<Eigen::Index>(l), j, rest[j] + Vec3(xs[l], 0.0, 0.0));
  return motion::encode_human(joints);
}

motion::ObjectMotionSeq static_object(Eigen::Index L) {
  motion::ObjectMotionSeq seq;
  seq.frames = Mat::Zero(L, 6);
  return seq;
}

Vec3 decoded_joint(const motion::HumanMotionSeq& seq, Eigen::Index l, int joint) {
  return motion::recover_global_joints(seq).joint(l, joint);
}

double chamfer_brute(const Mat& a, const Mat& b) {
  double ab = 0.0, ba = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < b.rows(); ++j)
      best = std::min(best, (a.row(i) - b.row(j)).norm());
    ab += best;
  }
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      best = std::min(best, (a.row(i) - b.row(j)).norm());
    ba += best;
  }
  return 0.5 * (ab / static_cast<double>(a.rows()) + ba / static_cast<double>(b.rows()));
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("contact distance is absent without contact labels") {
    const auto human = standing_clip(4);
    AffordanceRecord rec;
    CHECK_FALSE(metrics::contact_distance(human, static_object(4), rec).has_value());
  }

  TEST_CASE("a joint that tracks its contact point scores zero") {
    const Eigen::Index L = 6;
    const auto human = standing_clip(L);
    AffordanceRecord rec;
    rec.labels[6] = 1.0;  // left wrist
    const Vec3 wrist = decoded_joint(human, 0, 20);
    rec.contact_points.row(0) = wrist.transpose();
    rec.contact_points.row(1) = wrist.transpose();
    const auto d = metrics::contact_distance(human, static_object(L), rec);
    REQUIRE(d.has_value());
    CHECK(*d < 1e-9);
  }

  TEST_CASE("a constant gap scores exactly the gap") {
    const Eigen::Index L = 7;
    const auto human = standing_clip(L);
    const double gap = 0.13;
    AffordanceRecord rec;
    rec.labels[6] = 1.0;
    const Vec3 target = decoded_joint(human, 0, 20) + gap * Vec3(0.0, 0.0, 1.0);
    rec.contact_points.row(0) = target.transpose();
    rec.contact_points.row(1) = target.transpose();
    const auto d = metrics::contact_distance(human, static_object(L), rec);
    REQUIRE(d.has_value());
    CHECK(testsup::rel_err(*d, gap) < 1e-9);
  }

  TEST_CASE("contact distance matches a per-frame brute-force recomputation") {
    for (std::uint64_t trial = 0; trial < 6; ++trial) {
      Rng rng(900 + trial);
      const Eigen::Index L = 8;
      motion::HumanMotionSeq human = standing_clip(L);
      human.frames += testsup::random_mat(rng, L, motion::chan::kDim, 0.05);

      motion::ObjectMotionSeq object;
      object.frames = Mat::Zero(L, 6);
      object.frames.leftCols<3>() = testsup::random_mat(rng, L, 3, 0.7);
      object.frames.rightCols<3>() = testsup::random_mat(rng, L, 3, 0.3);

      AffordanceRecord rec;
      rec.labels[rng.uniform_int(0, 3)] = 1.0;
      if (trial % 2 == 0) rec.labels[rng.uniform_int(4, 7)] = 1.0;
      rec.contact_points = testsup::random_mat(rng, 2, 3, 0.3);

      const auto got = metrics::contact_distance(human, object, rec);
      REQUIRE(got.has_value());

      const motion::GlobalJoints joints = motion::recover_global_joints(human);
      const std::vector<int> labels = rec.label_indices();
      long double want = 0.0L;
      for (Eigen::Index l = 0; l < L; ++l) {
        Mat joint_set(static_cast<Eigen::Index>(labels.size()), 3);
        for (std::size_t i = 0; i < labels.size(); ++i)
          joint_set.row(static_cast<Eigen::Index>(i)) =
              joints.joint(l, motion::kPrimaryJoints[labels[i]]).transpose();
        Mat point_set(2, 3);
        for (int r = 0; r < 2; ++r)
          point_set.row(r) =
              (testsup::quat_rotate(object.rotation(l),
                                    rec.contact_points.row(r).transpose()) +
               object.translation(l))
                  .transpose();
        want += chamfer_brute(joint_set, point_set);
      }
      want /= static_cast<long double>(L);
      CAPTURE(trial);
      CHECK(testsup::rel_err(*got, static_cast<double>(want)) < 1e-10);
    }
  }

  TEST_CASE("contact distance rejects mismatched frame counts") {
    AffordanceRecord rec;
    rec.labels[0] = 1.0;
    CHECK_THROWS_AS(metrics::contact_distance(standing_clip(4), static_object(5), rec),
                    std::invalid_argument);
  }

  TEST_CASE("planted feet do not skate") {
    CHECK(metrics::foot_skate_ratio(standing_clip(12, 0.90)) == 0.0);
  }

  TEST_CASE("fast motion above the ground band does not count as skating") {
    std::vector<double> xs(12);
    for (std::size_t l = 0; l < xs.size(); ++l) xs[l] = 0.1 * static_cast<double>(l);
    const auto airborne = translated_clip(xs, 1.4);  // feet far above the band
    CHECK(metrics::foot_skate_ratio(airborne) == 0.0);
  }

  TEST_CASE("a clip that slides for half its transitions scores one half") {
    // Feet in the ground band throughout; 0.05 m steps for the first ten
    // transitions, then still for the remaining ten.
    std::vector<double> xs(21);
    for (std::size_t l = 0; l < xs.size(); ++l)
      xs[l] = 0.05 * static_cast<double>(std::min<std::size_t>(l, 10));
    const auto half = translated_clip(xs, 0.90);
    CHECK(metrics::foot_skate_ratio(half) == doctest::Approx(0.5).epsilon(1e-6));
  }

  TEST_CASE("skate ratio falls as the slide threshold grows") {
    std::vector<double> xs(16);
    Rng rng(77);
    double x = 0.0;
    for (std::size_t l = 0; l < xs.size(); ++l) {
      xs[l] = x;
      x += 0.04 * rng.uniform();
    }
    const auto walk = translated_clip(xs, 0.90);
    const double strict = metrics::foot_skate_ratio(walk, 0.05, 0.005);
    const double mid = metrics::foot_skate_ratio(walk, 0.05, 0.025);
    const double loose = metrics::foot_skate_ratio(walk, 0.05, 0.1);
    CHECK(strict >= mid);
    CHECK(mid >= loose);
    CHECK(strict > 0.0);
    // With the ground band dropped below the feet nothing is ever planted.
    CHECK(metrics::foot_skate_ratio(walk, -0.1, 0.025) == 0.0);
  }

  TEST_CASE("identical feature vectors have zero diversity") {
    Rng sample(5), rng(6);
    const Vec f = testsup::random_mat(sample, 16, 1).col(0);
    const std::vector<Vec> feats(5, f);
    CHECK(metrics::diversity(feats, 50, rng) == 0.0);
  }

  TEST_CASE("two fixed samples make every pair span their distance") {
    const int dim = 9;
    std::vector<Vec> feats = {Vec::Zero(dim), Vec::Ones(dim)};
    Rng rng(7);
    CHECK(testsup::rel_err(metrics::diversity(feats, 64, rng), std::sqrt(9.0)) < 1e-12);
  }

  TEST_CASE("diversity is reproducible for a seed and estimates the pair mean") {
    // Three collinear points with pair distances 1, 2, 1 -> mean 4/3.
    std::vector<Vec> feats = {Vec::Zero(4), Vec::Ones(4) / 2.0, Vec::Ones(4)};
    Rng a(11), b(11), c(12);
    const double da = metrics::diversity(feats, 20000, a);
    CHECK(da == metrics::diversity(feats, 20000, b));
    CHECK(std::abs(da - 4.0 / 3.0) < 0.05);
    CHECK(metrics::diversity(feats, 20000, c) != da);  // different draw stream

    Rng r(13);
    std::vector<Vec> one = {Vec::Zero(4)};
    CHECK_THROWS_AS(metrics::diversity(one, 10, r), std::invalid_argument);
    CHECK_THROWS_AS(metrics::diversity(feats, 0, r), std::invalid_argument);
  }

  TEST_CASE("a distribution has zero distance to itself") {
    Rng rng(21);
    const Mat a = testsup::random_mat(rng, 20, 6);
    CHECK(std::abs(metrics::fid(a, a)) < 1e-8);
  }

  TEST_CASE("a pure mean shift scores the squared shift") {
    Rng rng(22);
    const Mat a = testsup::random_mat(rng, 24, 5);
    const double m = 0.8;
    Mat b = a;
    b.col(2).array() += m;
    CHECK(std::abs(metrics::fid(a, b) - m * m) < 1e-8);
  }

  TEST_CASE("one-dimensional variance mismatch has its closed form") {
    Mat a(3, 1), b(3, 1);
    a << -1.0, 0.0, 1.0;  // unbiased variance 1
    b << -2.0, 0.0, 2.0;  // unbiased variance 4
    // Equal means, so the score is (sigma_a - sigma_b)^2 = 1.
    CHECK(std::abs(metrics::fid(a, b) - 1.0) < 1e-4);
  }

  TEST_CASE("the distribution distance is symmetric and nonnegative") {
    Rng rng(23);
    for (int trial = 0; trial < 4; ++trial) {
      const Mat a = testsup::random_mat(rng, 12 + trial, 7);
      const Mat b = testsup::random_mat(rng, 15, 7).array() * 1.3 + 0.2;
      const double ab = metrics::fid(a, b);
      const double ba = metrics::fid(b, a);
      CHECK(std::abs(ab - ba) < 1e-7);
      CHECK(ab > -1e-9);
    }
  }

  TEST_CASE("degenerate feature sets are rejected") {
    Rng rng(24);
    const Mat a = testsup::random_mat(rng, 10, 4);
    CHECK_THROWS_AS(metrics::fid(a, testsup::random_mat(rng, 1, 4)), std::invalid_argument);
    CHECK_THROWS_AS(metrics::fid(a, testsup::random_mat(rng, 10, 5)), std::invalid_argument);
    Mat bad = a;
    bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(metrics::fid(a, bad), std::invalid_argument);
  }
}
