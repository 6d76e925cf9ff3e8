#pragma once

#include <optional>
#include <vector>

#include "hoi/affordance.hpp"
#include "hoi/common.hpp"
#include "hoi/motion.hpp"

namespace hoi::metrics {

struct EvalReport {
  double contact_distance = 0.0;  // meters; mean over scored samples
  double foot_skate_ratio = 0.0;  // fraction in [0, 1]
  double diversity = 0.0;
  std::optional<double> fid;
  int sample_count = 0;
};

// Mean over frames of the chamfer distance between the labeled contact
// joints (world positions from the human features) and the object contact
// points (rest points carried through the object poses). Absent when the
// record has no contact labels.
std::optional<double> contact_distance(const motion::HumanMotionSeq& human,
                                       const motion::ObjectMotionSeq& object,
                                       const affordance::AffordanceRecord& rec);

// Fraction of frame transitions where some foot joint is below ground_height
// and slides farther than skid_threshold on the ground plane.
double foot_skate_ratio(const motion::HumanMotionSeq& human, double ground_height = 0.05,
                        double skid_threshold = 0.025);

// Mean Euclidean distance between randomly paired feature vectors.
double diversity(const std::vector<Vec>& features, int pairs, Rng& rng);

// Frechet distance between Gaussian fits of the two feature sets (rows are
// samples). Covariances use the unbiased estimator and are regularized with
// a 1e-6 diagonal before the symmetric matrix square root.
double fid(const Mat& real_feats, const Mat& gen_feats);

}  // namespace hoi::metrics
