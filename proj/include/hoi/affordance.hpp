#pragma once

#include <vector>

#include "hoi/common.hpp"
#include "hoi/geometry.hpp"
#include "hoi/motion.hpp"

namespace hoi::affordance {

// Contact radius: a candidate joint whose closest approach to the object
// surface stays under this (meters) counts as touching.
inline constexpr double kContactGamma = 0.1;

// An object whose translation deviates from its mean by more than this
// (meters) at any frame is labelled moving.
inline constexpr double kStateThreshold = 0.05;

inline constexpr double kDefaultContactOffset = 0.02;

// Width of the flattened record: 8 labels + two 3D contact points + state.
inline constexpr int kAffordanceDim = 15;

// Affordance data for one interaction: which candidate joints touch the
// object, where on the object (rest frame), and whether the object moves.
// Flattened vector layout: [labels 0..7 | point0 xyz | point1 xyz | state].
struct AffordanceRecord {
  Vec labels = Vec::Zero(motion::kNumPrimaryJoints);  // 0/1 flags
  Mat contact_points = Mat::Zero(2, 3);               // object rest frame
  double object_state = 0.0;                          // 1 = moving

  bool has_contact() const { return labels.sum() > 0.5; }

  // Set label positions, ascending; the i-th entry pairs with contact point
  // row min(i, 1).
  std::vector<int> label_indices() const;

  Vec to_vector() const;
  static AffordanceRecord from_vector_raw(const Vec& y);  // no thresholding
};

// Decision rules applied to a continuous 15-vector: labels at or above 0.5
// are kept, capped at the two largest pre-threshold activations (ties to the
// lower index); the state flag thresholds at 0.5; points pass through.
AffordanceRecord record_from_vector(const Vec& y);

// Ground-truth affordance from a clip: per candidate joint, the closest
// approach to the posed cloud across all frames. Joints within gamma are
// contact candidates; the closest two (or one, with its point duplicated)
// become labels, with their nearest surface points recorded in the object
// rest frame. No candidates leaves an all-zero label set. The state flag
// reflects whether the object translation strays from its mean.
AffordanceRecord extract_gt_affordance(const motion::GlobalJoints& joints,
                                       const motion::ObjectMotionSeq& obj_seq,
                                       const geom::PointCloud& cloud,
                                       double gamma = kContactGamma,
                                       double state_threshold = kStateThreshold);

// Snap each active contact point onto the cloud surface, then push it
// outward along the local normal. Uses the cloud's stored normals, or
// estimates them on a local copy when absent. Records without contact pass
// through unchanged.
AffordanceRecord postprocess_contacts(const AffordanceRecord& rec, const geom::PointCloud& cloud,
                                      double offset = kDefaultContactOffset);

}  // namespace hoi::affordance
