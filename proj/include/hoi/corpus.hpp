#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hoi/common.hpp"
#include "hoi/dataset.hpp"

namespace hoi::corpus {

inline const std::vector<std::string>& known_actions();
inline const std::vector<std::string>& known_objects();

struct CorpusSpec {
  std::vector<std::string> actions = {"carry", "lift-left", "lift-right", "sit", "push", "pull"};
  std::vector<std::string> objects = {"box", "chair", "table", "ball"};
  int samples_per_pair = 4;
  Eigen::Index frames = 196;
  double fps = 20.0;
  std::uint64_t seed = 7;
};

struct CorpusReport {
  int generated = 0;
  int skipped = 0;
  std::vector<std::string> skip_reasons;  // one entry per skipped sample
  int audited = 0;
  int label_mismatches = 0;  // constructed labels vs re-extracted labels
};

// Procedural interaction clips: scripted object motion, planted feet, a
// reach-driven crouch/lean profile, and two-bone limb inverse kinematics.
// Each sample is checked for reachability and contact-layout clearance and
// skipped (with a reason) when its jittered geometry is infeasible. All
// stored numbers are snapped to the float32 grid.
std::vector<data::HoiSample> generate_corpus(const CorpusSpec& spec,
                                             CorpusReport* report = nullptr);

inline const std::vector<std::string>& known_actions() {
  static const std::vector<std::string> a = {"carry", "lift-left", "lift-right",
                                             "sit",   "push",      "pull"};
  return a;
}

inline const std::vector<std::string>& known_objects() {
  static const std::vector<std::string> o = {"box", "chair", "table", "ball"};
  return o;
}

}  // namespace hoi::corpus
