#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hoi/affordance.hpp"
#include "hoi/common.hpp"
#include "hoi/geometry.hpp"
#include "hoi/motion.hpp"

namespace hoi::data {

inline constexpr int kCloudPoints = 512;
inline constexpr int kManifestVersion = 1;

// One paired human/object clip with its prompt, geometry, and contact record.
struct HoiSample {
  std::string id;
  std::string prompt;
  motion::HumanMotionSeq human;
  motion::ObjectMotionSeq object;
  geom::PointCloud cloud;
  affordance::AffordanceRecord affordance;
};

struct SplitSpec {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

struct Dataset {
  std::vector<HoiSample> samples;
  SplitSpec split;
  double fps = 20.0;

  const HoiSample* find(const std::string& id) const;
  // Samples listed in the named split ("train" or "test").
  std::vector<const HoiSample*> split_samples(const std::string& name) const;
};

// Seeded shuffle of the ids; the first `test_fraction` lands in test (at
// least one sample per side when possible).
SplitSpec make_split(const std::vector<std::string>& ids, double test_fraction,
                     std::uint64_t seed);

// Directory layout: manifest.json plus one little-endian float32 blob per
// sample (human frames, object frames, cloud points, optional normals,
// affordance vector, row-major in that order). Numeric values must already
// lie on the float32 grid for the round trip to be bit-exact.
void write_dataset(const Dataset& ds, const std::string& dir);
Dataset read_dataset(const std::string& dir);

}  // namespace hoi::data
