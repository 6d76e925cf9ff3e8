#include "hoi/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace hoi::data {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void append_f32(std::string& buf, double v) {
  const float f = static_cast<float>(v);
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  buf.push_back(static_cast<char>(u & 0xff));
  buf.push_back(static_cast<char>((u >> 8) & 0xff));
  buf.push_back(static_cast<char>((u >> 16) & 0xff));
  buf.push_back(static_cast<char>((u >> 24) & 0xff));
}

void append_mat(std::string& buf, const Mat& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) append_f32(buf, m(r, c));
}

class BlobReader {
 public:
  BlobReader(std::string data, std::string context)
      : data_(std::move(data)), context_(std::move(context)) {}

  double next(const char* field) {
    if (pos_ + 4 > data_.size())
      throw std::runtime_error("dataset format error: blob for " + context_ +
                               " truncated while reading " + field);
    std::uint32_t u = 0;
    for (int i = 0; i < 4; ++i)
      u |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 4;
    float f;
    std::memcpy(&f, &u, 4);
    return static_cast<double>(f);
  }

  Mat read_mat(Eigen::Index rows, Eigen::Index cols, const char* field) {
    Mat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = next(field);
    return m;
  }

  void finish() {
    if (pos_ != data_.size())
      throw std::runtime_error("dataset format error: blob for " + context_ + " has " +
                               std::to_string(data_.size() - pos_) + " unread trailing bytes");
  }

 private:
  std::string data_;
  std::string context_;
  std::size_t pos_ = 0;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("dataset: cannot open " + p.string());
  std::string out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return out;
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("dataset: cannot write " + p.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("dataset: short write to " + p.string());
}

}  // namespace

const HoiSample* Dataset::find(const std::string& id) const {
  for (const HoiSample& s : samples)
    if (s.id == id) return &s;
  return nullptr;
}

std::vector<const HoiSample*> Dataset::split_samples(const std::string& name) const {
  const std::vector<std::string>* ids = nullptr;
  if (name == "train") ids = &split.train;
  else if (name == "test") ids = &split.test;
  else throw std::invalid_argument("dataset: unknown split '" + name + "'");
  std::vector<const HoiSample*> out;
  for (const std::string& id : *ids) {
    const HoiSample* s = find(id);
    if (s == nullptr) throw std::runtime_error("dataset: split names missing sample '" + id + "'");
    out.push_back(s);
  }
  return out;
}

SplitSpec make_split(const std::vector<std::string>& ids, double test_fraction,
                     std::uint64_t seed) {
  require(test_fraction >= 0.0 && test_fraction < 1.0, "make_split: bad test fraction");
  std::vector<std::string> order = ids;
  Rng rng(seed);
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[static_cast<std::size_t>(
                                rng.uniform_int(0, static_cast<int>(i) - 1))]);
  std::size_t n_test = static_cast<std::size_t>(test_fraction * static_cast<double>(order.size()));
  if (n_test == 0 && order.size() >= 2 && test_fraction > 0.0) n_test = 1;
  SplitSpec split;
  split.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(split.test.begin(), split.test.end());
  std::sort(split.train.begin(), split.train.end());
  return split;
}

void write_dataset(const Dataset& ds, const std::string& dir) {
  fs::create_directories(dir);
  json manifest;
  manifest["version"] = kManifestVersion;
  manifest["fps"] = ds.fps;
  manifest["samples"] = json::array();

  for (const HoiSample& s : ds.samples) {
    require(!s.id.empty(), "write_dataset: sample id must not be empty");
    require(s.human.frames.cols() == motion::chan::kDim, "write_dataset: bad human width");
    require(s.object.frames.cols() == motion::obj::kDim, "write_dataset: bad object width");
    require(s.human.num_frames() == s.object.num_frames(),
            "write_dataset: human/object frame mismatch");
    require(s.cloud.points.rows() == kCloudPoints,
            "write_dataset: stored clouds must have 512 points");

    std::string blob;
    append_mat(blob, s.human.frames);
    append_mat(blob, s.object.frames);
    append_mat(blob, s.cloud.points);
    const bool has_normals = s.cloud.has_normals();
    if (has_normals) append_mat(blob, s.cloud.normals);
    append_mat(blob, s.affordance.to_vector());

    const std::string blob_name = s.id + ".bin";
    write_file(fs::path(dir) / blob_name, blob);
    manifest["samples"].push_back({{"id", s.id},
                                   {"prompt", s.prompt},
                                   {"frames", s.human.num_frames()},
                                   {"cloud_size", kCloudPoints},
                                   {"has_normals", has_normals},
                                   {"blob", blob_name}});
  }
  manifest["split"] = {{"train", ds.split.train}, {"test", ds.split.test}};
  write_file(fs::path(dir) / "manifest.json", manifest.dump(2) + "\n");
}

Dataset read_dataset(const std::string& dir) {
  const fs::path root(dir);
  json manifest;
  try {
    manifest = json::parse(read_file(root / "manifest.json"));
  } catch (const json::parse_error& e) {
    throw std::runtime_error("dataset format error: manifest.json is not valid JSON (" +
                             std::string(e.what()) + ")");
  }
  if (!manifest.contains("version") || !manifest["version"].is_number_integer())
    throw std::runtime_error("dataset format error: manifest field 'version' missing");
  if (manifest["version"].get<int>() != kManifestVersion)
    throw std::runtime_error("dataset format error: manifest version " +
                             std::to_string(manifest["version"].get<int>()) +
                             " unsupported (expected " + std::to_string(kManifestVersion) + ")");

  Dataset ds;
  ds.fps = manifest.value("fps", 20.0);
  for (const json& entry : manifest.at("samples")) {
    HoiSample s;
    try {
      s.id = entry.at("id").get<std::string>();
      s.prompt = entry.at("prompt").get<std::string>();
    } catch (const json::exception&) {
      throw std::runtime_error("dataset format error: sample entry missing field 'id'/'prompt'");
    }
    const auto frames = entry.at("frames").get<Eigen::Index>();
    const auto cloud_size = entry.at("cloud_size").get<Eigen::Index>();
    const bool has_normals = entry.at("has_normals").get<bool>();
    if (frames < 1)
      throw std::runtime_error("dataset format error: field 'frames' invalid for sample " + s.id);
    if (cloud_size != kCloudPoints)
      throw std::runtime_error("dataset format error: field 'cloud_size' must be 512 for sample " +
                               s.id);

    BlobReader blob(read_file(root / entry.at("blob").get<std::string>()), "sample " + s.id);
    s.human.fps = ds.fps;
    s.human.frames = blob.read_mat(frames, motion::chan::kDim, "human frames");
    s.object.frames = blob.read_mat(frames, motion::obj::kDim, "object frames");
    s.cloud.points = blob.read_mat(cloud_size, 3, "cloud points");
    if (has_normals) s.cloud.normals = blob.read_mat(cloud_size, 3, "cloud normals");
    s.affordance = affordance::AffordanceRecord::from_vector_raw(
        blob.read_mat(affordance::kAffordanceDim, 1, "affordance vector").col(0));
    blob.finish();
    ds.samples.push_back(std::move(s));
  }
  const json& split = manifest.at("split");
  ds.split.train = split.at("train").get<std::vector<std::string>>();
  ds.split.test = split.at("test").get<std::vector<std::string>>();
  for (const std::string& id : ds.split.train)
    if (ds.find(id) == nullptr)
      throw std::runtime_error("dataset format error: split references unknown sample '" + id +
                               "'");
  for (const std::string& id : ds.split.test)
    if (ds.find(id) == nullptr)
      throw std::runtime_error("dataset format error: split references unknown sample '" + id +
                               "'");
  return ds;
}

}  // namespace hoi::data
