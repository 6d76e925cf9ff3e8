#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "doctest.h"
#include "hoi/checkpoint.hpp"
#include "hoi/corpus.hpp"
#include "hoi/dataset.hpp"
#include "hoi/models.hpp"
#include "json.hpp"
#include "test_support.hpp"

using namespace hoi;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("hoi_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

corpus::CorpusSpec tiny_spec(const std::string& action, const std::string& object,
                             int per_pair = 2) {
  corpus::CorpusSpec spec;
  spec.actions = {action};
  spec.objects = {object};
  spec.samples_per_pair = per_pair;
  spec.frames = 24;
  spec.seed = 7;
  return spec;
}

data::Dataset tiny_dataset() {
  data::Dataset ds;
  ds.samples = corpus::generate_corpus(tiny_spec("sit", "chair"));
  std::vector<std::string> ids;
  for (const auto& s : ds.samples) ids.push_back(s.id);
  ds.split = data::make_split(ids, 0.5, 3);
  return ds;
}

bool on_f32_grid(const Mat& m) {
  return m == m.cast<float>().cast<double>();
}

void snap_params(const std::vector<nn::Param*>& params) {
  for (auto* p : params) p->value = p->value.cast<float>().cast<double>().eval();
}

}  // namespace

TEST_SUITE("dataset") {
  TEST_CASE("corpus requests are validated up front") {
    CHECK_THROWS_AS(corpus::generate_corpus([] {
                      auto s = tiny_spec("sit", "chair");
                      s.actions.clear();
                      return s;
                    }()),
                    std::invalid_argument);
    CHECK_THROWS_AS(corpus::generate_corpus([] {
                      auto s = tiny_spec("sit", "chair");
                      s.frames = 4;
                      return s;
                    }()),
                    std::invalid_argument);
    CHECK_THROWS_AS(corpus::generate_corpus([] {
                      auto s = tiny_spec("sit", "chair");
                      s.samples_per_pair = 0;
                      return s;
                    }()),
                    std::invalid_argument);
    CHECK_THROWS_AS(corpus::generate_corpus(tiny_spec("dance", "chair")),
                    std::invalid_argument);
    CHECK_THROWS_AS(corpus::generate_corpus(tiny_spec("sit", "rocket")),
                    std::invalid_argument);
  }

  TEST_CASE("a tiny corpus comes out complete, audited, and on the storage grid") {
    corpus::CorpusReport report;
    const auto samples = corpus::generate_corpus(tiny_spec("sit", "chair"), &report);
    CHECK(report.generated == static_cast<int>(samples.size()));
    CHECK(report.generated + report.skipped == 2);
    CHECK(report.audited == report.generated);
    CHECK(report.label_mismatches == 0);
    REQUIRE(!samples.empty());

    std::set<std::string> ids;
    for (const auto& s : samples) {
      ids.insert(s.id);
      CHECK(s.prompt.find("chair") != std::string::npos);
      CHECK(s.human.frames.rows() == 24);
      CHECK(s.human.frames.cols() == motion::chan::kDim);
      CHECK(s.object.frames.rows() == 24);
      CHECK(s.object.frames.cols() == motion::obj::kDim);
      CHECK(s.cloud.points.rows() == data::kCloudPoints);
      CHECK(on_f32_grid(s.human.frames));
      CHECK(on_f32_grid(s.object.frames));
      CHECK(on_f32_grid(s.cloud.points));
      // Sitting keeps the chair in place and always makes contact.
      CHECK(s.affordance.object_state == 0.0);
      CHECK(s.affordance.has_contact());
    }
    CHECK(ids.size() == samples.size());
  }

  TEST_CASE("pushing an object marks it as moving") {
    const auto samples = corpus::generate_corpus(tiny_spec("push", "box", 1));
    REQUIRE(!samples.empty());
    CHECK(samples[0].affordance.object_state == 1.0);
    CHECK(samples[0].prompt.find("box") != std::string::npos);
  }

  TEST_CASE("a written dataset reads back bit for bit") {
    const data::Dataset ds = tiny_dataset();
    REQUIRE(!ds.samples.empty());
    const fs::path dir = fresh_dir("roundtrip");
    data::write_dataset(ds, dir.string());
    const data::Dataset back = data::read_dataset(dir.string());

    CHECK(back.fps == ds.fps);
    REQUIRE(back.samples.size() == ds.samples.size());
    for (const auto& want : ds.samples) {
      const data::HoiSample* got = back.find(want.id);
      REQUIRE(got != nullptr);
      CHECK(got->prompt == want.prompt);
      CHECK(got->human.frames == want.human.frames);
      CHECK(got->object.frames == want.object.frames);
      CHECK(got->cloud.points == want.cloud.points);
      CHECK(got->cloud.has_normals() == want.cloud.has_normals());
      if (want.cloud.has_normals()) CHECK(got->cloud.normals == want.cloud.normals);
      CHECK(got->affordance.to_vector() == want.affordance.to_vector());
    }
    CHECK(back.split.train == ds.split.train);
    CHECK(back.split.test == ds.split.test);
    CHECK(back.find("no-such-id") == nullptr);

    const auto train = back.split_samples("train");
    const auto test = back.split_samples("test");
    CHECK(train.size() == ds.split.train.size());
    CHECK(test.size() == ds.split.test.size());
    CHECK_THROWS_AS(back.split_samples("validation"), std::invalid_argument);
  }

  TEST_CASE("a truncated sample blob is reported as a format error") {
    const fs::path dir = fresh_dir("truncated");
    data::write_dataset(tiny_dataset(), dir.string());
    fs::path blob;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.path().extension() == ".bin") blob = e.path();
    REQUIRE(!blob.empty());
    fs::resize_file(blob, fs::file_size(blob) / 2);
    CHECK_THROWS_WITH_AS(data::read_dataset(dir.string()),
                         doctest::Contains("dataset format error"), std::runtime_error);
  }

  TEST_CASE("an unknown manifest version is refused") {
    const fs::path dir = fresh_dir("version");
    data::write_dataset(tiny_dataset(), dir.string());
    const fs::path manifest = dir / "manifest.json";
    nlohmann::json j;
    {
      std::ifstream in(manifest);
      in >> j;
    }
    j["version"] = data::kManifestVersion + 1;
    {
      std::ofstream out(manifest);
      out << j;
    }
    CHECK_THROWS_WITH_AS(data::read_dataset(dir.string()),
                         doctest::Contains("manifest version"), std::runtime_error);
  }

  TEST_CASE("splits are seeded, disjoint, and cover every id") {
    std::vector<std::string> ids;
    for (char c = 'a'; c <= 'j'; ++c) ids.emplace_back(1, c);

    const auto split = data::make_split(ids, 0.3, 11);
    CHECK(split.test.size() == 3);
    CHECK(split.train.size() == 7);
    const auto again = data::make_split(ids, 0.3, 11);
    CHECK(again.train == split.train);
    CHECK(again.test == split.test);

    std::vector<std::string> all = split.train;
    all.insert(all.end(), split.test.begin(), split.test.end());
    std::sort(all.begin(), all.end());
    std::vector<std::string> sorted_ids = ids;
    std::sort(sorted_ids.begin(), sorted_ids.end());
    CHECK(all == sorted_ids);

    // A tiny but nonzero fraction still reserves one test sample.
    CHECK(data::make_split(ids, 0.05, 11).test.size() == 1);
    CHECK(data::make_split(ids, 0.0, 11).test.empty());
    CHECK_THROWS_AS(data::make_split(ids, -0.1, 11), std::invalid_argument);
    CHECK_THROWS_AS(data::make_split(ids, 1.0, 11), std::invalid_argument);
  }

  TEST_CASE("checkpoints restore a fresh model to an identical forward pass") {
    models::ApdmConfig cfg;
    cfg.latent_dim = 16;
    cfg.ff_dim = 24;
    cfg.heads = 2;
    cfg.layers = 1;
    cfg.cloud_hidden = 8;
    models::AffordanceDenoiser a(cfg, 1);
    snap_params(a.params());

    const fs::path dir = fresh_dir("ckpt");
    const std::string path = (dir / "apdm.ckpt").string();
    ckpt::save_checkpoint(path, ckpt::snapshot_params(a.params(), {{"kind", "unit-test"}}));

    const ckpt::Checkpoint loaded = ckpt::load_checkpoint(path);
    CHECK(loaded.meta.at("kind") == "unit-test");
    CHECK(loaded.tensors.size() == a.params().size());
    const Mat* pt1_w = loaded.find("apdm.pt1.w");
    REQUIRE(pt1_w != nullptr);
    CHECK(*pt1_w == a.pt1.w.value);
    CHECK(loaded.find("no.such.tensor") == nullptr);

    models::AffordanceDenoiser b(cfg, 2);  // different init
    REQUIRE(b.pt1.w.value != a.pt1.w.value);
    ckpt::restore_params(loaded, b.params());
    for (std::size_t i = 0; i < a.params().size(); ++i)
      CHECK(b.params()[i]->value == a.params()[i]->value);

    Rng rng(9);
    const Mat cloud = testsup::random_mat(rng, 16, 3, 0.3);
    CHECK(b.encode_cloud(cloud) == a.encode_cloud(cloud));
  }

  TEST_CASE("damaged checkpoint files are rejected") {
    CHECK_THROWS_AS(ckpt::load_checkpoint("/nonexistent/path.ckpt"), std::runtime_error);

    models::ApdmConfig cfg;
    cfg.latent_dim = 16;
    cfg.ff_dim = 24;
    cfg.heads = 2;
    cfg.layers = 1;
    cfg.cloud_hidden = 8;
    models::AffordanceDenoiser model(cfg, 1);
    const fs::path dir = fresh_dir("ckpt_bad");
    const std::string path = (dir / "m.ckpt").string();
    ckpt::save_checkpoint(path, ckpt::snapshot_params(model.params(), {}));

    {
      std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
      f.write("NOTRIGHT", 8);
    }
    CHECK_THROWS_WITH_AS(ckpt::load_checkpoint(path), doctest::Contains("bad magic"),
                         std::runtime_error);

    ckpt::save_checkpoint(path, ckpt::snapshot_params(model.params(), {}));
    fs::resize_file(path, fs::file_size(path) - 16);
    CHECK_THROWS_WITH_AS(ckpt::load_checkpoint(path),
                         doctest::Contains("checkpoint format error"), std::runtime_error);
  }

  TEST_CASE("restoring refuses duplicate or mismatched tensor sets") {
    models::ApdmConfig cfg;
    cfg.latent_dim = 16;
    cfg.ff_dim = 24;
    cfg.heads = 2;
    cfg.layers = 1;
    cfg.cloud_hidden = 8;
    models::AffordanceDenoiser model(cfg, 1);

    ckpt::Checkpoint dup = ckpt::snapshot_params(model.params(), {});
    dup.tensors.back() = dup.tensors.front();  // same count, repeated name
    CHECK_THROWS_WITH_AS(ckpt::restore_params(dup, model.params()),
                         doctest::Contains("duplicate"), std::runtime_error);

    models::ApdmConfig other = cfg;
    other.cloud_hidden = 12;  // different shapes under the same names
    models::AffordanceDenoiser wrong(other, 1);
    const ckpt::Checkpoint snap = ckpt::snapshot_params(model.params(), {});
    CHECK_THROWS_AS(ckpt::restore_params(snap, wrong.params()), std::runtime_error);
  }
}
