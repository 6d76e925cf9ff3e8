#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "hoi/diffusion.hpp"
#include "hoi/models.hpp"
#include "hoi/nn.hpp"
#include "test_support.hpp"

using namespace hoi;
using models::AffBatch;
using models::AffordanceDenoiser;
using models::ApdmConfig;
using models::HoiBatch;
using models::HoiDenoiser;
using models::HoiModelConfig;

namespace {

HoiModelConfig tiny_hoi_config() {
  HoiModelConfig cfg;
  cfg.latent_dim = 16;
  cfg.ff_dim = 24;
  cfg.heads = 2;
  cfg.human_layers = 2;
  cfg.object_layers = 1;
  cfg.cm_human_layer = 1;
  cfg.dropout = 0.0;
  cfg.use_cm = true;
  return cfg;
}

ApdmConfig tiny_apdm_config() {
  ApdmConfig cfg;
  cfg.latent_dim = 16;
  cfg.ff_dim = 24;
  cfg.heads = 2;
  cfg.layers = 1;
  cfg.dropout = 0.0;
  cfg.cloud_hidden = 8;
  return cfg;
}

HoiBatch tiny_hoi_batch(int B, Eigen::Index L, int T, Rng& rng) {
  HoiBatch batch;
  batch.L = L;
  batch.x0_h = testsup::random_mat(rng, B * L, models::kHumanDim, 0.5);
  batch.x0_o = testsup::random_mat(rng, B * L, models::kObjectDim, 0.5);
  batch.noise_h = testsup::random_mat(rng, B * L, models::kHumanDim);
  batch.noise_o = testsup::random_mat(rng, B * L, models::kObjectDim);
  batch.text = Mat::Zero(B, models::kTextDim);
  for (int b = 0; b < B; ++b) {
    batch.text.row(b) = models::text_embed(b % 2 == 0 ? "lift the box" : "sit on the chair")
                            .transpose();
    batch.ts.push_back(rng.uniform_int(1, T));
  }
  return batch;
}

AffBatch tiny_aff_batch(int B, Eigen::Index n_points, int T, Rng& rng) {
  AffBatch batch;
  batch.n_points = n_points;
  batch.y0 = testsup::random_mat(rng, B, models::kAffDim, 0.5);
  batch.noise = testsup::random_mat(rng, B, models::kAffDim);
  batch.points = testsup::random_mat(rng, B * n_points, 3, 0.3);
  batch.text = Mat::Zero(B, models::kTextDim);
  for (int b = 0; b < B; ++b) {
    batch.text.row(b) = models::text_embed(b % 2 == 0 ? "push the chair" : "pull the table")
                            .transpose();
    batch.ts.push_back(rng.uniform_int(1, T));
  }
  return batch;
}

double cosine(const Vec& a, const Vec& b) { return a.dot(b) / (a.norm() * b.norm()); }

// Checks the analytic parameter gradients of a rebuildable scalar loss against
// central finite differences on a seeded subsample of coordinates per tensor.
void subsampled_param_gradcheck(const std::vector<nn::Param*>& params,
                                const std::function<double()>& loss_value,
                                const std::function<void()>& compute_grads, double h,
                                double tol, std::uint64_t seed) {
  compute_grads();
  std::vector<Mat> analytic;
  analytic.reserve(params.size());
  for (const auto* p : params) analytic.push_back(p->grad);

  Rng pick(seed);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    nn::Param* p = params[pi];
    const Eigen::Index n = p->value.size();
    const Eigen::Index probes = std::min<Eigen::Index>(4, n);
    for (Eigen::Index k = 0; k < probes; ++k) {
      const Eigen::Index flat = pick.uniform_int(0, static_cast<int>(n) - 1);
      const Eigen::Index r = flat % p->value.rows();
      const Eigen::Index c = flat / p->value.rows();
      const double keep = p->value(r, c);
      p->value(r, c) = keep + h;
      const double up = loss_value();
      p->value(r, c) = keep - h;
      const double down = loss_value();
      p->value(r, c) = keep;
      const double fd = (up - down) / (2.0 * h);
      const double got = analytic[pi](r, c);
      const double err = std::abs(got - fd) / std::max({1.0, std::abs(got), std::abs(fd)});
      CAPTURE(p->name);
      CAPTURE(flat);
      CHECK(err < tol);
    }
  }
}

}  // namespace

TEST_SUITE("models") {
  TEST_CASE("text embedding is deterministic, unit norm, and never the zero vector") {
    const std::vector<std::string> prompts = {
        "lift the box", "sit on the chair", "push the table", "", "pull the chair closer"};
    for (const auto& p : prompts) {
      const Vec a = models::text_embed(p);
      const Vec b = models::text_embed(p);
      REQUIRE(a.size() == models::kTextDim);
      CHECK(a == b);
      CHECK(std::abs(a.norm() - 1.0) < 1e-12);
      CHECK(a.cwiseAbs().maxCoeff() > 0.0);
    }
  }

  TEST_CASE("text embedding ignores case and punctuation") {
    const Vec a = models::text_embed("Lift the box.");
    const Vec b = models::text_embed("lift   the BOX");
    CHECK(a == b);
  }

  TEST_CASE("distinct prompts produce distinct embeddings") {
    const Vec lift = models::text_embed("lift the box");
    const Vec sit = models::text_embed("sit on the chair");
    const Vec empty = models::text_embed("");
    CHECK(cosine(lift, sit) < 0.99);
    CHECK(cosine(lift, empty) < 0.99);
    // Shared tokens pull prompts together relative to unrelated ones.
    const Vec lift2 = models::text_embed("lift the heavy box");
    CHECK(cosine(lift, lift2) > cosine(lift, sit));
  }

  TEST_CASE("normalization statistics round trip and center the data") {
    Rng rng(41);
    std::vector<Mat> human, object;
    std::vector<Vec> aff;
    for (int i = 0; i < 3; ++i) {
      human.push_back(testsup::random_mat(rng, 12, models::kHumanDim, 2.0).array() + 0.7);
      object.push_back(testsup::random_mat(rng, 12, models::kObjectDim, 0.5).array() - 0.2);
      aff.push_back(testsup::random_mat(rng, models::kAffDim, 1).col(0));
    }
    const auto stats = models::NormStats::fit(human, object, aff);

    const Mat nh = stats.normalize_h(human[0]);
    CHECK((stats.denormalize_h(nh) - human[0]).cwiseAbs().maxCoeff() < 1e-12);
    const Mat no = stats.normalize_o(object[1]);
    CHECK((stats.denormalize_o(no) - object[1]).cwiseAbs().maxCoeff() < 1e-12);
    Mat ya(1, models::kAffDim);
    ya.row(0) = aff[2].transpose();
    const Mat ny = stats.normalize_y(ya);
    CHECK((stats.denormalize_y(ny) - ya).cwiseAbs().maxCoeff() < 1e-12);

    // Normalizing the pooled training rows must center every channel.
    Mat all(36, models::kHumanDim);
    for (int i = 0; i < 3; ++i) all.middleRows(12 * i, 12) = human[i];
    const Mat norm_all = stats.normalize_h(all);
    CHECK(norm_all.colwise().mean().cwiseAbs().maxCoeff() < 1e-9);
  }

  TEST_CASE("constant channels normalize to finite values via the std floor") {
    std::vector<Mat> human = {Mat::Constant(8, models::kHumanDim, 3.25)};
    std::vector<Mat> object = {Mat::Constant(8, models::kObjectDim, -1.5)};
    std::vector<Vec> aff = {Vec::Zero(models::kAffDim)};
    const auto stats = models::NormStats::fit(human, object, aff);
    CHECK(stats.std_h.minCoeff() >= models::NormStats::kStdFloor);
    const Mat nh = stats.normalize_h(human[0]);
    CHECK(nh.allFinite());
    CHECK(nh.cwiseAbs().maxCoeff() < 1e-6);  // centered constant / floored std
    CHECK((stats.denormalize_h(nh) - human[0]).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("point cloud encoding is exactly permutation invariant") {
    AffordanceDenoiser model(tiny_apdm_config(), 909);
    Rng rng(17);
    const Mat cloud = testsup::random_mat(rng, 40, 3, 0.4);
    const Mat feat = model.encode_cloud(cloud);
    REQUIRE(feat.rows() == 1);
    REQUIRE(feat.cols() == tiny_apdm_config().cloud_hidden);
    CHECK(feat == model.encode_cloud(cloud));  // deterministic

    std::vector<Eigen::Index> perm(40);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), std::mt19937{7});
    Mat shuffled(40, 3);
    for (Eigen::Index i = 0; i < 40; ++i) shuffled.row(i) = cloud.row(perm[i]);
    CHECK(model.encode_cloud(shuffled) == feat);
  }

  TEST_CASE("duplicated points do not change the cloud encoding") {
    AffordanceDenoiser model(tiny_apdm_config(), 909);
    Rng rng(18);
    const Mat cloud = testsup::random_mat(rng, 25, 3, 0.4);
    Mat doubled(50, 3);
    doubled.topRows(25) = cloud;
    doubled.bottomRows(25) = cloud;
    CHECK(model.encode_cloud(doubled) == model.encode_cloud(cloud));
  }

  TEST_CASE("denoiser forward has the contracted shapes and is deterministic") {
    HoiDenoiser model(tiny_hoi_config(), 3131);
    Rng rng(5);
    const int B = 2;
    const Eigen::Index L = 8;
    const Mat xh = testsup::random_mat(rng, B * L, models::kHumanDim);
    const Mat xo = testsup::random_mat(rng, B * L, models::kObjectDim);
    Mat text(B, models::kTextDim);
    text.row(0) = models::text_embed("lift the box").transpose();
    text.row(1).setZero();  // dropped conditioning row
    const std::vector<int> ts = {3, 9};

    const auto [ph, po] = model.predict(xh, xo, ts, text, L);
    REQUIRE(ph.rows() == B * L);
    REQUIRE(ph.cols() == models::kHumanDim);
    REQUIRE(po.rows() == B * L);
    REQUIRE(po.cols() == models::kObjectDim);
    CHECK(ph.allFinite());
    CHECK(po.allFinite());

    const auto [ph2, po2] = model.predict(xh, xo, ts, text, L);
    CHECK(ph == ph2);
    CHECK(po == po2);
  }

  TEST_CASE("denoiser handles a full-length clip in one forward pass") {
    HoiDenoiser model(tiny_hoi_config(), 77);
    Rng rng(6);
    const Eigen::Index L = 196;
    const Mat xh = testsup::random_mat(rng, L, models::kHumanDim);
    const Mat xo = testsup::random_mat(rng, L, models::kObjectDim);
    Mat text(1, models::kTextDim);
    text.row(0) = models::text_embed("sit on the chair").transpose();
    const auto [ph, po] = model.predict(xh, xo, {42}, text, L);
    REQUIRE(ph.rows() == L);
    REQUIRE(po.rows() == L);
    CHECK(ph.allFinite());
    CHECK(po.allFinite());
  }

  TEST_CASE("severing the branch exchange changes both predictions") {
    HoiDenoiser model(tiny_hoi_config(), 2024);
    Rng rng(9);
    const Eigen::Index L = 6;
    const Mat xh = testsup::random_mat(rng, L, models::kHumanDim);
    const Mat xo = testsup::random_mat(rng, L, models::kObjectDim);
    Mat text(1, models::kTextDim);
    text.row(0) = models::text_embed("push the table").transpose();
    const std::vector<int> ts = {4};

    const auto run = [&](bool cm_on) {
      ad::Tape tape;
      nn::Binder bind(tape);
      const auto ih = tape.leaf(xh);
      const auto io = tape.leaf(xo);
      auto [ph, po] = model.build(bind, ih, io, ts, text, L, cm_on, 0.0, nullptr);
      return std::make_pair(tape.val(ph), tape.val(po));
    };
    const auto [ph_on, po_on] = run(true);
    const auto [ph_off, po_off] = run(false);
    CHECK((ph_on - ph_off).cwiseAbs().maxCoeff() > 1e-8);
    CHECK((po_on - po_off).cwiseAbs().maxCoeff() > 1e-8);
  }

  TEST_CASE("zeroed output projections give the closed-form loss of a zero predictor") {
    HoiDenoiser model(tiny_hoi_config(), 555);
    model.human.out.w.value.setZero();
    model.human.out.b.value.setZero();
    model.object.out.w.value.setZero();
    model.object.out.b.value.setZero();

    Rng rng(23);
    const auto sched = diffusion::NoiseSchedule::linear(10, 1e-4, 0.2);
    const HoiBatch batch = tiny_hoi_batch(2, 5, 10, rng);

    // Predictions are identically zero, so the loss reduces to the weighted
    // mean square of the clean targets.
    {
      ad::Tape tape;
      nn::Binder bind(tape);
      const auto loss = models::build_hoi_loss(bind, model, sched, batch, true, 0.0, nullptr);
      const double nh = static_cast<double>(batch.x0_h.size());
      const double no = static_cast<double>(batch.x0_o.size());
      const double expect =
          (batch.x0_h.squaredNorm() + batch.x0_o.squaredNorm()) / (nh + no);
      CHECK(testsup::rel_err(tape.val(loss)(0, 0), expect) < 1e-12);
    }
    {
      ad::Tape tape;
      nn::Binder bind(tape);
      const auto loss = models::build_hoi_loss(bind, model, sched, batch, false, 0.0, nullptr);
      const double expect = batch.x0_h.squaredNorm() / static_cast<double>(batch.x0_h.size());
      CHECK(testsup::rel_err(tape.val(loss)(0, 0), expect) < 1e-12);
    }
  }

  TEST_CASE("interaction loss parameter gradients match finite differences") {
    HoiDenoiser model(tiny_hoi_config(), 808);
    Rng rng(31);
    const auto sched = diffusion::NoiseSchedule::linear(10, 1e-4, 0.2);
    const HoiBatch batch = tiny_hoi_batch(1, 4, 10, rng);
    const auto params = model.params();

    const auto loss_value = [&]() {
      ad::Tape tape;
      nn::Binder bind(tape);
      const auto loss = models::build_hoi_loss(bind, model, sched, batch, true, 0.0, nullptr);
      return tape.val(loss)(0, 0);
    };
    const auto compute_grads = [&]() {
      ad::Tape tape;
      nn::Binder bind(tape);
      const auto loss = models::build_hoi_loss(bind, model, sched, batch, true, 0.0, nullptr);
      tape.backward(loss);
      for (auto* p : params) p->grad.setZero();
      bind.harvest();
    };
    CHECK(std::isfinite(loss_value()));
    subsampled_param_gradcheck(params, loss_value, compute_grads, 1e-4, 1e-3, 7001);
  }

  TEST_CASE("affordance loss parameter gradients match finite differences") {
    AffordanceDenoiser model(tiny_apdm_config(), 606);
    Rng rng(37);
    const auto sched = diffusion::NoiseSchedule::linear(10, 1e-4, 0.2);
    const AffBatch batch = tiny_aff_batch(2, 8, 10, rng);
    const auto params = model.params();

    const auto loss_value = [&]() {
      ad::Tape tape;
      nn::Binder bind(tape);
      const auto loss = models::build_aff_loss(bind, model, sched, batch, 0.0, nullptr);
      return tape.val(loss)(0, 0);
    };
    const auto compute_grads = [&]() {
      ad::Tape tape;
      nn::Binder bind(tape);
      const auto loss = models::build_aff_loss(bind, model, sched, batch, 0.0, nullptr);
      tape.backward(loss);
      for (auto* p : params) p->grad.setZero();
      bind.harvest();
    };
    CHECK(std::isfinite(loss_value()));
    subsampled_param_gradcheck(params, loss_value, compute_grads, 1e-4, 1e-3, 7002);
  }

  TEST_CASE("repeated optimizer steps on a fixed batch shrink both losses") {
    const auto sched = diffusion::NoiseSchedule::linear(10, 1e-4, 0.2);
    Rng rng(53);

    HoiDenoiser hoi(tiny_hoi_config(), 99);
    const HoiBatch hb = tiny_hoi_batch(2, 4, 10, rng);
    nn::AdamConfig acfg;
    acfg.lr = 1e-3;
    nn::Adam hoi_opt(acfg);
    const double hoi_first = models::hoi_training_step(hoi, sched, hb, hoi_opt, true, 0.0,
                                                       nullptr);
    double hoi_last = hoi_first;
    for (int i = 0; i < 39; ++i)
      hoi_last = models::hoi_training_step(hoi, sched, hb, hoi_opt, true, 0.0, nullptr);
    CHECK(std::isfinite(hoi_first));
    CHECK(hoi_last < 0.7 * hoi_first);

    AffordanceDenoiser apdm(tiny_apdm_config(), 98);
    const AffBatch ab = tiny_aff_batch(2, 8, 10, rng);
    nn::Adam aff_opt(acfg);
    const double aff_first = models::aff_training_step(apdm, sched, ab, aff_opt, 0.0, nullptr);
    double aff_last = aff_first;
    for (int i = 0; i < 39; ++i)
      aff_last = models::aff_training_step(apdm, sched, ab, aff_opt, 0.0, nullptr);
    CHECK(std::isfinite(aff_first));
    CHECK(aff_last < 0.7 * aff_first);
  }
}
