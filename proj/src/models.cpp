#include "hoi/models.hpp"

#include <cctype>
#include <cmath>

namespace hoi::models {
namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void add_token(Vec& acc, const std::string& token) {
  const std::uint64_t h = fnv1a(token);
  const auto slot = static_cast<Eigen::Index>(h % kTextDim);
  const double sign = ((h >> 60) & 1ull) ? 1.0 : -1.0;
  acc[slot] += sign;
}

Mat normalize_rows(const Mat& x, const RowVec& mean, const RowVec& std) {
  Mat out = x;
  out.rowwise() -= mean;
  out.array().rowwise() /= std.array();
  return out;
}

Mat denormalize_rows(const Mat& x, const RowVec& mean, const RowVec& std) {
  Mat out = x;
  out.array().rowwise() *= std.array();
  out.rowwise() += mean;
  return out;
}

void fit_channel_stats(const std::vector<Mat>& rows_list, RowVec& mean, RowVec& std) {
  Eigen::Index total = 0;
  for (const auto& m : rows_list) total += m.rows();
  require(total > 0, "NormStats::fit: no rows");
  const Eigen::Index dim = mean.cols();
  RowVec sum = RowVec::Zero(dim), sum_sq = RowVec::Zero(dim);
  for (const auto& m : rows_list) {
    require(m.cols() == dim, "NormStats::fit: width mismatch");
    sum += m.colwise().sum();
    sum_sq += m.array().square().matrix().colwise().sum();
  }
  mean = sum / static_cast<double>(total);
  const RowVec var =
      (sum_sq / static_cast<double>(total) - mean.array().square().matrix()).cwiseMax(0.0);
  std = var.array().sqrt().max(NormStats::kStdFloor).matrix();
}

}  // namespace

Vec text_embed(const std::string& prompt) {
  Vec acc = Vec::Zero(kTextDim);
  std::string token;
  bool any = false;
  auto flush = [&] {
    if (!token.empty()) {
      add_token(acc, token);
      token.clear();
      any = true;
    }
  };
  for (char ch : prompt) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    } else {
      flush();
    }
  }
  flush();
  if (!any) add_token(acc, "<empty>");
  double n = acc.norm();
  if (n < 1e-12) {
    // All token contributions cancelled; fall back to the reserved token.
    acc.setZero();
    add_token(acc, "<empty>");
    n = acc.norm();
  }
  return acc / n;
}

NormStats NormStats::fit(const std::vector<Mat>& human, const std::vector<Mat>& object,
                         const std::vector<Vec>& affordance) {
  NormStats s;
  fit_channel_stats(human, s.mean_h, s.std_h);
  fit_channel_stats(object, s.mean_o, s.std_o);
  std::vector<Mat> aff_rows;
  aff_rows.reserve(affordance.size());
  for (const auto& y : affordance) aff_rows.push_back(y.transpose());
  fit_channel_stats(aff_rows, s.mean_y, s.std_y);
  return s;
}

Mat NormStats::normalize_h(const Mat& x) const { return normalize_rows(x, mean_h, std_h); }
Mat NormStats::denormalize_h(const Mat& x) const { return denormalize_rows(x, mean_h, std_h); }
Mat NormStats::normalize_o(const Mat& x) const { return normalize_rows(x, mean_o, std_o); }
Mat NormStats::denormalize_o(const Mat& x) const { return denormalize_rows(x, mean_o, std_o); }
Mat NormStats::normalize_y(const Mat& x) const { return normalize_rows(x, mean_y, std_y); }
Mat NormStats::denormalize_y(const Mat& x) const { return denormalize_rows(x, mean_y, std_y); }

Branch::Branch(const std::string& name, int feat_dim, int latent, int ff, int heads,
               int n_layers, Rng& rng)
    : in(name + ".in", feat_dim, latent, rng),
      out(name + ".out", latent, feat_dim, rng),
      text_proj(name + ".text", kTextDim, latent, rng),
      time1(name + ".time1", latent, latent, rng),
      time2(name + ".time2", latent, latent, rng) {
  layers.reserve(static_cast<std::size_t>(n_layers));
  for (int i = 0; i < n_layers; ++i)
    layers.emplace_back(name + ".layer" + std::to_string(i), latent, ff, heads, rng);
}

ad::Tape::Id Branch::embed(nn::Binder& bind, ad::Tape::Id x, const std::vector<int>& ts,
                           const Mat& text, Eigen::Index L) {
  auto& t = bind.tape;
  const auto batch = static_cast<Eigen::Index>(ts.size());
  require(text.rows() == batch && text.cols() == kTextDim, "Branch::embed: bad text shape");
  require(t.val(x).rows() == batch * L, "Branch::embed: bad feature rows");
  const int latent = static_cast<int>(time1.w.value.rows());

  std::vector<double> tpos(ts.begin(), ts.end());
  const auto temb = t.leaf(nn::sinusoidal_embedding(tpos, latent));
  const auto cond =
      t.add(time2.apply(bind, t.gelu(time1.apply(bind, temb))), text_proj.apply(bind, t.leaf(text)));

  const auto tokens = in.apply(bind, x);
  auto packed = t.pack_tokens(cond, tokens, L);

  std::vector<double> positions(static_cast<std::size_t>(L) + 1);
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<double>(i);
  const Mat pe_block = nn::sinusoidal_embedding(positions, latent);
  Mat pe(batch * (L + 1), latent);
  for (Eigen::Index b = 0; b < batch; ++b) pe.middleRows(b * (L + 1), L + 1) = pe_block;
  return t.add(packed, t.leaf(std::move(pe)));
}

ad::Tape::Id Branch::run_layers(nn::Binder& bind, ad::Tape::Id packed, int from, int to,
                                Eigen::Index L, double dropout_p, Rng* dropout_rng) {
  for (int i = from; i < to; ++i)
    packed = layers[static_cast<std::size_t>(i)].apply(bind, packed, L + 1, dropout_p,
                                                       dropout_rng);
  return packed;
}

ad::Tape::Id Branch::project_out(nn::Binder& bind, ad::Tape::Id packed, Eigen::Index L) {
  return out.apply(bind, bind.tape.unpack_body(packed, L));
}

void Branch::collect(std::vector<nn::Param*>& params) {
  in.collect(params);
  out.collect(params);
  text_proj.collect(params);
  time1.collect(params);
  time2.collect(params);
  for (auto& l : layers) l.collect(params);
}

HoiDenoiser::HoiDenoiser(HoiModelConfig cfg, std::uint64_t init_seed) : cfg_(cfg) {
  require(cfg.human_layers >= 2 && cfg.object_layers >= 1, "HoiDenoiser: too few layers");
  require(cfg.cm_human_layer >= 1 && cfg.cm_human_layer <= cfg.human_layers,
          "HoiDenoiser: cm_human_layer out of range");
  require(cfg.latent_dim % cfg.heads == 0, "HoiDenoiser: latent_dim % heads != 0");
  Rng rng(init_seed);
  human = Branch("human", kHumanDim, cfg.latent_dim, cfg.ff_dim, cfg.heads, cfg.human_layers,
                 rng);
  object = Branch("object", kObjectDim, cfg.latent_dim, cfg.ff_dim, cfg.heads,
                  cfg.object_layers, rng);
  cm = nn::CommunicationBlock("cm", cfg.latent_dim, cfg.heads, rng);
}

std::pair<ad::Tape::Id, ad::Tape::Id> HoiDenoiser::build(nn::Binder& bind, ad::Tape::Id xh,
                                                         ad::Tape::Id xo,
                                                         const std::vector<int>& ts,
                                                         const Mat& text, Eigen::Index L,
                                                         bool cm_enabled, double dropout_p,
                                                         Rng* dropout_rng) {
  auto& t = bind.tape;
  auto h = human.embed(bind, xh, ts, text, L);
  h = human.run_layers(bind, h, 0, cfg_.cm_human_layer, L, dropout_p, dropout_rng);

  auto o = object.embed(bind, xo, ts, text, L);
  o = object.run_layers(bind, o, 0, cfg_.object_layers, L, dropout_p, dropout_rng);

  if (cm_enabled) {
    const auto fh = t.unpack_body(h, L);
    const auto fo = t.unpack_body(o, L);
    auto [fh2, fo2] = cm.apply(bind, fh, fo, L, L, dropout_p, dropout_rng);
    const auto batch = static_cast<Eigen::Index>(ts.size());
    const auto zero_head = t.leaf(Mat::Zero(batch, cfg_.latent_dim));
    // Scatter the exchanged frame features back under the untouched
    // conditioning rows.
    const auto dh = t.sub(fh2, fh);
    const auto dz = t.sub(fo2, fo);
    h = t.add(h, t.pack_tokens(zero_head, dh, L));
    o = t.add(o, t.pack_tokens(zero_head, dz, L));
  }

  h = human.run_layers(bind, h, cfg_.cm_human_layer, cfg_.human_layers, L, dropout_p,
                       dropout_rng);
  return {human.project_out(bind, h, L), object.project_out(bind, o, L)};
}

std::pair<Mat, Mat> HoiDenoiser::predict(const Mat& xh, const Mat& xo,
                                         const std::vector<int>& ts, const Mat& text,
                                         Eigen::Index L) {
  ad::Tape tape;
  nn::Binder bind(tape);
  const auto ih = tape.leaf(xh);
  const auto io = tape.leaf(xo);
  auto [ph, po] = build(bind, ih, io, ts, text, L, cfg_.use_cm, 0.0, nullptr);
  return {tape.val(ph), tape.val(po)};
}

std::vector<nn::Param*> HoiDenoiser::params() {
  std::vector<nn::Param*> out;
  human.collect(out);
  object.collect(out);
  cm.collect(out);
  return out;
}

std::size_t HoiDenoiser::param_count() {
  std::size_t n = 0;
  for (const auto* p : params()) n += static_cast<std::size_t>(p->value.size());
  return n;
}

AffordanceDenoiser::AffordanceDenoiser(ApdmConfig cfg, std::uint64_t init_seed) : cfg_(cfg) {
  require(cfg.layers >= 1, "AffordanceDenoiser: need at least one layer");
  require(cfg.latent_dim % cfg.heads == 0, "AffordanceDenoiser: latent_dim % heads != 0");
  Rng rng(init_seed);
  pt1 = nn::Linear("apdm.pt1", 3, cfg.cloud_hidden, rng);
  pt2 = nn::Linear("apdm.pt2", cfg.cloud_hidden, cfg.cloud_hidden, rng);
  cloud_proj = nn::Linear("apdm.cloud_proj", cfg.cloud_hidden, cfg.latent_dim, rng);
  tok_labels = nn::Linear("apdm.tok_labels", 8, cfg.latent_dim, rng);
  tok_points = nn::Linear("apdm.tok_points", 6, cfg.latent_dim, rng);
  tok_state = nn::Linear("apdm.tok_state", 1, cfg.latent_dim, rng);
  out_labels = nn::Linear("apdm.out_labels", cfg.latent_dim, 8, rng);
  out_points = nn::Linear("apdm.out_points", cfg.latent_dim, 6, rng);
  out_state = nn::Linear("apdm.out_state", cfg.latent_dim, 1, rng);
  text_proj = nn::Linear("apdm.text", kTextDim, cfg.latent_dim, rng);
  time1 = nn::Linear("apdm.time1", cfg.latent_dim, cfg.latent_dim, rng);
  time2 = nn::Linear("apdm.time2", cfg.latent_dim, cfg.latent_dim, rng);
  layers.reserve(static_cast<std::size_t>(cfg.layers));
  for (int i = 0; i < cfg.layers; ++i)
    layers.emplace_back("apdm.layer" + std::to_string(i), cfg.latent_dim, cfg.ff_dim,
                        cfg.heads, rng);
}

ad::Tape::Id AffordanceDenoiser::build_cloud_encoder(nn::Binder& bind, ad::Tape::Id points,
                                                     Eigen::Index n) {
  auto& t = bind.tape;
  require(n > 0 && t.val(points).rows() % n == 0, "cloud encoder: bad point count");
  auto f = t.gelu(pt1.apply(bind, points));
  f = t.gelu(pt2.apply(bind, f));
  return t.colwise_max_pool(f, n);
}

ad::Tape::Id AffordanceDenoiser::build(nn::Binder& bind, ad::Tape::Id y,
                                       const std::vector<int>& ts, const Mat& text,
                                       ad::Tape::Id cloud_feat, double dropout_p,
                                       Rng* dropout_rng) {
  auto& t = bind.tape;
  const auto batch = static_cast<Eigen::Index>(ts.size());
  require(t.val(y).rows() == batch && t.val(y).cols() == kAffDim, "apdm build: bad y shape");
  require(text.rows() == batch && text.cols() == kTextDim, "apdm build: bad text shape");

  std::vector<double> tpos(ts.begin(), ts.end());
  const auto temb = t.leaf(nn::sinusoidal_embedding(tpos, cfg_.latent_dim));
  auto cond = t.add(time2.apply(bind, t.gelu(time1.apply(bind, temb))),
                    text_proj.apply(bind, t.leaf(text)));
  cond = t.add(cond, cloud_proj.apply(bind, cloud_feat));

  const auto labels = tok_labels.apply(bind, t.slice_cols(y, 0, 8));
  const auto points = tok_points.apply(bind, t.slice_cols(y, 8, 6));
  const auto state = tok_state.apply(bind, t.slice_cols(y, 14, 1));

  auto seq = t.interleave_rows({cond, labels, points, state});
  std::vector<double> positions = {0.0, 1.0, 2.0, 3.0};
  const Mat pe_block = nn::sinusoidal_embedding(positions, cfg_.latent_dim);
  Mat pe(batch * 4, cfg_.latent_dim);
  for (Eigen::Index b = 0; b < batch; ++b) pe.middleRows(b * 4, 4) = pe_block;
  seq = t.add(seq, t.leaf(std::move(pe)));

  for (auto& layer : layers) seq = layer.apply(bind, seq, 4, dropout_p, dropout_rng);

  const auto lab_tok = t.rows_strided(seq, 4, 1);
  const auto pts_tok = t.rows_strided(seq, 4, 2);
  const auto sta_tok = t.rows_strided(seq, 4, 3);
  const auto out_lab = out_labels.apply(bind, lab_tok);
  const auto out_pts = out_points.apply(bind, pts_tok);
  const auto out_sta = out_state.apply(bind, sta_tok);
  return t.concat_cols(t.concat_cols(out_lab, out_pts), out_sta);
}

Mat AffordanceDenoiser::encode_cloud(const Mat& points) {
  require(points.cols() == 3, "encode_cloud: points must be n x 3");
  ad::Tape tape;
  nn::Binder bind(tape);
  const auto in = tape.leaf(points);
  const auto feat = build_cloud_encoder(bind, in, points.rows());
  return tape.val(feat);
}

Mat AffordanceDenoiser::predict(const Mat& y, const std::vector<int>& ts, const Mat& text,
                                const Mat& cloud_feat) {
  ad::Tape tape;
  nn::Binder bind(tape);
  const auto iy = tape.leaf(y);
  const auto icf = tape.leaf(cloud_feat);
  const auto out = build(bind, iy, ts, text, icf, 0.0, nullptr);
  return tape.val(out);
}

std::vector<nn::Param*> AffordanceDenoiser::params() {
  std::vector<nn::Param*> out;
  pt1.collect(out);
  pt2.collect(out);
  cloud_proj.collect(out);
  tok_labels.collect(out);
  tok_points.collect(out);
  tok_state.collect(out);
  out_labels.collect(out);
  out_points.collect(out);
  out_state.collect(out);
  text_proj.collect(out);
  time1.collect(out);
  time2.collect(out);
  for (auto& l : layers) l.collect(out);
  return out;
}

std::size_t AffordanceDenoiser::param_count() {
  std::size_t n = 0;
  for (const auto* p : params()) n += static_cast<std::size_t>(p->value.size());
  return n;
}

namespace {

// x_t per sample block from the fixed noise draws.
Mat noised_batch(const Mat& x0, const Mat& noise, const std::vector<int>& ts,
                 Eigen::Index rows_per_sample, const diffusion::NoiseSchedule& sched) {
  Mat out(x0.rows(), x0.cols());
  for (std::size_t b = 0; b < ts.size(); ++b) {
    const auto r0 = static_cast<Eigen::Index>(b) * rows_per_sample;
    out.middleRows(r0, rows_per_sample) =
        diffusion::q_sample(x0.middleRows(r0, rows_per_sample),
                            ts[b], noise.middleRows(r0, rows_per_sample), sched);
  }
  return out;
}

}  // namespace

ad::Tape::Id build_hoi_loss(nn::Binder& bind, HoiDenoiser& model,
                            const diffusion::NoiseSchedule& sched, const HoiBatch& batch,
                            bool joint, double dropout_p, Rng* dropout_rng) {
  auto& t = bind.tape;
  const auto xh_t = t.leaf(noised_batch(batch.x0_h, batch.noise_h, batch.ts, batch.L, sched));
  const auto xo_t = t.leaf(noised_batch(batch.x0_o, batch.noise_o, batch.ts, batch.L, sched));
  const bool cm_on = joint && model.config().use_cm;
  auto [ph, po] = model.build(bind, xh_t, xo_t, batch.ts, batch.text, batch.L, cm_on,
                              dropout_p, dropout_rng);
  const auto err_h = t.sub(ph, t.leaf(batch.x0_h));
  const auto loss_h = t.mean_sq(err_h);
  if (!joint) return loss_h;
  const auto err_o = t.sub(po, t.leaf(batch.x0_o));
  const auto loss_o = t.mean_sq(err_o);
  const double nh = static_cast<double>(batch.x0_h.size());
  const double no = static_cast<double>(batch.x0_o.size());
  const double w = model.config().object_loss_weight;
  // Flat MSE over the concatenated features, with the object block weighted.
  return t.scale(t.add(t.scale(loss_h, nh), t.scale(loss_o, w * no)), 1.0 / (nh + w * no));
}

ad::Tape::Id build_aff_loss(nn::Binder& bind, AffordanceDenoiser& model,
                            const diffusion::NoiseSchedule& sched, const AffBatch& batch,
                            double dropout_p, Rng* dropout_rng) {
  auto& t = bind.tape;
  const auto y_t = t.leaf(noised_batch(batch.y0, batch.noise, batch.ts, 1, sched));
  const auto points = t.leaf(batch.points);
  const auto cloud_feat = model.build_cloud_encoder(bind, points, batch.n_points);
  const auto pred = model.build(bind, y_t, batch.ts, batch.text, cloud_feat, dropout_p,
                                dropout_rng);
  return t.mean_sq(t.sub(pred, t.leaf(batch.y0)));
}

double hoi_training_step(HoiDenoiser& model, const diffusion::NoiseSchedule& sched,
                         const HoiBatch& batch, nn::Adam& opt, bool joint, double dropout_p,
                         Rng* dropout_rng) {
  ad::Tape tape;
  nn::Binder bind(tape);
  const auto loss = build_hoi_loss(bind, model, sched, batch, joint, dropout_p, dropout_rng);
  const double value = tape.val(loss)(0, 0);
  tape.backward(loss);
  bind.harvest();
  const auto ps = model.params();
  opt.step(ps);
  return value;
}

double aff_training_step(AffordanceDenoiser& model, const diffusion::NoiseSchedule& sched,
                         const AffBatch& batch, nn::Adam& opt, double dropout_p,
                         Rng* dropout_rng) {
  ad::Tape tape;
  nn::Binder bind(tape);
  const auto loss = build_aff_loss(bind, model, sched, batch, dropout_p, dropout_rng);
  const double value = tape.val(loss)(0, 0);
  tape.backward(loss);
  bind.harvest();
  const auto ps = model.params();
  opt.step(ps);
  return value;
}

}  // namespace hoi::models
