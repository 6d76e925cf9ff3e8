#include "hoi/pipeline.hpp"

#include <cmath>
#include <fstream>

namespace hoi::pipeline {
namespace {

nlohmann::json mat_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json schedule_json(const ScheduleSpec& s) {
  return {{"T", s.T}, {"beta_start", s.beta_start}, {"beta_end", s.beta_end}};
}

ScheduleSpec schedule_from_json(const nlohmann::json& j) {
  ScheduleSpec s;
  s.T = j.at("T").get<int>();
  s.beta_start = j.at("beta_start").get<double>();
  s.beta_end = j.at("beta_end").get<double>();
  return s;
}

nlohmann::json hoi_config_json(const models::HoiModelConfig& c) {
  return {{"latent_dim", c.latent_dim},
          {"ff_dim", c.ff_dim},
          {"heads", c.heads},
          {"human_layers", c.human_layers},
          {"object_layers", c.object_layers},
          {"cm_human_layer", c.cm_human_layer},
          {"dropout", c.dropout},
          {"use_cm", c.use_cm},
          {"object_loss_weight", c.object_loss_weight}};
}

models::HoiModelConfig hoi_config_from_json(const nlohmann::json& j) {
  models::HoiModelConfig c;
  c.latent_dim = j.at("latent_dim").get<int>();
  c.ff_dim = j.at("ff_dim").get<int>();
  c.heads = j.at("heads").get<int>();
  c.human_layers = j.at("human_layers").get<int>();
  c.object_layers = j.at("object_layers").get<int>();
  c.cm_human_layer = j.at("cm_human_layer").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.use_cm = j.at("use_cm").get<bool>();
  c.object_loss_weight = j.at("object_loss_weight").get<double>();
  return c;
}

nlohmann::json apdm_config_json(const models::ApdmConfig& c) {
  return {{"latent_dim", c.latent_dim}, {"ff_dim", c.ff_dim},   {"heads", c.heads},
          {"layers", c.layers},         {"dropout", c.dropout}, {"cloud_hidden", c.cloud_hidden}};
}

models::ApdmConfig apdm_config_from_json(const nlohmann::json& j) {
  models::ApdmConfig c;
  c.latent_dim = j.at("latent_dim").get<int>();
  c.ff_dim = j.at("ff_dim").get<int>();
  c.heads = j.at("heads").get<int>();
  c.layers = j.at("layers").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.cloud_hidden = j.at("cloud_hidden").get<int>();
  return c;
}

const char* kNormNames[6] = {"norm.mean_h", "norm.std_h", "norm.mean_o",
                             "norm.std_o",  "norm.mean_y", "norm.std_y"};

void append_norm_tensors(ckpt::Checkpoint& c, const models::NormStats& stats) {
  const RowVec* rows[6] = {&stats.mean_h, &stats.std_h, &stats.mean_o,
                           &stats.std_o,  &stats.mean_y, &stats.std_y};
  for (int i = 0; i < 6; ++i) {
    Mat t = *rows[i];
    snap_f32(t);
    c.tensors.emplace_back(kNormNames[i], std::move(t));
  }
}

models::NormStats split_norm_tensors(ckpt::Checkpoint& c) {
  models::NormStats stats;
  RowVec* rows[6] = {&stats.mean_h, &stats.std_h, &stats.mean_o,
                     &stats.std_o,  &stats.mean_y, &stats.std_y};
  for (int i = 0; i < 6; ++i) {
    const Mat* t = c.find(kNormNames[i]);
    if (t == nullptr || t->rows() != 1)
      throw std::runtime_error(std::string("checkpoint format error: missing normalization row '") +
                               kNormNames[i] + "'");
    *rows[i] = t->row(0);
  }
  std::vector<std::pair<std::string, Mat>> rest;
  for (auto& [name, t] : c.tensors)
    if (name.rfind("norm.", 0) != 0) rest.emplace_back(name, std::move(t));
  c.tensors = std::move(rest);
  return stats;
}

models::NormStats fit_stats(const std::vector<const data::HoiSample*>& train) {
  std::vector<Mat> human, object;
  std::vector<Vec> aff;
  for (const data::HoiSample* s : train) {
    human.push_back(s->human.frames);
    object.push_back(s->object.frames);
    aff.push_back(s->affordance.to_vector());
  }
  return models::NormStats::fit(human, object, aff);
}

// Object poses of a clip window, re-expressed in the window's own canonical
// frame. Slicing the human features implicitly renormalizes the decoded clip
// to start at the origin facing +z; the object poses must undergo the same
// rigid change of frame or the pair drifts apart.
Mat window_object_frames(const data::HoiSample& s, Eigen::Index start, Eigen::Index L) {
  Mat wo = s.object.frames.middleRows(start, L);
  if (start == 0) return wo;
  double heading = 0.0, px = 0.0, pz = 0.0;
  for (Eigen::Index m = 0; m < start; ++m) {
    const double vx = s.human.frames(m, motion::chan::kVelX);
    const double vz = s.human.frames(m, motion::chan::kVelZ);
    const double c = std::cos(heading), sn = std::sin(heading);
    px += c * vx + sn * vz;
    pz += -sn * vx + c * vz;
    heading += s.human.frames(m, motion::chan::kYawRate);
  }
  const Eigen::Matrix3d undo = geom::rot_y(-heading);
  const Vec3 shift(px, 0.0, pz);
  for (Eigen::Index l = 0; l < L; ++l) {
    const Vec3 r = wo.block<1, 3>(l, motion::obj::kRot).transpose();
    const Vec3 t = wo.block<1, 3>(l, motion::obj::kTrans).transpose();
    const Eigen::AngleAxisd aa(undo * geom::rodrigues(r));
    wo.block<1, 3>(l, motion::obj::kRot) = (aa.angle() * aa.axis()).transpose();
    wo.block<1, 3>(l, motion::obj::kTrans) = (undo * (t - shift)).transpose();
  }
  return wo;
}

// Object stats must describe the distribution the batches actually draw from.
// Re-expressing a window in its own canonical frame moves channels that are
// constant in the raw clips (the heading undo leaks yaw into the rotation and
// cross-track translation rows), and a channel whose raw std collapses to the
// floor would otherwise normalize those leaks to astronomically large
// targets. Sweep a handful of starts per clip and fit on the re-framed poses.
models::NormStats fit_stats_windowed(const std::vector<const data::HoiSample*>& train,
                                     Eigen::Index L) {
  std::vector<Mat> human, object;
  std::vector<Vec> aff;
  for (const data::HoiSample* s : train) {
    human.push_back(s->human.frames);
    aff.push_back(s->affordance.to_vector());
    const Eigen::Index Lc = s->human.num_frames();
    if (Lc < L) continue;  // the batch builder rejects such clips with context
    const Eigen::Index span = Lc - L;
    const Eigen::Index stride = std::max<Eigen::Index>(1, span / 8);
    for (Eigen::Index start = 0; start <= span; start += stride)
      object.push_back(window_object_frames(*s, start, L));
  }
  require(!object.empty(), "fit_stats: no clip is as long as the training window");
  return models::NormStats::fit(human, object, aff);
}

models::HoiBatch make_hoi_batch(const std::vector<const data::HoiSample*>& train,
                                const models::NormStats& stats,
                                const diffusion::NoiseSchedule& sched,
                                const TrainHoiConfig& cfg, Rng& rng) {
  const Eigen::Index L = cfg.seq_len;
  models::HoiBatch b;
  b.L = L;
  b.x0_h.resize(cfg.batch * L, models::kHumanDim);
  b.x0_o.resize(cfg.batch * L, models::kObjectDim);
  b.text.resize(cfg.batch, models::kTextDim);
  for (int i = 0; i < cfg.batch; ++i) {
    const data::HoiSample* s = train[rng.uniform_int(0, static_cast<int>(train.size()) - 1)];
    const Eigen::Index Lc = s->human.num_frames();
    require(Lc >= L, "training window longer than clip '" + s->id + "'");
    const Eigen::Index start = rng.uniform_int(0, static_cast<int>(Lc - L));
    b.x0_h.middleRows(i * L, L) = stats.normalize_h(s->human.frames.middleRows(start, L));
    b.x0_o.middleRows(i * L, L) = stats.normalize_o(window_object_frames(*s, start, L));
    b.ts.push_back(rng.uniform_int(1, sched.T));
    Vec text = models::text_embed(s->prompt);
    if (rng.uniform() < cfg.cond_drop) text.setZero();
    b.text.row(i) = text.transpose();
  }
  b.noise_h = rng.normal_mat(cfg.batch * L, models::kHumanDim);
  b.noise_o = rng.normal_mat(cfg.batch * L, models::kObjectDim);
  return b;
}

models::AffBatch make_aff_batch(const std::vector<const data::HoiSample*>& train,
                                const models::NormStats& stats,
                                const diffusion::NoiseSchedule& sched,
                                const TrainApdmConfig& cfg, Rng& rng) {
  models::AffBatch b;
  b.n_points = cfg.n_points;
  b.y0.resize(cfg.batch, models::kAffDim);
  b.text.resize(cfg.batch, models::kTextDim);
  b.points.resize(cfg.batch * cfg.n_points, 3);
  for (int i = 0; i < cfg.batch; ++i) {
    const data::HoiSample* s = train[rng.uniform_int(0, static_cast<int>(train.size()) - 1)];
    Mat y(1, models::kAffDim);
    y.row(0) = s->affordance.to_vector().transpose();
    b.y0.row(i) = stats.normalize_y(y).row(0);
    const int n_cloud = static_cast<int>(s->cloud.size());
    for (int p = 0; p < cfg.n_points; ++p)
      b.points.row(i * cfg.n_points + p) = s->cloud.points.row(rng.uniform_int(0, n_cloud - 1));
    b.ts.push_back(rng.uniform_int(1, sched.T));
    Vec text = models::text_embed(s->prompt);
    if (rng.uniform() < cfg.cond_drop) text.setZero();
    b.text.row(i) = text.transpose();
  }
  b.noise = rng.normal_mat(cfg.batch, models::kAffDim);
  return b;
}

}  // namespace

TrainResult train_hoi(const TrainHoiConfig& cfg) {
  const data::Dataset ds = data::read_dataset(cfg.data_dir);
  const std::vector<const data::HoiSample*> train = ds.split_samples("train");
  require(!train.empty(), "train_hoi: the train split is empty");

  const models::NormStats stats = fit_stats(train);
  const diffusion::NoiseSchedule sched =
      diffusion::NoiseSchedule::linear(cfg.schedule.T, cfg.schedule.beta_start,
                                       cfg.schedule.beta_end);
  models::HoiDenoiser model(cfg.model, cfg.seed);
  nn::AdamConfig adam;
  adam.lr = cfg.lr;
  nn::Adam opt(adam);
  Rng rng = Rng(cfg.seed).split(1);

  std::ofstream log;
  if (!cfg.log_path.empty()) {
    log.open(cfg.log_path, std::ios::trunc);
    if (!log) throw std::runtime_error("cannot open loss log '" + cfg.log_path + "'");
    log << "step,loss,phase\n";
  }

  const int warmup = cfg.no_pretrain ? 0 : cfg.steps / 4;
  TrainResult result;
  result.param_count = model.param_count();
  for (int step = 0; step < cfg.steps; ++step) {
    const bool joint = step >= warmup;
    const models::HoiBatch batch = make_hoi_batch(train, stats, sched, cfg, rng);
    const double loss =
        models::hoi_training_step(model, sched, batch, opt, joint, cfg.model.dropout, &rng);
    result.losses.push_back(loss);
    if (log.is_open())
      log << step << "," << loss << "," << (joint ? "joint" : "human_warmup") << "\n";
  }

  nlohmann::json meta = {{"kind", "hoi"},
                         {"model", hoi_config_json(cfg.model)},
                         {"schedule", schedule_json(cfg.schedule)},
                         {"fps", ds.fps},
                         {"seq_len", cfg.seq_len}};
  ckpt::Checkpoint c = ckpt::snapshot_params(model.params(), std::move(meta));
  append_norm_tensors(c, stats);
  ckpt::save_checkpoint(cfg.out_path, c);
  return result;
}

TrainResult train_apdm(const TrainApdmConfig& cfg) {
  const data::Dataset ds = data::read_dataset(cfg.data_dir);
  const std::vector<const data::HoiSample*> train = ds.split_samples("train");
  require(!train.empty(), "train_apdm: the train split is empty");

  const models::NormStats stats = fit_stats(train);
  const diffusion::NoiseSchedule sched =
      diffusion::NoiseSchedule::linear(cfg.schedule.T, cfg.schedule.beta_start,
                                       cfg.schedule.beta_end);
  models::AffordanceDenoiser model(cfg.model, cfg.seed);
  nn::AdamConfig adam;
  adam.lr = cfg.lr;
  nn::Adam opt(adam);
  Rng rng = Rng(cfg.seed).split(1);

  std::ofstream log;
  if (!cfg.log_path.empty()) {
    log.open(cfg.log_path, std::ios::trunc);
    if (!log) throw std::runtime_error("cannot open loss log '" + cfg.log_path + "'");
    log << "step,loss\n";
  }

  TrainResult result;
  result.param_count = model.param_count();
  for (int step = 0; step < cfg.steps; ++step) {
    const models::AffBatch batch = make_aff_batch(train, stats, sched, cfg, rng);
    const double loss =
        models::aff_training_step(model, sched, batch, opt, cfg.model.dropout, &rng);
    result.losses.push_back(loss);
    if (log.is_open()) log << step << "," << loss << "\n";
  }

  nlohmann::json meta = {{"kind", "apdm"},
                         {"model", apdm_config_json(cfg.model)},
                         {"schedule", schedule_json(cfg.schedule)}};
  ckpt::Checkpoint c = ckpt::snapshot_params(model.params(), std::move(meta));
  append_norm_tensors(c, stats);
  ckpt::save_checkpoint(cfg.out_path, c);
  return result;
}

HoiBundle load_hoi(const std::string& path) {
  ckpt::Checkpoint c = ckpt::load_checkpoint(path);
  const std::string kind = c.meta.value("kind", "");
  if (kind != "hoi")
    throw std::runtime_error("checkpoint '" + path + "' is kind '" + kind + "', expected 'hoi'");
  HoiBundle b;
  b.stats = split_norm_tensors(c);
  const ScheduleSpec spec = schedule_from_json(c.meta.at("schedule"));
  b.sched = diffusion::NoiseSchedule::linear(spec.T, spec.beta_start, spec.beta_end);
  b.fps = c.meta.value("fps", 20.0);
  b.seq_len = c.meta.value("seq_len", Eigen::Index{24});
  b.model = std::make_unique<models::HoiDenoiser>(hoi_config_from_json(c.meta.at("model")), 0);
  ckpt::restore_params(c, b.model->params());
  return b;
}

ApdmBundle load_apdm(const std::string& path) {
  ckpt::Checkpoint c = ckpt::load_checkpoint(path);
  const std::string kind = c.meta.value("kind", "");
  if (kind != "apdm")
    throw std::runtime_error("checkpoint '" + path + "' is kind '" + kind + "', expected 'apdm'");
  ApdmBundle b;
  b.stats = split_norm_tensors(c);
  const ScheduleSpec spec = schedule_from_json(c.meta.at("schedule"));
  b.sched = diffusion::NoiseSchedule::linear(spec.T, spec.beta_start, spec.beta_end);
  b.model =
      std::make_unique<models::AffordanceDenoiser>(apdm_config_from_json(c.meta.at("model")), 0);
  ckpt::restore_params(c, b.model->params());
  return b;
}

affordance::AffordanceRecord sample_affordance(ApdmBundle& bundle, const std::string& prompt,
                                               const geom::PointCloud& cloud, double cfg_scale,
                                               Rng& rng) {
  const Mat text = models::text_embed(prompt).transpose();
  const Mat zero_text = Mat::Zero(1, models::kTextDim);
  const Mat cloud_feat = bundle.model->encode_cloud(cloud.points);
  const diffusion::DenoiseFn fn = [&](const Mat& y, int t) {
    const std::vector<int> ts = {t};
    const Mat cond = bundle.model->predict(y, ts, text, cloud_feat);
    if (cfg_scale == 1.0) return cond;
    const Mat uncond = bundle.model->predict(y, ts, zero_text, cloud_feat);
    return diffusion::cfg_mix(uncond, cond, cfg_scale);
  };
  const Mat y = diffusion::sample_loop(fn, bundle.sched, 1, models::kAffDim, rng);
  const Vec raw = bundle.stats.denormalize_y(y).row(0).transpose();
  return affordance::postprocess_contacts(affordance::record_from_vector(raw), cloud);
}

SampleOutput sample_interaction(HoiBundle& hoi, ApdmBundle& apdm, const std::string& prompt,
                                const geom::PointCloud& cloud, Eigen::Index frames,
                                bool use_guidance, const guidance::GuidanceConfig& gcfg,
                                double cfg_scale, double apdm_cfg_scale, std::uint64_t seed) {
  require(frames >= 2, "sample_interaction: need at least two frames");
  const Rng base(seed);
  Rng aff_rng = base.split(1);
  Rng motion_rng = base.split(2);

  SampleOutput out;
  out.record = sample_affordance(apdm, prompt, cloud, apdm_cfg_scale, aff_rng);

  const Eigen::Index L = frames;
  constexpr int H = models::kHumanDim;
  constexpr int O = models::kObjectDim;
  const Mat text = models::text_embed(prompt).transpose();
  const Mat zero_text = Mat::Zero(1, models::kTextDim);

  const diffusion::DenoiseFn fn = [&](const Mat& x, int t) {
    const Mat xh = x.leftCols(H);
    const Mat xo = x.rightCols(O);
    const std::vector<int> ts = {t};
    auto [ph, po] = hoi.model->predict(xh, xo, ts, text, L);
    if (cfg_scale != 1.0) {
      auto [uh, uo] = hoi.model->predict(xh, xo, ts, zero_text, L);
      ph = diffusion::cfg_mix(uh, ph, cfg_scale);
      po = diffusion::cfg_mix(uo, po, cfg_scale);
    }
    Mat joint(L, H + O);
    joint << ph, po;
    return joint;
  };

  const diffusion::MeanHook hook = [&](const Mat& mu, const Mat&, const Mat&, int t) {
    const Mat mu_h = hoi.stats.denormalize_h(mu.leftCols(H));
    const Mat mu_o = hoi.stats.denormalize_o(mu.rightCols(O));
    const guidance::CorrectionResult res =
        guidance::correct_means(mu_h, mu_o, t, out.record, hoi.sched, gcfg);
    out.correction_iterations += res.iterations;
    out.correction_halvings += res.halvings;
    out.g_before = res.before.total;
    out.g_after = res.after.total;
    out.g_trace.push_back({t, res.before.total, res.after.total});
    Mat corrected(L, H + O);
    corrected << hoi.stats.normalize_h(res.mu_h), hoi.stats.normalize_o(res.mu_o);
    return corrected;
  };

  // Zero step scales must reproduce the unguided stream bitwise, so the hook
  // (whose normalize/denormalize round trip is not exact) is not installed.
  const bool guide = use_guidance && (gcfg.tau1 != 0.0 || gcfg.tau2 != 0.0);
  const Mat x = diffusion::sample_loop(fn, hoi.sched, L, H + O, motion_rng, guide ? &hook : nullptr);
  out.human.frames = hoi.stats.denormalize_h(x.leftCols(H));
  out.human.fps = hoi.fps;
  out.object.frames = hoi.stats.denormalize_o(x.rightCols(O));
  return out;
}

void write_sample_json(const SampleOutput& out, const std::string& prompt, std::uint64_t seed,
                       bool use_guidance, const geom::PointCloud& cloud, const std::string& path) {
  nlohmann::json j;
  j["prompt"] = prompt;
  j["seed"] = seed;
  j["guidance"] = use_guidance;
  j["fps"] = out.human.fps;
  j["frames"] = out.human.num_frames();
  j["human"] = mat_json(out.human.frames);
  j["object"] = mat_json(out.object.frames);
  j["cloud"] = mat_json(cloud.points);
  if (cloud.has_normals()) j["cloud_normals"] = mat_json(cloud.normals);
  nlohmann::json rec;
  rec["labels"] = std::vector<double>(out.record.labels.data(),
                                      out.record.labels.data() + out.record.labels.size());
  rec["contact_points"] = mat_json(out.record.contact_points);
  rec["object_state"] = out.record.object_state;
  j["affordance"] = std::move(rec);
  if (use_guidance) {
    nlohmann::json trace = nlohmann::json::array();
    for (const CorrectionTraceEntry& e : out.g_trace)
      trace.push_back({{"t", e.t}, {"before", e.g_before}, {"after", e.g_after}});
    j["correction"] = {{"iterations", out.correction_iterations},
                       {"halvings", out.correction_halvings},
                       {"final_objective_before", out.g_before},
                       {"final_objective_after", out.g_after},
                       {"objective_by_step", std::move(trace)}};
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f << j.dump(2) << "\n";
  if (!f) throw std::runtime_error("failed writing sample to '" + path + "'");
}

corpus::CorpusReport gen_data(const GenDataConfig& cfg) {
  corpus::CorpusReport report;
  data::Dataset ds;
  ds.fps = cfg.spec.fps;
  ds.samples = corpus::generate_corpus(cfg.spec, &report);
  require(!ds.samples.empty(), "gen_data: every sample was skipped");
  std::vector<std::string> ids;
  ids.reserve(ds.samples.size());
  for (const data::HoiSample& s : ds.samples) ids.push_back(s.id);
  ds.split = data::make_split(ids, cfg.test_fraction, cfg.spec.seed);
  data::write_dataset(ds, cfg.out_dir);
  return report;
}

void annotate(const AnnotateConfig& cfg) {
  const data::Dataset ds = data::read_dataset(cfg.data_dir);
  std::vector<std::string> ids = cfg.ids;
  if (ids.empty())
    for (const data::HoiSample& s : ds.samples) ids.push_back(s.id);
  require(!ids.empty(), "annotate: no samples selected");

  nlohmann::json arr = nlohmann::json::array();
  for (const std::string& id : ids) {
    const data::HoiSample* s = ds.find(id);
    require(s != nullptr, "annotate: no sample with id '" + id + "'");
    const affordance::AffordanceRecord rec = affordance::extract_gt_affordance(
        motion::recover_global_joints(s->human), motion::ObjectMotionSeq{s->object.frames},
        s->cloud);
    nlohmann::json entry;
    entry["id"] = s->id;
    entry["prompt"] = s->prompt;
    entry["labels"] = std::vector<double>(rec.labels.data(),
                                          rec.labels.data() + rec.labels.size());
    entry["contact_points"] = mat_json(rec.contact_points);
    entry["object_state"] = rec.object_state;
    arr.push_back(std::move(entry));
  }
  std::ofstream f(cfg.out_path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + cfg.out_path + "' for writing");
  f << arr.dump(2) << "\n";
  if (!f) throw std::runtime_error("failed writing annotations to '" + cfg.out_path + "'");
}

metrics::EvalReport evaluate(const EvaluateConfig& cfg) {
  require(cfg.samples >= 1, "evaluate: need at least one sample");
  const data::Dataset ds = data::read_dataset(cfg.data_dir);
  const std::vector<const data::HoiSample*> test = ds.split_samples("test");
  require(!test.empty(), "evaluate: the test split is empty");
  HoiBundle hoi = load_hoi(cfg.hoi_path);
  ApdmBundle apdm = load_apdm(cfg.apdm_path);
  const Eigen::Index L = cfg.frames > 0 ? cfg.frames : hoi.seq_len;

  std::vector<SampleOutput> gen;
  std::vector<std::string> gen_prompts;
  gen.reserve(static_cast<std::size_t>(cfg.samples));
  for (int i = 0; i < cfg.samples; ++i) {
    const data::HoiSample* s = test[static_cast<std::size_t>(i) % test.size()];
    gen.push_back(sample_interaction(hoi, apdm, s->prompt, s->cloud, L, cfg.use_guidance,
                                     cfg.gcfg, cfg.cfg_scale, cfg.apdm_cfg_scale,
                                     cfg.seed + static_cast<std::uint64_t>(i)));
    gen_prompts.push_back(s->prompt);
  }

  metrics::EvalReport rep;
  rep.sample_count = cfg.samples;
  nlohmann::json per_sample = nlohmann::json::array();
  double cd_sum = 0.0, fs_sum = 0.0;
  int cd_n = 0;
  for (std::size_t i = 0; i < gen.size(); ++i) {
    const SampleOutput& g = gen[i];
    const std::optional<double> cd = metrics::contact_distance(g.human, g.object, g.record);
    const double fs = metrics::foot_skate_ratio(g.human);
    if (cd) {
      cd_sum += *cd;
      ++cd_n;
    }
    fs_sum += fs;
    nlohmann::json entry;
    entry["prompt"] = gen_prompts[i];
    entry["contact_distance"] = cd ? nlohmann::json(*cd) : nlohmann::json(nullptr);
    entry["foot_skate_ratio"] = fs;
    if (cfg.use_guidance)
      entry["correction"] = {{"iterations", g.correction_iterations},
                             {"halvings", g.correction_halvings}};
    per_sample.push_back(std::move(entry));
  }
  rep.contact_distance = cd_n > 0 ? cd_sum / cd_n : 0.0;
  rep.foot_skate_ratio = fs_sum / cfg.samples;

  // Per-sequence summary features (channel means over frames) stand in for a
  // learned sequence embedding when comparing the two distributions.
  auto summarize = [](const Mat& frames) -> Vec { return frames.colwise().mean().transpose(); };
  std::vector<Vec> gen_feats;
  Mat gen_mat(static_cast<Eigen::Index>(gen.size()), models::kHumanDim);
  for (std::size_t i = 0; i < gen.size(); ++i) {
    gen_feats.push_back(summarize(gen[i].human.frames));
    gen_mat.row(static_cast<Eigen::Index>(i)) = gen_feats.back().transpose();
  }
  Mat real_mat(static_cast<Eigen::Index>(test.size()), models::kHumanDim);
  for (std::size_t i = 0; i < test.size(); ++i)
    real_mat.row(static_cast<Eigen::Index>(i)) = summarize(test[i]->human.frames).transpose();

  Rng div_rng = Rng(cfg.seed).split(0xd1);
  rep.diversity =
      gen.size() >= 2 ? metrics::diversity(gen_feats, cfg.diversity_pairs, div_rng) : 0.0;
  if (gen.size() >= 2 && test.size() >= 2) rep.fid = metrics::fid(real_mat, gen_mat);

  if (!cfg.out_path.empty()) {
    nlohmann::json j;
    j["sample_count"] = rep.sample_count;
    j["guidance"] = cfg.use_guidance;
    j["contact_distance"] = rep.contact_distance;
    j["scored_for_contact"] = cd_n;
    j["foot_skate_ratio"] = rep.foot_skate_ratio;
    j["diversity"] = rep.diversity;
    j["fid"] = rep.fid ? nlohmann::json(*rep.fid) : nlohmann::json(nullptr);
    j["samples"] = std::move(per_sample);
    std::ofstream f(cfg.out_path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + cfg.out_path + "' for writing");
    f << j.dump(2) << "\n";
    if (!f) throw std::runtime_error("failed writing report to '" + cfg.out_path + "'");
  }
  return rep;
}

}  // namespace hoi::pipeline
