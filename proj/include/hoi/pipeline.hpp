#pragma once

#include <memory>
#include <string>
#include <vector>

#include "hoi/checkpoint.hpp"
#include "hoi/corpus.hpp"
#include "hoi/dataset.hpp"
#include "hoi/guidance.hpp"
#include "hoi/metrics.hpp"
#include "hoi/models.hpp"

namespace hoi::pipeline {

struct ScheduleSpec {
  int T = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
};

struct TrainHoiConfig {
  std::string data_dir;
  std::string out_path;
  std::string log_path;  // per-step loss CSV; empty disables logging
  models::HoiModelConfig model;
  ScheduleSpec schedule;
  int steps = 2000;
  int batch = 8;
  Eigen::Index seq_len = 24;   // training window length
  double lr = 1e-4;
  double cond_drop = 0.1;      // probability of zeroing the prompt embedding
  bool no_pretrain = false;    // skip the human-only warmup phase
  std::uint64_t seed = 0;
};

struct TrainApdmConfig {
  std::string data_dir;
  std::string out_path;
  std::string log_path;
  models::ApdmConfig model;
  ScheduleSpec schedule{1000, 1e-4, 0.02};
  int steps = 1000;
  int batch = 16;
  int n_points = 128;  // cloud points fed to the encoder per item
  double lr = 1e-4;
  double cond_drop = 0.1;
  std::uint64_t seed = 0;
};

struct TrainResult {
  std::vector<double> losses;  // one entry per optimizer step
  std::size_t param_count = 0;
};

TrainResult train_hoi(const TrainHoiConfig& cfg);
TrainResult train_apdm(const TrainApdmConfig& cfg);

// A trained motion model with everything needed to sample from it.
struct HoiBundle {
  std::unique_ptr<models::HoiDenoiser> model;
  diffusion::NoiseSchedule sched;
  models::NormStats stats;
  double fps = 20.0;
  Eigen::Index seq_len = 24;
};

struct ApdmBundle {
  std::unique_ptr<models::AffordanceDenoiser> model;
  diffusion::NoiseSchedule sched;
  models::NormStats stats;
};

HoiBundle load_hoi(const std::string& path);
ApdmBundle load_apdm(const std::string& path);

// Draw one affordance record for a prompt/cloud pair: classifier-free guided
// reverse diffusion, decision rules, then contact points snapped to the
// surface and pushed out along the normals.
affordance::AffordanceRecord sample_affordance(ApdmBundle& bundle, const std::string& prompt,
                                               const geom::PointCloud& cloud, double cfg_scale,
                                               Rng& rng);

struct CorrectionTraceEntry {
  int t = 0;
  double g_before = 0.0;
  double g_after = 0.0;
};

struct SampleOutput {
  motion::HumanMotionSeq human;
  motion::ObjectMotionSeq object;
  affordance::AffordanceRecord record;
  int correction_iterations = 0;  // summed over the reverse process
  int correction_halvings = 0;
  double g_before = 0.0;  // objective before/after the final-step refinement
  double g_after = 0.0;
  std::vector<CorrectionTraceEntry> g_trace;  // one entry per corrected step
};

// Full generation: sample an affordance record, then run the joint reverse
// process over both motion branches. With guidance enabled the posterior
// means pass through the affordance correction at every step; without it the
// reverse process runs untouched and consumes the identical noise stream.
SampleOutput sample_interaction(HoiBundle& hoi, ApdmBundle& apdm, const std::string& prompt,
                                const geom::PointCloud& cloud, Eigen::Index frames,
                                bool use_guidance, const guidance::GuidanceConfig& gcfg,
                                double cfg_scale, double apdm_cfg_scale, std::uint64_t seed);

void write_sample_json(const SampleOutput& out, const std::string& prompt, std::uint64_t seed,
                       bool use_guidance, const geom::PointCloud& cloud, const std::string& path);

struct GenDataConfig {
  corpus::CorpusSpec spec;
  std::string out_dir;
  double test_fraction = 0.1;
};

// Generate the procedural corpus and write it as a dataset directory.
corpus::CorpusReport gen_data(const GenDataConfig& cfg);

struct AnnotateConfig {
  std::string data_dir;
  std::string out_path;
  std::vector<std::string> ids;  // empty selects every sample
};

// Recover affordance records for stored samples from their motion data
// (closest-approach contact analysis plus the object displacement rule) and
// write them as a JSON array.
void annotate(const AnnotateConfig& cfg);

struct EvaluateConfig {
  std::string data_dir;
  std::string hoi_path;
  std::string apdm_path;
  std::string out_path;  // JSON report; empty disables
  int samples = 8;
  Eigen::Index frames = 0;  // 0 uses the checkpoint's training window
  bool use_guidance = true;
  guidance::GuidanceConfig gcfg;
  double cfg_scale = 2.0;
  double apdm_cfg_scale = 2.0;
  int diversity_pairs = 32;
  std::uint64_t seed = 0;
};

// Generate motions for test-split prompts and score them: contact distance
// against the sampled records, foot skate ratio, feature diversity, and the
// Frechet distance between generated and reference feature statistics.
metrics::EvalReport evaluate(const EvaluateConfig& cfg);

}  // namespace hoi::pipeline
