#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "hoi/pipeline.hpp"

namespace {

std::vector<std::string> split_csv(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

// Pick the sample that supplies the prompt and object geometry: an explicit
// id, else the first test-split clip, else the first clip.
const hoi::data::HoiSample* pick_sample(const hoi::data::Dataset& ds, const std::string& id) {
  if (!id.empty()) {
    const hoi::data::HoiSample* s = ds.find(id);
    if (s == nullptr) throw std::runtime_error("no sample with id '" + id + "'");
    return s;
  }
  const auto test = ds.split_samples("test");
  if (!test.empty()) return test.front();
  if (!ds.samples.empty()) return &ds.samples.front();
  throw std::runtime_error("dataset is empty");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Text-driven human-object interaction synthesis"};
  app.require_subcommand(1);

  // --- gen-data ---
  auto* gen = app.add_subcommand("gen-data", "Generate the procedural interaction dataset");
  hoi::pipeline::GenDataConfig gen_cfg;
  std::string gen_actions, gen_objects;
  gen->add_option("--out", gen_cfg.out_dir, "Output dataset directory")->required();
  gen->add_option("--actions", gen_actions, "Comma-separated action subset");
  gen->add_option("--objects", gen_objects, "Comma-separated object subset");
  gen->add_option("--samples-per-pair", gen_cfg.spec.samples_per_pair,
                  "Clips per action/object pair");
  gen->add_option("--frames", gen_cfg.spec.frames, "Frames per clip");
  gen->add_option("--fps", gen_cfg.spec.fps, "Frame rate");
  gen->add_option("--seed", gen_cfg.spec.seed, "Generation seed");
  gen->add_option("--test-fraction", gen_cfg.test_fraction, "Held-out fraction");

  // --- train-hoi ---
  auto* th = app.add_subcommand("train-hoi", "Train the dual-branch motion denoiser");
  hoi::pipeline::TrainHoiConfig th_cfg;
  th->add_option("--data", th_cfg.data_dir, "Dataset directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  th->add_option("--out", th_cfg.out_path, "Checkpoint path")->required();
  th->add_option("--log", th_cfg.log_path, "Per-step loss CSV path");
  th->add_option("--latent-dim", th_cfg.model.latent_dim, "Transformer width");
  th->add_option("--ff-dim", th_cfg.model.ff_dim, "Feed-forward width");
  th->add_option("--heads", th_cfg.model.heads, "Attention heads");
  th->add_option("--human-layers", th_cfg.model.human_layers, "Human branch depth");
  th->add_option("--object-layers", th_cfg.model.object_layers, "Object branch depth");
  th->add_option("--cm-layer", th_cfg.model.cm_human_layer,
                 "Human layers before the branch exchange");
  th->add_option("--dropout", th_cfg.model.dropout, "Dropout probability");
  th->add_flag_callback("--no-cm", [&] { th_cfg.model.use_cm = false; },
                        "Disable the branch-exchange block");
  th->add_option("--object-loss-weight", th_cfg.model.object_loss_weight,
                 "Object branch loss weight");
  th->add_option("--timesteps", th_cfg.schedule.T, "Diffusion steps");
  th->add_option("--beta-start", th_cfg.schedule.beta_start, "Schedule start");
  th->add_option("--beta-end", th_cfg.schedule.beta_end, "Schedule end");
  th->add_option("--steps", th_cfg.steps, "Optimizer steps");
  th->add_option("--batch", th_cfg.batch, "Batch size");
  th->add_option("--seq-len", th_cfg.seq_len, "Training window length");
  th->add_option("--lr", th_cfg.lr, "Learning rate");
  th->add_option("--cond-drop", th_cfg.cond_drop, "Prompt drop probability");
  th->add_flag("--no-pretrain", th_cfg.no_pretrain, "Skip the human-only warmup phase");
  th->add_option("--seed", th_cfg.seed, "Training seed");

  // --- train-apdm ---
  auto* ta = app.add_subcommand("train-apdm", "Train the affordance denoiser");
  hoi::pipeline::TrainApdmConfig ta_cfg;
  ta->add_option("--data", ta_cfg.data_dir, "Dataset directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  ta->add_option("--out", ta_cfg.out_path, "Checkpoint path")->required();
  ta->add_option("--log", ta_cfg.log_path, "Per-step loss CSV path");
  ta->add_option("--latent-dim", ta_cfg.model.latent_dim, "Transformer width");
  ta->add_option("--ff-dim", ta_cfg.model.ff_dim, "Feed-forward width");
  ta->add_option("--heads", ta_cfg.model.heads, "Attention heads");
  ta->add_option("--layers", ta_cfg.model.layers, "Encoder depth");
  ta->add_option("--dropout", ta_cfg.model.dropout, "Dropout probability");
  ta->add_option("--cloud-hidden", ta_cfg.model.cloud_hidden, "Point feature width");
  ta->add_option("--timesteps", ta_cfg.schedule.T, "Diffusion steps");
  ta->add_option("--beta-start", ta_cfg.schedule.beta_start, "Schedule start");
  ta->add_option("--beta-end", ta_cfg.schedule.beta_end, "Schedule end");
  ta->add_option("--steps", ta_cfg.steps, "Optimizer steps");
  ta->add_option("--batch", ta_cfg.batch, "Batch size");
  ta->add_option("--n-points", ta_cfg.n_points, "Cloud points per item");
  ta->add_option("--lr", ta_cfg.lr, "Learning rate");
  ta->add_option("--cond-drop", ta_cfg.cond_drop, "Prompt drop probability");
  ta->add_option("--seed", ta_cfg.seed, "Training seed");

  // --- sample ---
  auto* sa = app.add_subcommand("sample", "Generate one interaction clip");
  std::string sa_data, sa_hoi, sa_apdm, sa_out, sa_prompt, sa_id, sa_guidance = "on";
  Eigen::Index sa_frames = 0;
  std::uint64_t sa_seed = 0;
  double sa_cfg_scale = 2.0, sa_apdm_cfg = 2.0;
  hoi::guidance::GuidanceConfig sa_gcfg;
  sa->add_option("--data", sa_data, "Dataset directory (prompt and geometry source)")
      ->required()
      ->check(CLI::ExistingDirectory);
  sa->add_option("--hoi", sa_hoi, "Motion model checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  sa->add_option("--apdm", sa_apdm, "Affordance model checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  sa->add_option("--out", sa_out, "Output JSON path")->required();
  sa->add_option("--prompt", sa_prompt, "Prompt text (default: the chosen sample's)");
  sa->add_option("--sample-id", sa_id, "Dataset sample supplying the geometry");
  sa->add_option("--frames", sa_frames, "Frames to generate (default: training window)");
  sa->add_option("--guidance", sa_guidance, "Affordance correction: on or off")
      ->check(CLI::IsMember({"on", "off"}));
  sa->add_option("--seed", sa_seed, "Sampling seed");
  sa->add_option("--tau1", sa_gcfg.tau1, "Human correction step scale");
  sa->add_option("--tau2", sa_gcfg.tau2, "Object correction step scale");
  sa->add_option("--k-final", sa_gcfg.k_final, "Refinement passes at the last step");
  sa->add_option("--cfg-scale", sa_cfg_scale, "Prompt guidance scale (motion)");
  sa->add_option("--apdm-cfg-scale", sa_apdm_cfg, "Prompt guidance scale (affordance)");
  sa->add_flag("--detach-root", sa_gcfg.detach_root_integration,
               "Keep corrections out of the integrated root channels");

  // --- annotate ---
  auto* an = app.add_subcommand("annotate",
                                "Recover affordance records from dataset motion data");
  hoi::pipeline::AnnotateConfig an_cfg;
  std::string an_ids;
  an->add_option("--data", an_cfg.data_dir, "Dataset directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  an->add_option("--out", an_cfg.out_path, "Output JSON path")->required();
  an->add_option("--ids", an_ids, "Comma-separated sample ids (default: all samples)");

  // --- evaluate ---
  auto* ev = app.add_subcommand("evaluate", "Generate from test prompts and score the results");
  hoi::pipeline::EvaluateConfig ev_cfg;
  std::string ev_guidance = "on";
  ev->add_option("--data", ev_cfg.data_dir, "Dataset directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  ev->add_option("--hoi", ev_cfg.hoi_path, "Motion model checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  ev->add_option("--apdm", ev_cfg.apdm_path, "Affordance model checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  ev->add_option("--out", ev_cfg.out_path, "Report JSON path");
  ev->add_option("--samples", ev_cfg.samples, "Clips to generate");
  ev->add_option("--frames", ev_cfg.frames, "Frames per clip (default: training window)");
  ev->add_option("--guidance", ev_guidance, "Affordance correction: on or off")
      ->check(CLI::IsMember({"on", "off"}));
  ev->add_option("--cfg-scale", ev_cfg.cfg_scale, "Prompt guidance scale (motion)");
  ev->add_option("--apdm-cfg-scale", ev_cfg.apdm_cfg_scale, "Prompt guidance scale (affordance)");
  ev->add_option("--tau1", ev_cfg.gcfg.tau1, "Human correction step scale");
  ev->add_option("--tau2", ev_cfg.gcfg.tau2, "Object correction step scale");
  ev->add_option("--diversity-pairs", ev_cfg.diversity_pairs, "Random pairs for diversity");
  ev->add_option("--seed", ev_cfg.seed, "Evaluation seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) {
      if (!gen_actions.empty()) gen_cfg.spec.actions = split_csv(gen_actions);
      if (!gen_objects.empty()) gen_cfg.spec.objects = split_csv(gen_objects);
      const hoi::corpus::CorpusReport rep = hoi::pipeline::gen_data(gen_cfg);
      std::printf("wrote %d samples to %s (%d skipped, %d/%d audits disagree)\n", rep.generated,
                  gen_cfg.out_dir.c_str(), rep.skipped, rep.label_mismatches, rep.audited);
      for (const std::string& r : rep.skip_reasons) std::printf("  skipped %s\n", r.c_str());
    } else if (*th) {
      const hoi::pipeline::TrainResult res = hoi::pipeline::train_hoi(th_cfg);
      std::printf("trained %zu parameters for %zu steps; loss %.5f -> %.5f\n", res.param_count,
                  res.losses.size(), res.losses.front(), res.losses.back());
    } else if (*ta) {
      const hoi::pipeline::TrainResult res = hoi::pipeline::train_apdm(ta_cfg);
      std::printf("trained %zu parameters for %zu steps; loss %.5f -> %.5f\n", res.param_count,
                  res.losses.size(), res.losses.front(), res.losses.back());
    } else if (*sa) {
      const hoi::data::Dataset ds = hoi::data::read_dataset(sa_data);
      const hoi::data::HoiSample* src = pick_sample(ds, sa_id);
      const std::string prompt = sa_prompt.empty() ? src->prompt : sa_prompt;
      hoi::pipeline::HoiBundle hoi_b = hoi::pipeline::load_hoi(sa_hoi);
      hoi::pipeline::ApdmBundle apdm_b = hoi::pipeline::load_apdm(sa_apdm);
      const Eigen::Index frames = sa_frames > 0 ? sa_frames : hoi_b.seq_len;
      const hoi::pipeline::SampleOutput out = hoi::pipeline::sample_interaction(
          hoi_b, apdm_b, prompt, src->cloud, frames, sa_guidance == "on", sa_gcfg, sa_cfg_scale,
          sa_apdm_cfg, sa_seed);
      hoi::pipeline::write_sample_json(out, prompt, sa_seed, sa_guidance == "on", src->cloud,
                                       sa_out);
      std::printf("wrote %s (%lld frames, guidance %s)\n", sa_out.c_str(),
                  static_cast<long long>(frames), sa_guidance.c_str());
    } else if (*an) {
      if (!an_ids.empty()) an_cfg.ids = split_csv(an_ids);
      hoi::pipeline::annotate(an_cfg);
      std::printf("wrote %s\n", an_cfg.out_path.c_str());
    } else if (*ev) {
      ev_cfg.use_guidance = ev_guidance == "on";
      const hoi::metrics::EvalReport rep = hoi::pipeline::evaluate(ev_cfg);
      std::printf("samples %d  contact_distance %.4f  foot_skate %.4f  diversity %.4f",
                  rep.sample_count, rep.contact_distance, rep.foot_skate_ratio, rep.diversity);
      if (rep.fid) std::printf("  fid %.4f", *rep.fid);
      std::printf("\n");
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
