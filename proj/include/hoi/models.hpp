#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hoi/autograd.hpp"
#include "hoi/common.hpp"
#include "hoi/diffusion.hpp"
#include "hoi/nn.hpp"

namespace hoi::models {

inline constexpr int kTextDim = 512;
inline constexpr int kHumanDim = 263;
inline constexpr int kObjectDim = 6;
inline constexpr int kAffDim = 15;  // 8 labels + 2x3 contact points + 1 state flag

// Hashed bag-of-tokens prompt embedding: tokens are lowercased alphanumeric
// runs, each hashed to a (slot, sign) pair and accumulated, then the vector is
// L2-normalized. The empty prompt embeds a reserved token. The zero vector is
// reserved for the unconditional branch and never produced here.
Vec text_embed(const std::string& prompt);

// Per-channel z-normalization statistics for the three feature families.
struct NormStats {
  RowVec mean_h = RowVec::Zero(kHumanDim), std_h = RowVec::Ones(kHumanDim);
  RowVec mean_o = RowVec::Zero(kObjectDim), std_o = RowVec::Ones(kObjectDim);
  RowVec mean_y = RowVec::Zero(kAffDim), std_y = RowVec::Ones(kAffDim);

  static constexpr double kStdFloor = 1e-6;
  static NormStats fit(const std::vector<Mat>& human, const std::vector<Mat>& object,
                       const std::vector<Vec>& affordance);

  Mat normalize_h(const Mat& x) const;
  Mat denormalize_h(const Mat& x) const;
  Mat normalize_o(const Mat& x) const;
  Mat denormalize_o(const Mat& x) const;
  Mat normalize_y(const Mat& x) const;
  Mat denormalize_y(const Mat& x) const;
};

struct HoiModelConfig {
  int latent_dim = 512;
  int ff_dim = 1024;
  int heads = 4;
  int human_layers = 8;
  int object_layers = 4;
  int cm_human_layer = 4;  // exchange runs after this many human layers
  double dropout = 0.1;
  bool use_cm = true;
  double object_loss_weight = 1.0;
};

// One transformer branch of the denoiser: input/output projections, prompt
// and timestep conditioning token, positional encoding, encoder stack.
struct Branch {
  nn::Linear in, out, text_proj, time1, time2;
  std::vector<nn::EncoderLayer> layers;

  Branch() = default;
  Branch(const std::string& name, int feat_dim, int latent, int ff, int heads, int n_layers,
         Rng& rng);

  // Embed features plus conditioning into the packed (B*(L+1)) x latent
  // token stream (conditioning token first in each block).
  ad::Tape::Id embed(nn::Binder& bind, ad::Tape::Id x, const std::vector<int>& ts,
                     const Mat& text, Eigen::Index L);
  ad::Tape::Id run_layers(nn::Binder& bind, ad::Tape::Id packed, int from, int to,
                          Eigen::Index L, double dropout_p, Rng* dropout_rng);
  ad::Tape::Id project_out(nn::Binder& bind, ad::Tape::Id packed, Eigen::Index L);
  void collect(std::vector<nn::Param*>& out);
};

// Dual-branch x0-prediction denoiser. The human branch runs its first half,
// the object branch runs fully, the communication block exchanges frame
// features (cross-attention both ways, residual), then the human branch
// finishes and both branches project back to feature space.
class HoiDenoiser {
 public:
  HoiDenoiser(HoiModelConfig cfg, std::uint64_t init_seed);

  std::pair<ad::Tape::Id, ad::Tape::Id> build(nn::Binder& bind, ad::Tape::Id xh,
                                              ad::Tape::Id xo, const std::vector<int>& ts,
                                              const Mat& text, Eigen::Index L, bool cm_enabled,
                                              double dropout_p, Rng* dropout_rng);

  // Inference forward: normalized noisy features in, x0 predictions out.
  std::pair<Mat, Mat> predict(const Mat& xh, const Mat& xo, const std::vector<int>& ts,
                              const Mat& text, Eigen::Index L);

  std::vector<nn::Param*> params();
  std::size_t param_count();
  const HoiModelConfig& config() const { return cfg_; }

  Branch human, object;
  nn::CommunicationBlock cm;

 private:
  HoiModelConfig cfg_;
};

struct ApdmConfig {
  int latent_dim = 512;
  int ff_dim = 1024;
  int heads = 4;
  int layers = 4;
  double dropout = 0.1;
  int cloud_hidden = 64;
};

// Affordance denoiser: the 15-wide affordance vector is split into three
// tokens (labels / contact points / state), a conditioning token carries the
// timestep, prompt, and point-cloud embedding, and a transformer encoder
// predicts the clean vector.
class AffordanceDenoiser {
 public:
  AffordanceDenoiser(ApdmConfig cfg, std::uint64_t init_seed);

  // points: (B*N) x 3 object-frame cloud points -> B x cloud_hidden features.
  ad::Tape::Id build_cloud_encoder(nn::Binder& bind, ad::Tape::Id points, Eigen::Index n);

  ad::Tape::Id build(nn::Binder& bind, ad::Tape::Id y, const std::vector<int>& ts,
                     const Mat& text, ad::Tape::Id cloud_feat, double dropout_p,
                     Rng* dropout_rng);

  Mat encode_cloud(const Mat& points);  // n x 3 -> 1 x cloud_hidden
  Mat predict(const Mat& y, const std::vector<int>& ts, const Mat& text,
              const Mat& cloud_feat);

  std::vector<nn::Param*> params();
  std::size_t param_count();
  const ApdmConfig& config() const { return cfg_; }

  nn::Linear pt1, pt2;                      // per-point MLP before max-pool
  nn::Linear cloud_proj;                    // pooled feature -> latent
  nn::Linear tok_labels, tok_points, tok_state;
  nn::Linear out_labels, out_points, out_state;
  nn::Linear text_proj, time1, time2;
  std::vector<nn::EncoderLayer> layers;

 private:
  ApdmConfig cfg_;
};

// Fixed training batches (all randomness drawn by the caller) so losses are
// pure functions of the parameters; used by the trainer and the gradient
// checks alike.
struct HoiBatch {
  Mat x0_h;     // (B*L) x 263, normalized
  Mat x0_o;     // (B*L) x 6, normalized
  Mat noise_h;  // same shape as x0_h
  Mat noise_o;  // same shape as x0_o
  Mat text;     // B x 512, rows zeroed where conditioning is dropped
  std::vector<int> ts;
  Eigen::Index L = 0;
};

struct AffBatch {
  Mat y0;      // B x 15, normalized
  Mat noise;   // B x 15
  Mat text;    // B x 512
  Mat points;  // (B*N) x 3 object-frame cloud points
  Eigen::Index n_points = 0;
  std::vector<int> ts;
};

// Mean-squared x0-prediction loss over both branches, weighted by channel
// count and the object loss weight. joint = false trains the human branch
// alone with the communication block disabled (warmup phase).
ad::Tape::Id build_hoi_loss(nn::Binder& bind, HoiDenoiser& model,
                            const diffusion::NoiseSchedule& sched, const HoiBatch& batch,
                            bool joint, double dropout_p, Rng* dropout_rng);

ad::Tape::Id build_aff_loss(nn::Binder& bind, AffordanceDenoiser& model,
                            const diffusion::NoiseSchedule& sched, const AffBatch& batch,
                            double dropout_p, Rng* dropout_rng);

// One optimizer step; returns the loss value.
double hoi_training_step(HoiDenoiser& model, const diffusion::NoiseSchedule& sched,
                         const HoiBatch& batch, nn::Adam& opt, bool joint, double dropout_p,
                         Rng* dropout_rng);

double aff_training_step(AffordanceDenoiser& model, const diffusion::NoiseSchedule& sched,
                         const AffBatch& batch, nn::Adam& opt, double dropout_p,
                         Rng* dropout_rng);

}  // namespace hoi::models
