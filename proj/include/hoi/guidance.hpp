#pragma once

#include "hoi/affordance.hpp"
#include "hoi/common.hpp"
#include "hoi/diffusion.hpp"
#include "hoi/motion.hpp"

namespace hoi::guidance {

struct GuidanceConfig {
  double tau1 = 1.0;    // human mean step scale
  double tau2 = 100.0;  // object mean step scale
  int k_final = 100;    // correction iterations at t = 1
  double sigma_clamp = 0.01;
  double alpha_sta = 1.0;  // stationarity term weight
  double beta_smo = 0.1;   // smoothness term weight
  bool detach_root_integration = false;
  int max_backtracks = 12;  // step halvings tried per half-step before skipping it
};

// Correction step scale: the clamped posterior variance. The schedule's
// variance vanishes at t = 1, where the clamp value itself is used so the
// final-step refinement iterations keep a usable step size.
double sigma_tilde(int t, const diffusion::NoiseSchedule& sched, const GuidanceConfig& cfg);

struct ObjectiveTerms {
  double contact = 0.0;     // squared distance between contact joints and points
  double stationary = 0.0;  // pose deviation from the clip mean (static objects)
  double smooth = 0.0;      // squared pose differences between adjacent frames
  double total = 0.0;
};

// Objective over raw-space candidate means. mu_h is L x 263, mu_o is L x 6;
// contact joints come from the record's labels, contact point trajectories
// from the record's rest-frame points under the object poses. The
// stationarity term is active only when the record marks the object static.
ObjectiveTerms objective_G(const Mat& mu_h, const Mat& mu_o,
                           const affordance::AffordanceRecord& rec, const GuidanceConfig& cfg);

struct ObjectiveGradient {
  Mat grad_h;  // L x 263
  Mat grad_o;  // L x 6
  ObjectiveTerms terms;
};

// Analytic gradient of the objective. The human gradient flows through the
// joint recovery chain: local positions, root height, and (unless detached)
// the integrated yaw and planar velocity channels. The object gradient flows
// through the per-frame rotation of the contact points.
ObjectiveGradient grad_G(const Mat& mu_h, const Mat& mu_o,
                         const affordance::AffordanceRecord& rec, const GuidanceConfig& cfg);

struct CorrectionResult {
  Mat mu_h;
  Mat mu_o;
  int iterations = 0;
  int halvings = 0;
  ObjectiveTerms before;
  ObjectiveTerms after;
};

// Alternating correction of the two posterior means: within each pass the
// human mean moves first against the current object mean, then the object
// mean moves against the updated human mean, with gradients recomputed
// between the two half-steps. One pass per step, except t = 1 where k_final
// passes run. Each half-step is accepted only if it strictly lowers the
// objective; otherwise its scale is halved (up to max_backtracks, counted in
// halvings) and a still-rising half-step is skipped, so the objective never
// increases across iterations. With two active contacts the summed contact
// gradient doubles the object translation step, which overshoots at the full
// tau2 * sigma scale and would grow the error geometrically without the
// halving. Zero taus return the inputs unchanged.
CorrectionResult correct_means(const Mat& mu_h, const Mat& mu_o, int t,
                               const affordance::AffordanceRecord& rec,
                               const diffusion::NoiseSchedule& sched, const GuidanceConfig& cfg);

}  // namespace hoi::guidance
