#pragma once

#include <functional>

#include "hoi/common.hpp"

namespace hoi::diffusion {

// Linear-beta noise schedule. Arrays are 1-indexed by timestep t in [1, T];
// index 0 holds the conventions alpha_bar[0] = 1 and one_minus_alpha_bar[0]
// = 0 so the t = 1 posterior collapses exactly onto the model prediction.
struct NoiseSchedule {
  int T = 0;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  Vec beta;                 // beta[0] unused
  Vec alpha_bar;            // cumulative product of (1 - beta)
  Vec one_minus_alpha_bar;  // stored directly; equals beta[1] exactly at t = 1
  Vec sigma;                // posterior variance; sigma[1] == 0 exactly

  static NoiseSchedule linear(int T, double beta_start = 1e-4, double beta_end = 0.02);
};

// Forward noising: sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) noise.
// t = 0 is the identity.
Mat q_sample(const Mat& x0, int t, const Mat& noise, const NoiseSchedule& sched);

// Mean of the reverse-step posterior q(x_{t-1} | x_t, x0_hat). At t = 1 the
// coefficients are exactly (1, 0), so the result equals x0_hat.
Mat posterior_mean(const Mat& x0_hat, const Mat& x_t, int t, const NoiseSchedule& sched);

// Model callback: (x_t, t) -> x0_hat.
using DenoiseFn = std::function<Mat(const Mat&, int)>;

// Optional correction applied to the posterior mean before noise is added.
// Receives (mu, x0_hat, x_t, t) and returns the adjusted mean.
using MeanHook = std::function<Mat(const Mat&, const Mat&, const Mat&, int)>;

// Ancestral sampling from pure noise down to t = 1. The final step adds no
// noise (sigma[1] = 0); any hook runs at every step after the mean is formed.
Mat sample_loop(const DenoiseFn& model, const NoiseSchedule& sched, Eigen::Index rows,
                Eigen::Index cols, Rng& rng, const MeanHook* hook = nullptr);

// Classifier-free mixing: uncond + scale * (cond - uncond). scale = 1 returns
// the conditional prediction unchanged.
Mat cfg_mix(const Mat& uncond, const Mat& cond, double scale);

}  // namespace hoi::diffusion
