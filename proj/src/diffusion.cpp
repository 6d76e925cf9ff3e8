#include "hoi/diffusion.hpp"

#include <cmath>

namespace hoi::diffusion {

NoiseSchedule NoiseSchedule::linear(int T, double beta_start, double beta_end) {
  require(T >= 1, "NoiseSchedule: T must be >= 1");
  require(beta_start > 0.0 && beta_end < 1.0 && beta_start <= beta_end,
          "NoiseSchedule: need 0 < beta_start <= beta_end < 1");
  NoiseSchedule s;
  s.T = T;
  s.beta_start = beta_start;
  s.beta_end = beta_end;
  s.beta = Vec::Zero(T + 1);
  s.alpha_bar = Vec::Zero(T + 1);
  s.one_minus_alpha_bar = Vec::Zero(T + 1);
  s.sigma = Vec::Zero(T + 1);

  for (int t = 1; t <= T; ++t) {
    s.beta[t] = T == 1 ? beta_start
                       : beta_start + (beta_end - beta_start) * (t - 1) / double(T - 1);
  }
  s.alpha_bar[0] = 1.0;
  s.one_minus_alpha_bar[0] = 0.0;
  for (int t = 1; t <= T; ++t) {
    s.alpha_bar[t] = s.alpha_bar[t - 1] * (1.0 - s.beta[t]);
    // 1 - alpha_bar_1 == beta_1 algebraically; store it exactly.
    s.one_minus_alpha_bar[t] = t == 1 ? s.beta[1] : 1.0 - s.alpha_bar[t];
    s.sigma[t] = s.one_minus_alpha_bar[t - 1] / s.one_minus_alpha_bar[t] * s.beta[t];
  }
  return s;
}

Mat q_sample(const Mat& x0, int t, const Mat& noise, const NoiseSchedule& sched) {
  require(t >= 0 && t <= sched.T, "q_sample: t out of range");
  require(x0.rows() == noise.rows() && x0.cols() == noise.cols(),
          "q_sample: shape mismatch");
  const double a = std::sqrt(sched.alpha_bar[t]);
  const double b = std::sqrt(sched.one_minus_alpha_bar[t]);
  return a * x0 + b * noise;
}

Mat posterior_mean(const Mat& x0_hat, const Mat& x_t, int t, const NoiseSchedule& sched) {
  require(t >= 1 && t <= sched.T, "posterior_mean: t out of range");
  require(x0_hat.rows() == x_t.rows() && x0_hat.cols() == x_t.cols(),
          "posterior_mean: shape mismatch");
  const double c0 =
      std::sqrt(sched.alpha_bar[t - 1]) * sched.beta[t] / sched.one_minus_alpha_bar[t];
  const double ct = std::sqrt(1.0 - sched.beta[t]) * sched.one_minus_alpha_bar[t - 1] /
                    sched.one_minus_alpha_bar[t];
  return c0 * x0_hat + ct * x_t;
}

Mat sample_loop(const DenoiseFn& model, const NoiseSchedule& sched, Eigen::Index rows,
                Eigen::Index cols, Rng& rng, const MeanHook* hook) {
  Mat x = rng.normal_mat(rows, cols);
  for (int t = sched.T; t >= 1; --t) {
    const Mat x0_hat = model(x, t);
    require(x0_hat.rows() == rows && x0_hat.cols() == cols, "sample_loop: model shape mismatch");
    Mat mu = posterior_mean(x0_hat, x, t, sched);
    if (hook && *hook) mu = (*hook)(mu, x0_hat, x, t);
    if (t > 1) {
      x = mu + std::sqrt(sched.sigma[t]) * rng.normal_mat(rows, cols);
    } else {
      x = mu;
    }
  }
  return x;
}

Mat cfg_mix(const Mat& uncond, const Mat& cond, double scale) {
  require(uncond.rows() == cond.rows() && uncond.cols() == cond.cols(),
          "cfg_mix: shape mismatch");
  return uncond + scale * (cond - uncond);
}

}  // namespace hoi::diffusion
