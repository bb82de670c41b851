#pragma once

#include "unires/image.hpp"
#include "unires/predictor.hpp"
#include "unires/rng.hpp"
#include "unires/schedule.hpp"

#include <functional>
#include <vector>

namespace unires {

/// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps. No clamping.
Image forward_diffuse(const Image& x0, int t, const Image& eps, const NoiseSchedule& schedule);

Image standard_normal_like(int channels, int height, int width, Rng& rng);

/// One Monte-Carlo sample of the noise-prediction objective: t uniform in
/// 1..T, eps standard normal, mean squared error over all samples.
double training_loss(const NoisePredictor& predictor, const Image& x0, const Condition& cond,
                     const NoiseSchedule& schedule, Rng& rng);

/// x0 estimate implied by a noise prediction.
Image predicted_x0(const Image& z_t, const Image& eps_hat, int t, const NoiseSchedule& schedule);

/// Generalized DDIM update from t to t_prev (t > t_prev >= 0). `rng` is
/// only drawn from when eta > 0.
Image ddim_step(const Image& z_t, const Image& eps_hat, int t, int t_prev, const NoiseSchedule& schedule,
                double eta, Rng* rng = nullptr);

/// Timesteps visited by the sampler: floor(T * i / steps) for i = steps..0.
std::vector<int> ddim_timesteps(int total_steps, int ddim_steps);

using PredictFn = std::function<Image(const Image& z_t, int t)>;

struct LatentShape {
  int channels = 3;
  int height = 64;
  int width = 64;
};

/// Starting latent z_T ~ N(0, I) drawn from the sampler seed.
Image initial_latent(const LatentShape& shape, const SamplerConfig& config);

/// Deterministic (eta = 0) or stochastic DDIM sampling from z_T. The
/// result is not clamped.
Image ddim_sample(const PredictFn& predict, const LatentShape& shape, const SamplerConfig& config,
                  const NoiseSchedule& schedule);

}  // namespace unires
