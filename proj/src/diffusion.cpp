#include "unires/diffusion.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace unires {

// ---------------------------------------------------------------------------
// NoiseSchedule
// ---------------------------------------------------------------------------

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start, double beta_end) {
  if (steps < 1) throw std::invalid_argument("schedule needs at least one step");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw std::invalid_argument("schedule requires 0 < beta_start <= beta_end < 1");
  }
  std::vector<double> betas(steps);
  for (int i = 0; i < steps; ++i) {
    betas[i] = steps == 1 ? beta_start : beta_start + (beta_end - beta_start) * double(i) / double(steps - 1);
  }
  return from_betas(std::move(betas));
}

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas) {
  if (betas.empty()) throw std::invalid_argument("schedule needs at least one step");
  NoiseSchedule s;
  s.alpha_bars_.reserve(betas.size());
  double prod = 1.0;
  for (double b : betas) {
    if (!(b > 0.0 && b < 1.0)) throw std::invalid_argument("every beta must lie in (0,1)");
    prod *= 1.0 - b;
    s.alpha_bars_.push_back(prod);
  }
  s.betas_ = std::move(betas);
  return s;
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t == 0) return 1.0;
  if (t < 0 || t > steps()) {
    throw std::out_of_range("timestep " + std::to_string(t) + " outside [0, " + std::to_string(steps()) + "]");
  }
  return alpha_bars_[t - 1];
}

// ---------------------------------------------------------------------------
// AnalyticGaussianPredictor
// ---------------------------------------------------------------------------

AnalyticGaussianPredictor::AnalyticGaussianPredictor(Image mean, double variance, NoiseSchedule schedule)
    : mean_(std::move(mean)), variance_(variance), schedule_(std::move(schedule)) {
  if (!(variance_ >= 0.0)) throw std::invalid_argument("analytic predictor variance must be >= 0");
  if (!mean_.all_finite()) throw std::invalid_argument("analytic predictor mean must be finite");
}

Image AnalyticGaussianPredictor::predict(const Image& z_t, int t, const Condition&) const {
  require_same_shape(z_t, mean_, "AnalyticGaussianPredictor::predict");
  const double ab = schedule_.alpha_bar(t);
  const double denom = ab * variance_ + 1.0 - ab;
  Image eps = z_t;
  eps.values() = std::sqrt(1.0 - ab) * (z_t.values() - std::sqrt(ab) * mean_.values()) / denom;
  return eps;
}

Image AnalyticGaussianPredictor::posterior_mean(const Image& z_t, int t) const {
  require_same_shape(z_t, mean_, "AnalyticGaussianPredictor::posterior_mean");
  const double ab = schedule_.alpha_bar(t);
  const double denom = ab * variance_ + 1.0 - ab;
  Image out = z_t;
  out.values() = (std::sqrt(ab) * variance_ * z_t.values() + (1.0 - ab) * mean_.values()) / denom;
  return out;
}

// ---------------------------------------------------------------------------
// Forward process and objective
// ---------------------------------------------------------------------------

Image forward_diffuse(const Image& x0, int t, const Image& eps, const NoiseSchedule& schedule) {
  require_same_shape(x0, eps, "forward_diffuse");
  if (t < 1 || t > schedule.steps()) throw std::out_of_range("forward_diffuse: timestep out of range");
  const double ab = schedule.alpha_bar(t);
  Image out = x0;
  out.values() = std::sqrt(ab) * x0.values() + std::sqrt(1.0 - ab) * eps.values();
  return out;
}

Image standard_normal_like(int channels, int height, int width, Rng& rng) {
  Image out(channels, height, width);
  for (auto& v : out.values()) v = rng.normal();
  return out;
}

double training_loss(const NoisePredictor& predictor, const Image& x0, const Condition& cond,
                     const NoiseSchedule& schedule, Rng& rng) {
  const int t = rng.uniform_int(1, schedule.steps());
  const Image eps = standard_normal_like(x0.channels(), x0.height(), x0.width(), rng);
  const Image eps_hat = predictor.predict(forward_diffuse(x0, t, eps, schedule), t, cond);
  require_same_shape(eps, eps_hat, "training_loss");
  return (eps.values() - eps_hat.values()).squaredNorm() / double(eps.size());
}

// ---------------------------------------------------------------------------
// DDIM
// ---------------------------------------------------------------------------

Image predicted_x0(const Image& z_t, const Image& eps_hat, int t, const NoiseSchedule& schedule) {
  const double ab = schedule.alpha_bar(t);
  Image x0 = z_t;
  x0.values() = (z_t.values() - std::sqrt(1.0 - ab) * eps_hat.values()) / std::sqrt(ab);
  return x0;
}

Image ddim_step(const Image& z_t, const Image& eps_hat, int t, int t_prev, const NoiseSchedule& schedule,
                double eta, Rng* rng) {
  require_same_shape(z_t, eps_hat, "ddim_step");
  if (!(t > t_prev && t_prev >= 0)) throw std::invalid_argument("ddim_step requires t > t_prev >= 0");
  const double ab = schedule.alpha_bar(t);
  const double ab_prev = schedule.alpha_bar(t_prev);
  const Image x0 = predicted_x0(z_t, eps_hat, t, schedule);

  const double sigma =
      eta == 0.0 ? 0.0 : eta * std::sqrt((1.0 - ab_prev) / (1.0 - ab)) * std::sqrt(1.0 - ab / ab_prev);
  const double dir = std::sqrt(std::max(1.0 - ab_prev - sigma * sigma, 0.0));

  Image out = x0;
  out.values() = std::sqrt(ab_prev) * x0.values() + dir * eps_hat.values();
  if (sigma > 0.0) {
    if (rng == nullptr) throw std::invalid_argument("ddim_step with eta > 0 needs a generator");
    for (auto& v : out.values()) v += sigma * rng->normal();
  }
  return out;
}

std::vector<int> ddim_timesteps(int total_steps, int ddim_steps) {
  if (ddim_steps < 1 || ddim_steps > total_steps) {
    throw std::invalid_argument("ddim_steps must lie in [1, " + std::to_string(total_steps) + "]");
  }
  std::vector<int> ts;
  ts.reserve(ddim_steps + 1);
  for (int i = ddim_steps; i >= 0; --i) ts.push_back(int((long long)total_steps * i / ddim_steps));
  return ts;
}

Image initial_latent(const LatentShape& shape, const SamplerConfig& config) {
  Rng rng(derive_seed(config.seed, 0));
  return standard_normal_like(shape.channels, shape.height, shape.width, rng);
}

Image ddim_sample(const PredictFn& predict, const LatentShape& shape, const SamplerConfig& config,
                  const NoiseSchedule& schedule) {
  const auto ts = ddim_timesteps(schedule.steps(), config.ddim_steps);
  Rng step_rng(derive_seed(config.seed, 1));
  Image z = initial_latent(shape, config);
  for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
    const Image eps = predict(z, ts[i]);
    z = ddim_step(z, eps, ts[i], ts[i + 1], schedule, config.eta, &step_rng);
  }
  return z;
}

}  // namespace unires
