#pragma once

#include "unires/image.hpp"
#include "unires/schedule.hpp"
#include "unires/task.hpp"

#include <optional>

namespace unires {

/// Inputs a noise predictor is conditioned on. Either slot may be the
/// null condition.
struct Condition {
  std::optional<Image> lq;
  std::optional<TaskId> task;

  static Condition null() { return {}; }
};

/// eps_theta(z_t, t, cond): predicts the noise mixed into z_t.
class NoisePredictor {
 public:
  virtual ~NoisePredictor() = default;
  virtual Image predict(const Image& z_t, int t, const Condition& cond) const = 0;
};

/// Exact noise predictor for data distributed as N(mean, variance * I).
/// With variance 0 it is the point-mass predictor: the only noise
/// consistent with z_t under the forward process. Ignores the condition.
class AnalyticGaussianPredictor final : public NoisePredictor {
 public:
  AnalyticGaussianPredictor(Image mean, double variance, NoiseSchedule schedule);

  Image predict(const Image& z_t, int t, const Condition& cond) const override;

  const Image& mean() const { return mean_; }
  double variance() const { return variance_; }

  /// E[x0 | z_t] under the Gaussian data model.
  Image posterior_mean(const Image& z_t, int t) const;

 private:
  Image mean_;
  double variance_;
  NoiseSchedule schedule_;
};

}  // namespace unires
