#pragma once

#include <cstdint>
#include <vector>

namespace unires {

/// Fixed forward-process schedule. Index t runs 1..T; alpha_bar(0) == 1.
class NoiseSchedule {
 public:
  static constexpr int kDefaultSteps = 1000;
  static constexpr double kDefaultBetaStart = 1e-4;
  static constexpr double kDefaultBetaEnd = 0.02;

  /// Linear beta ramp from beta_start to beta_end.
  static NoiseSchedule linear(int steps = kDefaultSteps, double beta_start = kDefaultBetaStart,
                              double beta_end = kDefaultBetaEnd);
  /// Arbitrary betas, each in (0,1).
  static NoiseSchedule from_betas(std::vector<double> betas);

  int steps() const { return int(betas_.size()); }
  double beta(int t) const { return betas_.at(t - 1); }
  double alpha(int t) const { return 1.0 - beta(t); }
  double alpha_bar(int t) const;

  const std::vector<double>& betas() const { return betas_; }
  const std::vector<double>& alpha_bars() const { return alpha_bars_; }

 private:
  std::vector<double> betas_;
  std::vector<double> alpha_bars_;  // alpha_bars_[t - 1] for t = 1..T
};

struct SamplerConfig {
  int ddim_steps = 50;
  double eta = 0.0;
  std::uint64_t seed = 0;
};

}  // namespace unires
