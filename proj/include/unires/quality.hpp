#pragma once

#include "unires/image.hpp"

#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace unires {

struct QualityScore {
  double value = 0.0;
  std::string metric_name;
};

inline constexpr double kPsnrCap = 100.0;

/// 10 log10(1 / MSE) for [0,1] data, capped at kPsnrCap.
double psnr(const Image& a, const Image& b);

/// Single-scale SSIM with an 11x11 Gaussian window (sigma 1.5) over valid
/// positions, averaged over channels.
double ssim(const Image& a, const Image& b);

inline constexpr double kProxyNoiseWeight = 2.0;

/// MAD estimate of the noise std from the 4-neighbour Laplacian over
/// interior pixels of all channels.
double noise_std_estimate(const Image& img);

/// Mean central-difference gradient magnitude, channel-averaged.
double mean_gradient_magnitude(const Image& img);

/// No-reference score: gradient term minus lambda times the noise estimate.
QualityScore sharpness_noise_proxy(const Image& img, double lambda = kProxyNoiseWeight);

/// Q(.): higher is better.
using QualityFn = std::function<double(const Image&)>;

QualityFn psnr_against(Image reference);
QualityFn ssim_against(Image reference);

/// Quality functions by name. Built-ins: `psnr:<ref-path>`,
/// `ssim:<ref-path>` and `proxy`.
class QualityRegistry {
 public:
  /// Receives the text after the first ':' (empty when absent).
  using Factory = std::function<QualityFn(std::string_view argument)>;

  static QualityRegistry& global();

  void add(std::string name, Factory factory);
  bool contains(std::string_view name) const;
  QualityFn make(std::string_view spec) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, Factory, std::less<>> factories_;
};

inline QualityFn make_quality(std::string_view spec) { return QualityRegistry::global().make(spec); }

}  // namespace unires
