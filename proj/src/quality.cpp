#include "unires/quality.hpp"

#include "unires/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>

namespace unires {

namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimC1 = 0.01 * 0.01;
constexpr double kSsimC2 = 0.03 * 0.03;

std::mutex& registry_mutex() {
  static std::mutex m;
  return m;
}

Eigen::ArrayXXd ssim_window() {
  Eigen::ArrayXd g(kSsimWindow);
  const int r = kSsimWindow / 2;
  for (int i = 0; i < kSsimWindow; ++i) g[i] = std::exp(-double((i - r) * (i - r)) / (2 * kSsimSigma * kSsimSigma));
  g /= g.sum();
  return g.matrix() * g.matrix().transpose();
}

}  // namespace

double psnr(const Image& a, const Image& b) {
  require_same_shape(a, b, "psnr");
  const double mse = (a.values() - b.values()).squaredNorm() / double(a.size());
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Image& a, const Image& b) {
  require_same_shape(a, b, "ssim");
  if (a.height() < kSsimWindow || a.width() < kSsimWindow) {
    throw std::invalid_argument("ssim: image smaller than the 11x11 window");
  }
  if (a == b) return 1.0;
  static const Eigen::ArrayXXd window = ssim_window();
  const int oh = a.height() - kSsimWindow + 1;
  const int ow = a.width() - kSsimWindow + 1;
  double total = 0.0;
  for (int c = 0; c < a.channels(); ++c) {
    const auto x = a.plane(c);
    const auto y = b.plane(c);
    double channel = 0.0;
    for (int i = 0; i < oh; ++i) {
      for (int j = 0; j < ow; ++j) {
        const auto px = x.block(i, j, kSsimWindow, kSsimWindow);
        const auto py = y.block(i, j, kSsimWindow, kSsimWindow);
        const double mx = (window * px).sum();
        const double my = (window * py).sum();
        const double vx = (window * px * px).sum() - mx * mx;
        const double vy = (window * py * py).sum() - my * my;
        const double cov = (window * px * py).sum() - mx * my;
        channel += ((2 * mx * my + kSsimC1) * (2 * cov + kSsimC2)) /
                   ((mx * mx + my * my + kSsimC1) * (vx + vy + kSsimC2));
      }
    }
    total += channel / (double(oh) * ow);
  }
  return total / a.channels();
}

double noise_std_estimate(const Image& img) {
  if (img.height() < 3 || img.width() < 3) throw std::invalid_argument("noise_std_estimate: image too small");
  std::vector<double> mags;
  mags.reserve(std::size_t(img.channels()) * (img.height() - 2) * (img.width() - 2));
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 1; y + 1 < img.height(); ++y) {
      for (int x = 1; x + 1 < img.width(); ++x) {
        const double lap = img.at(c, y - 1, x) + img.at(c, y + 1, x) + img.at(c, y, x - 1) + img.at(c, y, x + 1) -
                           4.0 * img.at(c, y, x);
        mags.push_back(std::abs(lap));
      }
    }
  }
  const std::size_t n = mags.size();
  std::nth_element(mags.begin(), mags.begin() + n / 2, mags.end());
  double median = mags[n / 2];
  if (n % 2 == 0) {
    median = 0.5 * (median + *std::max_element(mags.begin(), mags.begin() + n / 2));
  }
  return median / 0.6745 / std::sqrt(20.0);
}

double mean_gradient_magnitude(const Image& img) {
  double total = 0.0;
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        const double gx = 0.5 * (img.clamped(c, y, x + 1) - img.clamped(c, y, x - 1));
        const double gy = 0.5 * (img.clamped(c, y + 1, x) - img.clamped(c, y - 1, x));
        total += std::sqrt(gx * gx + gy * gy);
      }
    }
  }
  return total / double(img.size());
}

QualityScore sharpness_noise_proxy(const Image& img, double lambda) {
  if (img.height() < 8 || img.width() < 8) throw std::invalid_argument("sharpness_noise_proxy: image too small");
  return {mean_gradient_magnitude(img) - lambda * noise_std_estimate(img), "proxy"};
}

QualityFn psnr_against(Image reference) {
  return [ref = std::move(reference)](const Image& img) { return psnr(img, ref); };
}

QualityFn ssim_against(Image reference) {
  return [ref = std::move(reference)](const Image& img) { return ssim(img, ref); };
}

QualityRegistry& QualityRegistry::global() {
  static QualityRegistry registry = [] {
    QualityRegistry r;
    auto need_path = [](std::string_view metric, std::string_view arg) {
      if (arg.empty()) throw std::invalid_argument(std::string(metric) + " needs a reference path, e.g. " +
                                                   std::string(metric) + ":ref.ppm");
      return load_image(std::string(arg));
    };
    r.add("psnr", [need_path](std::string_view arg) { return psnr_against(need_path("psnr", arg)); });
    r.add("ssim", [need_path](std::string_view arg) { return ssim_against(need_path("ssim", arg)); });
    r.add("proxy", [](std::string_view arg) -> QualityFn {
      if (!arg.empty()) throw std::invalid_argument("proxy takes no argument");
      return [](const Image& img) { return sharpness_noise_proxy(img).value; };
    });
    return r;
  }();
  return registry;
}

void QualityRegistry::add(std::string name, Factory factory) {
  std::lock_guard lock(registry_mutex());
  factories_[std::move(name)] = std::move(factory);
}

bool QualityRegistry::contains(std::string_view name) const {
  std::lock_guard lock(registry_mutex());
  return factories_.find(name) != factories_.end();
}

QualityFn QualityRegistry::make(std::string_view spec) const {
  const auto colon = spec.find(':');
  const std::string_view name = spec.substr(0, colon);
  const std::string_view arg = colon == std::string_view::npos ? std::string_view{} : spec.substr(colon + 1);
  Factory factory;
  {
    std::lock_guard lock(registry_mutex());
    const auto it = factories_.find(name);
    if (it == factories_.end()) throw std::invalid_argument("unknown quality metric '" + std::string(name) + "'");
    factory = it->second;
  }
  return factory(arg);
}

std::vector<std::string> QualityRegistry::names() const {
  std::lock_guard lock(registry_mutex());
  std::vector<std::string> out;
  for (const auto& [name, f] : factories_) out.push_back(name);
  return out;
}

}  // namespace unires
