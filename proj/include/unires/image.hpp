#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace unires {

/// Dense (channels, height, width) image stored channel-major, row-major
/// within each channel. Used for pixels, noisy latents and LQ conditions.
template <typename Scalar>
class ImageT {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using PlaneMap = Eigen::Map<Plane>;
  using ConstPlaneMap = Eigen::Map<const Plane>;

  ImageT() = default;

  ImageT(int channels, int height, int width, Scalar fill = Scalar(0))
      : channels_(channels), height_(height), width_(width) {
    if (channels != 1 && channels != 3) {
      throw std::invalid_argument("image channels must be 1 or 3, got " + std::to_string(channels));
    }
    if (height < 1 || width < 1) {
      throw std::invalid_argument("image dimensions must be positive");
    }
    data_ = Vector::Constant(Eigen::Index(channels) * height * width, fill);
  }

  ImageT(int channels, int height, int width, Vector data) : ImageT(channels, height, width) {
    if (data.size() != data_.size()) {
      throw std::invalid_argument("image data length does not match shape");
    }
    data_ = std::move(data);
  }

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  Eigen::Index size() const { return data_.size(); }
  Eigen::Index plane_size() const { return Eigen::Index(height_) * width_; }
  bool empty() const { return data_.size() == 0; }

  bool same_shape(const ImageT& other) const {
    return channels_ == other.channels_ && height_ == other.height_ && width_ == other.width_;
  }

  Vector& values() { return data_; }
  const Vector& values() const { return data_; }

  Scalar& at(int c, int y, int x) { return data_[(Eigen::Index(c) * height_ + y) * width_ + x]; }
  Scalar at(int c, int y, int x) const { return data_[(Eigen::Index(c) * height_ + y) * width_ + x]; }

  /// Sample with coordinates clamped to the image border.
  Scalar clamped(int c, int y, int x) const {
    return at(c, std::clamp(y, 0, height_ - 1), std::clamp(x, 0, width_ - 1));
  }

  PlaneMap plane(int c) { return PlaneMap(data_.data() + c * plane_size(), height_, width_); }
  ConstPlaneMap plane(int c) const {
    return ConstPlaneMap(data_.data() + c * plane_size(), height_, width_);
  }

  bool all_finite() const { return data_.allFinite(); }

  ImageT clamped01() const {
    ImageT out = *this;
    out.data_ = data_.cwiseMax(Scalar(0)).cwiseMin(Scalar(1));
    return out;
  }

  template <typename Other>
  ImageT<Other> cast() const {
    return ImageT<Other>(channels_, height_, width_, data_.template cast<Other>());
  }

  friend bool operator==(const ImageT& a, const ImageT& b) {
    return a.same_shape(b) && a.data_ == b.data_;
  }

 private:
  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  Vector data_;
};

using Image = ImageT<double>;
using ImageF = ImageT<float>;

template <typename Scalar>
void require_same_shape(const ImageT<Scalar>& a, const ImageT<Scalar>& b, const char* what) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(what) + ": image shape mismatch");
  }
}

template <typename Scalar>
Scalar max_abs_diff(const ImageT<Scalar>& a, const ImageT<Scalar>& b) {
  require_same_shape(a, b, "max_abs_diff");
  return (a.values() - b.values()).cwiseAbs().maxCoeff();
}

struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> std;  // population
};

template <typename Scalar>
ChannelStats channel_stats(const ImageT<Scalar>& img) {
  ChannelStats stats;
  for (int c = 0; c < img.channels(); ++c) {
    const auto p = img.plane(c).template cast<double>();
    const double mean = p.mean();
    const double var = (p - mean).square().mean();
    stats.mean.push_back(mean);
    stats.std.push_back(std::sqrt(var));
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Bicubic resampling
// ---------------------------------------------------------------------------

/// Catmull-Rom cubic (Keys kernel with a = -0.5).
inline double catmull_rom(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

namespace detail {

struct Taps {
  int first = 0;
  std::vector<double> weights;
};

/// Per-output-index tap lists for resizing a line of `in` samples to `out`
/// samples. Pixel centers are aligned; when shrinking, the kernel support
/// is stretched by the scale factor (antialiasing). Taps reaching past the
/// border are folded onto the edge sample.
inline std::vector<Taps> cubic_taps(int in, int out) {
  const double scale = double(out) / double(in);
  const double stretch = scale < 1.0 ? 1.0 / scale : 1.0;
  const double support = 2.0 * stretch;
  std::vector<Taps> taps(out);
  for (int o = 0; o < out; ++o) {
    const double center = (o + 0.5) / scale - 0.5;
    const int lo = int(std::floor(center - support)) + 1;
    const int hi = int(std::ceil(center + support)) - 1;
    std::vector<double> w(in, 0.0);
    double total = 0.0;
    for (int i = lo; i <= hi; ++i) {
      const double v = catmull_rom((i - center) / stretch);
      if (v == 0.0) continue;
      w[std::clamp(i, 0, in - 1)] += v;
      total += v;
    }
    int first = 0;
    while (first < in - 1 && w[first] == 0.0) ++first;
    int last = in - 1;
    while (last > first && w[last] == 0.0) --last;
    taps[o].first = first;
    taps[o].weights.assign(w.begin() + first, w.begin() + last + 1);
    for (double& v : taps[o].weights) v /= total;
  }
  return taps;
}

}  // namespace detail

/// Separable Catmull-Rom resize with edge clamping; output clamped to [0,1].
template <typename Scalar>
ImageT<Scalar> resample_bicubic(const ImageT<Scalar>& img, int out_height, int out_width) {
  if (out_height < 1 || out_width < 1) {
    throw std::invalid_argument("resample_bicubic: output dimensions must be positive");
  }
  const auto ty = detail::cubic_taps(img.height(), out_height);
  const auto tx = detail::cubic_taps(img.width(), out_width);
  ImageT<Scalar> out(img.channels(), out_height, out_width);
  Eigen::ArrayXXd rows(img.height(), out_width);
  for (int c = 0; c < img.channels(); ++c) {
    const auto src = img.plane(c);
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < out_width; ++x) {
        double acc = 0.0;
        const auto& t = tx[x];
        for (std::size_t k = 0; k < t.weights.size(); ++k) acc += t.weights[k] * double(src(y, t.first + int(k)));
        rows(y, x) = acc;
      }
    }
    auto dst = out.plane(c);
    for (int y = 0; y < out_height; ++y) {
      const auto& t = ty[y];
      for (int x = 0; x < out_width; ++x) {
        double acc = 0.0;
        for (std::size_t k = 0; k < t.weights.size(); ++k) acc += t.weights[k] * rows(t.first + int(k), x);
        dst(y, x) = Scalar(std::clamp(acc, 0.0, 1.0));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// AdaIN color correction
// ---------------------------------------------------------------------------

inline constexpr double kAdainStdFloor = 1e-6;

/// Re-normalizes each channel of `generated` to the mean and std of
/// `reference`, then clamps to [0,1]. A constant channel maps to the
/// reference mean.
template <typename Scalar>
ImageT<Scalar> adain_correct(const ImageT<Scalar>& generated, const ImageT<Scalar>& reference) {
  if (generated.channels() != reference.channels()) {
    throw std::invalid_argument("adain_correct: channel count mismatch");
  }
  const ChannelStats g = channel_stats(generated);
  const ChannelStats r = channel_stats(reference);
  ImageT<Scalar> out(generated.channels(), generated.height(), generated.width());
  for (int c = 0; c < generated.channels(); ++c) {
    const double gain = r.std[c] / std::max(g.std[c], kAdainStdFloor);
    out.plane(c) = ((generated.plane(c).template cast<double>() - g.mean[c]) * gain + r.mean[c])
                       .max(0.0)
                       .min(1.0)
                       .template cast<Scalar>();
  }
  return out;
}

}  // namespace unires
