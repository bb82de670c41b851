#include "unires/degradations.hpp"

#include "unires/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace unires {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

constexpr std::array<int, 64> kLuminanceTable = {
    16, 11, 10, 16, 24,  40,  51,  61,   //
    12, 12, 14, 19, 26,  58,  60,  55,   //
    14, 13, 16, 24, 40,  57,  69,  56,   //
    14, 17, 22, 29, 51,  87,  80,  62,   //
    18, 22, 37, 56, 68,  109, 103, 77,   //
    24, 35, 55, 64, 81,  104, 113, 92,   //
    49, 64, 78, 87, 103, 121, 120, 101,  //
    72, 92, 95, 98, 112, 100, 103, 99};

Eigen::Matrix<double, 8, 8> dct_matrix() {
  Eigen::Matrix<double, 8, 8> d;
  for (int u = 0; u < 8; ++u) {
    const double cu = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
    for (int x = 0; x < 8; ++x) d(u, x) = cu * std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);
  }
  return d;
}

int odd_in(Rng& rng, int lo, int hi) {
  const int k = rng.uniform_int(0, (hi - lo) / 2);
  return lo + 2 * k;
}

}  // namespace

ShakeKernel ShakeKernel::delta(int size) {
  ShakeKernel k;
  k.size = size;
  k.taps = Eigen::ArrayXXd::Zero(size, size);
  k.taps(size / 2, size / 2) = 1.0;
  return k;
}

std::string_view op_kind_name(const DegradationOp& op) {
  return std::visit(overloaded{
                        [](const GaussianBlurOp&) { return std::string_view("gaussian_blur"); },
                        [](const ShakeBlurOp&) { return std::string_view("shake_blur"); },
                        [](const ShotNoiseOp&) { return std::string_view("shot_noise"); },
                        [](const ReadNoiseOp&) { return std::string_view("read_noise"); },
                        [](const JpegLikeOp&) { return std::string_view("jpeg_like"); },
                        [](const DownsampleUpOp&) { return std::string_view("downsample_up"); },
                    },
                    op);
}

TaskId op_family(const DegradationOp& op) {
  return std::visit(overloaded{
                        [](const GaussianBlurOp&) { return TaskId::DD; },
                        [](const ShakeBlurOp&) { return TaskId::MD; },
                        [](const ShotNoiseOp&) { return TaskId::DN; },
                        [](const ReadNoiseOp&) { return TaskId::DN; },
                        [](const JpegLikeOp&) { return TaskId::SR; },
                        [](const DownsampleUpOp&) { return TaskId::SR; },
                    },
                    op);
}

void validate_op(const DegradationOp& op) {
  auto fail = [&](const std::string& why) {
    throw std::invalid_argument(std::string(op_kind_name(op)) + ": " + why);
  };
  std::visit(overloaded{
                 [&](const GaussianBlurOp& o) { if (!(o.sigma >= 0.0)) fail("sigma must be >= 0"); },
                 [&](const ShakeBlurOp& o) {
                   if (!(o.intensity >= 0.0 && o.intensity <= 1.0)) fail("intensity must be in [0,1]");
                   if (o.size < 3 || o.size > 63 || o.size % 2 == 0) fail("size must be odd in [3,63]");
                 },
                 [&](const ShotNoiseOp& o) { if (!(o.scale >= 0.0)) fail("scale must be >= 0"); },
                 [&](const ReadNoiseOp& o) { if (!(o.sigma >= 0.0)) fail("sigma must be >= 0"); },
                 [&](const JpegLikeOp& o) { if (o.quality < 1 || o.quality > 100) fail("quality must be in [1,100]"); },
                 [&](const DownsampleUpOp& o) {
                   if (o.factor != 2 && o.factor != 4 && o.factor != 8 && o.factor != 16) fail("factor must be 2, 4, 8 or 16");
                 },
             },
             op);
}

// ---------------------------------------------------------------------------
// Recipe text form
// ---------------------------------------------------------------------------

std::string format_recipe(const DegradationRecipe& recipe) {
  std::string out = "seed=" + std::to_string(recipe.seed);
  for (const auto& op : recipe.ops) {
    out += ' ';
    out += op_kind_name(op);
    out += '(';
    out += std::visit(overloaded{
                          [](const GaussianBlurOp& o) { return "sigma=" + fmt_double(o.sigma); },
                          [](const ShakeBlurOp& o) {
                            return "intensity=" + fmt_double(o.intensity) + ",size=" + std::to_string(o.size);
                          },
                          [](const ShotNoiseOp& o) { return "scale=" + fmt_double(o.scale); },
                          [](const ReadNoiseOp& o) { return "sigma=" + fmt_double(o.sigma); },
                          [](const JpegLikeOp& o) { return "quality=" + std::to_string(o.quality); },
                          [](const DownsampleUpOp& o) { return "factor=" + std::to_string(o.factor); },
                      },
                      op);
    out += ')';
  }
  return out;
}

DegradationRecipe parse_recipe(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string tok;
  DegradationRecipe recipe;
  bool have_seed = false;
  while (in >> tok) {
    if (tok.rfind("seed=", 0) == 0) {
      recipe.seed = std::stoull(tok.substr(5));
      have_seed = true;
      continue;
    }
    const auto open = tok.find('(');
    if (open == std::string::npos || tok.back() != ')') {
      throw std::invalid_argument("malformed recipe op '" + tok + "'");
    }
    const std::string kind = tok.substr(0, open);
    std::map<std::string, std::string> params;
    std::istringstream plist(tok.substr(open + 1, tok.size() - open - 2));
    for (std::string kv; std::getline(plist, kv, ',');) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("malformed recipe parameter '" + kv + "'");
      params[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    auto num = [&](const char* key) {
      const auto it = params.find(key);
      if (it == params.end()) throw std::invalid_argument(kind + ": missing parameter " + key);
      return std::stod(it->second);
    };
    DegradationOp op;
    if (kind == "gaussian_blur") op = GaussianBlurOp{num("sigma")};
    else if (kind == "shake_blur") op = ShakeBlurOp{num("intensity"), int(num("size"))};
    else if (kind == "shot_noise") op = ShotNoiseOp{num("scale")};
    else if (kind == "read_noise") op = ReadNoiseOp{num("sigma")};
    else if (kind == "jpeg_like") op = JpegLikeOp{int(num("quality"))};
    else if (kind == "downsample_up") op = DownsampleUpOp{int(num("factor"))};
    else throw std::invalid_argument("unknown degradation kind '" + kind + "'");
    validate_op(op);
    recipe.ops.push_back(op);
  }
  if (!have_seed) throw std::invalid_argument("recipe is missing seed=");
  if (recipe.ops.empty()) throw std::invalid_argument("recipe has no ops");
  return recipe;
}

// ---------------------------------------------------------------------------
// Blur
// ---------------------------------------------------------------------------

std::vector<double> gaussian_kernel_1d(double sigma) {
  if (sigma <= 0.0) return {1.0};
  const int radius = int(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += k[i + radius];
  }
  for (double& v : k) v /= total;
  return k;
}

Image gaussian_blur(const Image& img, double sigma) {
  if (sigma < 0.0) throw std::invalid_argument("gaussian_blur: sigma must be >= 0");
  if (sigma == 0.0) return img;
  const auto k = gaussian_kernel_1d(sigma);
  const int r = int(k.size() / 2);
  Image tmp(img.channels(), img.height(), img.width());
  Image out(img.channels(), img.height(), img.width());
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) acc += k[i + r] * img.clamped(c, y, x + i);
        tmp.at(c, y, x) = acc;
      }
    }
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp.clamped(c, y + i, x);
        out.at(c, y, x) = std::clamp(acc, 0.0, 1.0);
      }
    }
  }
  return out;
}

ShakeKernel shake_blur_kernel(Rng& rng, double intensity, int size) {
  validate_op(ShakeBlurOp{intensity, size});
  if (intensity == 0.0) return ShakeKernel::delta(size);

  const double radius = 0.5 * (size - 1);
  const int steps = int(std::ceil(intensity * size * size / 2.0)) + 1;
  // Brownian step length scaled so the trajectory spread grows with intensity.
  const double step = 1.5 * intensity * radius / std::sqrt(double(steps));
  std::vector<Eigen::Vector2d> path(steps, Eigen::Vector2d::Zero());
  for (int i = 1; i < steps; ++i) path[i] = path[i - 1] + step * Eigen::Vector2d(rng.normal(), rng.normal());

  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const auto& p : path) centroid += p;
  centroid /= steps;

  ShakeKernel k;
  k.size = size;
  k.taps = Eigen::ArrayXXd::Zero(size, size);
  for (const auto& p : path) {
    const double x = std::clamp(p.x() - centroid.x() + radius, 0.0, double(size - 1));
    const double y = std::clamp(p.y() - centroid.y() + radius, 0.0, double(size - 1));
    const int x0 = std::min(int(std::floor(x)), size - 2);
    const int y0 = std::min(int(std::floor(y)), size - 2);
    const double fx = x - x0;
    const double fy = y - y0;
    k.taps(y0, x0) += (1 - fx) * (1 - fy);
    k.taps(y0, x0 + 1) += fx * (1 - fy);
    k.taps(y0 + 1, x0) += (1 - fx) * fy;
    k.taps(y0 + 1, x0 + 1) += fx * fy;
  }
  k.taps /= k.taps.sum();
  return k;
}

Image apply_kernel(const Image& img, const ShakeKernel& kernel) {
  const int r = kernel.size / 2;
  Image out(img.channels(), img.height(), img.width());
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        double acc = 0.0;
        for (int i = 0; i < kernel.size; ++i) {
          for (int j = 0; j < kernel.size; ++j) {
            const double w = kernel.taps(i, j);
            if (w != 0.0) acc += w * img.clamped(c, y + r - i, x + r - j);
          }
        }
        out.at(c, y, x) = std::clamp(acc, 0.0, 1.0);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Noise, compression, resolution loss
// ---------------------------------------------------------------------------

Image add_noise(const Image& img, double shot_scale, double read_sigma, Rng& rng) {
  if (shot_scale < 0.0 || read_sigma < 0.0) throw std::invalid_argument("add_noise: scales must be >= 0");
  Image out = img;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const double n1 = rng.normal();
    const double n2 = rng.normal();
    const double v = img.values()[i];
    out.values()[i] = std::clamp(v + std::sqrt(std::max(v, 0.0) * shot_scale) * n1 + read_sigma * n2, 0.0, 1.0);
  }
  return out;
}

std::array<int, 64> jpeg_quant_table(int quality) {
  if (quality < 1 || quality > 100) throw std::invalid_argument("jpeg quality must be in [1,100]");
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  std::array<int, 64> q{};
  for (int i = 0; i < 64; ++i) q[i] = std::clamp((kLuminanceTable[i] * scale + 50) / 100, 1, 255);
  return q;
}

Image jpeg_like(const Image& img, int quality) {
  const auto q = jpeg_quant_table(quality);
  static const Eigen::Matrix<double, 8, 8> d = dct_matrix();
  Image out(img.channels(), img.height(), img.width());
  Eigen::Matrix<double, 8, 8> block;
  for (int c = 0; c < img.channels(); ++c) {
    for (int by = 0; by < img.height(); by += 8) {
      for (int bx = 0; bx < img.width(); bx += 8) {
        for (int y = 0; y < 8; ++y)
          for (int x = 0; x < 8; ++x) block(y, x) = img.clamped(c, by + y, bx + x) * 255.0 - 128.0;
        Eigen::Matrix<double, 8, 8> coeff = d * block * d.transpose();
        for (int i = 0; i < 64; ++i) {
          const double step = q[i];
          coeff(i / 8, i % 8) = std::round(coeff(i / 8, i % 8) / step) * step;
        }
        block = d.transpose() * coeff * d;
        for (int y = 0; y < 8 && by + y < img.height(); ++y)
          for (int x = 0; x < 8 && bx + x < img.width(); ++x)
            out.at(c, by + y, bx + x) = std::clamp((block(y, x) + 128.0) / 255.0, 0.0, 1.0);
      }
    }
  }
  return out;
}

Image downsample_up(const Image& img, int factor) {
  validate_op(DownsampleUpOp{factor});
  const int h = std::max(1, int(std::lround(double(img.height()) / factor)));
  const int w = std::max(1, int(std::lround(double(img.width()) / factor)));
  return resample_bicubic(resample_bicubic(img, h, w), img.height(), img.width());
}

Image apply_op(const Image& img, const DegradationOp& op, Rng& rng) {
  validate_op(op);
  return std::visit(overloaded{
                        [&](const GaussianBlurOp& o) { return gaussian_blur(img, o.sigma); },
                        [&](const ShakeBlurOp& o) { return apply_kernel(img, shake_blur_kernel(rng, o.intensity, o.size)); },
                        [&](const ShotNoiseOp& o) { return add_noise(img, o.scale, 0.0, rng); },
                        [&](const ReadNoiseOp& o) { return add_noise(img, 0.0, o.sigma, rng); },
                        [&](const JpegLikeOp& o) { return jpeg_like(img, o.quality); },
                        [&](const DownsampleUpOp& o) { return downsample_up(img, o.factor); },
                    },
                    op);
}

Image apply_recipe(const Image& hq, const DegradationRecipe& recipe) {
  if (recipe.ops.empty()) throw std::invalid_argument("apply_recipe: recipe has no ops");
  Image img = hq;
  for (std::size_t i = 0; i < recipe.ops.size(); ++i) {
    Rng rng(derive_seed(recipe.seed, i));
    img = apply_op(img, recipe.ops[i], rng);
  }
  return img;
}

// ---------------------------------------------------------------------------
// Recipe sampling
// ---------------------------------------------------------------------------

DegradationRecipe sample_task_recipe(TaskId task, Rng& rng) {
  DegradationRecipe r;
  switch (task) {
    case TaskId::SR:
      r.ops.push_back(DownsampleUpOp{rng.bernoulli(0.5) ? 2 : 4});
      r.ops.push_back(ReadNoiseOp{rng.uniform(0.005, 0.02)});
      r.ops.push_back(JpegLikeOp{rng.uniform_int(60, 95)});
      break;
    case TaskId::MD:
      r.ops.push_back(ShakeBlurOp{rng.uniform(0.3, 1.0), odd_in(rng, 9, 15)});
      break;
    case TaskId::DD:
      r.ops.push_back(GaussianBlurOp{rng.uniform(1.0, 4.0)});
      break;
    case TaskId::DN:
      r.ops.push_back(ShotNoiseOp{rng.uniform(0.01, 0.1)});
      r.ops.push_back(ReadNoiseOp{rng.uniform(0.02, 0.1)});
      break;
    default:
      throw std::invalid_argument("sample_task_recipe: no degradation family for task " + std::string(task_name(task)));
  }
  r.seed = rng.next_u64();
  return r;
}

namespace {

// Mild variant of a family, used as the secondary degradation in complex recipes.
std::vector<DegradationOp> mild_family_ops(TaskId family, Rng& rng) {
  switch (family) {
    case TaskId::SR: return {DownsampleUpOp{2}, JpegLikeOp{rng.uniform_int(70, 90)}};
    case TaskId::MD: return {ShakeBlurOp{rng.uniform(0.15, 0.35), 7}};
    case TaskId::DD: return {GaussianBlurOp{rng.uniform(0.5, 1.2)}};
    case TaskId::DN: return {ReadNoiseOp{rng.uniform(0.01, 0.03)}};
    default: break;
  }
  throw std::invalid_argument("mild_family_ops: not a restoration family");
}

// Canonical ordering of op kinds inside a composed recipe: optics first,
// then sampling, then sensor noise, then compression.
int op_stage(const DegradationOp& op) {
  return std::visit(overloaded{
                        [](const ShakeBlurOp&) { return 0; },
                        [](const GaussianBlurOp&) { return 1; },
                        [](const DownsampleUpOp&) { return 2; },
                        [](const ShotNoiseOp&) { return 3; },
                        [](const ReadNoiseOp&) { return 4; },
                        [](const JpegLikeOp&) { return 5; },
                    },
                    op);
}

}  // namespace

std::vector<DegradedSample> make_complex_testset(const std::vector<Image>& hq_images, int n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("make_complex_testset: n must be >= 1");
  if (hq_images.empty()) throw std::invalid_argument("make_complex_testset: no HQ images");
  std::vector<DegradedSample> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const TaskId dominant = kRestorationTasks[i % 4];
    DegradationRecipe recipe = sample_task_recipe(dominant, rng);

    std::vector<TaskId> others;
    for (TaskId t : kRestorationTasks)
      if (t != dominant) others.push_back(t);
    std::shuffle(others.begin(), others.end(), rng.engine());
    const int extra = rng.uniform_int(1, 2);
    for (int e = 0; e < extra; ++e) {
      for (auto& op : mild_family_ops(others[e], rng)) recipe.ops.push_back(op);
    }
    std::stable_sort(recipe.ops.begin(), recipe.ops.end(),
                     [](const DegradationOp& a, const DegradationOp& b) { return op_stage(a) < op_stage(b); });
    const Image& hq = hq_images[i % hq_images.size()];
    out.push_back({apply_recipe(hq, recipe), hq, recipe, dominant});
  }
  return out;
}

std::vector<DegradedSample> make_task_pairs(const std::vector<Image>& hq_images, TaskId task, int n, Rng& rng) {
  if (hq_images.empty()) throw std::invalid_argument("make_task_pairs: no HQ images");
  std::vector<DegradedSample> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const Image& hq = hq_images[i % hq_images.size()];
    DegradationRecipe recipe = sample_task_recipe(task, rng);
    out.push_back({apply_recipe(hq, recipe), hq, recipe, task});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Procedural scenes
// ---------------------------------------------------------------------------

namespace {

struct Shape {
  int kind = 0;  // 0 disc, 1 rotated rectangle, 2 triangle
  Eigen::Vector2d center;
  Eigen::Vector2d half;  // disc: radius in x
  double angle = 0.0;
  std::array<Eigen::Vector2d, 3> tri;
  Eigen::Vector3d color;
  double stripe_freq = 0.0;
  double stripe_angle = 0.0;
  Eigen::Vector3d stripe_color;

  bool contains(const Eigen::Vector2d& p) const {
    switch (kind) {
      case 0: return (p - center).squaredNorm() <= half.x() * half.x();
      case 1: {
        const Eigen::Vector2d d = Eigen::Rotation2Dd(-angle) * (p - center);
        return std::abs(d.x()) <= half.x() && std::abs(d.y()) <= half.y();
      }
      default: {
        auto edge = [&](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
          return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
        };
        const double e0 = edge(tri[0], tri[1]), e1 = edge(tri[1], tri[2]), e2 = edge(tri[2], tri[0]);
        return (e0 >= 0 && e1 >= 0 && e2 >= 0) || (e0 <= 0 && e1 <= 0 && e2 <= 0);
      }
    }
  }

  Eigen::Vector3d shade(const Eigen::Vector2d& p) const {
    if (stripe_freq == 0.0) return color;
    const double u = std::cos(stripe_angle) * p.x() + std::sin(stripe_angle) * p.y();
    return std::sin(2.0 * std::numbers::pi * stripe_freq * u) >= 0.0 ? color : stripe_color;
  }
};

Eigen::Vector3d random_color(Rng& rng) { return {rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95)}; }

}  // namespace

Image generate_scene(Rng& rng, int height, int width) {
  const Eigen::Vector3d c0 = random_color(rng), c1 = random_color(rng);
  const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const Eigen::Vector2d dir(std::cos(theta), std::sin(theta));
  struct Wave { double fx, fy, phase, amp; Eigen::Vector3d gain; };
  std::vector<Wave> waves(3);
  for (auto& w : waves) {
    const double f = rng.uniform(0.02, 0.12), a = rng.uniform(0.0, 2.0 * std::numbers::pi);
    w = {f * std::cos(a), f * std::sin(a), rng.uniform(0.0, 2.0 * std::numbers::pi), rng.uniform(0.02, 0.06),
         Eigen::Vector3d(rng.uniform(0.5, 1.0), rng.uniform(0.5, 1.0), rng.uniform(0.5, 1.0))};
  }

  const int nshapes = rng.uniform_int(3, 7);
  const double extent = std::min(height, width);
  std::vector<Shape> shapes(nshapes);
  for (auto& s : shapes) {
    s.kind = rng.uniform_int(0, 2);
    s.center = {rng.uniform(0.0, width), rng.uniform(0.0, height)};
    s.half = {rng.uniform(0.06, 0.25) * extent, rng.uniform(0.06, 0.25) * extent};
    s.angle = rng.uniform(0.0, std::numbers::pi);
    for (auto& v : s.tri) v = s.center + Eigen::Vector2d(rng.uniform(-0.3, 0.3) * extent, rng.uniform(-0.3, 0.3) * extent);
    s.color = random_color(rng);
    if (rng.bernoulli(0.3)) {
      s.stripe_freq = rng.uniform(0.08, 0.25);
      s.stripe_angle = rng.uniform(0.0, std::numbers::pi);
      s.stripe_color = random_color(rng);
    }
  }

  constexpr int kSuper = 4;
  Image img(3, height, width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      Eigen::Vector3d acc = Eigen::Vector3d::Zero();
      for (int sy = 0; sy < kSuper; ++sy) {
        for (int sx = 0; sx < kSuper; ++sx) {
          const Eigen::Vector2d p(x + (sx + 0.5) / kSuper, y + (sy + 0.5) / kSuper);
          const double t = std::clamp(0.5 + dir.dot(p - Eigen::Vector2d(width / 2.0, height / 2.0)) / extent, 0.0, 1.0);
          Eigen::Vector3d v = (1.0 - t) * c0 + t * c1;
          for (const auto& w : waves)
            v += w.amp * std::sin(2.0 * std::numbers::pi * (w.fx * p.x() + w.fy * p.y()) + w.phase) * w.gain;
          for (const auto& s : shapes)
            if (s.contains(p)) v = s.shade(p);
          acc += v;
        }
      }
      acc /= kSuper * kSuper;
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = std::clamp(acc[c], 0.0, 1.0);
    }
  }
  return img;
}

std::vector<Image> generate_scenes(std::uint64_t seed, int count, int height, int width) {
  std::vector<Image> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, i));
    out.push_back(generate_scene(rng, height, width));
  }
  return out;
}

std::vector<Image> load_image_dir(const std::filesystem::path& dir, int height, int width) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const auto ext = e.path().extension().string();
    if (e.is_regular_file() && (ext == ".ppm" || ext == ".pgm")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Image> out;
  for (const auto& f : files) {
    Image img = load_image(f);
    if (img.channels() == 1) {
      Image rgb(3, img.height(), img.width());
      for (int c = 0; c < 3; ++c) rgb.plane(c) = img.plane(0);
      img = std::move(rgb);
    }
    if (img.height() != height || img.width() != width) img = resample_bicubic(img, height, width);
    out.push_back(std::move(img));
  }
  return out;
}

}  // namespace unires
