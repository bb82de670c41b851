#include "support/test_util.hpp"
#include "unires/degradations.hpp"
#include "unires/quality.hpp"

#include <doctest.h>
#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <set>

using namespace unires;
using namespace unires::testing;

namespace {

// Orthonormal 8x8 DCT-II evaluated term by term.
double dct_basis(int k, int n) {
  const double a = k == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
  return a * std::cos((2 * n + 1) * k * M_PI / 16.0);
}

double high_band_energy(const Image& img, int cutoff_divisor) {
  const int n = img.height();
  Eigen::FFT<double> fft;
  double energy = 0.0;
  for (int c = 0; c < img.channels(); ++c) {
    Eigen::MatrixXcd rows(n, n);
    for (int y = 0; y < n; ++y) {
      std::vector<double> line(n);
      for (int x = 0; x < n; ++x) line[x] = img.at(c, y, x) - 0.5;
      std::vector<std::complex<double>> spec;
      fft.fwd(spec, line);
      for (int x = 0; x < n; ++x) rows(y, x) = spec[x];
    }
    for (int x = 0; x < n; ++x) {
      std::vector<std::complex<double>> col(n), spec;
      for (int y = 0; y < n; ++y) col[y] = rows(y, x);
      fft.fwd(spec, col);
      for (int y = 0; y < n; ++y) {
        const int fy = std::min(y, n - y);
        const int fx = std::min(x, n - x);
        if (std::max(fy, fx) > n / (2 * cutoff_divisor)) energy += std::norm(spec[y]);
      }
    }
  }
  return energy;
}

int count_kinds(const DegradationRecipe& r) {
  std::set<std::string> kinds;
  for (const auto& op : r.ops) kinds.insert(std::string(op_kind_name(op)));
  return int(kinds.size());
}

}  // namespace

TEST_CASE("gaussian blur") {
  const Image img = random_image(3, 16, 16, 1);
  CHECK(gaussian_blur(img, 0.0) == img);
  const Image flat(3, 16, 16, 0.4);
  CHECK(max_abs_diff(gaussian_blur(flat, 2.5), flat) < 1e-12);

  Image delta(1, 15, 15);
  delta.at(0, 7, 7) = 1.0;
  const Image out = gaussian_blur(delta, 1.0);
  // Separable kernel: centre row is g(0) * g(dx) for the normalized radius-3 table.
  double norm = 0.0;
  for (int i = -3; i <= 3; ++i) norm += std::exp(-0.5 * i * i);
  for (int dx = -3; dx <= 3; ++dx) {
    const double g0 = 1.0 / norm;
    const double gx = std::exp(-0.5 * dx * dx) / norm;
    CHECK(std::fabs(out.at(0, 7, 7 + dx) - g0 * gx) < 1e-6);
  }
  CHECK_THROWS_AS(gaussian_blur(img, -1.0), std::invalid_argument);
}

TEST_CASE("shake kernel") {
  Rng rng(3);
  const ShakeKernel d = shake_blur_kernel(rng, 0.0, 9);
  CHECK(d.taps(4, 4) == 1.0);
  CHECK(d.taps.sum() == 1.0);

  for (int trial = 0; trial < 20; ++trial) {
    const auto k = shake_blur_kernel(rng, rng.uniform(0.05, 1.0), 2 * rng.uniform_int(1, 8) + 1);
    CHECK(std::fabs(k.taps.sum() - 1.0) < 1e-9);
    CHECK(k.taps.minCoeff() >= 0.0);
  }
  Rng a(42), b(42);
  const auto ka = shake_blur_kernel(a, 0.5, 15);
  const auto kb = shake_blur_kernel(b, 0.5, 15);
  CHECK((ka.taps == kb.taps).all());
  CHECK_THROWS(shake_blur_kernel(rng, 0.5, 4));
  CHECK_THROWS(shake_blur_kernel(rng, 1.5, 5));
}

TEST_CASE("apply kernel") {
  const Image img = random_image(3, 5, 5, 5);
  CHECK(apply_kernel(img, ShakeKernel::delta(3)) == img);
  const Image flat(1, 6, 6, 0.3);
  ShakeKernel k;
  k.size = 3;
  k.taps = Eigen::ArrayXXd::Constant(3, 3, 1.0 / 9.0);
  CHECK(max_abs_diff(apply_kernel(flat, k), flat) < 1e-12);

  Rng rng(8);
  k.taps = Eigen::ArrayXXd::Zero(3, 3);
  for (int i = 0; i < 9; ++i) k.taps(i / 3, i % 3) = rng.uniform();
  k.taps /= k.taps.sum();
  const Image src = random_image(1, 5, 5, 6);
  const Image out = apply_kernel(src, k);
  double worst = 0.0;
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 5; ++x) {
      double acc = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int sy = std::clamp(y - dy, 0, 4);
          const int sx = std::clamp(x - dx, 0, 4);
          acc += k.taps(dy + 1, dx + 1) * src.at(0, sy, sx);
        }
      }
      worst = std::max(worst, std::fabs(acc - out.at(0, y, x)));
    }
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("noise") {
  Rng rng(4);
  const Image img = random_image(3, 8, 8, 2);
  CHECK(add_noise(img, 0.0, 0.0, rng) == img);
  const Image zero(3, 8, 8);
  CHECK(add_noise(zero, 0.05, 0.0, rng) == zero);

  const Image gray(1, 64, 64, 0.5);
  const Image noisy = add_noise(gray, 0.0, 0.1, rng);
  const double sd = channel_stats(noisy).std[0];
  CHECK(sd >= 0.09);
  CHECK(sd <= 0.11);
  CHECK_THROWS_AS(add_noise(img, -0.1, 0.0, rng), std::invalid_argument);
}

TEST_CASE("jpeg-like compression") {
  CHECK(psnr(jpeg_like(ramp(3, 32, 32), 100), ramp(3, 32, 32)) > 40.0);

  const Image flat(1, 16, 16, 0.37);
  const auto q = jpeg_quant_table(30);
  const Image out = jpeg_like(flat, 30);
  CHECK(out.values().maxCoeff() - out.values().minCoeff() < 1e-9);
  CHECK(std::fabs(out.values()[0] - 0.37) * 255.0 <= q[0] / 8.0 + 1e-9);

  // Standard table at quality 50 is the unscaled base table.
  CHECK(jpeg_quant_table(50)[0] == 16);
  CHECK(jpeg_quant_table(50)[63] == 99);
  CHECK_THROWS(jpeg_quant_table(0));

  // Low-frequency block at quality 10: reference DCT quantization by hand.
  Image smooth(1, 8, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) smooth.at(0, y, x) = 0.45 + 0.002 * x;
  const auto q10 = jpeg_quant_table(10);
  double coeff[8][8];
  for (int u = 0; u < 8; ++u) {
    for (int v = 0; v < 8; ++v) {
      double acc = 0.0;
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) acc += dct_basis(u, y) * dct_basis(v, x) * (smooth.at(0, y, x) * 255.0 - 128.0);
      coeff[u][v] = std::round(acc / q10[u * 8 + v]) * q10[u * 8 + v];
    }
  }
  const Image jq = jpeg_like(smooth, 10);
  double worst = 0.0;
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      double acc = 0.0;
      for (int u = 0; u < 8; ++u)
        for (int v = 0; v < 8; ++v) acc += dct_basis(u, y) * dct_basis(v, x) * coeff[u][v];
      worst = std::max(worst, std::fabs(std::clamp((acc + 128.0) / 255.0, 0.0, 1.0) - jq.at(0, y, x)));
    }
  }
  CHECK(worst < 1e-9);
  CHECK(jq.values().maxCoeff() - jq.values().minCoeff() < 1e-9);
}

TEST_CASE("downsample then upsample") {
  const Image flat(3, 32, 32, 0.6);
  CHECK(max_abs_diff(downsample_up(flat, 4), flat) < 1e-12);

  const Image tex = random_image(3, 32, 32, 12);
  const Image manual = resample_bicubic(resample_bicubic(tex, 8, 8), 32, 32);
  CHECK(downsample_up(tex, 4) == manual);

  const Image low = downsample_up(tex, 16);
  CHECK(high_band_energy(low, 16) <= 0.1 * high_band_energy(tex, 16));
  CHECK_THROWS(downsample_up(tex, 3));
}

TEST_CASE("recipes") {
  const Image hq = generate_scenes(1, 1)[0];
  DegradationRecipe ident{{GaussianBlurOp{0.0}}, 5};
  CHECK(apply_recipe(hq, ident) == hq);

  DegradationRecipe r{{GaussianBlurOp{1.5}, ReadNoiseOp{0.05}}, 77};
  const Image a = apply_recipe(hq, r);
  CHECK(apply_recipe(hq, r) == a);
  Rng r1(derive_seed(77, 1));
  const Image manual = add_noise(gaussian_blur(hq, 1.5), 0.0, 0.05, r1);
  CHECK(a == manual);

  const DegradationRecipe parsed = parse_recipe(format_recipe(r));
  CHECK(format_recipe(parsed) == format_recipe(r));
  CHECK(apply_recipe(hq, parsed) == a);
  CHECK_THROWS(parse_recipe("seed=1 warp(x=1)"));
  CHECK_THROWS(apply_recipe(hq, DegradationRecipe{}));
}

TEST_CASE("task recipe families") {
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) {
    const auto sr = sample_task_recipe(TaskId::SR, rng);
    for (const auto& op : sr.ops) {
      if (const auto* d = std::get_if<DownsampleUpOp>(&op)) CHECK((d->factor == 2 || d->factor == 4));
    }
  }
  for (int i = 0; i < 50; ++i) {
    const auto dn = sample_task_recipe(TaskId::DN, rng);
    for (const auto& op : dn.ops) CHECK(op_family(op) == TaskId::DN);
    const auto md = sample_task_recipe(TaskId::MD, rng);
    int shakes = 0;
    for (const auto& op : md.ops) shakes += std::holds_alternative<ShakeBlurOp>(op);
    CHECK(shakes == 1);
  }
  CHECK_THROWS(sample_task_recipe(TaskId::Positive, rng));
}

TEST_CASE("complex test set") {
  const auto scenes = generate_scenes(2, 8, 32, 32);
  Rng rng(10);
  const auto set = make_complex_testset(scenes, 160, rng);
  REQUIRE(set.size() == 160);
  std::map<TaskId, int> counts;
  for (const auto& s : set) {
    ++counts[s.dominant];
    CHECK(count_kinds(s.recipe) >= 2);
    std::set<TaskId> families;
    for (const auto& op : s.recipe.ops) families.insert(op_family(op));
    CHECK(families.size() >= 2);
  }
  for (TaskId t : kRestorationTasks) CHECK(counts[t] == 40);

  Rng again(10);
  const auto set2 = make_complex_testset(scenes, 160, again);
  for (std::size_t i = 0; i < set.size(); ++i) CHECK(set[i].lq == set2[i].lq);
}

TEST_CASE("scenes") {
  const auto a = generate_scenes(5, 3);
  const auto b = generate_scenes(5, 3);
  REQUIRE(a.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(a[i] == b[i]);
    CHECK(a[i].channels() == 3);
    CHECK(a[i].values().minCoeff() >= 0.0);
    CHECK(a[i].values().maxCoeff() <= 1.0);
    CHECK(channel_stats(a[i]).std[0] > 0.01);
  }
  CHECK_FALSE(a[0] == a[1]);
}
