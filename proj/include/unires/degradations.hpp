#pragma once

#include "unires/image.hpp"
#include "unires/rng.hpp"
#include "unires/task.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace unires {

struct ShakeKernel {
  int size = 1;
  Eigen::ArrayXXd taps;  // size x size, nonnegative, sums to 1

  static ShakeKernel delta(int size);
};

struct GaussianBlurOp { double sigma = 0.0; };
struct ShakeBlurOp { double intensity = 0.0; int size = 3; };
struct ShotNoiseOp { double scale = 0.0; };
struct ReadNoiseOp { double sigma = 0.0; };
struct JpegLikeOp { int quality = 75; };
struct DownsampleUpOp { int factor = 4; };

using DegradationOp =
    std::variant<GaussianBlurOp, ShakeBlurOp, ShotNoiseOp, ReadNoiseOp, JpegLikeOp, DownsampleUpOp>;

std::string_view op_kind_name(const DegradationOp& op);
void validate_op(const DegradationOp& op);

/// Task family an op belongs to (blur kinds map to MD/DD, noise to DN,
/// resolution loss and compression to SR).
TaskId op_family(const DegradationOp& op);

struct DegradationRecipe {
  std::vector<DegradationOp> ops;
  std::uint64_t seed = 0;
};

/// One-line text form: `seed=N kind(param=value,...) kind(...)`.
std::string format_recipe(const DegradationRecipe& recipe);
DegradationRecipe parse_recipe(std::string_view text);

// Operators. All outputs are clamped to [0,1].

Image gaussian_blur(const Image& img, double sigma);
std::vector<double> gaussian_kernel_1d(double sigma);  // normalized, radius ceil(3 sigma)

ShakeKernel shake_blur_kernel(Rng& rng, double intensity, int size);
Image apply_kernel(const Image& img, const ShakeKernel& kernel);

Image add_noise(const Image& img, double shot_scale, double read_sigma, Rng& rng);

Image jpeg_like(const Image& img, int quality);
/// libjpeg quality-scaled luminance quantization table, row-major 8x8.
std::array<int, 64> jpeg_quant_table(int quality);

Image downsample_up(const Image& img, int factor);

/// Applies a single op with its own generator (used by apply_recipe).
Image apply_op(const Image& img, const DegradationOp& op, Rng& rng);

/// Ops run in order; op i draws from Rng(derive_seed(recipe.seed, i)).
Image apply_recipe(const Image& hq, const DegradationRecipe& recipe);

DegradationRecipe sample_task_recipe(TaskId task, Rng& rng);

struct DegradedSample {
  Image lq;
  Image hq;
  DegradationRecipe recipe;
  TaskId dominant = TaskId::SR;
};

/// Complex-degradation set: every recipe mixes at least two task families
/// and dominating families cycle SR, MD, DD, DN so the set is balanced.
std::vector<DegradedSample> make_complex_testset(const std::vector<Image>& hq_images, int n, Rng& rng);

/// Training/evaluation pairs for one task family.
std::vector<DegradedSample> make_task_pairs(const std::vector<Image>& hq_images, TaskId task, int n, Rng& rng);

/// Procedural HQ scene: gradient background, band-limited texture and
/// antialiased shapes.
Image generate_scene(Rng& rng, int height = 64, int width = 64);
std::vector<Image> generate_scenes(std::uint64_t seed, int count, int height = 64, int width = 64);

/// Loads all .ppm/.pgm files in a directory (sorted by name), resized to
/// the requested working resolution and converted to 3 channels.
std::vector<Image> load_image_dir(const std::filesystem::path& dir, int height, int width);

}  // namespace unires
