#pragma once

#include "unires/image.hpp"
#include "unires/nn.hpp"
#include "unires/predictor.hpp"
#include "unires/rng.hpp"
#include "unires/schedule.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace unires {

/// Architecture hyperparameters. Stored in the checkpoint header.
struct DenoiserConfig {
  int image_channels = 3;
  int height = 64;  // working resolution
  int width = 64;
  int unshuffle = 2;  // space-to-depth factor in front of the conv stack
  int hidden = 48;
  int time_dim = 32;
  double data_mean = 0.5;  // centre of the pixel distribution
  double data_std = 0.3;   // prior std without an LQ condition
  double cond_std = 0.1;   // prior std around the LQ image when one is given

  int input_planes() const { return 2 * image_channels + 1; }  // z_t, lq, lq-present flag
  int grid_height() const { return height / unshuffle; }
  int grid_width() const { return width / unshuffle; }
  int in_features() const { return input_planes() * unshuffle * unshuffle; }
  int out_features() const { return image_channels * unshuffle * unshuffle; }
  void validate() const;

  friend bool operator==(const DenoiserConfig&, const DenoiserConfig&) = default;
};

/// Rows of the task-embedding tables: null (blind), SR, MD, DD, DN,
/// positive-quality, negative-quality.
inline constexpr int kTaskEmbeddingRows = 7;
int task_embedding_row(std::optional<TaskId> task);

/// Small conditional noise predictor. The noisy latent and the LQ image
/// are concatenated channel-wise (an absent LQ is an all-zero plane with
/// the presence flag cleared), folded `unshuffle` x `unshuffle` into depth
/// and passed through four 3x3 conv stages. A sinusoidal timestep
/// embedding and a per-task embedding are added to the first two stages.
///
/// The network output F is preconditioned so that
///   eps_hat = eps_gauss(z_t) - b(t) * F,
/// where eps_gauss is the exact prediction for data distributed as
/// N(m, s^2) and b(t) = s sqrt(abar) / sqrt(1 - abar + abar s^2). The prior
/// is centred on the LQ image (m = lq, s = cond_std) when the condition
/// carries one and on data_mean with s = data_std otherwise, so F = 0
/// already yields a sensible restoration and the network learns residuals.
template <typename Scalar>
class TinyCondDenoiser final : public NoisePredictor {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Mat = nn::Mat<Scalar>;

  struct Block {
    std::string name;
    Eigen::Index offset;
    int rows;
    int cols;
  };

  TinyCondDenoiser(DenoiserConfig config, NoiseSchedule schedule)
      : config_(config), schedule_(std::move(schedule)) {
    config_.validate();
    const int h = config_.hidden;
    Eigen::Index off = 0;
    auto add = [&](std::string name, int rows, int cols) {
      blocks_.push_back({std::move(name), off, rows, cols});
      off += Eigen::Index(rows) * cols;
    };
    add("conv_in.weight", 9 * config_.in_features(), h);
    add("conv_in.bias", 1, h);
    add("conv_mid1.weight", 9 * h, h);
    add("conv_mid1.bias", 1, h);
    add("conv_mid2.weight", 9 * h, h);
    add("conv_mid2.bias", 1, h);
    add("conv_out.weight", 9 * h, config_.out_features());
    add("conv_out.bias", 1, config_.out_features());
    add("time_proj1", config_.time_dim, h);
    add("time_proj2", config_.time_dim, h);
    add("task_embed1", kTaskEmbeddingRows, h);
    add("task_embed2", kTaskEmbeddingRows, h);
    params_ = Vector::Zero(off);
  }

  /// Random initialization: scaled normal for conv and projection weights,
  /// zero biases, a small output stage.
  void initialize(std::uint64_t seed) {
    Rng rng(seed);
    auto fill = [&](int idx, double stdev) {
      auto m = block(idx);
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = Scalar(stdev * rng.normal());
    };
    const double h = config_.hidden;
    fill(0, std::sqrt(2.0 / (9.0 * config_.in_features())));
    fill(2, 0.5 * std::sqrt(2.0 / (9.0 * h)));
    fill(4, 0.5 * std::sqrt(2.0 / (9.0 * h)));
    fill(6, 0.2 * std::sqrt(1.0 / (9.0 * h)));
    fill(8, std::sqrt(1.0 / config_.time_dim));
    fill(9, std::sqrt(1.0 / config_.time_dim));
    fill(10, 0.5);
    fill(11, 0.5);
    for (int b : {1, 3, 5, 7}) block(b).setZero();
  }

  Image predict(const Image& z_t, int t, const Condition& cond) const override {
    return forward(z_t, t, cond, workspace());
  }

  /// Mean squared error between `eps` and the prediction at `z_t`; adds
  /// gradient_weight * d(loss)/d(params) into `grad` when non-null.
  double loss_and_gradient(const Image& z_t, int t, const Condition& cond, const Image& eps, Vector* grad,
                           double gradient_weight = 1.0) const {
    Cache& cache = workspace();
    const Image eps_hat = forward(z_t, t, cond, cache);
    require_same_shape(eps_hat, eps, "loss_and_gradient");
    const double n = double(eps.size());
    const Eigen::VectorXd diff = eps_hat.values() - eps.values();
    if (grad) {
      if (grad->size() != params_.size()) throw std::invalid_argument("gradient buffer has wrong size");
      backward(cache, (2.0 * gradient_weight / n) * diff, *grad);
    }
    return diff.squaredNorm() / n;
  }

  /// b(t): sensitivity of eps_hat to the network output under `cond`.
  double output_scale(int t, const Condition& cond) const {
    return coefficients(t, cond.lq ? config_.cond_std : config_.data_std).out_scale;
  }

  Vector& parameters() { return params_; }
  const Vector& parameters() const { return params_; }
  Eigen::Index parameter_count() const { return params_.size(); }
  const std::vector<Block>& blocks() const { return blocks_; }
  const DenoiserConfig& config() const { return config_; }
  const NoiseSchedule& schedule() const { return schedule_; }

  template <typename Other>
  TinyCondDenoiser<Other> cast() const {
    TinyCondDenoiser<Other> out(config_, schedule_);
    out.parameters() = params_.template cast<Other>();
    return out;
  }

  /// Sinusoidal embedding of the integer timestep.
  static nn::RowVec<Scalar> timestep_embedding(int t, int dim) {
    nn::RowVec<Scalar> e(dim);
    const int half = dim / 2;
    for (int i = 0; i < half; ++i) {
      const double freq = std::exp(-std::log(10000.0) * i / half);
      e[i] = Scalar(std::sin(t * freq));
      e[half + i] = Scalar(std::cos(t * freq));
    }
    return e;
  }

 private:
  struct Coefficients {
    double sqrt_ab = 0;       // sqrt(abar)
    double in_scale = 0;      // 1 / sqrt(1 - abar + abar s^2)
    double skip_scale = 0;    // sqrt(1 - abar) / (1 - abar + abar s^2)
    double out_scale = 0;     // b(t)
  };

  struct Cache {
    Coefficients k;
    int task_row = 0;
    nn::RowVec<Scalar> temb;
    Mat x, cols0, h1, a1, cols1, h2, a2, cols2, h3, a3, cols3, f;
    Mat d_f, d_cols, d_a3, d_a2, d_a1, d_h3, d_h2, d_h1, scatter;
    int channels = 0, height = 0, width = 0, gh = 0, gw = 0;
  };

  // Per-thread activation buffers; reusing them avoids re-faulting fresh
  // pages on every call.
  static Cache& workspace() {
    thread_local Cache cache;
    return cache;
  }

  Eigen::Map<Mat> block(int idx) {
    const Block& b = blocks_[idx];
    return Eigen::Map<Mat>(params_.data() + b.offset, b.rows, b.cols);
  }
  Eigen::Map<const Mat> block(int idx) const {
    const Block& b = blocks_[idx];
    return Eigen::Map<const Mat>(params_.data() + b.offset, b.rows, b.cols);
  }
  static Eigen::Map<Mat> grad_block(Vector& g, const Block& b) {
    return Eigen::Map<Mat>(g.data() + b.offset, b.rows, b.cols);
  }

  Coefficients coefficients(int t, double s) const {
    const double ab = schedule_.alpha_bar(t);
    const double denom = 1.0 - ab + ab * s * s;
    return {std::sqrt(ab), 1.0 / std::sqrt(denom), std::sqrt(1.0 - ab) / denom, s * std::sqrt(ab) / std::sqrt(denom)};
  }

  Image forward(const Image& z_t, int t, const Condition& cond, Cache& c) const {
    const int r = config_.unshuffle;
    if (z_t.channels() != config_.image_channels || z_t.height() % r != 0 || z_t.width() % r != 0) {
      throw std::invalid_argument("denoiser: latent shape incompatible with the model");
    }
    if (cond.lq && !cond.lq->same_shape(z_t)) throw std::invalid_argument("denoiser: LQ shape must match latent");
    c.k = coefficients(t, cond.lq ? config_.cond_std : config_.data_std);
    c.channels = z_t.channels();
    c.height = z_t.height();
    c.width = z_t.width();
    c.gh = c.height / r;
    c.gw = c.width / r;
    c.task_row = task_embedding_row(cond.task);
    c.temb = timestep_embedding(t, config_.time_dim);

    // Space-to-depth over the concatenated input planes.
    const int planes = config_.input_planes();
    Mat& x = c.x;
    x.resize(Eigen::Index(c.gh) * c.gw, config_.in_features());
    for (int p = 0; p < planes; ++p) {
      for (int y = 0; y < c.height; ++y) {
        for (int xx = 0; xx < c.width; ++xx) {
          double v;
          if (p < c.channels) {
            const double m = cond.lq ? cond.lq->at(p, y, xx) : config_.data_mean;
            v = (z_t.at(p, y, xx) - c.k.sqrt_ab * m) * c.k.in_scale;
          } else if (p < 2 * c.channels) {
            v = cond.lq ? cond.lq->at(p - c.channels, y, xx) : 0.0;
          } else {
            v = cond.lq ? 1.0 : 0.0;
          }
          x((y / r) * c.gw + xx / r, p * r * r + (y % r) * r + xx % r) = Scalar(v);
        }
      }
    }

    const nn::RowVec<Scalar> e1 = c.temb * block(8) + block(10).row(c.task_row);
    const nn::RowVec<Scalar> e2 = c.temb * block(9) + block(11).row(c.task_row);

    nn::im2col3x3(x, c.gh, c.gw, c.cols0);
    nn::conv_forward(c.cols0, block(0), block(1), c.h1);
    c.h1.rowwise() += e1;
    c.a1 = nn::silu(c.h1.array()).matrix();

    nn::im2col3x3(c.a1, c.gh, c.gw, c.cols1);
    nn::conv_forward(c.cols1, block(2), block(3), c.h2);
    c.h2.rowwise() += e2;
    c.a2 = c.a1 + nn::silu(c.h2.array()).matrix();

    nn::im2col3x3(c.a2, c.gh, c.gw, c.cols2);
    nn::conv_forward(c.cols2, block(4), block(5), c.h3);
    c.a3 = c.a2 + nn::silu(c.h3.array()).matrix();

    nn::im2col3x3(c.a3, c.gh, c.gw, c.cols3);
    Mat& f = c.f;
    nn::conv_forward(c.cols3, block(6), block(7), f);

    // Depth-to-space and output preconditioning (in double).
    Image eps(c.channels, c.height, c.width);
    for (int ch = 0; ch < c.channels; ++ch) {
      for (int y = 0; y < c.height; ++y) {
        for (int xx = 0; xx < c.width; ++xx) {
          const double fv = f((y / r) * c.gw + xx / r, ch * r * r + (y % r) * r + xx % r);
          const double m = cond.lq ? cond.lq->at(ch, y, xx) : config_.data_mean;
          const double centred = z_t.at(ch, y, xx) - c.k.sqrt_ab * m;
          eps.at(ch, y, xx) = c.k.skip_scale * centred - c.k.out_scale * fv;
        }
      }
    }
    return eps;
  }

  void backward(Cache& c, const Eigen::VectorXd& d_eps, Vector& grad) const {
    const int r = config_.unshuffle;
    const int h = config_.hidden;
    const Eigen::Index pixels = Eigen::Index(c.gh) * c.gw;

    Mat& d_f = c.d_f;
    d_f.resize(pixels, config_.out_features());
    for (int ch = 0; ch < c.channels; ++ch) {
      for (int y = 0; y < c.height; ++y) {
        for (int xx = 0; xx < c.width; ++xx) {
          const Eigen::Index i = (Eigen::Index(ch) * c.height + y) * c.width + xx;
          d_f((y / r) * c.gw + xx / r, ch * r * r + (y % r) * r + xx % r) = Scalar(-c.k.out_scale * d_eps[i]);
        }
      }
    }

    auto gw = [&](int idx) { return grad_block(grad, blocks_[idx]); };
    Mat &d_cols = c.d_cols, &d_a3 = c.d_a3, &d_a2 = c.d_a2, &d_a1 = c.d_a1;
    Mat &d_h3 = c.d_h3, &d_h2 = c.d_h2, &d_h1 = c.d_h1, &scatter = c.scatter;

    {
      auto gwt = gw(6);
      auto gb = gw(7);
      nn::conv_backward(c.cols3, block(6), d_f, gwt, gb, &d_cols);
    }
    nn::col2im3x3(d_cols, c.gh, c.gw, h, d_a3);

    d_h3 = (d_a3.array() * nn::silu_grad(c.h3.array())).matrix();
    {
      auto gwt = gw(4);
      auto gb = gw(5);
      nn::conv_backward(c.cols2, block(4), d_h3, gwt, gb, &d_cols);
    }
    nn::col2im3x3(d_cols, c.gh, c.gw, h, scatter);
    d_a2 = d_a3 + scatter;

    d_h2 = (d_a2.array() * nn::silu_grad(c.h2.array())).matrix();
    {
      auto gwt = gw(2);
      auto gb = gw(3);
      nn::conv_backward(c.cols1, block(2), d_h2, gwt, gb, &d_cols);
    }
    nn::col2im3x3(d_cols, c.gh, c.gw, h, scatter);
    d_a1 = d_a2 + scatter;
    const nn::RowVec<Scalar> d_e2 = d_h2.colwise().sum();
    gw(9).noalias() += c.temb.transpose() * d_e2;
    gw(11).row(c.task_row) += d_e2;

    d_h1 = (d_a1.array() * nn::silu_grad(c.h1.array())).matrix();
    {
      auto gwt = gw(0);
      auto gb = gw(1);
      nn::conv_backward(c.cols0, block(0), d_h1, gwt, gb, static_cast<Mat*>(nullptr));
    }
    const nn::RowVec<Scalar> d_e1 = d_h1.colwise().sum();
    gw(8).noalias() += c.temb.transpose() * d_e1;
    gw(10).row(c.task_row) += d_e1;
  }

  DenoiserConfig config_;
  NoiseSchedule schedule_;
  std::vector<Block> blocks_;
  Vector params_;
};

using Denoiser = TinyCondDenoiser<float>;

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

/// One supervised pair: the model learns to produce `hq` given `lq`.
struct TrainingPair {
  Image lq;
  Image hq;
  TaskId task = TaskId::SR;
};

enum class LossWeighting { kUniform, kOutput };

std::string_view weighting_name(LossWeighting w);
LossWeighting parse_weighting(std::string_view name);

struct TrainConfig {
  int steps = 6000;
  int batch_size = 32;
  double learning_rate = 4e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::array<double, 4> task_probabilities = {0.32, 0.28, 0.18, 0.22};  // SR, MD, DD, DN
  double lq_drop_rate = 0.1;
  double task_drop_rate = 0.1;
  double positive_prompt_rate = 0.01;
  double negative_prompt_rate = 0.01;
  bool augment = true;  // random flips / transposes of each pair
  /// Per-sample weight on the noise-prediction loss: kUniform is the plain
  /// objective, kOutput weights by 1 / b(t)^2 so every timestep's error is
  /// measured on the network output scale.
  LossWeighting weighting = LossWeighting::kOutput;
  std::uint64_t seed = 0;
  int log_every = 100;  // progress lines on stderr; 0 disables
};

struct TrainHistory {
  std::vector<double> loss;  // mean minibatch loss per step
};

/// One training example after task sampling and condition dropout.
struct TrainingDraw {
  Image x0;
  Condition cond;
  std::optional<TaskId> sampled_task;  // task before dropout
};

/// Draws a training example: task by probability, a pair of that task,
/// optional positive/negative prompt substitution, then independent LQ
/// and task dropout.
TrainingDraw draw_training_example(const std::vector<TrainingPair>& data, const TrainConfig& config, Rng& rng);

/// Minibatch Adam on the noise-prediction loss. Throws on an empty
/// dataset, a task with positive probability but no pairs, or a
/// non-finite loss.
TrainHistory train(Denoiser& model, const std::vector<TrainingPair>& data, const TrainConfig& config);

/// Max relative error between analytic gradients and central differences
/// on `probe_params` randomly chosen parameters, using a double-precision
/// copy of the model and a fixed probe batch.
double gradient_check(const Denoiser& model, const std::vector<TrainingPair>& probe, int probe_params = 32,
                      std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary container: magic "UNIRESCK", version, architecture
/// hyperparameters, schedule definition, task-embedding row names, then
/// named parameter blocks of little-endian float32.
void save_checkpoint(const Denoiser& model, const std::filesystem::path& path);
Denoiser load_checkpoint(const std::filesystem::path& path);

}  // namespace unires
