#include "unires/denoiser.hpp"

#include "unires/diffusion.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iostream>
#include <numeric>

namespace unires {

void DenoiserConfig::validate() const {
  if (image_channels != 1 && image_channels != 3) throw std::invalid_argument("denoiser: channels must be 1 or 3");
  if (unshuffle < 1 || height % unshuffle != 0 || width % unshuffle != 0) {
    throw std::invalid_argument("denoiser: working resolution must be divisible by the unshuffle factor");
  }
  if (hidden < 1) throw std::invalid_argument("denoiser: hidden width must be positive");
  if (time_dim < 2 || time_dim % 2 != 0) throw std::invalid_argument("denoiser: time_dim must be even");
  if (!(data_std > 0.0) || !(cond_std > 0.0)) throw std::invalid_argument("denoiser: prior stds must be positive");
}

std::string_view weighting_name(LossWeighting w) { return w == LossWeighting::kUniform ? "uniform" : "output"; }

LossWeighting parse_weighting(std::string_view name) {
  if (name == "uniform") return LossWeighting::kUniform;
  if (name == "output") return LossWeighting::kOutput;
  throw std::invalid_argument("unknown loss weighting '" + std::string(name) + "'");
}

int task_embedding_row(std::optional<TaskId> task) {
  if (!task) return 0;
  switch (*task) {
    case TaskId::SR: return 1;
    case TaskId::MD: return 2;
    case TaskId::DD: return 3;
    case TaskId::DN: return 4;
    case TaskId::Positive: return 5;
    case TaskId::Negative: return 6;
  }
  return 0;
}

namespace {

// Dihedral transform of a square image: bit 0 flips x, bit 1 flips y,
// bit 2 transposes.
Image dihedral(const Image& img, int code) {
  if (code == 0) return img;
  const bool transpose = (code & 4) != 0;
  if (transpose && img.height() != img.width()) return img;
  Image out(img.channels(), img.height(), img.width());
  const int h = img.height(), w = img.width();
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        int sy = transpose ? x : y;
        int sx = transpose ? y : x;
        if (code & 1) sx = w - 1 - sx;
        if (code & 2) sy = h - 1 - sy;
        out.at(c, y, x) = img.at(c, sy, sx);
      }
    }
  }
  return out;
}

std::array<std::vector<std::size_t>, 4> index_by_task(const std::vector<TrainingPair>& data) {
  std::array<std::vector<std::size_t>, 4> by_task;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int row = task_embedding_row(data[i].task) - 1;
    if (row < 0 || row > 3) throw std::invalid_argument("training pairs must be labelled SR, MD, DD or DN");
    by_task[row].push_back(i);
  }
  return by_task;
}

}  // namespace

TrainingDraw draw_training_example(const std::vector<TrainingPair>& data, const TrainConfig& config, Rng& rng) {
  if (data.empty()) throw std::invalid_argument("training data is empty");
  const auto by_task = index_by_task(data);

  const double u = rng.uniform();
  double acc = 0.0;
  int task_index = 3;
  for (int k = 0; k < 4; ++k) {
    acc += config.task_probabilities[k];
    if (u < acc) {
      task_index = k;
      break;
    }
  }
  while (config.task_probabilities[task_index] == 0.0 && task_index > 0) --task_index;
  const auto& pool = by_task[task_index];
  if (pool.empty()) {
    throw std::invalid_argument("no training pairs for task " + std::string(task_name(kRestorationTasks[task_index])));
  }
  const TrainingPair& pair = data[pool[rng.uniform_int(0, int(pool.size()) - 1)]];

  TrainingDraw draw;
  draw.x0 = pair.hq;
  Image lq = pair.lq;
  std::optional<TaskId> task = pair.task;
  const double q = rng.uniform();
  if (q < config.positive_prompt_rate) {
    task = TaskId::Positive;
  } else if (q < config.positive_prompt_rate + config.negative_prompt_rate) {
    task = TaskId::Negative;
    std::swap(draw.x0, lq);
  }
  draw.sampled_task = task;
  const bool drop_lq = rng.bernoulli(config.lq_drop_rate);
  const bool drop_task = rng.bernoulli(config.task_drop_rate);
  if (!drop_lq) draw.cond.lq = std::move(lq);
  if (!drop_task) draw.cond.task = task;
  return draw;
}

TrainHistory train(Denoiser& model, const std::vector<TrainingPair>& data, const TrainConfig& config) {
  if (data.empty()) throw std::invalid_argument("train: dataset is empty");
  const auto by_task = index_by_task(data);
  const double total = std::accumulate(config.task_probabilities.begin(), config.task_probabilities.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("train: task probabilities must sum to 1");
  for (int k = 0; k < 4; ++k) {
    if (config.task_probabilities[k] > 0.0 && by_task[k].empty()) {
      throw std::invalid_argument("train: no pairs for task " + std::string(task_name(kRestorationTasks[k])));
    }
  }
  if (config.batch_size < 1) throw std::invalid_argument("train: batch size must be positive");

  const NoiseSchedule& schedule = model.schedule();
  Rng rng(config.seed);
  auto& theta = model.parameters();
  Denoiser::Vector grad(theta.size());
  Eigen::VectorXd m = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(theta.size());
  TrainHistory history;
  history.loss.reserve(config.steps);

  for (int step = 1; step <= config.steps; ++step) {
    grad.setZero();
    double loss = 0.0;
    for (int b = 0; b < config.batch_size; ++b) {
      TrainingDraw draw = draw_training_example(data, config, rng);
      if (config.augment) {
        const int code = rng.uniform_int(0, 7);
        draw.x0 = dihedral(draw.x0, code);
        if (draw.cond.lq) draw.cond.lq = dihedral(*draw.cond.lq, code);
      }
      const int t = rng.uniform_int(1, schedule.steps());
      const Image eps = standard_normal_like(draw.x0.channels(), draw.x0.height(), draw.x0.width(), rng);
      const Image z = forward_diffuse(draw.x0, t, eps, schedule);
      double weight = 1.0;
      if (config.weighting == LossWeighting::kOutput) {
        const double b = model.output_scale(t, draw.cond);
        weight = 1.0 / (b * b);
      }
      loss += model.loss_and_gradient(z, t, draw.cond, eps, &grad, weight);
    }
    loss /= config.batch_size;
    if (!std::isfinite(loss)) {
      throw std::runtime_error("train: non-finite loss at step " + std::to_string(step));
    }

    const Eigen::VectorXd g = grad.cast<double>() / double(config.batch_size);
    m = config.adam_beta1 * m + (1.0 - config.adam_beta1) * g;
    v = config.adam_beta2 * v + (1.0 - config.adam_beta2) * g.cwiseAbs2();
    const double c1 = 1.0 - std::pow(config.adam_beta1, step);
    const double c2 = 1.0 - std::pow(config.adam_beta2, step);
    const Eigen::VectorXd update =
        config.learning_rate * (m / c1).cwiseQuotient(((v / c2).cwiseSqrt().array() + config.adam_epsilon).matrix());
    theta -= update.cast<float>();
    if (!theta.allFinite()) {
      throw std::runtime_error("train: non-finite parameters after step " + std::to_string(step));
    }

    history.loss.push_back(loss);
    if (config.log_every > 0 && step % config.log_every == 0) {
      const int window = std::min(step, config.log_every);
      const double avg =
          std::accumulate(history.loss.end() - window, history.loss.end(), 0.0) / window;
      std::cerr << "train step " << step << "/" << config.steps << " loss " << avg << '\n';
    }
  }
  return history;
}

double gradient_check(const Denoiser& model, const std::vector<TrainingPair>& probe, int probe_params,
                      std::uint64_t seed) {
  if (probe.empty()) throw std::invalid_argument("gradient_check: empty probe batch");
  auto net = model.cast<double>();
  const NoiseSchedule& schedule = net.schedule();
  Rng rng(seed);

  struct Example {
    Image z;
    int t;
    Condition cond;
    Image eps;
  };
  std::vector<Example> batch;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const TrainingPair& p = probe[i];
    const int t = rng.uniform_int(1, schedule.steps());
    Image eps = standard_normal_like(p.hq.channels(), p.hq.height(), p.hq.width(), rng);
    Condition cond;
    cond.lq = p.lq;
    cond.task = p.task;
    batch.push_back({forward_diffuse(p.hq, t, eps, schedule), t, std::move(cond), std::move(eps)});
  }

  auto loss = [&](TinyCondDenoiser<double>::Vector* grad) {
    double total = 0.0;
    for (const auto& ex : batch) total += net.loss_and_gradient(ex.z, ex.t, ex.cond, ex.eps, grad);
    return total / double(batch.size());
  };

  TinyCondDenoiser<double>::Vector analytic = TinyCondDenoiser<double>::Vector::Zero(net.parameter_count());
  loss(&analytic);
  analytic /= double(batch.size());

  // Sample parameters per block so every stage is represented.
  std::vector<Eigen::Index> picks;
  const auto& blocks = net.blocks();
  for (int i = 0; i < probe_params; ++i) {
    const auto& b = blocks[i % blocks.size()];
    const Eigen::Index n = Eigen::Index(b.rows) * b.cols;
    picks.push_back(b.offset + Eigen::Index(rng.uniform_int(0, int(n) - 1)));
  }

  constexpr double h = 1e-5;
  double worst = 0.0;
  auto& theta = net.parameters();
  for (Eigen::Index idx : picks) {
    const double saved = theta[idx];
    theta[idx] = saved + h;
    const double up = loss(nullptr);
    theta[idx] = saved - h;
    const double down = loss(nullptr);
    theta[idx] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic[idx];
    const double scale = std::max({std::abs(a), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(a - numeric) / scale);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'U', 'N', 'I', 'R', 'E', 'S', 'C', 'K'};

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(T));
  if (!in) throw CheckpointError("checkpoint truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

void put_string(std::ostream& out, const std::string& s) {
  put_le<std::uint32_t>(out, std::uint32_t(s.size()));
  out.write(s.data(), std::streamsize(s.size()));
}

std::string get_string(std::istream& in) {
  const auto n = get_le<std::uint32_t>(in);
  if (n > 4096) throw CheckpointError("checkpoint string too long");
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw CheckpointError("checkpoint truncated");
  return s;
}

const std::array<std::string, kTaskEmbeddingRows> kTaskRowNames = {"BR", "SR", "MD", "DD", "DN", "POS", "NEG"};

}  // namespace

void save_checkpoint(const Denoiser& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(out, kCheckpointVersion);

  const DenoiserConfig& c = model.config();
  for (int v : {c.image_channels, c.height, c.width, c.unshuffle, c.hidden, c.time_dim}) put_le<std::int32_t>(out, v);
  put_le<double>(out, c.data_mean);
  put_le<double>(out, c.data_std);
  put_le<double>(out, c.cond_std);

  const auto& betas = model.schedule().betas();
  put_le<std::uint32_t>(out, std::uint32_t(betas.size()));
  for (double b : betas) put_le<double>(out, b);

  put_le<std::uint32_t>(out, kTaskEmbeddingRows);
  for (const auto& name : kTaskRowNames) put_string(out, name);

  put_le<std::uint32_t>(out, std::uint32_t(model.blocks().size()));
  for (const auto& b : model.blocks()) {
    put_string(out, b.name);
    put_le<std::uint32_t>(out, std::uint32_t(b.rows));
    put_le<std::uint32_t>(out, std::uint32_t(b.cols));
    const Eigen::Index n = Eigen::Index(b.rows) * b.cols;
    for (Eigen::Index i = 0; i < n; ++i) put_le<float>(out, model.parameters()[b.offset + i]);
  }
  if (!out) throw CheckpointError("write failed for " + path.string());
}

Denoiser load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw CheckpointError(path.string() + " is not a checkpoint");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }

  DenoiserConfig c;
  c.image_channels = get_le<std::int32_t>(in);
  c.height = get_le<std::int32_t>(in);
  c.width = get_le<std::int32_t>(in);
  c.unshuffle = get_le<std::int32_t>(in);
  c.hidden = get_le<std::int32_t>(in);
  c.time_dim = get_le<std::int32_t>(in);
  c.data_mean = get_le<double>(in);
  c.data_std = get_le<double>(in);
  c.cond_std = get_le<double>(in);
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("invalid architecture in checkpoint: ") + e.what());
  }

  const auto steps = get_le<std::uint32_t>(in);
  if (steps == 0 || steps > 100000) throw CheckpointError("invalid schedule length in checkpoint");
  std::vector<double> betas(steps);
  for (double& b : betas) b = get_le<double>(in);

  const auto rows = get_le<std::uint32_t>(in);
  if (rows != kTaskEmbeddingRows) throw CheckpointError("task-embedding table size mismatch");
  for (const auto& expected : kTaskRowNames) {
    if (get_string(in) != expected) throw CheckpointError("task-embedding table names mismatch");
  }

  Denoiser model(c, NoiseSchedule::from_betas(std::move(betas)));
  const auto nblocks = get_le<std::uint32_t>(in);
  if (nblocks != model.blocks().size()) throw CheckpointError("parameter block count mismatch");
  for (const auto& b : model.blocks()) {
    const std::string name = get_string(in);
    const auto r = get_le<std::uint32_t>(in);
    const auto k = get_le<std::uint32_t>(in);
    if (name != b.name || int(r) != b.rows || int(k) != b.cols) {
      throw CheckpointError("parameter block '" + name + "' does not match the architecture");
    }
    const Eigen::Index n = Eigen::Index(b.rows) * b.cols;
    for (Eigen::Index i = 0; i < n; ++i) model.parameters()[b.offset + i] = get_le<float>(in);
  }
  if (!model.parameters().allFinite()) throw CheckpointError("checkpoint contains non-finite parameters");
  return model;
}

}  // namespace unires
