#include "support/test_util.hpp"
#include "unires/degradations.hpp"
#include "unires/denoiser.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>

using namespace unires;
using namespace unires::testing;

namespace {

DenoiserConfig small_config(int unshuffle = 2) {
  DenoiserConfig c;
  c.height = 16;
  c.width = 16;
  c.unshuffle = unshuffle;
  c.hidden = 8;
  c.time_dim = 8;
  return c;
}

std::vector<TrainingPair> small_pairs(int per_task, std::uint64_t seed) {
  const auto scenes = generate_scenes(seed, 6, 16, 16);
  Rng rng(seed + 1);
  std::vector<TrainingPair> out;
  for (TaskId t : kRestorationTasks) {
    for (auto& p : make_task_pairs(scenes, t, per_task, rng)) out.push_back({p.lq, p.hq, t});
  }
  return out;
}

}  // namespace

TEST_CASE("task embedding rows") {
  CHECK(task_embedding_row(std::nullopt) == 0);
  std::set<int> rows{0};
  for (TaskId t : {TaskId::SR, TaskId::MD, TaskId::DD, TaskId::DN, TaskId::Positive, TaskId::Negative}) {
    const int r = task_embedding_row(t);
    CHECK(r > 0);
    CHECK(r < kTaskEmbeddingRows);
    rows.insert(r);
  }
  CHECK(rows.size() == kTaskEmbeddingRows);
}

TEST_CASE("config validation") {
  DenoiserConfig c = small_config();
  CHECK_NOTHROW(c.validate());
  c.unshuffle = 3;
  CHECK_THROWS(c.validate());
  c = small_config();
  c.hidden = 0;
  CHECK_THROWS(c.validate());
  c = small_config();
  c.cond_std = 0.0;
  CHECK_THROWS(c.validate());
}

TEST_CASE("prediction shape and determinism") {
  Denoiser model(small_config(), NoiseSchedule::linear());
  model.initialize(1);
  const Image z = random_normal(3, 16, 16, 2);
  const Image lq = random_image(3, 16, 16, 3);
  for (const Condition& c : {Condition::null(), Condition{lq, std::nullopt}, Condition{lq, TaskId::DN},
                             Condition{std::nullopt, TaskId::SR}}) {
    const Image eps = model.predict(z, 400, c);
    CHECK(eps.same_shape(z));
    CHECK(eps.all_finite());
    CHECK(eps == model.predict(z, 400, c));
  }
  CHECK_FALSE(model.predict(z, 400, {lq, TaskId::SR}) == model.predict(z, 400, {lq, TaskId::DN}));
  CHECK_THROWS(model.predict(Image(3, 7, 7), 10, {}));
  CHECK_THROWS(model.predict(z, 10, {Image(3, 8, 8), TaskId::SR}));
}

TEST_CASE("zero network output is the gaussian prior prediction") {
  DenoiserConfig cfg = small_config();
  Denoiser model(cfg, NoiseSchedule::linear());  // parameters all zero
  const auto s = NoiseSchedule::linear();
  const Image z = random_normal(3, 16, 16, 4);
  const Image lq = random_image(3, 16, 16, 5);
  const int t = 600;
  const double ab = s.alpha_bar(t);

  AnalyticGaussianPredictor with_lq(lq, cfg.cond_std * cfg.cond_std, s);
  CHECK(max_abs_diff(model.predict(z, t, {lq, TaskId::SR}), with_lq.predict(z, t, {})) < 1e-5);

  AnalyticGaussianPredictor blind(Image(3, 16, 16, cfg.data_mean), cfg.data_std * cfg.data_std, s);
  CHECK(max_abs_diff(model.predict(z, t, Condition::null()), blind.predict(z, t, {})) < 1e-5);

  const double sd = cfg.cond_std;
  CHECK(model.output_scale(t, {lq, std::nullopt}) ==
        doctest::Approx(sd * std::sqrt(ab) / std::sqrt(1.0 - ab + ab * sd * sd)));
}

TEST_CASE("gradients match finite differences") {
  for (int unshuffle : {1, 2, 4}) {
    Denoiser model(small_config(unshuffle), NoiseSchedule::linear());
    model.initialize(7);
    const double err = gradient_check(model, small_pairs(1, 8), 40, 9);
    CAPTURE(unshuffle);
    CHECK(err >= 0.0);
    CHECK(err < 1e-3);
  }
}

TEST_CASE("training draws") {
  const auto data = small_pairs(3, 10);
  TrainConfig cfg;
  Rng rng(11);
  SUBCASE("task probabilities pin the sampled task") {
    cfg.task_probabilities = {1.0, 0.0, 0.0, 0.0};
    cfg.positive_prompt_rate = cfg.negative_prompt_rate = 0.0;
    for (int i = 0; i < 200; ++i) CHECK(draw_training_example(data, cfg, rng).sampled_task == TaskId::SR);
  }
  SUBCASE("full dropout trains unconditionally") {
    cfg.lq_drop_rate = cfg.task_drop_rate = 1.0;
    for (int i = 0; i < 200; ++i) {
      const auto d = draw_training_example(data, cfg, rng);
      CHECK_FALSE(d.cond.lq.has_value());
      CHECK_FALSE(d.cond.task.has_value());
    }
  }
  SUBCASE("drop rates are independent") {
    cfg.positive_prompt_rate = cfg.negative_prompt_rate = 0.0;
    int lq_only = 0, task_only = 0, both = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
      const auto d = draw_training_example(data, cfg, rng);
      lq_only += !d.cond.lq && d.cond.task;
      task_only += d.cond.lq && !d.cond.task;
      both += !d.cond.lq && !d.cond.task;
    }
    CHECK(double(lq_only) / n == doctest::Approx(0.09).epsilon(0.15));
    CHECK(double(task_only) / n == doctest::Approx(0.09).epsilon(0.15));
    CHECK(double(both) / n == doctest::Approx(0.01).epsilon(0.4));
  }
  SUBCASE("negative prompt swaps the pair") {
    cfg.positive_prompt_rate = 0.0;
    cfg.negative_prompt_rate = 1.0;
    cfg.lq_drop_rate = cfg.task_drop_rate = 0.0;
    const auto d = draw_training_example(data, cfg, rng);
    CHECK(d.cond.task == TaskId::Negative);
    bool found = false;
    for (const auto& p : data) found |= (p.lq == d.x0 && p.hq == *d.cond.lq);
    CHECK(found);
  }
  SUBCASE("errors") {
    CHECK_THROWS(draw_training_example({}, cfg, rng));
    std::vector<TrainingPair> only_sr;
    for (const auto& p : data)
      if (p.task == TaskId::SR) only_sr.push_back(p);
    cfg.task_probabilities = {0.0, 0.0, 0.0, 1.0};
    CHECK_THROWS(draw_training_example(only_sr, cfg, rng));
  }
}

TEST_CASE("short training reduces the loss") {
  Denoiser model(small_config(), NoiseSchedule::linear());
  model.initialize(12);
  TrainConfig cfg;
  cfg.steps = 150;
  cfg.batch_size = 8;
  cfg.learning_rate = 2e-3;
  cfg.log_every = 0;
  const auto data = small_pairs(8, 13);
  const auto history = train(model, data, cfg);
  REQUIRE(history.loss.size() == 150);
  double head = 0.0, tail = 0.0;
  for (int i = 0; i < 30; ++i) {
    head += history.loss[i];
    tail += history.loss[120 + i];
  }
  CHECK(tail < head);
  for (double l : history.loss) CHECK(std::isfinite(l));

  Denoiser again(small_config(), NoiseSchedule::linear());
  again.initialize(12);
  const auto h2 = train(again, data, cfg);
  CHECK(h2.loss == history.loss);
  CHECK(again.parameters() == model.parameters());

  CHECK_THROWS(train(model, {}, cfg));
  TrainConfig bad = cfg;
  bad.learning_rate = 1e30;
  bad.steps = 20;
  CHECK_THROWS(train(model, data, bad));
}

TEST_CASE("checkpoint round trip") {
  const auto dir = scratch_dir("checkpoint");
  DenoiserConfig cfg = small_config();
  cfg.cond_std = 0.15;
  Denoiser model(cfg, NoiseSchedule::linear(500, 2e-4, 0.03));
  model.initialize(14);
  save_checkpoint(model, dir / "m.ckpt");
  const Denoiser back = load_checkpoint(dir / "m.ckpt");
  CHECK(back.config() == model.config());
  CHECK(back.schedule().betas() == model.schedule().betas());
  CHECK(back.parameters() == model.parameters());
  const Image z = random_normal(3, 16, 16, 15);
  CHECK(back.predict(z, 100, {}) == model.predict(z, 100, {}));

  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), CheckpointError);
  std::ofstream(dir / "junk.ckpt") << "not a checkpoint";
  CHECK_THROWS_AS(load_checkpoint(dir / "junk.ckpt"), CheckpointError);
  {
    std::ifstream in(dir / "m.ckpt", std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    bytes.resize(bytes.size() / 2);
    std::ofstream(dir / "short.ckpt", std::ios::binary) << bytes;
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "short.ckpt"), CheckpointError);
}
