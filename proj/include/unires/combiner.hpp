#pragma once

#include "unires/diffusion.hpp"
#include "unires/image.hpp"
#include "unires/predictor.hpp"
#include "unires/schedule.hpp"

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace unires {

/// Expert prediction slots that can be mixed at sampling time.
///   BR        (lq, null task)           blind restoration
///   SR..DN    (lq, task)
///   DownLQ    (downsample_up(lq), SR)   fidelity/detail trade-off
///   PosPrompt (lq, positive-quality)    only with the prompt extension
///   NegPrompt (lq, negative-quality)    only with the prompt extension
///   Uncond    (null, null)              unconditional branch for CFG
enum class TaskSlot { BR, SR, MD, DD, DN, DownLQ, PosPrompt, NegPrompt, Uncond };

std::string_view slot_name(TaskSlot slot);
TaskSlot parse_slot(std::string_view name);

inline constexpr std::array<TaskSlot, 6> kDefaultSlots = {TaskSlot::BR, TaskSlot::SR, TaskSlot::MD,
                                                           TaskSlot::DD, TaskSlot::DN, TaskSlot::DownLQ};

/// Combination weights over a set of slots. Weights sum to one.
class WeightVector {
 public:
  using Entry = std::pair<TaskSlot, double>;
  static constexpr double kSumTolerance = 1e-9;

  WeightVector() = default;
  /// Throws on duplicate slots, non-finite weights, or |sum - 1| > tolerance.
  explicit WeightVector(std::vector<Entry> entries, double tolerance = kSumTolerance);

  static WeightVector one_hot(TaskSlot slot) { return WeightVector({{slot, 1.0}}); }

  const std::vector<Entry>& entries() const { return entries_; }
  double weight(TaskSlot slot) const;
  bool has(TaskSlot slot) const;
  double sum() const;
  bool empty() const { return entries_.empty(); }

  /// Same slots and weights regardless of entry order.
  friend bool operator==(const WeightVector& a, const WeightVector& b);

 private:
  std::vector<Entry> entries_;
};

/// `SLOT=value` comma list, zero entries omitted, shortest round-trip
/// decimal form.
std::string format_weights(const WeightVector& w);

/// Parses `SLOT=value,...`. Omitted slots are zero. Rejects sums off by
/// more than 1e-6; accepted vectors are shifted uniformly over the listed
/// entries so the sum is exactly representable as one.
WeightVector parse_weights(std::string_view text);

/// Adds the positive (+pos) and negative (neg) prompt slots to `base`.
WeightVector with_quality_prompts(const WeightVector& base, double pos = 1.0, double neg = -1.0);

/// CFG as a two-slot combination: `guidance` on `conditional`, the rest
/// on the unconditional (null, null) slot.
WeightVector cfg_weights(double guidance, TaskSlot conditional = TaskSlot::BR);

struct CombineOptions {
  /// Slots a weight vector may use, in summation order.
  std::vector<TaskSlot> declared = {TaskSlot::BR, TaskSlot::SR, TaskSlot::MD, TaskSlot::DD,
                                    TaskSlot::DN, TaskSlot::DownLQ, TaskSlot::Uncond};
  int downlq_factor = 4;
  bool quality_prompts = false;  // declares PosPrompt / NegPrompt

  std::vector<TaskSlot> summation_order() const;
};

/// Condition(downsample_up(lq, factor), SR).
Condition make_downlq_condition(const Image& lq, int factor = 4);

Condition slot_condition(TaskSlot slot, const Image& lq, int downlq_factor = 4);

/// Per-slot conditions for one LQ image; DownLQ resampling happens once.
class SlotConditions {
 public:
  SlotConditions(const Image& lq, const CombineOptions& options);

  const Condition& condition(TaskSlot slot) const;
  const std::vector<TaskSlot>& order() const { return order_; }
  const Image& lq() const { return lq_; }

 private:
  Image lq_;
  std::vector<TaskSlot> order_;
  std::map<TaskSlot, Condition> conditions_;
};

/// Throws if `w` uses a slot that is not declared.
void check_declared(const WeightVector& w, const std::vector<TaskSlot>& order);

/// sum_k w_k * eps(z_t, t, cond_k), accumulated in declaration order;
/// zero-weight slots are not evaluated.
Image combine(const NoisePredictor& predictor, const Image& z_t, int t, const SlotConditions& conditions,
              const WeightVector& w);
Image combine(const NoisePredictor& predictor, const Image& z_t, int t, const Image& lq, const WeightVector& w,
              const CombineOptions& options = {});

/// Same accumulation from precomputed per-slot predictions.
Image combine_predictions(const std::map<TaskSlot, Image>& predictions, const std::vector<TaskSlot>& order,
                          const WeightVector& w);

struct RestoreOptions {
  SamplerConfig sampler;
  CombineOptions combine;
  bool color_correct = true;  // AdaIN against the LQ input
};

/// Restoration g(lq, w) for one LQ image with a fixed model and schedule.
/// Thread-safe for concurrent restore() calls once constructed/primed.
class Restorer {
 public:
  Restorer(const NoisePredictor& model, NoiseSchedule schedule, const Image& lq, RestoreOptions options = {});

  /// Samples with the combined prediction, clamps to [0,1] (identity
  /// codec) and applies AdaIN against the LQ image when enabled.
  Image restore(const WeightVector& w) const;

  /// Evaluates every listed slot once at z_T. All candidates of a search
  /// share the sampler seed, so their first step reuses these predictions.
  void prime_first_step(const std::vector<TaskSlot>& slots);

  const SlotConditions& conditions() const { return conditions_; }
  const RestoreOptions& options() const { return options_; }
  const NoiseSchedule& schedule() const { return schedule_; }

 private:
  const NoisePredictor* model_;
  NoiseSchedule schedule_;
  RestoreOptions options_;
  SlotConditions conditions_;
  LatentShape shape_;
  std::map<TaskSlot, Image> first_step_;
};

Image restore(const Image& lq, const WeightVector& w, const NoisePredictor& model, const SamplerConfig& sampler,
              const NoiseSchedule& schedule, const RestoreOptions& options = {});

}  // namespace unires
