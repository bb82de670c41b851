#include "unires/combiner.hpp"

#include "unires/degradations.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <stdexcept>
#include <string>

namespace unires {

namespace {

constexpr std::array<std::pair<TaskSlot, std::string_view>, 9> kSlotNames = {{
    {TaskSlot::BR, "BR"},
    {TaskSlot::SR, "SR"},
    {TaskSlot::MD, "MD"},
    {TaskSlot::DD, "DD"},
    {TaskSlot::DN, "DN"},
    {TaskSlot::DownLQ, "DownLQ"},
    {TaskSlot::PosPrompt, "POS"},
    {TaskSlot::NegPrompt, "NEG"},
    {TaskSlot::Uncond, "UNCOND"},
}};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string shortest(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace

std::string_view slot_name(TaskSlot slot) {
  for (const auto& [s, name] : kSlotNames) {
    if (s == slot) return name;
  }
  throw std::invalid_argument("unknown task slot");
}

TaskSlot parse_slot(std::string_view name) {
  for (const auto& [s, n] : kSlotNames) {
    if (n == name) return s;
  }
  throw std::invalid_argument("unknown task slot '" + std::string(name) + "'");
}

WeightVector::WeightVector(std::vector<Entry> entries, double tolerance) : entries_(std::move(entries)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!std::isfinite(entries_[i].second)) {
      throw std::invalid_argument("weight for " + std::string(slot_name(entries_[i].first)) + " is not finite");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (entries_[j].first == entries_[i].first) {
        throw std::invalid_argument("duplicate weight slot " + std::string(slot_name(entries_[i].first)));
      }
    }
  }
  if (entries_.empty()) throw std::invalid_argument("weight vector is empty");
  const double s = sum();
  if (std::abs(s - 1.0) > tolerance) {
    throw std::invalid_argument("weights sum to " + shortest(s) + ", expected 1");
  }
}

double WeightVector::weight(TaskSlot slot) const {
  for (const auto& [s, w] : entries_) {
    if (s == slot) return w;
  }
  return 0.0;
}

bool WeightVector::has(TaskSlot slot) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.first == slot; });
}

double WeightVector::sum() const {
  double s = 0.0;
  for (const auto& e : entries_) s += e.second;
  return s;
}

bool operator==(const WeightVector& a, const WeightVector& b) {
  auto covers = [](const WeightVector& x, const WeightVector& y) {
    for (const auto& [s, w] : x.entries_) {
      if (y.weight(s) != w) return false;
    }
    return true;
  };
  return covers(a, b) && covers(b, a);
}

std::string format_weights(const WeightVector& w) {
  std::string out;
  for (const auto& [slot, value] : w.entries()) {
    if (value == 0.0) continue;
    if (!out.empty()) out += ',';
    out += slot_name(slot);
    out += '=';
    out += shortest(value);
  }
  return out;
}

WeightVector parse_weights(std::string_view text) {
  std::vector<WeightVector::Entry> entries;
  std::string_view rest = trim(text);
  if (rest.empty()) throw std::invalid_argument("empty weight vector");
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string_view item = trim(rest.substr(0, comma));
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument("weight entry '" + std::string(item) + "' is not SLOT=value");
    }
    const TaskSlot slot = parse_slot(trim(item.substr(0, eq)));
    const std::string_view num = trim(item.substr(eq + 1));
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), v);
    if (ec != std::errc{} || ptr != num.data() + num.size()) {
      throw std::invalid_argument("bad weight value '" + std::string(num) + "'");
    }
    entries.emplace_back(slot, v);
  }
  double s = 0.0;
  for (const auto& e : entries) s += e.second;
  if (!std::isfinite(s) || std::abs(s - 1.0) > 1e-6) {
    throw std::invalid_argument("weights sum to " + shortest(s) + ", expected 1 within 1e-6");
  }
  if (s != 1.0) {
    const double shift = (1.0 - s) / double(entries.size());
    for (auto& e : entries) e.second += shift;
  }
  return WeightVector(std::move(entries));
}

WeightVector with_quality_prompts(const WeightVector& base, double pos, double neg) {
  auto entries = base.entries();
  for (const auto& e : entries) {
    if (e.first == TaskSlot::PosPrompt || e.first == TaskSlot::NegPrompt) {
      throw std::invalid_argument("weight vector already has quality prompt slots");
    }
  }
  entries.emplace_back(TaskSlot::PosPrompt, pos);
  entries.emplace_back(TaskSlot::NegPrompt, neg);
  return WeightVector(std::move(entries));
}

WeightVector cfg_weights(double guidance, TaskSlot conditional) {
  if (conditional == TaskSlot::Uncond) throw std::invalid_argument("conditional slot cannot be UNCOND");
  return WeightVector({{conditional, guidance}, {TaskSlot::Uncond, 1.0 - guidance}});
}

std::vector<TaskSlot> CombineOptions::summation_order() const {
  std::vector<TaskSlot> order;
  for (TaskSlot s : declared) {
    if (std::find(order.begin(), order.end(), s) != order.end()) {
      throw std::invalid_argument("slot " + std::string(slot_name(s)) + " declared twice");
    }
    order.push_back(s);
  }
  if (quality_prompts) {
    for (TaskSlot s : {TaskSlot::PosPrompt, TaskSlot::NegPrompt}) {
      if (std::find(order.begin(), order.end(), s) == order.end()) order.push_back(s);
    }
  }
  return order;
}

Condition make_downlq_condition(const Image& lq, int factor) {
  return Condition{downsample_up(lq, factor), TaskId::SR};
}

Condition slot_condition(TaskSlot slot, const Image& lq, int downlq_factor) {
  switch (slot) {
    case TaskSlot::BR: return Condition{lq, std::nullopt};
    case TaskSlot::SR: return Condition{lq, TaskId::SR};
    case TaskSlot::MD: return Condition{lq, TaskId::MD};
    case TaskSlot::DD: return Condition{lq, TaskId::DD};
    case TaskSlot::DN: return Condition{lq, TaskId::DN};
    case TaskSlot::DownLQ: return make_downlq_condition(lq, downlq_factor);
    case TaskSlot::PosPrompt: return Condition{lq, TaskId::Positive};
    case TaskSlot::NegPrompt: return Condition{lq, TaskId::Negative};
    case TaskSlot::Uncond: return Condition::null();
  }
  throw std::invalid_argument("unknown task slot");
}

SlotConditions::SlotConditions(const Image& lq, const CombineOptions& options)
    : lq_(lq), order_(options.summation_order()) {
  for (TaskSlot s : order_) conditions_.emplace(s, slot_condition(s, lq_, options.downlq_factor));
}

const Condition& SlotConditions::condition(TaskSlot slot) const {
  const auto it = conditions_.find(slot);
  if (it == conditions_.end()) {
    throw std::invalid_argument("slot " + std::string(slot_name(slot)) + " is not declared");
  }
  return it->second;
}

void check_declared(const WeightVector& w, const std::vector<TaskSlot>& order) {
  for (const auto& [slot, value] : w.entries()) {
    if (std::find(order.begin(), order.end(), slot) == order.end()) {
      throw std::invalid_argument("weight on undeclared slot " + std::string(slot_name(slot)));
    }
  }
}

Image combine(const NoisePredictor& predictor, const Image& z_t, int t, const SlotConditions& conditions,
              const WeightVector& w) {
  check_declared(w, conditions.order());
  Image acc(z_t.channels(), z_t.height(), z_t.width());
  for (TaskSlot slot : conditions.order()) {
    const double wk = w.weight(slot);
    if (wk == 0.0) continue;
    const Image eps = predictor.predict(z_t, t, conditions.condition(slot));
    require_same_shape(eps, z_t, "combine");
    acc.values() += wk * eps.values();
  }
  return acc;
}

Image combine(const NoisePredictor& predictor, const Image& z_t, int t, const Image& lq, const WeightVector& w,
              const CombineOptions& options) {
  return combine(predictor, z_t, t, SlotConditions(lq, options), w);
}

Image combine_predictions(const std::map<TaskSlot, Image>& predictions, const std::vector<TaskSlot>& order,
                          const WeightVector& w) {
  check_declared(w, order);
  Image acc;
  for (TaskSlot slot : order) {
    const double wk = w.weight(slot);
    if (wk == 0.0) continue;
    const auto it = predictions.find(slot);
    if (it == predictions.end()) {
      throw std::invalid_argument("no prediction for slot " + std::string(slot_name(slot)));
    }
    if (acc.empty()) acc = Image(it->second.channels(), it->second.height(), it->second.width());
    acc.values() += wk * it->second.values();
  }
  if (acc.empty()) throw std::invalid_argument("weight vector has no nonzero entries");
  return acc;
}

Restorer::Restorer(const NoisePredictor& model, NoiseSchedule schedule, const Image& lq, RestoreOptions options)
    : model_(&model),
      schedule_(std::move(schedule)),
      options_(std::move(options)),
      conditions_(lq, options_.combine),
      shape_{lq.channels(), lq.height(), lq.width()} {
  if (!lq.all_finite()) throw std::invalid_argument("restore: LQ image has non-finite samples");
}

void Restorer::prime_first_step(const std::vector<TaskSlot>& slots) {
  const Image z_T = initial_latent(shape_, options_.sampler);
  const int t = schedule_.steps();
  for (TaskSlot s : slots) {
    if (first_step_.count(s)) continue;
    first_step_.emplace(s, model_->predict(z_T, t, conditions_.condition(s)));
  }
}

Image Restorer::restore(const WeightVector& w) const {
  check_declared(w, conditions_.order());
  bool first = true;
  const PredictFn predict = [&](const Image& z, int t) {
    const bool use_cache = first && !first_step_.empty();
    first = false;
    if (use_cache) {
      bool covered = true;
      for (const auto& [slot, value] : w.entries()) {
        if (value != 0.0 && !first_step_.count(slot)) covered = false;
      }
      if (covered) return combine_predictions(first_step_, conditions_.order(), w);
    }
    return combine(*model_, z, t, conditions_, w);
  };
  Image out = ddim_sample(predict, shape_, options_.sampler, schedule_).clamped01();
  if (options_.color_correct) out = adain_correct(out, conditions_.lq());
  return out;
}

Image restore(const Image& lq, const WeightVector& w, const NoisePredictor& model, const SamplerConfig& sampler,
              const NoiseSchedule& schedule, const RestoreOptions& options) {
  RestoreOptions opts = options;
  opts.sampler = sampler;
  return Restorer(model, schedule, lq, std::move(opts)).restore(w);
}

}  // namespace unires
