#include "unires/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace unires {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
std::string fmt(int v) { return std::to_string(v); }
std::string fmt(std::uint64_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }
std::string fmt(const std::string& v) { return v; }

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T v{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ConfigError("bad value '" + std::string(text) + "' for " + std::string(key));
  }
  return v;
}

void parse_into(std::string_view key, std::string_view text, double& out) { out = parse_number<double>(key, text); }
void parse_into(std::string_view key, std::string_view text, int& out) { out = parse_number<int>(key, text); }
void parse_into(std::string_view key, std::string_view text, std::uint64_t& out) {
  out = parse_number<std::uint64_t>(key, text);
}
void parse_into(std::string_view key, std::string_view text, bool& out) {
  if (text == "true" || text == "1") {
    out = true;
  } else if (text == "false" || text == "0") {
    out = false;
  } else {
    throw ConfigError("bad boolean '" + std::string(text) + "' for " + std::string(key));
  }
}
void parse_into(std::string_view, std::string_view text, std::string& out) { out = std::string(text); }

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view, std::string_view)> set;
};

template <typename Access>
Field field(Access access) {
  return {[access](const RunConfig& c) { return fmt(access(const_cast<RunConfig&>(c))); },
          [access](RunConfig& c, std::string_view key, std::string_view text) { parse_into(key, text, access(c)); }};
}

#define UNIRES_FIELD(key, member) \
  { key, field([](RunConfig& c) -> auto& { return c.member; }) }

const std::map<std::string, Field, std::less<>>& fields() {
  static const std::map<std::string, Field, std::less<>> table = {
      UNIRES_FIELD("seed", seed),
      UNIRES_FIELD("resolution", resolution),
      UNIRES_FIELD("schedule.steps", schedule_steps),
      UNIRES_FIELD("schedule.beta_start", beta_start),
      UNIRES_FIELD("schedule.beta_end", beta_end),
      UNIRES_FIELD("sampler.ddim_steps", sampler.ddim_steps),
      UNIRES_FIELD("sampler.eta", sampler.eta),
      UNIRES_FIELD("model.hidden", model.hidden),
      UNIRES_FIELD("model.time_dim", model.time_dim),
      UNIRES_FIELD("model.unshuffle", model.unshuffle),
      UNIRES_FIELD("model.data_mean", model.data_mean),
      UNIRES_FIELD("model.data_std", model.data_std),
      UNIRES_FIELD("model.cond_std", model.cond_std),
      UNIRES_FIELD("model.checkpoint", checkpoint),
      UNIRES_FIELD("train.steps", train.steps),
      UNIRES_FIELD("train.batch", train.batch_size),
      UNIRES_FIELD("train.lr", train.learning_rate),
      UNIRES_FIELD("train.adam_beta1", train.adam_beta1),
      UNIRES_FIELD("train.adam_beta2", train.adam_beta2),
      UNIRES_FIELD("train.adam_epsilon", train.adam_epsilon),
      UNIRES_FIELD("train.p_sr", train.task_probabilities[0]),
      UNIRES_FIELD("train.p_md", train.task_probabilities[1]),
      UNIRES_FIELD("train.p_dd", train.task_probabilities[2]),
      UNIRES_FIELD("train.p_dn", train.task_probabilities[3]),
      UNIRES_FIELD("train.drop_lq", train.lq_drop_rate),
      UNIRES_FIELD("train.drop_task", train.task_drop_rate),
      UNIRES_FIELD("train.positive_prompt", train.positive_prompt_rate),
      UNIRES_FIELD("train.negative_prompt", train.negative_prompt_rate),
      UNIRES_FIELD("train.augment", train.augment),
      UNIRES_FIELD("train.log_every", train.log_every),
      {"train.weighting",
       {[](const RunConfig& c) { return std::string(weighting_name(c.train.weighting)); },
        [](RunConfig& c, std::string_view, std::string_view text) { c.train.weighting = parse_weighting(text); }}},
      UNIRES_FIELD("train.scenes", train_scenes),
      UNIRES_FIELD("train.pairs_per_task", train_pairs_per_task),
      UNIRES_FIELD("data.kind", data_kind),
      UNIRES_FIELD("data.scenes", data_scenes),
      UNIRES_FIELD("data.count", data_count),
      UNIRES_FIELD("data.scene_dir", data_scene_dir),
      UNIRES_FIELD("grid.gamma", grid.gamma),
      UNIRES_FIELD("grid.delta", grid.delta),
      UNIRES_FIELD("grid.interval", grid.interval),
      UNIRES_FIELD("grid.max_negatives", grid.max_negatives),
      {"grid.slots",
       {[](const RunConfig& c) { return format_slot_list(c.grid.slots); },
        [](RunConfig& c, std::string_view, std::string_view text) { c.grid.slots = parse_slot_list(text); }}},
      UNIRES_FIELD("search.quality", search_quality),
      UNIRES_FIELD("search.mode", search_mode),
      UNIRES_FIELD("search.candidates", search_candidates),
      UNIRES_FIELD("calibrate.top_k", calibrate_top_k),
      UNIRES_FIELD("restore.color_correct", restore_color_correct),
      UNIRES_FIELD("restore.downlq_factor", restore_downlq_factor),
      UNIRES_FIELD("restore.quality_prompts", restore_quality_prompts),
  };
  return table;
}

#undef UNIRES_FIELD

}  // namespace

NoiseSchedule RunConfig::make_schedule() const { return NoiseSchedule::linear(schedule_steps, beta_start, beta_end); }

RestoreOptions RunConfig::restore_options() const {
  RestoreOptions opts;
  opts.sampler = sampler;
  opts.sampler.seed = seed;
  opts.color_correct = restore_color_correct;
  opts.combine.downlq_factor = restore_downlq_factor;
  opts.combine.quality_prompts = restore_quality_prompts;
  return opts;
}

void RunConfig::sync() {
  sampler.seed = seed;
  train.seed = seed;
  model.height = resolution;
  model.width = resolution;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (resolution < 8) fail("resolution must be at least 8");
  if (schedule_steps < 1) fail("schedule.steps must be positive");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) fail("need 0 < beta_start <= beta_end < 1");
  if (sampler.ddim_steps < 1 || sampler.ddim_steps > schedule_steps) fail("sampler.ddim_steps must be in 1..T");
  if (sampler.eta < 0.0) fail("sampler.eta must be nonnegative");
  double p = 0.0;
  for (double v : train.task_probabilities) {
    if (v < 0.0) fail("task probabilities must be nonnegative");
    p += v;
  }
  if (std::abs(p - 1.0) > 1e-9) fail("task probabilities must sum to 1, got " + fmt(p));
  for (double r : {train.lq_drop_rate, train.task_drop_rate, train.positive_prompt_rate, train.negative_prompt_rate}) {
    if (r < 0.0 || r > 1.0) fail("rates must lie in [0,1]");
  }
  if (train.positive_prompt_rate + train.negative_prompt_rate > 1.0) fail("prompt rates exceed 1");
  if (train.steps < 0 || train.batch_size < 1) fail("train.steps must be >= 0 and train.batch >= 1");
  if (train_scenes < 1 || train_pairs_per_task < 1) fail("training set sizes must be positive");
  if (data_scenes < 1 || data_count < 1) fail("data.scenes and data.count must be positive");
  if (data_kind != "complex" && data_kind != "tasks") {
    try {
      const auto t = parse_task(data_kind);
      if (!t || *t == TaskId::Positive || *t == TaskId::Negative) fail("");
    } catch (const std::exception&) {
      fail("data.kind must be complex, tasks, SR, MD, DD or DN");
    }
  }
  try {
    grid.validate();
  } catch (const std::exception& e) {
    fail(e.what());
  }
  if (search_mode != "grid" && search_mode != "reduced") fail("search.mode must be grid or reduced");
  if (calibrate_top_k < 1) fail("calibrate.top_k must be positive");
  if (restore_downlq_factor != 2 && restore_downlq_factor != 4 && restore_downlq_factor != 8 &&
      restore_downlq_factor != 16) {
    fail("restore.downlq_factor must be 2, 4, 8 or 16");
  }
  DenoiserConfig m = model;
  m.height = resolution;
  m.width = resolution;
  try {
    m.validate();
  } catch (const std::exception& e) {
    fail(e.what());
  }
}

std::map<std::string, std::string> config_entries(const RunConfig& config) {
  std::map<std::string, std::string> out;
  for (const auto& [key, f] : fields()) out.emplace(key, f.get(config));
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [key, f] : fields()) keys.push_back(key);
  return keys;
}

void set_config_value(RunConfig& config, std::string_view key, std::string_view value) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
  try {
    it->second.set(config, key, trim(value));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string(key) + ": " + e.what());
  }
  config.sync();
}

RunConfig parse_config(std::string_view text, RunConfig base) {
  std::istringstream in{std::string(text)};
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    std::string_view s = line;
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(number) + ": expected key = value");
    }
    set_config_value(base, trim(s.substr(0, eq)), s.substr(eq + 1));
  }
  base.sync();
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string dump_config(const RunConfig& config) {
  std::string out;
  for (const auto& [key, value] : config_entries(config)) out += key + " = " + value + "\n";
  return out;
}

bool equivalent(const RunConfig& a, const RunConfig& b) { return config_entries(a) == config_entries(b); }

std::vector<TaskSlot> parse_slot_list(std::string_view text) {
  std::vector<TaskSlot> out;
  std::string_view rest = trim(text);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    out.push_back(parse_slot(trim(rest.substr(0, comma))));
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
  }
  if (out.empty()) throw ConfigError("empty slot list");
  return out;
}

std::string format_slot_list(const std::vector<TaskSlot>& slots) {
  std::string out;
  for (TaskSlot s : slots) {
    if (!out.empty()) out += ',';
    out += slot_name(s);
  }
  return out;
}

}  // namespace unires
