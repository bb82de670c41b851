#pragma once

#include "unires/denoiser.hpp"
#include "unires/schedule.hpp"
#include "unires/weight_search.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace unires {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Everything a CLI run depends on. Stored as flat `section.key = value`
/// text; `seed` and `resolution` have no section.
struct RunConfig {
  std::uint64_t seed = 0;
  int resolution = 64;

  int schedule_steps = NoiseSchedule::kDefaultSteps;
  double beta_start = NoiseSchedule::kDefaultBetaStart;
  double beta_end = NoiseSchedule::kDefaultBetaEnd;

  SamplerConfig sampler;  // sampler.seed follows `seed`
  DenoiserConfig model;   // height/width follow `resolution`
  TrainConfig train;      // train.seed follows `seed`
  int train_scenes = 400;
  int train_pairs_per_task = 400;

  std::string data_kind = "complex";  // complex | tasks | SR | MD | DD | DN
  int data_scenes = 40;
  int data_count = 40;  // per task for task sets, total for complex
  std::string data_scene_dir;  // optional HQ import directory

  GridSpec grid;
  std::string search_quality = "proxy";
  std::string search_mode = "grid";  // grid | reduced
  std::string search_candidates;     // weight-vector list for reduced search
  int calibrate_top_k = 8;

  bool restore_color_correct = true;
  int restore_downlq_factor = 4;
  bool restore_quality_prompts = false;

  std::string checkpoint = "model.ckpt";

  NoiseSchedule make_schedule() const;
  RestoreOptions restore_options() const;
  /// Copies `seed` and `resolution` into the nested configs.
  void sync();
  /// Throws ConfigError on inconsistent values.
  void validate() const;
};

/// All keys with their values in canonical text form.
std::map<std::string, std::string> config_entries(const RunConfig& config);
std::vector<std::string> config_keys();

/// Sets one key; throws ConfigError for unknown keys or bad values.
void set_config_value(RunConfig& config, std::string_view key, std::string_view value);

/// `key = value` lines; '#' starts a comment.
RunConfig parse_config(std::string_view text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});
std::string dump_config(const RunConfig& config);

bool equivalent(const RunConfig& a, const RunConfig& b);

std::vector<TaskSlot> parse_slot_list(std::string_view text);
std::string format_slot_list(const std::vector<TaskSlot>& slots);

}  // namespace unires
