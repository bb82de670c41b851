#include "unires/combiner.hpp"
#include "unires/config.hpp"
#include "unires/degradations.hpp"
#include "unires/denoiser.hpp"
#include "unires/image_io.hpp"
#include "unires/manifest.hpp"
#include "unires/parallel.hpp"
#include "unires/quality.hpp"
#include "unires/weight_search.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace unires;

namespace {

// Seed streams for the pieces a command draws from.
constexpr std::uint64_t kSceneStream = 11;
constexpr std::uint64_t kDegradeStream = 12;
constexpr std::uint64_t kTrainSceneStream = 21;
constexpr std::uint64_t kTrainPairStream = 22;
constexpr std::uint64_t kInitStream = 23;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  int threads = 0;
  std::vector<std::string> overrides;
  bool dump_config = false;
  std::string checkpoint;

  std::optional<double> gamma, delta, interval;
  std::string slots;
  std::optional<int> max_negatives;
};

struct CommandError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

RunConfig resolve_config(const Common& c) {
  RunConfig cfg;
  if (!c.config_path.empty()) {
    if (!fs::exists(c.config_path)) throw CommandError("config file not found: " + c.config_path);
    cfg = load_config(c.config_path);
  }
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw CommandError("--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.gamma) cfg.grid.gamma = *c.gamma;
  if (c.delta) cfg.grid.delta = *c.delta;
  if (c.interval) cfg.grid.interval = *c.interval;
  if (!c.slots.empty()) cfg.grid.slots = parse_slot_list(c.slots);
  if (c.max_negatives) cfg.grid.max_negatives = *c.max_negatives;
  if (!c.checkpoint.empty()) cfg.checkpoint = c.checkpoint;
  if (c.seed) cfg.seed = *c.seed;
  cfg.sync();
  cfg.validate();
  return cfg;
}

std::string index_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04zu", i);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CommandError("cannot write " + path.string());
  out << text;
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string shortest(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::vector<Image> hq_scenes(const RunConfig& cfg, std::uint64_t stream, int count) {
  if (!cfg.data_scene_dir.empty()) {
    if (!fs::is_directory(cfg.data_scene_dir)) throw CommandError("scene directory not found: " + cfg.data_scene_dir);
    auto scenes = load_image_dir(cfg.data_scene_dir, cfg.resolution, cfg.resolution);
    if (scenes.empty()) throw CommandError("no images in " + cfg.data_scene_dir);
    return scenes;
  }
  return generate_scenes(derive_seed(cfg.seed, stream), count, cfg.resolution, cfg.resolution);
}

Denoiser load_model(const RunConfig& cfg) {
  if (!fs::exists(cfg.checkpoint)) throw CommandError("checkpoint not found: " + cfg.checkpoint);
  Denoiser model = load_checkpoint(cfg.checkpoint);
  if (model.config().height != cfg.resolution || model.config().width != cfg.resolution) {
    throw CommandError("checkpoint resolution does not match config resolution");
  }
  return model;
}

std::vector<ManifestRecord> load_inputs(const std::string& manifest, const std::string& input) {
  if (!manifest.empty() && !input.empty()) throw CommandError("give either --manifest or --input, not both");
  if (!manifest.empty()) {
    if (!fs::exists(manifest)) throw CommandError("manifest not found: " + manifest);
    auto records = read_manifest(manifest);
    for (const auto& r : records) {
      if (!fs::exists(r.lq_path)) throw CommandError("missing LQ image " + r.lq_path.string());
    }
    return records;
  }
  if (input.empty()) throw CommandError("need --manifest or --input");
  if (!fs::exists(input)) throw CommandError("input image not found: " + input);
  return {ManifestRecord{input, "", "", ""}};
}

Image load_lq(const fs::path& path, const RunConfig& cfg) {
  Image img = load_image(path);
  if (img.height() != cfg.resolution || img.width() != cfg.resolution) {
    throw CommandError(path.string() + " is not at the working resolution " + std::to_string(cfg.resolution));
  }
  return img;
}

/// search.quality with `psnr:hq` / `ssim:hq` meaning the record's own HQ image.
QualityFn quality_for(const RunConfig& cfg, const ManifestRecord& record) {
  const std::string& q = cfg.search_quality;
  if (q == "psnr:hq" || q == "ssim:hq") {
    if (record.hq_path.empty() || !fs::exists(record.hq_path)) {
      throw CommandError("quality " + q + " needs an HQ image for " + record.lq_path.string());
    }
    Image ref = load_image(record.hq_path);
    return q[0] == 'p' ? psnr_against(std::move(ref)) : ssim_against(std::move(ref));
  }
  return make_quality(q);
}

std::vector<WeightVector> search_candidates(const RunConfig& cfg) {
  if (cfg.search_mode == "grid") return enumerate_grid(cfg.grid);
  std::string text = cfg.search_candidates;
  if (text.empty()) throw CommandError("search.mode = reduced needs search.candidates");
  std::vector<std::string> items;
  if (fs::exists(text)) {
    std::ifstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
      if (line.find_first_not_of(" \t\r") != std::string::npos) items.push_back(line);
    }
  } else {
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ';')) items.push_back(item);
  }
  std::vector<WeightVector> out;
  for (const auto& item : items) out.push_back(parse_weights(item));
  if (out.empty()) throw CommandError("no candidate weight vectors in search.candidates");
  return out;
}

WeightVector weights_arg(const std::string& text) {
  for (const auto& name : preset_names()) {
    if (text == name) return preset_weights(name);
  }
  return parse_weights(text);
}

// ---------------------------------------------------------------------------

int cmd_degrade(const RunConfig& cfg, const Common& c) {
  const fs::path out = c.out;
  fs::create_directories(out / "lq");
  fs::create_directories(out / "hq");
  const auto scenes = hq_scenes(cfg, kSceneStream, cfg.data_scenes);
  Rng rng(derive_seed(cfg.seed, kDegradeStream));
  std::vector<DegradedSample> samples;
  if (cfg.data_kind == "complex") {
    samples = make_complex_testset(scenes, cfg.data_count, rng);
  } else if (cfg.data_kind == "tasks") {
    for (TaskId t : kRestorationTasks) {
      auto part = make_task_pairs(scenes, t, cfg.data_count, rng);
      samples.insert(samples.end(), part.begin(), part.end());
    }
  } else {
    samples = make_task_pairs(scenes, *parse_task(cfg.data_kind), cfg.data_count, rng);
  }
  std::vector<ManifestRecord> records(samples.size());
  std::string recipes;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::string id = index_name(i);
    records[i] = {out / "lq" / (id + ".ppm"), out / "hq" / (id + ".ppm"), std::string(task_name(samples[i].dominant)),
                  "r" + id};
    recipes += records[i].recipe_id + "\t" + format_recipe(samples[i].recipe) + "\n";
  }
  parallel_for(samples.size(), resolve_threads(c.threads), [&](std::size_t i) {
    save_image(samples[i].lq, records[i].lq_path);
    save_image(samples[i].hq, records[i].hq_path);
  });
  write_manifest(out / "manifest.tsv", records);
  write_text(out / "recipes.tsv", recipes);
  std::cout << "wrote " << samples.size() << " pairs to " << (out / "manifest.tsv").string() << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, const Common& c) {
  const fs::path out = c.out;
  fs::create_directories(out);
  const auto scenes = hq_scenes(cfg, kTrainSceneStream, cfg.train_scenes);
  Rng rng(derive_seed(cfg.seed, kTrainPairStream));
  std::vector<TrainingPair> data;
  for (TaskId t : kRestorationTasks) {
    for (auto& p : make_task_pairs(scenes, t, cfg.train_pairs_per_task, rng)) {
      data.push_back({std::move(p.lq), std::move(p.hq), t});
    }
  }
  std::cerr << "training on " << data.size() << " pairs for " << cfg.train.steps << " steps\n";
  Denoiser model(cfg.model, cfg.make_schedule());
  model.initialize(derive_seed(cfg.seed, kInitStream));
  const TrainHistory history = train(model, data, cfg.train);
  const fs::path ckpt = cfg.checkpoint;
  if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
  save_checkpoint(model, ckpt);
  std::string log = "step\tloss\n";
  for (std::size_t i = 0; i < history.loss.size(); ++i) log += std::to_string(i + 1) + "\t" + fmt17(history.loss[i]) + "\n";
  write_text(out / "loss.tsv", log);
  std::cout << "parameters " << model.parameter_count() << "\n";
  if (!history.loss.empty()) std::cout << "final_loss " << fmt17(history.loss.back()) << "\n";
  std::cout << "checkpoint " << ckpt.string() << "\n";
  return 0;
}

int cmd_restore(const RunConfig& cfg, const Common& c, const std::string& weights, const std::string& manifest,
                const std::string& input, const std::string& output) {
  const WeightVector w = weights_arg(weights);
  const auto records = load_inputs(manifest, input);
  const Denoiser model = load_model(cfg);
  const NoiseSchedule schedule = cfg.make_schedule();
  const RestoreOptions opts = cfg.restore_options();
  const fs::path out = c.out;
  const bool single = !input.empty();
  if (!single) fs::create_directories(out / "restored");
  std::vector<ManifestRecord> written(records.size());
  parallel_for(records.size(), resolve_threads(c.threads), [&](std::size_t i) {
    const Image lq = load_lq(records[i].lq_path, cfg);
    const Image img = Restorer(model, schedule, lq, opts).restore(w);
    fs::path dst;
    if (single) {
      dst = output.empty() ? out / "restored.ppm" : fs::path(output);
    } else {
      dst = out / "restored" / (index_name(i) + ".ppm");
    }
    save_image(img, dst);
    written[i] = {dst, records[i].hq_path, records[i].kind, records[i].recipe_id};
  });
  if (!single) write_manifest(out / "manifest.tsv", written);
  std::cerr << "restored " << records.size() << " image(s) with " << format_weights(w) << "\n";
  return 0;
}

struct SearchRun {
  std::vector<SearchResult> results;
};

SearchRun run_search(const RunConfig& cfg, const Common& c, const std::vector<ManifestRecord>& records,
                     const std::vector<WeightVector>& candidates, bool keep_scores) {
  const Denoiser model = load_model(cfg);
  RestoreContext ctx;
  ctx.model = &model;
  ctx.schedule = cfg.make_schedule();
  ctx.options = cfg.restore_options();
  ctx.threads = resolve_threads(c.threads);
  ctx.keep_scores = keep_scores;
  SearchRun run;
  run.results.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const Image lq = load_lq(records[i].lq_path, cfg);
    run.results.push_back(reduced_search(lq, candidates, quality_for(cfg, records[i]), ctx));
    std::cerr << "searched " << (i + 1) << "/" << records.size() << " best " << format_weights(run.results.back().best_w)
              << "\n";
  }
  return run;
}

int cmd_search(const RunConfig& cfg, const Common& c, const std::string& manifest, const std::string& input,
               bool full_scores) {
  const auto records = load_inputs(manifest, input);
  const auto candidates = search_candidates(cfg);
  const SearchRun run = run_search(cfg, c, records, candidates, full_scores);
  const fs::path out = c.out;
  fs::create_directories(out / "search");
  std::vector<ManifestRecord> written(records.size());
  std::string summary = "index\tbest_weights\tbest_score\tbest_index\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = run.results[i];
    const fs::path img = out / "search" / (index_name(i) + ".ppm");
    save_image(r.best_image, img);
    write_text(out / "search" / (index_name(i) + ".txt"), format_search_result(r, full_scores ? &candidates : nullptr));
    written[i] = {img, records[i].hq_path, records[i].kind, records[i].recipe_id};
    summary += index_name(i) + "\t" + format_weights(r.best_w) + "\t" + fmt17(r.best_score) + "\t" +
               std::to_string(r.best_index) + "\n";
  }
  write_manifest(out / "manifest.tsv", written);
  write_text(out / "search.tsv", summary);
  std::cout << summary;
  return 0;
}

int cmd_grid(const RunConfig& cfg, bool list) {
  const auto grid = enumerate_grid(cfg.grid);
  std::cout << grid.size() << "\n";
  if (list) {
    for (const auto& w : grid) {
      std::string line;
      for (const auto& [slot, v] : w.entries()) {
        if (!line.empty()) line += ',';
        line += std::string(slot_name(slot)) + "=" + shortest(v);
      }
      std::cout << line << "\n";
    }
  }
  return 0;
}

int cmd_eval(const RunConfig&, const Common& c, const std::string& manifest) {
  if (manifest.empty()) throw CommandError("eval needs --manifest");
  if (!fs::exists(manifest)) throw CommandError("manifest not found: " + manifest);
  const auto records = read_manifest(manifest);
  struct Row {
    double psnr = 0, ssim = 0, proxy = 0;
  };
  std::vector<Row> rows(records.size());
  parallel_for(records.size(), resolve_threads(c.threads), [&](std::size_t i) {
    const Image img = load_image(records[i].lq_path);
    const Image ref = load_image(records[i].hq_path);
    rows[i] = {psnr(img, ref), ssim(img, ref), sharpness_noise_proxy(img).value};
  });
  std::ostringstream table;
  table << "index\tkind\tpsnr\tssim\tproxy\n";
  nlohmann::ordered_json json;
  json["metrics_note"] = "PSNR/SSIM/proxy on synthetic data; not comparable to learned IQA metrics";
  json["records"] = nlohmann::ordered_json::array();
  std::map<std::string, std::array<double, 4>> by_kind;  // psnr, ssim, proxy, n
  std::array<double, 4> total{};
  char buf[160];
  for (std::size_t i = 0; i < records.size(); ++i) {
    const Row& r = rows[i];
    std::snprintf(buf, sizeof buf, "%s\t%s\t%.4f\t%.6f\t%.6f\n", index_name(i).c_str(), records[i].kind.c_str(), r.psnr,
                  r.ssim, r.proxy);
    table << buf;
    json["records"].push_back({{"index", i},
                               {"image", records[i].lq_path.generic_string()},
                               {"kind", records[i].kind},
                               {"recipe_id", records[i].recipe_id},
                               {"psnr", r.psnr},
                               {"ssim", r.ssim},
                               {"proxy", r.proxy}});
    for (auto* acc : {&by_kind[records[i].kind], &total}) {
      (*acc)[0] += r.psnr;
      (*acc)[1] += r.ssim;
      (*acc)[2] += r.proxy;
      (*acc)[3] += 1;
    }
  }
  auto mean_line = [&](const std::string& label, const std::array<double, 4>& a) {
    std::snprintf(buf, sizeof buf, "mean\t%s\t%.4f\t%.6f\t%.6f\n", label.c_str(), a[0] / a[3], a[1] / a[3], a[2] / a[3]);
    table << buf;
    json["means"][label] = {{"psnr", a[0] / a[3]}, {"ssim", a[1] / a[3]}, {"proxy", a[2] / a[3]}, {"count", a[3]}};
  };
  if (!records.empty()) {
    for (const auto& [kind, a] : by_kind) mean_line(kind, a);
    mean_line("all", total);
  }
  const fs::path out = c.out;
  fs::create_directories(out);
  write_text(out / "eval.txt", table.str());
  write_text(out / "eval.json", json.dump(2) + "\n");
  std::cout << table.str();
  return 0;
}

int cmd_calibrate(const RunConfig& cfg, const Common& c, const std::string& manifest) {
  const auto records = load_inputs(manifest, "");
  const auto candidates = enumerate_grid(cfg.grid);
  const SearchRun run = run_search(cfg, c, records, candidates, false);
  std::vector<WeightVector> optimal;
  for (const auto& r : run.results) optimal.push_back(r.best_w);
  const auto top = tally_optimal(optimal, std::size_t(cfg.calibrate_top_k));
  std::string list;
  std::string table = "rank\tcount\tweights\n";
  for (std::size_t i = 0; i < top.size(); ++i) {
    list += format_weights(top[i].w) + "\n";
    table += std::to_string(i + 1) + "\t" + std::to_string(top[i].count) + "\t" + format_weights(top[i].w) + "\n";
  }
  const fs::path out = c.out;
  fs::create_directories(out);
  write_text(out / "candidates.txt", list);
  write_text(out / "calibration.tsv", table);
  std::cout << table;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"unires: composable diffusion restoration experts"};
  app.require_subcommand(0, 1);
  Common c;
  auto add_common = [&](CLI::App* a) {
    a->add_option("--config", c.config_path, "Config file (key = value lines)");
    a->add_option("--seed", c.seed, "Seed, overrides the config file");
    a->add_option("--out", c.out, "Output directory");
    a->add_option("--threads", c.threads, "Worker threads (default UNIRES_THREADS, then 1)");
    a->add_option("--set", c.overrides, "Config override key=value (repeatable)");
    a->add_option("--checkpoint", c.checkpoint, "Model checkpoint path");
    a->add_flag("--dump-config", c.dump_config, "Print the resolved config and exit");
  };
  auto add_grid = [&](CLI::App* a) {
    a->add_option("--gamma", c.gamma, "Grid lower bound");
    a->add_option("--delta", c.delta, "Grid upper bound");
    a->add_option("--interval", c.interval, "Grid spacing");
    a->add_option("--slots", c.slots, "Comma-separated grid slots");
    a->add_option("--max-negatives", c.max_negatives, "Maximum negative entries");
  };
  add_common(&app);

  std::string weights, manifest, input, output;
  bool list = false, full_scores = false;

  auto* degrade = app.add_subcommand("degrade", "Generate LQ/HQ pairs and a manifest");
  auto* train_cmd = app.add_subcommand("train", "Train the conditional denoiser");
  auto* restore_cmd = app.add_subcommand("restore", "Restore with fixed combination weights");
  restore_cmd->add_option("--weights", weights, "SLOT=value,... or a preset name")->required();
  restore_cmd->add_option("--manifest", manifest, "Manifest of LQ images");
  restore_cmd->add_option("--input", input, "Single LQ image");
  restore_cmd->add_option("--output", output, "Output path for --input");
  auto* search = app.add_subcommand("search", "Per-image weight search");
  search->add_option("--manifest", manifest, "Manifest of LQ images");
  search->add_option("--input", input, "Single LQ image");
  search->add_flag("--scores", full_scores, "Include the full score table in each record");
  add_grid(search);
  auto* grid = app.add_subcommand("grid", "Print the grid size");
  grid->add_flag("--list", list, "Also print every weight vector");
  add_grid(grid);
  auto* eval = app.add_subcommand("eval", "PSNR/SSIM/proxy over a manifest");
  eval->add_option("--manifest", manifest, "Manifest to score (lq_path against hq_path)");
  auto* calibrate = app.add_subcommand("calibrate", "Tally optimal grid vectors on a calibration split");
  calibrate->add_option("--manifest", manifest, "Calibration manifest")->required();
  add_grid(calibrate);
  for (auto* sub : {degrade, train_cmd, restore_cmd, search, grid, eval, calibrate}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const RunConfig cfg = resolve_config(c);
    if (c.dump_config) {
      std::cout << dump_config(cfg);
      return 0;
    }
    if (*degrade) return cmd_degrade(cfg, c);
    if (*train_cmd) return cmd_train(cfg, c);
    if (*restore_cmd) return cmd_restore(cfg, c, weights, manifest, input, output);
    if (*search) return cmd_search(cfg, c, manifest, input, full_scores);
    if (*grid) return cmd_grid(cfg, list);
    if (*eval) return cmd_eval(cfg, c, manifest);
    if (*calibrate) return cmd_calibrate(cfg, c, manifest);
    std::cout << app.help();
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
