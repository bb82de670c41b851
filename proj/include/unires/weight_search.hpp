#pragma once

#include "unires/combiner.hpp"
#include "unires/image.hpp"
#include "unires/quality.hpp"

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace unires {

/// Lattice [gamma, delta]^K with spacing `interval`, restricted to vectors
/// summing to one with at most `max_negatives` negative entries.
struct GridSpec {
  double gamma = -0.2;
  double delta = 1.2;
  double interval = 0.2;
  std::vector<TaskSlot> slots = {kDefaultSlots.begin(), kDefaultSlots.end()};
  int max_negatives = 1;

  int k() const { return int(slots.size()); }
  /// Lattice points per axis.
  int levels() const;
  void validate() const;
};

inline constexpr double kGridSumTolerance = 1e-5;
inline constexpr double kGridNegativeThreshold = -1e-5;

/// Valid lattice vectors in lexicographic order of entry values. Every
/// vector lists all K slots, zeros included.
std::vector<WeightVector> enumerate_grid(const GridSpec& spec);

/// What a search evaluates candidates with.
struct RestoreContext {
  const NoisePredictor* model = nullptr;
  NoiseSchedule schedule = NoiseSchedule::linear();
  RestoreOptions options;
  int threads = 1;
  bool keep_scores = true;
};

struct SearchResult {
  WeightVector best_w;
  double best_score = 0.0;
  Image best_image;
  std::size_t best_index = 0;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;               // candidates whose score was not finite
  std::optional<std::vector<double>> scores;  // per candidate, enumeration order
};

/// argmax_w Q(restore(lq, w)) over `candidates`, all sharing the sampler
/// seed. Ties go to the earliest candidate; non-finite scores are skipped
/// with a warning on stderr and an error if nothing is left.
SearchResult reduced_search(const Image& lq, const std::vector<WeightVector>& candidates, const QualityFn& quality,
                            const RestoreContext& ctx);

SearchResult grid_search(const Image& lq, const GridSpec& spec, const QualityFn& quality, const RestoreContext& ctx);

/// Structured text record of a search result.
std::string format_search_result(const SearchResult& result, const std::vector<WeightVector>* candidates = nullptr);

/// `average_optimal` or `most_popular`.
WeightVector preset_weights(std::string_view name);
std::vector<std::string> preset_names();

/// Adds (1 - sum) / n to each of the n entries.
WeightVector project_to_unit_sum(std::vector<WeightVector::Entry> entries);

/// Hand-crafted degradation indicators, each roughly in [0,1].
struct DegradationFeatures {
  double noise = 0.0;               // MAD noise std, saturating at 0.05
  double blur = 0.0;                // gradient energy kept after a sigma-1 blur
  double resolution_deficit = 0.0;  // 1 - high-frequency spectral share relative to white noise
};

DegradationFeatures degradation_features(const Image& img);

class WeightPredictor {
 public:
  virtual ~WeightPredictor() = default;
  /// Raw prediction; need not sum to one.
  virtual std::vector<WeightVector::Entry> raw_predict(const Image& lq) const = 0;
};

/// Picks most_popular when the noise feature dominates, average_optimal otherwise.
class FeatureLookupPredictor final : public WeightPredictor {
 public:
  std::vector<WeightVector::Entry> raw_predict(const Image& lq) const override;
};

class ConstantWeightPredictor final : public WeightPredictor {
 public:
  explicit ConstantWeightPredictor(WeightVector w) : w_(std::move(w)) {}
  std::vector<WeightVector::Entry> raw_predict(const Image&) const override { return w_.entries(); }

 private:
  WeightVector w_;
};

/// Throws when `predictor` is null. The result always sums to one.
WeightVector predict_weights(const Image& lq, const WeightPredictor* predictor);

struct TallyEntry {
  WeightVector w;
  int count = 0;
  std::size_t first_seen = 0;
};

/// Optimal vectors ranked by frequency (then first appearance), top `k`.
std::vector<TallyEntry> tally_optimal(const std::vector<WeightVector>& optimal, std::size_t k);

}  // namespace unires
