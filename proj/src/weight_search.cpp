#include "unires/weight_search.hpp"

#include "unires/degradations.hpp"
#include "unires/parallel.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace unires {

namespace {

double clean_lattice_value(double v) { return std::round(v * 1e12) / 1e12; }

void enumerate_rec(const GridSpec& spec, const std::vector<double>& values, std::vector<double>& current,
                   double partial, int negatives, std::vector<WeightVector>& out) {
  const int k = spec.k();
  const int depth = int(current.size());
  if (depth == k) {
    double s = 0.0;
    for (double v : current) s += v;
    if (std::abs(s - 1.0) > kGridSumTolerance) return;
    std::vector<WeightVector::Entry> entries;
    entries.reserve(k);
    for (int i = 0; i < k; ++i) entries.emplace_back(spec.slots[i], current[i]);
    out.emplace_back(std::move(entries), kGridSumTolerance);
    return;
  }
  const int remaining = k - depth - 1;
  for (double v : values) {
    const int neg = negatives + (v < kGridNegativeThreshold ? 1 : 0);
    if (neg > spec.max_negatives) continue;
    const double p = partial + v;
    // Remaining entries are bounded by [gamma, delta]; prune branches that cannot reach one.
    if (p + remaining * spec.gamma > 1.0 + kGridSumTolerance) continue;
    if (p + remaining * spec.delta < 1.0 - kGridSumTolerance) continue;
    current.push_back(v);
    enumerate_rec(spec, values, current, p, neg, out);
    current.pop_back();
  }
}

double mean_squared_gradient(const Image& img) {
  double total = 0.0;
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        const double gx = 0.5 * (img.clamped(c, y, x + 1) - img.clamped(c, y, x - 1));
        const double gy = 0.5 * (img.clamped(c, y + 1, x) - img.clamped(c, y - 1, x));
        total += gx * gx + gy * gy;
      }
    }
  }
  return total / double(img.size());
}

/// Share of non-DC spectral energy of the channel-mean image above a
/// radial frequency of 0.25 cycles/pixel.
double high_frequency_share(const Image& img) {
  const int h = img.height();
  const int w = img.width();
  Eigen::MatrixXd gray = Eigen::MatrixXd::Zero(h, w);
  for (int c = 0; c < img.channels(); ++c) gray += img.plane(c).matrix().cast<double>();
  gray /= img.channels();
  gray.array() -= gray.mean();

  Eigen::FFT<double> fft;
  Eigen::MatrixXcd rows(h, w);
  for (int y = 0; y < h; ++y) {
    Eigen::VectorXd line = gray.row(y).transpose();
    Eigen::VectorXcd spec;
    fft.fwd(spec, line);
    rows.row(y) = spec.transpose();
  }
  Eigen::MatrixXcd full(h, w);
  for (int x = 0; x < w; ++x) {
    Eigen::VectorXcd line = rows.col(x);
    Eigen::VectorXcd spec;
    fft.fwd(spec, line);
    full.col(x) = spec;
  }
  double total = 0.0;
  double high = 0.0;
  for (int y = 0; y < h; ++y) {
    const double fy = double(y <= h / 2 ? y : y - h) / h;
    for (int x = 0; x < w; ++x) {
      if (x == 0 && y == 0) continue;
      const double fx = double(x <= w / 2 ? x : x - w) / w;
      const double e = std::norm(full(y, x));
      total += e;
      if (std::hypot(fx, fy) > 0.25) high += e;
    }
  }
  return total > 0.0 ? high / total : 0.0;
}

}  // namespace

int GridSpec::levels() const { return int(std::llround((delta - gamma) / interval)) + 1; }

void GridSpec::validate() const {
  if (!(interval > 0.0)) throw std::invalid_argument("grid interval must be positive");
  if (gamma > delta) throw std::invalid_argument("grid gamma must not exceed delta");
  const double steps = (delta - gamma) / interval;
  if (std::abs(steps - std::round(steps)) > 1e-9) {
    throw std::invalid_argument("grid range is not a whole number of intervals");
  }
  if (slots.empty()) throw std::invalid_argument("grid has no slots");
  for (std::size_t i = 0; i < slots.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (slots[i] == slots[j]) throw std::invalid_argument("grid slot listed twice");
    }
  }
  if (max_negatives < 0) throw std::invalid_argument("max_negatives must be nonnegative");
}

std::vector<WeightVector> enumerate_grid(const GridSpec& spec) {
  spec.validate();
  std::vector<double> values;
  for (int i = 0; i < spec.levels(); ++i) values.push_back(clean_lattice_value(spec.gamma + i * spec.interval));
  std::vector<WeightVector> out;
  std::vector<double> current;
  current.reserve(spec.slots.size());
  enumerate_rec(spec, values, current, 0.0, 0, out);
  return out;
}

SearchResult reduced_search(const Image& lq, const std::vector<WeightVector>& candidates, const QualityFn& quality,
                            const RestoreContext& ctx) {
  if (candidates.empty()) throw std::invalid_argument("search: no candidates");
  if (!ctx.model) throw std::invalid_argument("search: no model");
  if (!quality) throw std::invalid_argument("search: no quality function");

  Restorer restorer(*ctx.model, ctx.schedule, lq, ctx.options);
  for (const auto& w : candidates) check_declared(w, restorer.conditions().order());
  if (candidates.size() > 1) {
    std::vector<TaskSlot> used;
    for (TaskSlot s : restorer.conditions().order()) {
      for (const auto& w : candidates) {
        if (w.weight(s) != 0.0) {
          used.push_back(s);
          break;
        }
      }
    }
    restorer.prime_first_step(used);
  }

  std::vector<double> scores(candidates.size());
  parallel_for(candidates.size(), ctx.threads,
               [&](std::size_t i) { scores[i] = quality(restorer.restore(candidates[i])); });

  SearchResult result;
  result.evaluated = candidates.size();
  bool found = false;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) {
      ++result.skipped;
      continue;
    }
    if (!found || scores[i] > result.best_score) {
      found = true;
      result.best_score = scores[i];
      result.best_index = i;
    }
  }
  if (!found) throw std::runtime_error("search: quality is non-finite for every candidate");
  if (result.skipped > 0) {
    std::cerr << "warning: skipped " << result.skipped << " candidate(s) with non-finite quality\n";
  }
  result.best_w = candidates[result.best_index];
  result.best_image = restorer.restore(result.best_w);
  if (ctx.keep_scores) result.scores = std::move(scores);
  return result;
}

SearchResult grid_search(const Image& lq, const GridSpec& spec, const QualityFn& quality, const RestoreContext& ctx) {
  const auto grid = enumerate_grid(spec);
  if (grid.empty()) throw std::invalid_argument("search: grid is empty");
  return reduced_search(lq, grid, quality, ctx);
}

std::string format_search_result(const SearchResult& result, const std::vector<WeightVector>* candidates) {
  std::ostringstream out;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", result.best_score);
  out << "best_weights " << format_weights(result.best_w) << '\n';
  out << "best_score " << buf << '\n';
  out << "best_index " << result.best_index << '\n';
  out << "evaluated " << result.evaluated << '\n';
  out << "skipped " << result.skipped << '\n';
  if (result.scores) {
    out << "scores " << result.scores->size() << '\n';
    for (std::size_t i = 0; i < result.scores->size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", (*result.scores)[i]);
      out << i << '\t' << buf;
      if (candidates && i < candidates->size()) out << '\t' << format_weights((*candidates)[i]);
      out << '\n';
    }
  }
  return out.str();
}

WeightVector preset_weights(std::string_view name) {
  if (name == "average_optimal") {
    return WeightVector({{TaskSlot::BR, 0.07},
                         {TaskSlot::SR, 0.12},
                         {TaskSlot::MD, 0.07},
                         {TaskSlot::DD, 0.06},
                         {TaskSlot::DN, -0.15},
                         {TaskSlot::DownLQ, 0.83}});
  }
  if (name == "most_popular") return WeightVector({{TaskSlot::DN, -0.2}, {TaskSlot::DownLQ, 1.2}});
  throw std::invalid_argument("unknown weight preset '" + std::string(name) + "'");
}

std::vector<std::string> preset_names() { return {"average_optimal", "most_popular"}; }

WeightVector project_to_unit_sum(std::vector<WeightVector::Entry> entries) {
  if (entries.empty()) throw std::invalid_argument("cannot project an empty weight vector");
  double s = 0.0;
  for (const auto& e : entries) {
    if (!std::isfinite(e.second)) throw std::invalid_argument("predicted weight is not finite");
    s += e.second;
  }
  const double shift = (1.0 - s) / double(entries.size());
  for (auto& e : entries) e.second += shift;
  return WeightVector(std::move(entries));
}

DegradationFeatures degradation_features(const Image& img) {
  DegradationFeatures f;
  f.noise = std::min(1.0, noise_std_estimate(img) / 0.05);
  const double energy = mean_squared_gradient(img);
  f.blur = energy > 0.0 ? std::min(1.0, mean_squared_gradient(gaussian_blur(img, 1.0)) / energy) : 1.0;
  const double white_share = 1.0 - std::numbers::pi / 16.0;
  f.resolution_deficit = std::clamp(1.0 - high_frequency_share(img) / white_share, 0.0, 1.0);
  return f;
}

std::vector<WeightVector::Entry> FeatureLookupPredictor::raw_predict(const Image& lq) const {
  const DegradationFeatures f = degradation_features(lq);
  const bool noise_dominant = f.noise >= f.blur && f.noise >= f.resolution_deficit;
  return preset_weights(noise_dominant ? "most_popular" : "average_optimal").entries();
}

WeightVector predict_weights(const Image& lq, const WeightPredictor* predictor) {
  if (!predictor) throw std::invalid_argument("no weight predictor registered");
  return project_to_unit_sum(predictor->raw_predict(lq));
}

std::vector<TallyEntry> tally_optimal(const std::vector<WeightVector>& optimal, std::size_t k) {
  std::vector<TallyEntry> tally;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < optimal.size(); ++i) {
    const std::string key = format_weights(optimal[i]);
    const auto it = index.find(key);
    if (it == index.end()) {
      index.emplace(key, tally.size());
      tally.push_back({optimal[i], 1, i});
    } else {
      ++tally[it->second].count;
    }
  }
  std::stable_sort(tally.begin(), tally.end(), [](const TallyEntry& a, const TallyEntry& b) {
    return a.count != b.count ? a.count > b.count : a.first_seen < b.first_seen;
  });
  if (tally.size() > k) tally.resize(k);
  return tally;
}

}  // namespace unires
