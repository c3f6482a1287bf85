#pragma once

// Augmentation analysis: margin-derivative scores per augmentation type,
// score/robustness correlation, anchor-type selection, and accuracy under the
// plain, ensemble and corrected inference modes.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "agc/agc.hpp"
#include "agc/dataset.hpp"
#include "agc/error.hpp"
#include "agc/parallel.hpp"
#include "agc/sphere.hpp"
#include "agc/zero_shot.hpp"

namespace agc {

enum class Intensity { Weak, Medium, Strong, Unspecified };

constexpr const char* to_string(Intensity i) noexcept {
  switch (i) {
    case Intensity::Weak: return "weak";
    case Intensity::Medium: return "medium";
    case Intensity::Strong: return "strong";
    case Intensity::Unspecified: return "unspecified";
  }
  return "unspecified";
}

inline std::optional<Intensity> parse_intensity(const std::string& s) {
  if (s == "weak") return Intensity::Weak;
  if (s == "medium") return Intensity::Medium;
  if (s == "strong") return Intensity::Strong;
  if (s == "unspecified") return Intensity::Unspecified;
  return std::nullopt;
}

/// Views of one augmentation type at one intensity, aligned with the samples
/// they were generated from.
template <std::floating_point T>
struct AugGroup {
  std::string name;
  Intensity intensity = Intensity::Unspecified;
  std::vector<std::vector<UnitFeature<T>>> views;

  static AugGroup from_dataset(std::string name, Intensity intensity, const Dataset<T>& data) {
    AugGroup g{std::move(name), intensity, {}};
    g.views.reserve(data.samples.size());
    for (const auto& s : data.samples) g.views.push_back(s.views);
    return g;
  }
};

struct AugScore {
  double mean_score = 0.0;
  std::size_t samples_used = 0;
  std::size_t samples_skipped = 0;   // every tangent degenerate
  std::size_t degenerate_views = 0;
};

struct AugScoreRow {
  std::string name;
  double mean_score = 0.0;
  double robust_accuracy = 0.0;
  std::size_t n_samples = 0;
};

/// Mean over samples of the mean over views of the margin derivative along
/// u(z, a_i). Degenerate tangents are skipped and counted; samples with no
/// usable view are excluded. Per-sample means are reduced in sample order so
/// the result does not depend on `threads`.
template <std::floating_point T>
AugScore score_augmentation(std::span<const Sample<T>> samples, const AugGroup<T>& group,
                            const TextBank<T>& bank, std::size_t threads = 1) {
  if (group.views.size() != samples.size()) {
    throw Error(ErrorCode::DimMismatch, "augmentation group is not aligned with the samples");
  }
  struct PerSample {
    double mean = 0.0;
    std::size_t valid = 0;
    std::size_t degenerate = 0;
  };
  std::vector<PerSample> per(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    const auto& s = samples[i];
    double acc = 0.0;
    for (const auto& a : group.views[i]) {
      require_same_dim(a.dim(), s.original.dim(), "score_augmentation");
      try {
        const auto u = tangent_direction(s.original, a);
        acc += margin_directional_derivative(s.original, u, bank, s.label);
        ++per[i].valid;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateDirection) throw;
        ++per[i].degenerate;
      }
    }
    if (per[i].valid > 0) per[i].mean = acc / static_cast<double>(per[i].valid);
  });

  AugScore out;
  double total = 0.0;
  for (const auto& p : per) {
    out.degenerate_views += p.degenerate;
    if (p.valid == 0) {
      ++out.samples_skipped;
      continue;
    }
    total += p.mean;
    ++out.samples_used;
  }
  if (out.samples_used == 0) {
    throw Error(ErrorCode::NoValidViews, "augmentation '" + group.name + "' has no usable view");
  }
  out.mean_score = total / static_cast<double>(out.samples_used);
  return out;
}

struct MultilevelScore {
  double mean_score = 0.0;
  std::size_t levels = 0;
  bool incomplete = false;  // fewer than the three intensity levels
};

/// Unweighted mean of per-intensity scores of one augmentation type.
template <std::floating_point T>
MultilevelScore score_augmentation_multilevel(std::span<const Sample<T>> samples,
                                              std::span<const AugGroup<T>> groups,
                                              const TextBank<T>& bank, std::size_t threads = 1) {
  if (groups.empty() || groups.size() > 3) {
    throw Error(ErrorCode::InvalidArgument, "multilevel scoring takes 1 to 3 intensity groups");
  }
  MultilevelScore out;
  double total = 0.0;
  bool unspecified = false;
  for (const auto& g : groups) {
    if (g.name != groups.front().name) {
      throw Error(ErrorCode::InvalidArgument, "multilevel groups must share a name");
    }
    unspecified = unspecified || g.intensity == Intensity::Unspecified;
    total += score_augmentation(samples, g, bank, threads).mean_score;
  }
  out.levels = groups.size();
  out.mean_score = total / static_cast<double>(groups.size());
  out.incomplete = !unspecified && groups.size() < 3;
  return out;
}

/// Combines already computed per-intensity scores the same way.
inline MultilevelScore combine_levels(std::span<const double> level_scores, bool stochastic = true) {
  if (level_scores.empty() || level_scores.size() > 3) {
    throw Error(ErrorCode::InvalidArgument, "multilevel scoring takes 1 to 3 intensity levels");
  }
  MultilevelScore out;
  for (double s : level_scores) out.mean_score += s;
  out.mean_score /= static_cast<double>(level_scores.size());
  out.levels = level_scores.size();
  out.incomplete = stochastic && level_scores.size() < 3;
  return out;
}

enum class EvalMode { None, Ensemble, Agc };

constexpr const char* to_string(EvalMode m) noexcept {
  switch (m) {
    case EvalMode::None: return "none";
    case EvalMode::Ensemble: return "ensemble";
    case EvalMode::Agc: return "agc";
  }
  return "none";
}

inline std::optional<EvalMode> parse_mode(const std::string& s) {
  if (s == "none") return EvalMode::None;
  if (s == "ensemble") return EvalMode::Ensemble;
  if (s == "agc") return EvalMode::Agc;
  return std::nullopt;
}

struct EvalOptions {
  std::size_t threads = 1;
  bool ensemble_include_original = false;
  /// Use only the first `view_limit` views of each sample (0 = all).
  std::size_t view_limit = 0;
};

struct AccuracyResult {
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
  std::vector<std::size_t> predictions;
  std::vector<CorrectionDiagnostics> diagnostics;  // agc mode only
};

/// Ensemble prediction: argmax of the per-view similarity vectors averaged
/// (the original optionally included).
template <std::floating_point T>
Prediction ensemble_predict(const UnitFeature<T>& z, std::span<const UnitFeature<T>> views,
                            const TextBank<T>& bank, bool include_original = false) {
  if (views.empty() && !include_original) {
    throw Error(ErrorCode::EmptyInput, "ensemble needs at least one view");
  }
  Prediction p;
  p.similarities.assign(bank.num_classes(), 0.0);
  auto accumulate = [&](const UnitFeature<T>& v) {
    const auto s = similarities(v.values(), bank);
    for (std::size_t c = 0; c < s.size(); ++c) p.similarities[c] += s[c];
  };
  for (const auto& v : views) accumulate(v);
  if (include_original) accumulate(z);
  const double count = static_cast<double>(views.size() + (include_original ? 1 : 0));
  for (auto& s : p.similarities) s /= count;
  p.class_index = argmax(p.similarities);
  return p;
}

template <std::floating_point T>
AccuracyResult evaluate_accuracy(const Dataset<T>& data, const AgcConfig& cfg, EvalMode mode,
                                 const EvalOptions& opt = {}) {
  const std::size_t m = data.samples.size();
  if (m == 0) throw Error(ErrorCode::EmptyInput, "dataset has no samples");
  if (mode != EvalMode::None && data.min_views() == 0) {
    throw Error(ErrorCode::EmptyInput, std::string("mode '") + to_string(mode) +
                                           "' needs views; the bundle has none");
  }
  AccuracyResult r;
  r.total = m;
  r.predictions.resize(m);
  if (mode == EvalMode::Agc) r.diagnostics.resize(m);

  parallel_for(m, opt.threads, [&](std::size_t i) {
    const auto& s = data.samples[i];
    std::span<const UnitFeature<T>> views(s.views);
    if (opt.view_limit > 0) views = views.first(std::min(opt.view_limit, views.size()));
    switch (mode) {
      case EvalMode::None:
        r.predictions[i] = predict(s.original, data.bank).class_index;
        break;
      case EvalMode::Ensemble:
        r.predictions[i] =
            ensemble_predict(s.original, views, data.bank, opt.ensemble_include_original).class_index;
        break;
      case EvalMode::Agc: {
        auto res = agc_infer(s.original, views, data.bank, cfg);
        r.predictions[i] = res.prediction.class_index;
        r.diagnostics[i] = res.diagnostics;
        break;
      }
    }
  });
  for (std::size_t i = 0; i < m; ++i) {
    if (r.predictions[i] == data.samples[i].label) ++r.correct;
  }
  r.accuracy = static_cast<double>(r.correct) / static_cast<double>(m);
  return r;
}

/// Per-sample prepared corrections, for evaluating many step settings on
/// the same data.
template <std::floating_point T>
std::vector<PreparedCorrection<T>> prepare_dataset(const Dataset<T>& data,
                                                   const EvalOptions& opt = {}) {
  if (data.min_views() == 0) throw Error(ErrorCode::EmptyInput, "correction needs views");
  std::vector<PreparedCorrection<T>> out(data.samples.size());
  parallel_for(out.size(), opt.threads, [&](std::size_t i) {
    const auto& s = data.samples[i];
    std::span<const UnitFeature<T>> views(s.views);
    if (opt.view_limit > 0) views = views.first(std::min(opt.view_limit, views.size()));
    out[i] = prepare_correction(s.original, views);
  });
  return out;
}

/// Same result as evaluate_accuracy(data, cfg, EvalMode::Agc, ...) for the
/// views the preparation was built from.
template <std::floating_point T>
AccuracyResult evaluate_prepared(const Dataset<T>& data,
                                 std::span<const PreparedCorrection<T>> prepared,
                                 const AgcConfig& cfg, std::size_t threads = 1) {
  if (prepared.size() != data.samples.size()) {
    throw Error(ErrorCode::DimMismatch, "prepared corrections do not match the dataset");
  }
  if (prepared.empty()) throw Error(ErrorCode::EmptyInput, "dataset has no samples");
  AccuracyResult r;
  r.total = data.samples.size();
  r.predictions.resize(r.total);
  r.diagnostics.resize(r.total);
  parallel_for(r.total, threads, [&](std::size_t i) {
    auto res = finish_correction(data.samples[i].original, prepared[i], data.bank, cfg);
    r.predictions[i] = res.prediction.class_index;
    r.diagnostics[i] = res.diagnostics;
  });
  for (std::size_t i = 0; i < r.total; ++i) {
    if (r.predictions[i] == data.samples[i].label) ++r.correct;
  }
  r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.total);
  return r;
}

/// Sample Pearson correlation. Needs >= 3 points with nonzero variance in
/// both coordinates.
inline double pearson_correlation(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw Error(ErrorCode::DimMismatch, "pearson: length mismatch");
  if (xs.size() < 3) throw Error(ErrorCode::InvalidArgument, "pearson: need at least 3 points");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) {
    throw Error(ErrorCode::DegenerateVariance, "pearson: a coordinate has zero variance");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Name with the largest mean score; ties go to the lexicographically
/// smallest name.
inline std::string select_anchor_augmentation(std::span<const AugScoreRow> rows) {
  if (rows.empty()) throw Error(ErrorCode::EmptyInput, "no augmentation rows to select from");
  const AugScoreRow* best = &rows.front();
  for (const auto& r : rows) {
    if (r.mean_score > best->mean_score ||
        (r.mean_score == best->mean_score && r.name < best->name)) {
      best = &r;
    }
  }
  return best->name;
}

}  // namespace agc
