#pragma once

// Adaptive geodesic correction: an anchor is aggregated from augmented views,
// a correction score is derived from how far the input sits from the views
// (deviation) and how much the views agree (reliability), and the input is
// rotated along the geodesic toward the anchor by an adaptive multiple of the
// anchor angle before classification.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "agc/error.hpp"
#include "agc/sphere.hpp"
#include "agc/zero_shot.hpp"

namespace agc {

struct AgcConfig {
  double beta_clean = 0.45;
  double beta_adv = 2.25;
  double gamma_exp = 0.9;
  std::size_t n_views = 32;
  double angle_epsilon = 1e-6;
  double max_rotation = std::numbers::pi - 1e-6;

  /// Throws InvalidArgument on out-of-domain values; returns any warnings.
  std::vector<std::string> validate() const {
    if (!(beta_clean >= 0.0) || !(beta_adv >= 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "beta_clean and beta_adv must be >= 0");
    }
    if (!(gamma_exp > 0.0)) throw Error(ErrorCode::InvalidArgument, "gamma_exp must be > 0");
    if (n_views == 0) throw Error(ErrorCode::InvalidArgument, "n_views must be positive");
    if (!(angle_epsilon >= 0.0) || !(max_rotation > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "angle_epsilon/max_rotation out of range");
    }
    std::vector<std::string> warnings;
    if (beta_adv < beta_clean) {
      warnings.emplace_back("beta_adv < beta_clean: correction weakens as the score grows");
    }
    return warnings;
  }
};

/// Why a correction was skipped, if it was.
enum class CorrectionStatus {
  Applied,
  NegligibleAngle,   // anchor within angle_epsilon of z
  AnchorCancelled,   // views sum to (nearly) zero
  AntipodalAnchor,   // anchor opposite z, tangent undefined
};

constexpr const char* to_string(CorrectionStatus s) noexcept {
  switch (s) {
    case CorrectionStatus::Applied: return "applied";
    case CorrectionStatus::NegligibleAngle: return "negligible_angle";
    case CorrectionStatus::AnchorCancelled: return "anchor_cancelled";
    case CorrectionStatus::AntipodalAnchor: return "antipodal_anchor";
  }
  return "unknown";
}

struct CorrectionDiagnostics {
  double dev = 0.0;
  double rel_raw = 0.0;
  double rel_rescaled = 0.0;
  double s_corr = 0.0;
  double beta = 0.0;
  double theta_star = 0.0;
  double rotation_applied = 0.0;
  CorrectionStatus status = CorrectionStatus::Applied;
};

inline constexpr double kAnchorCancelThreshold = 1e-9;
inline constexpr double kAntipodalMargin = 1e-6;

namespace detail {

template <std::floating_point T>
void require_views(std::span<const UnitFeature<T>> views, std::size_t dim, const char* where) {
  if (views.empty()) throw Error(ErrorCode::EmptyInput, std::string(where) + ": no views");
  for (const auto& v : views) require_same_dim(v.dim(), dim, where);
}

/// Sum of view vectors in double.
template <std::floating_point T>
std::vector<double> view_sum(std::span<const UnitFeature<T>> views) {
  std::vector<double> s(views.front().dim(), 0.0);
  for (const auto& v : views) {
    for (std::size_t k = 0; k < s.size(); ++k) s[k] += static_cast<double>(v[k]);
  }
  return s;
}

template <std::floating_point T>
UnitFeature<T> to_unit(const std::vector<double>& s, double n) {
  std::vector<T> out(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) out[k] = static_cast<T>(s[k] / n);
  return UnitFeature<T>::assume_unit(std::move(out));
}

/// Mean of z_i^T z_j over ordered pairs i != j, from the view sum:
/// (||S||^2 - sum ||z_i||^2) / (N (N - 1)).
template <std::floating_point T>
double pairwise_mean_from_sum(std::span<const UnitFeature<T>> views, const std::vector<double>& sum) {
  const double n = static_cast<double>(views.size());
  double ss = 0.0;
  for (double x : sum) ss += x * x;
  double self = 0.0;
  for (const auto& v : views) self += dot(v, v);
  return std::clamp((ss - self) / (n * (n - 1.0)), -1.0, 1.0);
}

}  // namespace detail

/// normalize(sum of views). Throws ZeroNorm when ||sum|| < 1e-9.
template <std::floating_point T>
UnitFeature<T> aggregate_anchor(std::span<const UnitFeature<T>> views) {
  detail::require_views(views, views.empty() ? 0 : views.front().dim(), "aggregate_anchor");
  const auto s = detail::view_sum(views);
  double ss = 0.0;
  for (double x : s) ss += x * x;
  const double n = std::sqrt(ss);
  if (!(n >= kAnchorCancelThreshold)) {
    throw Error(ErrorCode::ZeroNorm, "aggregate_anchor: views cancel");
  }
  return detail::to_unit<T>(s, n);
}

/// mean_i (1 - z_i^T z), clipped to [0, 1] after averaging.
template <std::floating_point T>
double deviation_signal(const UnitFeature<T>& z, std::span<const UnitFeature<T>> views) {
  detail::require_views(views, z.dim(), "deviation_signal");
  double acc = 0.0;
  for (const auto& v : views) acc += 1.0 - dot(v, z);
  return std::clamp(acc / static_cast<double>(views.size()), 0.0, 1.0);
}

struct Reliability {
  double raw = 0.0;       // in [-1, 1]
  double rescaled = 0.0;  // (raw + 1) / 2
};

/// Mean pairwise cosine between distinct views. Throws NeedTwoViews for N < 2.
template <std::floating_point T>
Reliability reliability_signal(std::span<const UnitFeature<T>> views) {
  if (views.size() < 2) throw Error(ErrorCode::NeedTwoViews, "reliability needs >= 2 views");
  detail::require_views(views, views.front().dim(), "reliability_signal");
  const double raw = detail::pairwise_mean_from_sum(views, detail::view_sum(views));
  return {raw, (raw + 1.0) / 2.0};
}

/// dev^gamma * rel_rescaled, with 0^gamma taken as 0.
inline double correction_score(double dev, double rel_rescaled, double gamma_exp) {
  const double p = dev > 0.0 ? std::pow(dev, gamma_exp) : 0.0;
  return p * rel_rescaled;
}

/// beta_clean + (beta_adv - beta_clean) * s_corr.
inline double adaptive_step(double s_corr, const AgcConfig& cfg) {
  return cfg.beta_clean + (cfg.beta_adv - cfg.beta_clean) * s_corr;
}

template <std::floating_point T>
struct CorrectedFeature {
  UnitFeature<T> feature;
  double rotation_applied = 0.0;
  double theta_star = 0.0;
  CorrectionStatus status = CorrectionStatus::Applied;
};

namespace detail {

/// Non-throwing core of correct_feature; antipodal anchors leave z unchanged
/// and report the status.
template <std::floating_point T>
CorrectedFeature<T> try_correct(const UnitFeature<T>& z, const UnitFeature<T>& anchor,
                                double beta, const AgcConfig& cfg) {
  CorrectedFeature<T> out;
  out.theta_star = angle(z, anchor);
  if (out.theta_star < cfg.angle_epsilon) {
    out.feature = z;
    out.status = CorrectionStatus::NegligibleAngle;
    return out;
  }
  if (out.theta_star > std::numbers::pi - kAntipodalMargin) {
    out.feature = z;
    out.status = CorrectionStatus::AntipodalAnchor;
    return out;
  }
  out.rotation_applied = std::min(beta * out.theta_star, cfg.max_rotation);
  if (out.rotation_applied == 0.0) {
    out.feature = z;
    return out;
  }
  const auto u = tangent_direction(z, anchor);
  out.feature = geodesic_point(z, u, out.rotation_applied);
  return out;
}

}  // namespace detail

/// Rotates z toward the anchor by min(beta * theta*, max_rotation). beta < 1
/// stops short of the anchor, beta == 1 reaches it, beta > 1 overshoots.
/// Throws AntipodalAnchor when theta* > pi - 1e-6.
template <std::floating_point T>
CorrectedFeature<T> correct_feature(const UnitFeature<T>& z, const UnitFeature<T>& anchor,
                                    double beta, const AgcConfig& cfg) {
  auto out = detail::try_correct(z, anchor, beta, cfg);
  if (out.status == CorrectionStatus::AntipodalAnchor) {
    throw Error(ErrorCode::AntipodalAnchor, "correct_feature: anchor is antipodal to z");
  }
  return out;
}

template <std::floating_point T>
struct AgcResult {
  Prediction prediction;
  CorrectionDiagnostics diagnostics;
};

/// The configuration-independent part of a correction: signals, anchor,
/// anchor angle and tangent. Reusable across step-size settings.
template <std::floating_point T>
struct PreparedCorrection {
  double dev = 0.0;
  double rel_raw = 0.0;
  double rel_rescaled = 0.0;
  double theta_star = 0.0;
  CorrectionStatus status = CorrectionStatus::Applied;
  TangentVector<T> direction;  // valid only when status == Applied
};

/// With a single view the reliability is taken as fully untrusted
/// (rel_raw = -1, rel_rescaled = 0), which pins beta to beta_clean.
template <std::floating_point T>
PreparedCorrection<T> prepare_correction(const UnitFeature<T>& z,
                                         std::span<const UnitFeature<T>> views) {
  detail::require_views(views, z.dim(), "prepare_correction");
  PreparedCorrection<T> p;
  p.dev = deviation_signal(z, views);
  const auto sum = detail::view_sum(views);
  if (views.size() >= 2) {
    p.rel_raw = detail::pairwise_mean_from_sum(views, sum);
    p.rel_rescaled = (p.rel_raw + 1.0) / 2.0;
  } else {
    p.rel_raw = -1.0;
    p.rel_rescaled = 0.0;
  }
  double ss = 0.0;
  for (double x : sum) ss += x * x;
  const double sn = std::sqrt(ss);
  if (!(sn >= kAnchorCancelThreshold)) {
    p.status = CorrectionStatus::AnchorCancelled;
    return p;
  }
  const auto anchor = detail::to_unit<T>(sum, sn);
  p.theta_star = angle(z, anchor);
  if (p.theta_star > std::numbers::pi - kAntipodalMargin) {
    p.status = CorrectionStatus::AntipodalAnchor;
    return p;
  }
  try {
    p.direction = tangent_direction(z, anchor);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DegenerateDirection) throw;
    p.status = CorrectionStatus::NegligibleAngle;
  }
  return p;
}

/// Step size, rotation and prediction for a prepared input.
template <std::floating_point T>
AgcResult<T> finish_correction(const UnitFeature<T>& z, const PreparedCorrection<T>& p,
                               const TextBank<T>& bank, const AgcConfig& cfg) {
  require_same_dim(z.dim(), bank.dim(), "agc_infer");
  AgcResult<T> r;
  auto& diag = r.diagnostics;
  diag.dev = p.dev;
  diag.rel_raw = p.rel_raw;
  diag.rel_rescaled = p.rel_rescaled;
  diag.s_corr = correction_score(p.dev, p.rel_rescaled, cfg.gamma_exp);
  diag.beta = adaptive_step(diag.s_corr, cfg);
  diag.theta_star = p.theta_star;
  diag.status = p.status;
  if (diag.status == CorrectionStatus::Applied && p.theta_star < cfg.angle_epsilon) {
    diag.status = CorrectionStatus::NegligibleAngle;
  }
  if (diag.status != CorrectionStatus::Applied) {
    r.prediction = predict(z, bank);
    return r;
  }
  diag.rotation_applied = std::min(diag.beta * p.theta_star, cfg.max_rotation);
  if (diag.rotation_applied == 0.0) {
    r.prediction = predict(z, bank);
    return r;
  }
  r.prediction = predict(geodesic_point(z, p.direction, diag.rotation_applied), bank);
  return r;
}

/// End-to-end correction and classification of one input.
///
/// Degenerate anchors fall back to the uncorrected prediction and are
/// reported through diagnostics.status; only DimMismatch and an empty view
/// set escape as errors.
template <std::floating_point T>
AgcResult<T> agc_infer(const UnitFeature<T>& z, std::span<const UnitFeature<T>> views,
                       const TextBank<T>& bank, const AgcConfig& cfg) {
  require_same_dim(z.dim(), bank.dim(), "agc_infer");
  return finish_correction(z, prepare_correction(z, views), bank, cfg);
}

template <std::floating_point T>
AgcResult<T> agc_infer(const UnitFeature<T>& z, const std::vector<UnitFeature<T>>& views,
                       const TextBank<T>& bank, const AgcConfig& cfg) {
  return agc_infer(z, std::span<const UnitFeature<T>>(views), bank, cfg);
}

}  // namespace agc
