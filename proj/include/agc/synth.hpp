#pragma once

// A small synthetic world for exercising the correction without an encoder:
// random class prototypes, noisy clean features, geometrically constructed
// adversarial features (pushed along the geodesic toward the runner-up
// prototype until misclassified by a margin), and view sets whose centre can
// be placed anywhere between the adversarial and the clean feature.
//
// Noise is Gaussian-perturb-then-normalize, not von Mises-Fisher.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "agc/agc.hpp"
#include "agc/aug_eval.hpp"
#include "agc/dataset.hpp"
#include "agc/error.hpp"
#include "agc/parallel.hpp"
#include "agc/random.hpp"
#include "agc/sphere.hpp"
#include "agc/zero_shot.hpp"

namespace agc::synth {

/// Where adversarial-sample views are centred: fraction `lambda` of the way
/// from the adversarial feature back to the clean one.
struct ViewMode {
  double lambda = 1.0;

  static ViewMode recovering() { return {1.0}; }
  static ViewMode adversarial_centered() { return {0.0}; }
  static ViewMode mixed(double lambda) { return {lambda}; }

  std::string to_string() const {
    if (lambda == 1.0) return "recovering";
    if (lambda == 0.0) return "adversarial_centered";
    char buf[64];
    std::snprintf(buf, sizeof buf, "mixed:%.17g", lambda);
    return buf;
  }
};

/// Accepts "recovering", "adversarial_centered" and "mixed:<lambda>".
inline std::optional<ViewMode> parse_view_mode(const std::string& s) {
  if (s == "recovering") return ViewMode::recovering();
  if (s == "adversarial_centered") return ViewMode::adversarial_centered();
  if (s.rfind("mixed:", 0) == 0) {
    try {
      std::size_t used = 0;
      const double lambda = std::stod(s.substr(6), &used);
      if (used == s.size() - 6 && lambda >= 0.0 && lambda <= 1.0) return ViewMode::mixed(lambda);
    } catch (...) {
    }
  }
  return std::nullopt;
}

struct SynthConfig {
  std::size_t d = 64;
  std::size_t classes = 16;
  std::size_t samples = 512;
  std::size_t views = 32;
  double sigma_clean = 0.05;
  double sigma_view = 0.10;
  double delta = 0.05;
  ViewMode view_mode = ViewMode::recovering();
  std::uint64_t seed = 7;

  void validate() const {
    if (d < 2) throw Error(ErrorCode::InvalidArgument, "synth: d must be >= 2");
    if (classes < 2) throw Error(ErrorCode::InvalidArgument, "synth: need >= 2 classes");
    if (samples < 1 || views < 1) throw Error(ErrorCode::InvalidArgument, "synth: M, N must be >= 1");
    if (!(sigma_clean >= 0.0) || !(sigma_view >= 0.0) || !(delta > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "synth: noise scales must be >= 0 and delta > 0");
    }
    if (!(view_mode.lambda >= 0.0 && view_mode.lambda <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "synth: mixed lambda must lie in [0, 1]");
    }
  }
};

inline constexpr int kMaxPrototypeAttempts = 100;

namespace detail {

inline UnitFeature<double> perturb(std::span<const double> center, double sigma,
                                   rng::CounterStream& gen) {
  std::vector<double> v(center.begin(), center.end());
  for (auto& x : v) x += sigma * gen.gaussian();
  return normalize(std::span<const double>(v));
}

inline std::vector<std::string> class_names(std::size_t classes) {
  std::vector<std::string> names(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "class_%03zu", c);
    names[c] = buf;
  }
  return names;
}

}  // namespace detail

/// Isotropic-Gaussian prototypes, redrawn until every pairwise angle is at
/// least 2 (sigma_clean + delta). Throws SeparationFailure after 100 draws.
inline TextBank<double> generate_prototypes(const SynthConfig& cfg) {
  cfg.validate();
  const double min_angle = 2.0 * (cfg.sigma_clean + cfg.delta);
  for (int attempt = 0; attempt < kMaxPrototypeAttempts; ++attempt) {
    std::vector<double> raw(cfg.classes * cfg.d);
    for (std::size_t c = 0; c < cfg.classes; ++c) {
      rng::CounterStream gen(cfg.seed, rng::Prototypes, static_cast<std::uint64_t>(attempt), c);
      for (std::size_t k = 0; k < cfg.d; ++k) raw[c * cfg.d + k] = gen.gaussian();
    }
    auto bank = build_text_bank(raw, cfg.d, detail::class_names(cfg.classes));
    bool separated = true;
    for (std::size_t i = 0; i < cfg.classes && separated; ++i) {
      for (std::size_t j = i + 1; j < cfg.classes; ++j) {
        const double c = std::clamp(dot(bank.row(i), bank.row(j)), -1.0, 1.0);
        if (std::acos(c) < min_angle) {
          separated = false;
          break;
        }
      }
    }
    if (separated) return bank;
  }
  throw Error(ErrorCode::SeparationFailure,
              "no separable prototype set after " + std::to_string(kMaxPrototypeAttempts) +
                  " attempts; increase d or reduce classes/noise");
}

struct CleanSamples {
  std::vector<std::size_t> labels;
  std::vector<UnitFeature<double>> features;
};

/// z = normalize(t_y + sigma_clean g), labels cycling over the classes.
inline CleanSamples generate_clean(const SynthConfig& cfg, const TextBank<double>& bank,
                                   std::size_t threads = 1) {
  cfg.validate();
  CleanSamples out;
  out.labels.resize(cfg.samples);
  out.features.resize(cfg.samples);
  parallel_for(cfg.samples, threads, [&](std::size_t i) {
    const std::size_t y = i % bank.num_classes();
    rng::CounterStream gen(cfg.seed, rng::CleanNoise, i);
    out.labels[i] = y;
    out.features[i] = detail::perturb(bank.row(y), cfg.sigma_clean, gen);
  });
  return out;
}

struct AttackResult {
  UnitFeature<double> feature;
  double t = 0.0;          // geodesic parameter reached
  std::size_t target = 0;  // runner-up class attacked toward
};

/// Moves z_clean along the geodesic toward the runner-up prototype and
/// bisects for the smallest parameter t with margin <= -delta.
/// Throws AttackFailure if even the prototype itself is not far enough.
inline AttackResult attack_feature(const UnitFeature<double>& z_clean,
                                   const TextBank<double>& bank, std::size_t y, double delta,
                                   double tolerance = 1e-12) {
  AttackResult out;
  out.target = runner_up(z_clean, bank, y);
  if (margin(z_clean, bank, y) <= -delta) {
    out.feature = z_clean;
    return out;
  }
  const auto target = bank.feature(out.target);
  const double full = angle(z_clean, target);
  const auto u = tangent_direction(z_clean, target);
  auto at = [&](double t) { return geodesic_point(z_clean, u, t); };
  if (!(margin(at(full), bank, y) <= -delta)) {
    throw Error(ErrorCode::AttackFailure,
                "runner-up prototype does not reach margin -" + std::to_string(delta));
  }
  double lo = 0.0, hi = full;
  for (int it = 0; it < 200 && hi - lo > tolerance; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (margin(at(mid), bank, y) <= -delta) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  out.t = hi;
  out.feature = at(hi);
  return out;
}

/// Centre of an adversarial sample's views for the given mode.
inline UnitFeature<double> view_center(const UnitFeature<double>& z_clean,
                                       const UnitFeature<double>& z_adv, const ViewMode& mode) {
  if (mode.lambda == 1.0) return z_clean;
  if (mode.lambda == 0.0) return z_adv;
  const double theta = angle(z_adv, z_clean);
  if (theta < kDegenerateDirectionThreshold) return z_clean;
  return geodesic_point(z_adv, tangent_direction(z_adv, z_clean), mode.lambda * theta);
}

/// N views normalize(center + sigma_view g_i) drawn from stream
/// (stream, sample, view) so every view is independently reproducible.
inline std::vector<UnitFeature<double>> generate_views(const UnitFeature<double>& center,
                                                       std::size_t sample, rng::Stream stream,
                                                       const SynthConfig& cfg) {
  std::vector<UnitFeature<double>> views;
  views.reserve(cfg.views);
  for (std::size_t v = 0; v < cfg.views; ++v) {
    rng::CounterStream gen(cfg.seed, stream, sample, v);
    views.push_back(detail::perturb(center.values(), cfg.sigma_view, gen));
  }
  return views;
}

/// Views of an adversarial sample under cfg.view_mode.
inline std::vector<UnitFeature<double>> generate_views(const UnitFeature<double>& z_clean,
                                                       const UnitFeature<double>& z_adv,
                                                       std::size_t sample, const SynthConfig& cfg) {
  return generate_views(view_center(z_clean, z_adv, cfg.view_mode), sample, rng::AdvViews, cfg);
}

struct SynthWorld {
  TextBank<double> bank;
  Dataset<double> clean;
  Dataset<double> adversarial;
  std::vector<UnitFeature<double>> clean_features;
  std::vector<double> attack_t;
};

inline SynthWorld build_world(const SynthConfig& cfg, std::size_t threads = 1) {
  SynthWorld w;
  w.bank = generate_prototypes(cfg);
  auto clean = generate_clean(cfg, w.bank, threads);
  w.clean_features = clean.features;
  w.clean.condition = Condition::Clean;
  w.clean.bank = w.bank;
  w.adversarial.condition = Condition::Adversarial;
  w.adversarial.bank = w.bank;
  w.clean.samples.resize(cfg.samples);
  w.adversarial.samples.resize(cfg.samples);
  w.attack_t.resize(cfg.samples);
  parallel_for(cfg.samples, threads, [&](std::size_t i) {
    const std::size_t y = clean.labels[i];
    const auto& zc = clean.features[i];
    auto& cs = w.clean.samples[i];
    cs.label = y;
    cs.original = zc;
    cs.views = generate_views(zc, i, rng::CleanViews, cfg);

    auto attack = attack_feature(zc, w.bank, y, cfg.delta);
    auto& as = w.adversarial.samples[i];
    as.label = y;
    as.views = generate_views(zc, attack.feature, i, cfg);
    as.original = std::move(attack.feature);
    w.attack_t[i] = attack.t;
  });
  return w;
}

struct MeanDiagnostics {
  double dev = 0.0;
  double rel_rescaled = 0.0;
  double s_corr = 0.0;
  double beta = 0.0;
  double theta_star = 0.0;
  double rotation_applied = 0.0;
  std::size_t skipped = 0;  // corrections not applied (degenerate anchor)
};

inline MeanDiagnostics mean_diagnostics(const std::vector<CorrectionDiagnostics>& diags) {
  MeanDiagnostics m;
  if (diags.empty()) return m;
  for (const auto& d : diags) {
    m.dev += d.dev;
    m.rel_rescaled += d.rel_rescaled;
    m.s_corr += d.s_corr;
    m.beta += d.beta;
    m.theta_star += d.theta_star;
    m.rotation_applied += d.rotation_applied;
    if (d.status == CorrectionStatus::AnchorCancelled ||
        d.status == CorrectionStatus::AntipodalAnchor) {
      ++m.skipped;
    }
  }
  const double n = static_cast<double>(diags.size());
  m.dev /= n;
  m.rel_rescaled /= n;
  m.s_corr /= n;
  m.beta /= n;
  m.theta_star /= n;
  m.rotation_applied /= n;
  return m;
}

struct ConditionResult {
  double none = 0.0;
  double ensemble = 0.0;
  double agc = 0.0;
  MeanDiagnostics diagnostics;
};

struct SynthReport {
  ConditionResult clean;
  ConditionResult adversarial;
};

inline ConditionResult evaluate_condition(const Dataset<double>& data, const AgcConfig& agc_cfg,
                                          const EvalOptions& opt) {
  ConditionResult r;
  r.none = evaluate_accuracy(data, agc_cfg, EvalMode::None, opt).accuracy;
  r.ensemble = evaluate_accuracy(data, agc_cfg, EvalMode::Ensemble, opt).accuracy;
  const auto agc = evaluate_accuracy(data, agc_cfg, EvalMode::Agc, opt);
  r.agc = agc.accuracy;
  r.diagnostics = mean_diagnostics(agc.diagnostics);
  return r;
}

/// Builds the world and evaluates every mode on both conditions.
inline SynthReport run_synth_experiment(const SynthConfig& cfg, const AgcConfig& agc_cfg,
                                        std::size_t threads = 1) {
  const auto world = build_world(cfg, threads);
  EvalOptions opt;
  opt.threads = threads;
  return {evaluate_condition(world.clean, agc_cfg, opt),
          evaluate_condition(world.adversarial, agc_cfg, opt)};
}

}  // namespace agc::synth
