#pragma once

// Command-line front end: evaluation, augmentation scoring and anchor
// selection, synthetic data generation, parameter sweeps and the latency
// benchmark. Exit codes: 0 ok, 2 usage, 3 data error, 4 numeric degeneracy.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "agc/agc.hpp"
#include "agc/aug_eval.hpp"
#include "agc/io.hpp"
#include "agc/parallel.hpp"
#include "agc/random.hpp"
#include "agc/report.hpp"
#include "agc/synth.hpp"

namespace agc::cli {

using report::Json;

enum ExitCode : int { kOk = 0, kUsage = 2, kData = 3, kNumeric = 4 };

/// Reference end-to-end per-sample latency with encoder forward passes
/// included. Printed for context; not comparable to the geometry-only
/// timing measured here.
inline constexpr double kEndToEndReferenceSeconds = 0.0091;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// "start:stop:step" (inclusive) or a comma-separated list.
inline std::vector<double> parse_grid(const std::string& spec) {
  auto to_double = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (...) {
      throw UsageError("bad number '" + s + "' in grid '" + spec + "'");
    }
    if (used != s.size()) throw UsageError("bad number '" + s + "' in grid '" + spec + "'");
    return v;
  };
  std::vector<std::string> parts;
  const char sep = spec.find(':') != std::string::npos ? ':' : ',';
  std::stringstream ss(spec);
  for (std::string item; std::getline(ss, item, sep);) parts.push_back(item);
  std::vector<double> out;
  if (sep == ':') {
    if (parts.size() != 3) throw UsageError("grid must be start:stop:step, got '" + spec + "'");
    const double a = to_double(parts[0]), b = to_double(parts[1]), step = to_double(parts[2]);
    if (!(step > 0.0) || b < a) throw UsageError("grid needs step > 0 and stop >= start");
    const auto count = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9)) + 1;
    for (std::size_t i = 0; i < count; ++i) out.push_back(a + static_cast<double>(i) * step);
  } else {
    for (const auto& p : parts) out.push_back(to_double(p));
  }
  if (out.empty()) throw UsageError("empty grid '" + spec + "'");
  return out;
}

inline std::vector<std::size_t> parse_counts(const std::string& spec) {
  std::vector<std::size_t> out;
  std::stringstream ss(spec);
  for (std::string item; std::getline(ss, item, ',');) {
    std::size_t used = 0;
    long v = 0;
    try {
      v = std::stol(item, &used);
    } catch (...) {
      throw UsageError("bad view count '" + item + "'");
    }
    if (used != item.size() || v <= 0) throw UsageError("bad view count '" + item + "'");
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw UsageError("empty view-count list");
  return out;
}

struct Loaded {
  std::string path;
  io::EmbeddingBundle bundle;
  Dataset<double> data;
  io::LoadReport load;
};

inline Loaded load(const std::string& path, std::ostream& err) {
  Loaded l;
  l.path = path;
  l.bundle = io::read_bundle(path);
  l.data = io::to_dataset<double>(l.bundle, &l.load);
  for (const auto& w : l.load.warnings) err << "warning: " << path << ": " << w << '\n';
  return l;
}

/// Aligned-column plain text table.
class Table {
 public:
  explicit Table(std::vector<std::string> header) { rows_.push_back(std::move(header)); }
  void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }
  std::string str() const {
    std::vector<std::size_t> width;
    for (const auto& r : rows_) {
      width.resize(std::max(width.size(), r.size()), 0);
      for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
    }
    std::ostringstream os;
    for (const auto& r : rows_) {
      for (std::size_t i = 0; i < r.size(); ++i) {
        if (i) os << "  ";
        os << std::left << std::setw(static_cast<int>(width[i])) << r[i];
      }
      os << '\n';
    }
    return os.str();
  }

 private:
  std::vector<std::vector<std::string>> rows_;
};

inline std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

struct CommonOptions {
  double beta_clean = AgcConfig{}.beta_clean;
  double beta_adv = AgcConfig{}.beta_adv;
  double gamma = AgcConfig{}.gamma_exp;
  double max_rotation = AgcConfig{}.max_rotation;
  std::size_t threads = 0;
  bool json = true;
  bool table = false;
  std::string out_path;

  AgcConfig agc_config(std::ostream& err) const {
    AgcConfig cfg;
    cfg.beta_clean = beta_clean;
    cfg.beta_adv = beta_adv;
    cfg.gamma_exp = gamma;
    cfg.max_rotation = max_rotation;
    try {
      for (const auto& w : cfg.validate()) err << "warning: " << w << '\n';
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    return cfg;
  }
  std::size_t worker_threads() const { return resolve_threads(threads); }
};

inline void add_step_options(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--beta-clean", o.beta_clean, "step for inputs that look clean")
      ->capture_default_str();
  cmd->add_option("--beta-adv", o.beta_adv, "step for inputs that look adversarial")
      ->capture_default_str();
  cmd->add_option("--gamma", o.gamma, "deviation exponent of the correction score")
      ->capture_default_str();
  cmd->add_option("--max-rotation", o.max_rotation, "cap on the applied rotation (radians)");
}

inline void add_output_options(CLI::App* cmd, CommonOptions& o) {
  auto* j = cmd->add_flag("--json", o.json, "JSON report (default)");
  auto* t = cmd->add_flag("--table", o.table, "aligned-column table");
  j->excludes(t);
  cmd->add_option("--out", o.out_path, "also write the report to this path");
  cmd->add_option("--threads", o.threads, "worker threads (default: AGC_THREADS or all cores)");
}

inline void emit(const CommonOptions& o, const Json& j, const std::string& table,
                 std::ostream& out) {
  const std::string text = o.table ? table : report::dump(j);
  out << text;
  if (!o.out_path.empty()) {
    std::ofstream f(o.out_path, std::ios::trunc);
    if (!f) throw Error(ErrorCode::IoFailure, "cannot write " + o.out_path);
    f << text;
  }
}

inline Json diagnostics_json(const CorrectionDiagnostics& d) {
  return Json{{"beta", d.beta},
              {"dev", d.dev},
              {"rel_raw", d.rel_raw},
              {"rel_rescaled", d.rel_rescaled},
              {"rotation_applied", d.rotation_applied},
              {"s_corr", d.s_corr},
              {"status", to_string(d.status)},
              {"theta_star", d.theta_star}};
}

inline Json mean_diagnostics_json(const synth::MeanDiagnostics& m) {
  return Json{{"beta", m.beta},
              {"dev", m.dev},
              {"rel_rescaled", m.rel_rescaled},
              {"rotation_applied", m.rotation_applied},
              {"s_corr", m.s_corr},
              {"skipped", m.skipped},
              {"theta_star", m.theta_star}};
}

struct TimingStats {
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  std::size_t count = 0;
};

inline TimingStats summarize(std::vector<double> ms) {
  TimingStats t;
  t.count = ms.size();
  if (ms.empty()) return t;
  double total = 0.0;
  for (double x : ms) total += x;
  t.mean_ms = total / static_cast<double>(ms.size());
  std::sort(ms.begin(), ms.end());
  auto pct = [&](double q) {
    const auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(ms.size()))) - 1;
    return ms[std::min(idx, ms.size() - 1)];
  };
  t.p50_ms = pct(0.50);
  t.p95_ms = pct(0.95);
  return t;
}

inline Json timing_json(const TimingStats& t) {
  return Json{{"count", t.count}, {"mean_ms", t.mean_ms}, {"p50_ms", t.p50_ms}, {"p95_ms", t.p95_ms}};
}

/// Single-threaded per-sample wall clock of agc_infer over a dataset.
inline TimingStats time_correction(const Dataset<double>& data, const AgcConfig& cfg) {
  std::vector<double> ms;
  ms.reserve(data.samples.size());
  std::size_t sink = 0;
  for (const auto& s : data.samples) {
    const auto t0 = std::chrono::steady_clock::now();
    sink += agc_infer(s.original, s.views, data.bank, cfg).prediction.class_index;
    const auto t1 = std::chrono::steady_clock::now();
    ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  if (sink == static_cast<std::size_t>(-1)) std::cerr << "";
  return summarize(std::move(ms));
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  CommonOptions common;
  std::string clean;
  std::string adv;
  std::string mode = "all";
  bool include_original = false;
  bool verbose = false;
  bool timing = false;
};

inline int run_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const auto cfg = a.common.agc_config(err);
  std::vector<EvalMode> modes;
  if (a.mode == "all") {
    modes = {EvalMode::None, EvalMode::Ensemble, EvalMode::Agc};
  } else if (auto m = parse_mode(a.mode)) {
    modes = {*m};
  } else {
    throw UsageError("unknown mode '" + a.mode + "' (none|ensemble|agc|all)");
  }
  EvalOptions opt;
  opt.threads = a.common.worker_threads();
  opt.ensemble_include_original = a.include_original;

  std::vector<std::pair<std::string, Loaded>> inputs;
  inputs.emplace_back("clean", load(a.clean, err));
  if (!a.adv.empty()) inputs.emplace_back("adversarial", load(a.adv, err));

  Json conditions = Json::object();
  Table table({"condition", "mode", "accuracy", "correct", "samples"});
  std::map<std::string, double> primary;
  Json timing = Json::object();
  for (const auto& [key, in] : inputs) {
    Json c;
    c["path"] = in.path;
    c["bundle_condition"] = to_string(in.bundle.condition);
    c["n_samples"] = in.bundle.samples;
    c["n_views"] = in.bundle.views;
    c["max_bank_norm_deviation"] = in.load.max_bank_norm_deviation;
    Json acc = Json::object(), correct = Json::object();
    for (auto mode : modes) {
      const auto r = evaluate_accuracy(in.data, cfg, mode, opt);
      acc[to_string(mode)] = r.accuracy;
      correct[to_string(mode)] = r.correct;
      table.add({key, to_string(mode), fmt(r.accuracy), std::to_string(r.correct),
                 std::to_string(r.total)});
      primary[key] = r.accuracy;
      if (mode == EvalMode::Agc) {
        c["diagnostics_mean"] = mean_diagnostics_json(synth::mean_diagnostics(r.diagnostics));
        if (a.verbose) {
          Json samples = Json::array();
          for (std::size_t i = 0; i < r.total; ++i) {
            Json s = diagnostics_json(r.diagnostics[i]);
            s["label"] = in.data.samples[i].label;
            s["prediction"] = r.predictions[i];
            samples.push_back(std::move(s));
          }
          c["samples"] = std::move(samples);
        }
      }
    }
    c["accuracy"] = std::move(acc);
    c["correct"] = std::move(correct);
    conditions[key] = std::move(c);
    if (a.timing) timing[key] = timing_json(time_correction(in.data, cfg));
  }

  Json j;
  j["command"] = "eval";
  j["config"] = Json{{"angle_epsilon", cfg.angle_epsilon},
                     {"beta_adv", cfg.beta_adv},
                     {"beta_clean", cfg.beta_clean},
                     {"ensemble_include_original", a.include_original},
                     {"gamma_exp", cfg.gamma_exp},
                     {"max_rotation", cfg.max_rotation},
                     {"mode", a.mode}};
  j["conditions"] = std::move(conditions);
  Json summary{{"acc", primary["clean"]}, {"mode", to_string(modes.back())}};
  if (primary.count("adversarial")) {
    summary["rob"] = primary["adversarial"];
    summary["mean_acc_rob"] = (primary["clean"] + primary["adversarial"]) / 2.0;
  }
  j["summary"] = std::move(summary);
  if (a.timing) j["timing"] = std::move(timing);
  emit(a.common, j, table.str(), out);
  return kOk;
}

// ------------------------------------------------- score-augs / select-anchor

struct ScoreArgs {
  CommonOptions common;
  std::string manifest;
  std::string robust_mode = "agc";
};

struct ScoredManifest {
  std::vector<AugScoreRow> rows;       // usable rows, manifest order
  std::vector<std::string> unusable;   // names with no usable view
  Json rows_json = Json::array();
  std::optional<double> pearson;
  std::string pearson_note;
};

inline ScoredManifest score_manifest(const ScoreArgs& a, std::ostream& err) {
  const auto cfg = a.common.agc_config(err);
  const auto mode = parse_mode(a.robust_mode);
  if (!mode) throw UsageError("unknown robust mode '" + a.robust_mode + "'");
  const auto entries = io::read_manifest(a.manifest);
  if (entries.empty()) throw Error(ErrorCode::EmptyInput, "manifest has no entries");

  std::vector<Loaded> loaded;
  std::vector<io::EmbeddingBundle> bundles;
  for (const auto& e : entries) {
    loaded.push_back(load(e.path.string(), err));
    bundles.push_back(loaded.back().bundle);
  }
  io::check_manifest_bundles(bundles);

  EvalOptions opt;
  opt.threads = a.common.worker_threads();

  struct Level {
    std::string intensity;
    std::optional<double> score;
    double robust = 0.0;
    std::size_t samples = 0;
  };
  std::vector<std::string> order;
  std::map<std::string, std::vector<Level>> levels;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    const auto& data = loaded[i].data;
    Level lv;
    lv.intensity = to_string(e.intensity);
    const auto group = AugGroup<double>::from_dataset(e.name, e.intensity, data);
    try {
      const auto s = score_augmentation(std::span<const Sample<double>>(data.samples), group,
                                        data.bank, opt.threads);
      lv.score = s.mean_score;
      lv.samples = s.samples_used;
      if (s.degenerate_views > 0) {
        err << "note: " << e.name << "/" << lv.intensity << ": " << s.degenerate_views
            << " degenerate views skipped, " << s.samples_skipped << " samples excluded\n";
      }
    } catch (const Error& ex) {
      if (ex.code() != ErrorCode::NoValidViews) throw;
    }
    lv.robust = evaluate_accuracy(data, cfg, *mode, opt).accuracy;
    if (!levels.count(e.name)) order.push_back(e.name);
    levels[e.name].push_back(lv);
  }

  ScoredManifest sm;
  for (const auto& name : order) {
    const auto& lvs = levels[name];
    std::vector<double> scores;
    double robust = 0.0;
    std::size_t samples = 0;
    bool stochastic = true;
    Json lj = Json::array();
    for (const auto& lv : lvs) {
      if (lv.score) scores.push_back(*lv.score);
      robust += lv.robust;
      samples = std::max(samples, lv.samples);
      stochastic = stochastic && lv.intensity != "unspecified";
      lj.push_back(Json{{"intensity", lv.intensity},
                        {"robust_accuracy", lv.robust},
                        {"score", lv.score ? Json(*lv.score) : Json(nullptr)}});
    }
    robust /= static_cast<double>(lvs.size());
    Json row{{"name", name}, {"levels", std::move(lj)}, {"robust_accuracy", robust}};
    if (scores.empty()) {
      row["mean_score"] = nullptr;
      row["status"] = "NoValidViews";
      sm.unusable.push_back(name);
    } else {
      const auto ml = combine_levels(scores, stochastic);
      row["mean_score"] = ml.mean_score;
      row["incomplete_levels"] = ml.incomplete;
      row["n_samples"] = samples;
      row["status"] = "ok";
      sm.rows.push_back({name, ml.mean_score, robust, samples});
    }
    sm.rows_json.push_back(std::move(row));
  }

  std::vector<double> xs, ys;
  for (const auto& r : sm.rows) {
    xs.push_back(r.mean_score);
    ys.push_back(r.robust_accuracy);
  }
  try {
    sm.pearson = pearson_correlation(xs, ys);
  } catch (const Error& e) {
    sm.pearson_note = e.what();
  }
  return sm;
}

inline int run_score_augs(const ScoreArgs& a, std::ostream& out, std::ostream& err) {
  auto sm = score_manifest(a, err);
  Json j;
  j["command"] = "score-augs";
  j["robust_mode"] = a.robust_mode;
  j["rows"] = sm.rows_json;
  j["pearson_r"] = sm.pearson ? Json(*sm.pearson) : Json(nullptr);
  if (!sm.pearson) j["pearson_note"] = sm.pearson_note;
  Table t({"name", "mean_score", "robust_accuracy", "n_samples"});
  for (const auto& r : sm.rows) {
    t.add({r.name, fmt(r.mean_score, 6), fmt(r.robust_accuracy), std::to_string(r.n_samples)});
  }
  for (const auto& n : sm.unusable) t.add({n, "n/a", "", "NoValidViews"});
  std::string text = t.str();
  text += "pearson_r  " + (sm.pearson ? fmt(*sm.pearson, 6) : "n/a (" + sm.pearson_note + ")") + '\n';
  emit(a.common, j, text, out);
  return kOk;
}

inline int run_select_anchor(const ScoreArgs& a, std::ostream& out, std::ostream& err) {
  auto sm = score_manifest(a, err);
  if (sm.rows.empty()) {
    throw Error(ErrorCode::NoValidViews, "no augmentation in the manifest has a usable view");
  }
  const auto selected = select_anchor_augmentation(sm.rows);
  Json j;
  j["command"] = "select-anchor";
  j["rows"] = sm.rows_json;
  j["selected"] = selected;
  emit(a.common, j, selected + '\n', out);
  return kOk;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  synth::SynthConfig cfg;
  std::string view_mode = "recovering";
  std::string out_clean;
  std::string out_adv;
  std::size_t threads = 0;
};

inline synth::SynthConfig resolve(const SynthArgs& a) {
  auto cfg = a.cfg;
  const auto vm = synth::parse_view_mode(a.view_mode);
  if (!vm) throw UsageError("unknown view mode '" + a.view_mode + "'");
  cfg.view_mode = *vm;
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

inline Json synth_config_json(const synth::SynthConfig& c) {
  return Json{{"classes", c.classes},   {"d", c.d},
              {"delta", c.delta},       {"samples", c.samples},
              {"seed", c.seed},         {"sigma_clean", c.sigma_clean},
              {"sigma_view", c.sigma_view}, {"view_mode", c.view_mode.to_string()},
              {"views", c.views}};
}

inline int run_synth(const SynthArgs& a, std::ostream& out) {
  const auto cfg = resolve(a);
  const auto world = synth::build_world(cfg, resolve_threads(a.threads));
  io::write_bundle(io::from_dataset(world.clean), a.out_clean);
  io::write_bundle(io::from_dataset(world.adversarial), a.out_adv);
  Json j{{"command", "synth"},
         {"config", synth_config_json(cfg)},
         {"out_adv", a.out_adv},
         {"out_clean", a.out_clean}};
  out << report::dump(j);
  return kOk;
}

struct SynthManifestArgs {
  SynthArgs base;
  std::string out_dir;
  std::string lambdas = "1,0.8,0.6,0.4,0.2,0";
};

/// One adversarial bundle per mixed(lambda) view mode plus a manifest.
inline int run_synth_manifest(const SynthManifestArgs& a, std::ostream& out) {
  const auto lambdas = parse_grid(a.lambdas);
  for (double l : lambdas) {
    if (!(l >= 0.0 && l <= 1.0)) throw UsageError("lambda values must lie in [0, 1]");
  }
  std::filesystem::create_directories(a.out_dir);
  std::vector<io::ManifestEntry> entries;
  Json files = Json::array();
  for (double l : lambdas) {
    auto cfg = resolve(a.base);
    cfg.view_mode = synth::ViewMode::mixed(l);
    const auto world = synth::build_world(cfg, resolve_threads(a.base.threads));
    char name[64];
    std::snprintf(name, sizeof name, "mixed_%.2f", l);
    const std::string file = std::string(name) + ".agcb";
    io::write_bundle(io::from_dataset(world.adversarial),
                     std::filesystem::path(a.out_dir) / file);
    entries.push_back({name, Intensity::Unspecified, file});
    files.push_back(file);
  }
  const auto manifest = std::filesystem::path(a.out_dir) / "manifest.tsv";
  std::ofstream(manifest, std::ios::trunc) << io::format_manifest(entries);
  out << report::dump(Json{{"bundles", files}, {"command", "synth-manifest"},
                           {"manifest", manifest.string()}});
  return kOk;
}

// ---------------------------------------------------------------- sweeps

struct SweepArgs {
  CommonOptions common;
  std::string clean;
  std::string adv;
  std::string grid = "0:3:0.15";
  std::string counts = "1,2,4,8,16,32";
};

struct SweepInputs {
  Loaded clean, adv;
  std::vector<PreparedCorrection<double>> clean_prep, adv_prep;
};

inline SweepInputs load_sweep(const SweepArgs& a, std::ostream& err, std::size_t threads,
                              bool prepare = true) {
  SweepInputs in{load(a.clean, err), load(a.adv, err), {}, {}};
  if (prepare) {
    EvalOptions opt;
    opt.threads = threads;
    in.clean_prep = prepare_dataset(in.clean.data, opt);
    in.adv_prep = prepare_dataset(in.adv.data, opt);
  }
  return in;
}

inline int run_sweep_beta(const SweepArgs& a, std::ostream& out, std::ostream& err) {
  const auto base = a.common.agc_config(err);
  const auto grid = parse_grid(a.grid);
  const auto threads = a.common.worker_threads();
  const auto in = load_sweep(a, err, threads);
  Json cells = Json::array();
  Table t({"beta_clean", "beta_adv", "acc", "rob", "mean"});
  double best = -1.0;
  Json best_cell;
  for (double bc : grid) {
    for (double ba : grid) {
      auto cfg = base;
      cfg.beta_clean = bc;
      cfg.beta_adv = ba;
      const double acc = evaluate_prepared(in.clean.data, std::span(in.clean_prep), cfg, threads).accuracy;
      const double rob = evaluate_prepared(in.adv.data, std::span(in.adv_prep), cfg, threads).accuracy;
      const double mean = (acc + rob) / 2.0;
      Json cell{{"acc", acc}, {"beta_adv", ba}, {"beta_clean", bc}, {"mean", mean}, {"rob", rob}};
      if (mean > best) {
        best = mean;
        best_cell = cell;
      }
      cells.push_back(std::move(cell));
      t.add({fmt(bc, 2), fmt(ba, 2), fmt(acc), fmt(rob), fmt(mean)});
    }
  }
  Json j{{"best", best_cell},
         {"cells", std::move(cells)},
         {"command", "sweep-beta"},
         {"gamma_exp", base.gamma_exp},
         {"grid", grid},
         {"shape", Json::array({grid.size(), grid.size()})}};
  emit(a.common, j, t.str(), out);
  return kOk;
}

struct StepSweepResult {
  std::vector<double> betas, acc, rob;
  std::size_t argmax_clean = 0, argmax_robust = 0;
};

/// Fixed step (beta_clean = beta_adv = b) for every b in the grid. Argmaxes
/// take the first (smallest) step on ties.
inline StepSweepResult step_sweep(const Dataset<double>& clean,
                                  std::span<const PreparedCorrection<double>> clean_prep,
                                  const Dataset<double>& adv,
                                  std::span<const PreparedCorrection<double>> adv_prep,
                                  const AgcConfig& base, const std::vector<double>& grid,
                                  std::size_t threads) {
  StepSweepResult r;
  for (double b : grid) {
    auto cfg = base;
    cfg.beta_clean = cfg.beta_adv = b;
    r.betas.push_back(b);
    r.acc.push_back(evaluate_prepared(clean, clean_prep, cfg, threads).accuracy);
    r.rob.push_back(evaluate_prepared(adv, adv_prep, cfg, threads).accuracy);
  }
  r.argmax_clean = argmax(r.acc);
  r.argmax_robust = argmax(r.rob);
  return r;
}

inline int run_sweep_step(const SweepArgs& a, std::ostream& out, std::ostream& err) {
  const auto base = a.common.agc_config(err);
  const auto grid = parse_grid(a.grid);
  const auto threads = a.common.worker_threads();
  const auto in = load_sweep(a, err, threads);
  const auto r = step_sweep(in.clean.data, in.clean_prep, in.adv.data, in.adv_prep, base, grid, threads);
  Json rows = Json::array();
  Table t({"beta", "acc", "rob"});
  for (std::size_t i = 0; i < r.betas.size(); ++i) {
    rows.push_back(Json{{"acc", r.acc[i]}, {"beta", r.betas[i]}, {"rob", r.rob[i]}});
    t.add({fmt(r.betas[i], 2), fmt(r.acc[i]), fmt(r.rob[i])});
  }
  Json j{{"argmax_clean_beta", r.betas[r.argmax_clean]},
         {"argmax_robust_beta", r.betas[r.argmax_robust]},
         {"best_acc", r.acc[r.argmax_clean]},
         {"best_rob", r.rob[r.argmax_robust]},
         {"command", "sweep-step"},
         {"rows", std::move(rows)}};
  std::string text = t.str();
  text += "argmax clean beta " + fmt(r.betas[r.argmax_clean], 2) + ", argmax robust beta " +
          fmt(r.betas[r.argmax_robust], 2) + '\n';
  emit(a.common, j, text, out);
  return kOk;
}

inline int run_sweep_views(const SweepArgs& a, std::ostream& out, std::ostream& err) {
  const auto cfg = a.common.agc_config(err);
  const auto counts = parse_counts(a.counts);
  const auto threads = a.common.worker_threads();
  const auto in = load_sweep(a, err, threads, false);
  const std::size_t available = std::min(in.clean.data.min_views(), in.adv.data.min_views());
  const std::size_t wanted = *std::max_element(counts.begin(), counts.end());
  if (wanted > available) {
    throw Error(ErrorCode::DimMismatch, "requested " + std::to_string(wanted) +
                                            " views but the bundles carry " +
                                            std::to_string(available));
  }
  Json rows = Json::array();
  Table t({"views", "acc", "rob", "ensemble_acc", "ensemble_rob"});
  for (std::size_t n : counts) {
    EvalOptions opt;
    opt.threads = threads;
    opt.view_limit = n;
    const double acc = evaluate_accuracy(in.clean.data, cfg, EvalMode::Agc, opt).accuracy;
    const double rob = evaluate_accuracy(in.adv.data, cfg, EvalMode::Agc, opt).accuracy;
    const double eacc = evaluate_accuracy(in.clean.data, cfg, EvalMode::Ensemble, opt).accuracy;
    const double erob = evaluate_accuracy(in.adv.data, cfg, EvalMode::Ensemble, opt).accuracy;
    rows.push_back(Json{{"acc", acc}, {"ensemble_acc", eacc}, {"ensemble_rob", erob}, {"rob", rob}, {"views", n}});
    t.add({std::to_string(n), fmt(acc), fmt(rob), fmt(eacc), fmt(erob)});
  }
  emit(a.common, Json{{"command", "sweep-views"}, {"rows", std::move(rows)}}, t.str(), out);
  return kOk;
}

// ---------------------------------------------------------------- latency

struct BenchArgs {
  std::size_t d = 512;
  std::size_t views = 32;
  std::size_t classes = 100;
  std::size_t iters = 10000;
  std::uint64_t seed = 7;
  bool table = false;
};

/// Per-call wall clock of agc_infer on pre-generated random inputs, single
/// threaded; the first 10% of iterations are warm-up and not reported.
inline TimingStats bench_latency(std::size_t d, std::size_t n_views, std::size_t iters,
                                 std::size_t classes = 100, std::uint64_t seed = 7) {
  if (iters < 100) throw UsageError("bench-latency needs --iters >= 100");
  if (d < 2 || n_views < 1 || classes < 2) throw UsageError("bench-latency: bad dimensions");
  auto random_unit = [&](std::uint64_t purpose, std::uint64_t index,
                         const std::vector<double>* center) {
    rng::CounterStream gen(seed, rng::Bench, purpose, index);
    std::vector<double> v(d);
    for (std::size_t k = 0; k < d; ++k) v[k] = (center ? (*center)[k] : 0.0) + 0.1 * gen.gaussian();
    return normalize(std::span<const double>(v));
  };
  std::vector<double> raw;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < classes; ++c) {
    const auto t = random_unit(0, c, nullptr);
    raw.insert(raw.end(), t.values().begin(), t.values().end());
    names.push_back("c" + std::to_string(c));
  }
  const auto bank = build_text_bank(raw, d, names);

  const std::size_t pool = std::min<std::size_t>(iters, 64);
  std::vector<UnitFeature<double>> inputs;
  std::vector<std::vector<UnitFeature<double>>> view_sets;
  AgcConfig cfg;
  for (std::size_t i = 0; i < pool; ++i) {
    inputs.push_back(random_unit(1, i, nullptr));
    std::vector<double> center(inputs.back().values().begin(), inputs.back().values().end());
    std::vector<UnitFeature<double>> vs;
    for (std::size_t v = 0; v < n_views; ++v) vs.push_back(random_unit(2, i * n_views + v, &center));
    view_sets.push_back(std::move(vs));
  }
  const std::size_t warmup = iters / 10;
  std::vector<double> ms;
  ms.reserve(iters - warmup);
  std::size_t sink = 0;
  for (std::size_t it = 0; it < iters; ++it) {
    const std::size_t k = it % pool;
    const auto t0 = std::chrono::steady_clock::now();
    sink += agc_infer(inputs[k], view_sets[k], bank, cfg).prediction.class_index;
    const auto t1 = std::chrono::steady_clock::now();
    if (it >= warmup) ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  if (sink == static_cast<std::size_t>(-1)) std::cerr << "";
  return summarize(std::move(ms));
}

inline int run_bench(const BenchArgs& a, std::ostream& out) {
  const auto t = bench_latency(a.d, a.views, a.iters, a.classes, a.seed);
  if (a.table) {
    Table tb({"d", "views", "classes", "iters", "mean_ms", "p50_ms", "p95_ms"});
    tb.add({std::to_string(a.d), std::to_string(a.views), std::to_string(a.classes),
            std::to_string(a.iters), fmt(t.mean_ms, 6), fmt(t.p50_ms, 6), fmt(t.p95_ms, 6)});
    out << tb.str();
    out << "context: reference end-to-end latency including encoder passes is "
        << kEndToEndReferenceSeconds << " s/sample (not comparable)\n";
    return kOk;
  }
  Json j{{"classes", a.classes},
         {"command", "bench-latency"},
         {"d", a.d},
         {"iters", a.iters},
         {"reference_end_to_end_seconds", kEndToEndReferenceSeconds},
         {"reference_note", "encoder-inclusive end-to-end figure; context only"},
         {"threads", 1},
         {"timing", timing_json(t)},
         {"views", a.views},
         {"warmup_iters", a.iters / 10}};
  out << report::dump(j);
  return kOk;
}

// ---------------------------------------------------------------- main

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"agc: adaptive geodesic correction for normalized embedding classifiers"};
  app.require_subcommand(1);

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "accuracy of one or two bundles under each mode");
  c_eval->add_option("--clean", eval.clean, "clean-condition bundle")->required();
  c_eval->add_option("--adv", eval.adv, "adversarial-condition bundle");
  c_eval->add_option("--mode", eval.mode, "none|ensemble|agc|all")->capture_default_str();
  c_eval->add_flag("--ensemble-include-original", eval.include_original,
                   "average the original feature into the ensemble as well");
  c_eval->add_flag("--verbose", eval.verbose, "per-sample diagnostics");
  c_eval->add_flag("--timing", eval.timing, "add single-threaded per-sample timing");
  add_step_options(c_eval, eval.common);
  add_output_options(c_eval, eval.common);

  ScoreArgs score;
  auto* c_score = app.add_subcommand("score-augs", "margin scores per augmentation type");
  c_score->add_option("--manifest", score.manifest, "augmentation manifest")->required();
  c_score->add_option("--robust-mode", score.robust_mode, "none|ensemble|agc")->capture_default_str();
  add_step_options(c_score, score.common);
  add_output_options(c_score, score.common);

  ScoreArgs select;
  auto* c_select = app.add_subcommand("select-anchor", "augmentation type with the best score");
  c_select->add_option("--manifest", select.manifest, "augmentation manifest")->required();
  c_select->add_option("--robust-mode", select.robust_mode, "none|ensemble|agc")->capture_default_str();
  add_step_options(c_select, select.common);
  add_output_options(c_select, select.common);

  auto add_synth_options = [](CLI::App* cmd, SynthArgs& s) {
    cmd->add_option("--d", s.cfg.d)->capture_default_str();
    cmd->add_option("--classes", s.cfg.classes)->capture_default_str();
    cmd->add_option("--samples", s.cfg.samples)->capture_default_str();
    cmd->add_option("--views", s.cfg.views)->capture_default_str();
    cmd->add_option("--sigma-clean", s.cfg.sigma_clean)->capture_default_str();
    cmd->add_option("--sigma-view", s.cfg.sigma_view)->capture_default_str();
    cmd->add_option("--delta", s.cfg.delta, "attack margin")->capture_default_str();
    cmd->add_option("--seed", s.cfg.seed)->capture_default_str();
    cmd->add_option("--threads", s.threads);
  };
  SynthArgs syn;
  auto* c_synth = app.add_subcommand("synth", "write a synthetic clean/adversarial bundle pair");
  add_synth_options(c_synth, syn);
  c_synth->add_option("--view-mode", syn.view_mode,
                      "recovering|adversarial_centered|mixed:<lambda>")->capture_default_str();
  c_synth->add_option("--out-clean", syn.out_clean)->required();
  c_synth->add_option("--out-adv", syn.out_adv)->required();

  SynthManifestArgs synm;
  auto* c_synm = app.add_subcommand("synth-manifest",
                                    "synthetic adversarial bundles over mixed(lambda) view modes");
  add_synth_options(c_synm, synm.base);
  c_synm->add_option("--lambdas", synm.lambdas)->capture_default_str();
  c_synm->add_option("--out-dir", synm.out_dir)->required();

  auto add_sweep_inputs = [](CLI::App* cmd, SweepArgs& s) {
    cmd->add_option("--clean", s.clean, "clean-condition bundle")->required();
    cmd->add_option("--adv", s.adv, "adversarial-condition bundle")->required();
    add_step_options(cmd, s.common);
    add_output_options(cmd, s.common);
  };
  SweepArgs sb;
  auto* c_sb = app.add_subcommand("sweep-beta", "grid over (beta_clean, beta_adv)");
  add_sweep_inputs(c_sb, sb);
  c_sb->add_option("--grid", sb.grid, "start:stop:step or list")->capture_default_str();

  SweepArgs ss;
  auto* c_ss = app.add_subcommand("sweep-step", "fixed step scale sweep");
  add_sweep_inputs(c_ss, ss);
  c_ss->add_option("--fixed-beta", ss.grid, "start:stop:step or list")->capture_default_str();

  SweepArgs sv;
  auto* c_sv = app.add_subcommand("sweep-views", "accuracy against the number of views");
  add_sweep_inputs(c_sv, sv);
  c_sv->add_option("--n", sv.counts, "comma-separated view counts")->capture_default_str();

  BenchArgs bench;
  auto* c_bench = app.add_subcommand("bench-latency", "per-sample correction latency");
  c_bench->add_option("--d", bench.d)->capture_default_str();
  c_bench->add_option("--views", bench.views)->capture_default_str();
  c_bench->add_option("--classes", bench.classes)->capture_default_str();
  c_bench->add_option("--iters", bench.iters)->capture_default_str();
  c_bench->add_option("--seed", bench.seed)->capture_default_str();
  c_bench->add_flag("--table", bench.table);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (c_eval->parsed()) return run_eval(eval, out, err);
    if (c_score->parsed()) return run_score_augs(score, out, err);
    if (c_select->parsed()) return run_select_anchor(select, out, err);
    if (c_synth->parsed()) return run_synth(syn, out);
    if (c_synm->parsed()) return run_synth_manifest(synm, out);
    if (c_sb->parsed()) return run_sweep_beta(sb, out, err);
    if (c_ss->parsed()) return run_sweep_step(ss, out, err);
    if (c_sv->parsed()) return run_sweep_views(sv, out, err);
    if (c_bench->parsed()) return run_bench(bench, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return is_numeric(e.code()) ? kNumeric : kData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.push_back("agc");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace agc::cli
