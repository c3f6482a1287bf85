#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "agc/aug_eval.hpp"
#include "agc/synth.hpp"
#include "test_support.hpp"

namespace agc {
namespace {

using testing::basis;
using testing::Vec;

Dataset<double> dataset_of(TextBank<double> bank, std::vector<Sample<double>> samples) {
  Dataset<double> d;
  d.bank = std::move(bank);
  d.samples = std::move(samples);
  return d;
}

std::span<const Sample<double>> samples_of(const Dataset<double>& d) { return d.samples; }

TEST(ScoreAugmentation, PlanarExampleIsSqrtTwo) {
  const auto bank = build_text_bank(Vec{1, 0, 0, 1}, 2, {"a", "b"});
  const auto z = normalize(Vec{1, 1});
  const auto data = dataset_of(bank, {{0, z, {basis(2, 0)}}});
  const auto group = AugGroup<double>::from_dataset("e1", Intensity::Unspecified, data);
  const auto s = score_augmentation(samples_of(data), group, bank);
  EXPECT_NEAR(s.mean_score, std::numbers::sqrt2, 1e-12);
  EXPECT_EQ(s.samples_used, 1u);
}

TEST(ScoreAugmentation, IdentityViewsHaveNoUsableDirection) {
  std::mt19937_64 gen(31);
  const auto bank = testing::random_bank(gen, 4, 8);
  std::vector<Sample<double>> samples;
  for (std::size_t i = 0; i < 5; ++i) {
    const auto z = testing::random_unit(gen, 8);
    samples.push_back({i % 4, z, {z, z, z}});
  }
  const auto data = dataset_of(bank, samples);
  const auto group = AugGroup<double>::from_dataset("identity", Intensity::Unspecified, data);
  try {
    score_augmentation(samples_of(data), group, bank);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoValidViews);
  }
}

TEST(ScoreAugmentation, DegenerateSamplesAreExcludedNotZeroed) {
  const auto bank = build_text_bank(Vec{1, 0, 0, 1}, 2, {"a", "b"});
  const auto z = normalize(Vec{1, 1});
  const auto data = dataset_of(bank, {{0, z, {basis(2, 0)}}, {0, z, {z}}});
  const auto group = AugGroup<double>::from_dataset("g", Intensity::Weak, data);
  const auto s = score_augmentation(samples_of(data), group, bank);
  EXPECT_NEAR(s.mean_score, std::numbers::sqrt2, 1e-12);
  EXPECT_EQ(s.samples_used, 1u);
  EXPECT_EQ(s.samples_skipped, 1u);
  EXPECT_EQ(s.degenerate_views, 1u);
}

TEST(ScoreAugmentation, RecoveringViewsScoreHigherThanAdversarialOnes) {
  synth::SynthConfig cfg;
  cfg.samples = 128;
  const auto good = synth::build_world(cfg);
  cfg.view_mode = synth::ViewMode::adversarial_centered();
  const auto bad = synth::build_world(cfg);
  const auto g_good = AugGroup<double>::from_dataset("good", Intensity::Unspecified, good.adversarial);
  const auto g_bad = AugGroup<double>::from_dataset("bad", Intensity::Unspecified, bad.adversarial);
  const double s_good = score_augmentation(samples_of(good.adversarial), g_good, good.bank).mean_score;
  const double s_bad = score_augmentation(samples_of(bad.adversarial), g_bad, bad.bank).mean_score;
  EXPECT_GT(s_good, s_bad);
}

TEST(ScoreAugmentation, ThreadCountDoesNotChangeTheResult) {
  synth::SynthConfig cfg;
  cfg.samples = 100;
  const auto w = synth::build_world(cfg);
  const auto g = AugGroup<double>::from_dataset("g", Intensity::Unspecified, w.adversarial);
  const auto serial = score_augmentation(samples_of(w.adversarial), g, w.bank, 1);
  const auto parallel = score_augmentation(samples_of(w.adversarial), g, w.bank, 7);
  EXPECT_EQ(serial.mean_score, parallel.mean_score);
}

TEST(Multilevel, MeansOverIntensities) {
  const auto bank = build_text_bank(Vec{1, 0, 0, 1}, 2, {"a", "b"});
  const auto data = dataset_of(bank, {{0, normalize(Vec{1, 1}), {basis(2, 0)}}});
  std::vector<AugGroup<double>> groups;
  for (auto i : {Intensity::Weak, Intensity::Medium, Intensity::Strong}) {
    groups.push_back(AugGroup<double>::from_dataset("p", i, data));
  }
  const auto one = score_augmentation(samples_of(data), groups[0], bank).mean_score;
  const auto all = score_augmentation_multilevel(samples_of(data), std::span<const AugGroup<double>>(groups), bank);
  EXPECT_DOUBLE_EQ(all.mean_score, one);
  EXPECT_FALSE(all.incomplete);

  const auto two = score_augmentation_multilevel(samples_of(data), std::span<const AugGroup<double>>(groups).first(2), bank);
  EXPECT_TRUE(two.incomplete);
  EXPECT_EQ(two.levels, 2u);

  groups[1].name = "q";
  EXPECT_THROW(score_augmentation_multilevel(samples_of(data), std::span<const AugGroup<double>>(groups), bank), Error);
}

TEST(Multilevel, CombineLevels) {
  const Vec scores{0.1, 0.2, 0.3};
  EXPECT_NEAR(combine_levels(scores).mean_score, 0.2, 1e-15);
  const auto partial = combine_levels(std::span<const double>(scores).first(2));
  EXPECT_NEAR(partial.mean_score, 0.15, 1e-15);
  EXPECT_TRUE(partial.incomplete);
}

TEST(EvaluateAccuracy, PerfectFeaturesUnderPlainMode) {
  std::mt19937_64 gen(32);
  const auto bank = testing::random_bank(gen, 5, 8);
  std::vector<Sample<double>> samples;
  for (std::size_t i = 0; i < 20; ++i) samples.push_back({i % 5, bank.feature(i % 5), {}});
  const auto data = dataset_of(bank, samples);
  EXPECT_EQ(evaluate_accuracy(data, AgcConfig{}, EvalMode::None).accuracy, 1.0);
  EXPECT_THROW(evaluate_accuracy(data, AgcConfig{}, EvalMode::Agc), Error);
}

TEST(EvaluateAccuracy, EnsembleOfIdenticalViewsMatchesPlain) {
  std::mt19937_64 gen(33);
  const auto bank = testing::random_bank(gen, 6, 8);
  std::vector<Sample<double>> samples;
  for (std::size_t i = 0; i < 50; ++i) {
    const auto z = testing::random_unit(gen, 8);
    samples.push_back({i % 6, z, {z, z, z, z}});
  }
  const auto data = dataset_of(bank, samples);
  const auto plain = evaluate_accuracy(data, AgcConfig{}, EvalMode::None);
  const auto ens = evaluate_accuracy(data, AgcConfig{}, EvalMode::Ensemble);
  EXPECT_EQ(plain.predictions, ens.predictions);
}

TEST(EvaluateAccuracy, PlainModeIgnoresViews) {
  synth::SynthConfig cfg;
  cfg.samples = 64;
  auto w = synth::build_world(cfg);
  const double before = evaluate_accuracy(w.adversarial, AgcConfig{}, EvalMode::None).accuracy;
  for (auto& s : w.adversarial.samples) s.views = {s.original};
  EXPECT_EQ(evaluate_accuracy(w.adversarial, AgcConfig{}, EvalMode::None).accuracy, before);
}

TEST(EvaluateAccuracy, EnsembleCanIncludeTheOriginal) {
  const auto bank = build_text_bank(Vec{1, 0, 0, 1}, 2, {"a", "b"});
  const auto z = normalize(Vec{1, 0.1});
  const std::vector<UnitFeature<double>> views{normalize(Vec{0.45, 1})};
  EXPECT_EQ(ensemble_predict(z, std::span<const UnitFeature<double>>(views), bank, false).class_index, 1u);
  EXPECT_EQ(ensemble_predict(z, std::span<const UnitFeature<double>>(views), bank, true).class_index, 0u);
}

TEST(EvaluateAccuracy, SyntheticAdversarialWorld) {
  synth::SynthConfig cfg;
  cfg.samples = 128;
  const auto w = synth::build_world(cfg);
  const double none = evaluate_accuracy(w.adversarial, AgcConfig{}, EvalMode::None).accuracy;
  const double agc = evaluate_accuracy(w.adversarial, AgcConfig{}, EvalMode::Agc).accuracy;
  EXPECT_EQ(none, 0.0);
  EXPECT_GE(agc, 0.9);
}

TEST(EvaluateAccuracy, ParallelMatchesSerialExactly) {
  synth::SynthConfig cfg;
  cfg.samples = 97;
  const auto w = synth::build_world(cfg);
  EvalOptions one, many;
  many.threads = 5;
  for (auto mode : {EvalMode::None, EvalMode::Ensemble, EvalMode::Agc}) {
    const auto a = evaluate_accuracy(w.adversarial, AgcConfig{}, mode, one);
    const auto b = evaluate_accuracy(w.adversarial, AgcConfig{}, mode, many);
    EXPECT_EQ(a.predictions, b.predictions);
    for (std::size_t i = 0; i < a.diagnostics.size(); ++i) {
      EXPECT_EQ(a.diagnostics[i].beta, b.diagnostics[i].beta);
    }
  }
}

TEST(EvaluateAccuracy, PreparedEvaluationMatchesDirect) {
  synth::SynthConfig cfg;
  cfg.samples = 64;
  const auto w = synth::build_world(cfg);
  const auto prep = prepare_dataset(w.adversarial);
  for (double b : {0.0, 0.6, 1.5}) {
    AgcConfig c;
    c.beta_clean = c.beta_adv = b;
    EXPECT_EQ(evaluate_prepared(w.adversarial, std::span<const PreparedCorrection<double>>(prep), c).predictions,
              evaluate_accuracy(w.adversarial, c, EvalMode::Agc).predictions);
  }
}

TEST(Pearson, Examples) {
  const Vec xs{0.1, 0.5, 0.2, 0.9, 0.4};
  Vec lin, neg;
  for (double x : xs) {
    lin.push_back(2 * x + 1);
    neg.push_back(-x);
  }
  EXPECT_NEAR(pearson_correlation(xs, lin), 1.0, 1e-14);
  EXPECT_NEAR(pearson_correlation(xs, neg), -1.0, 1e-14);
  try {
    pearson_correlation(xs, Vec(5, 0.3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateVariance);
  }
  EXPECT_THROW(pearson_correlation(Vec{1, 2}, Vec{1, 2}), Error);
}

TEST(Pearson, AffineInvariance) {
  std::mt19937_64 gen(34);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    Vec xs(8), ys(8);
    for (std::size_t i = 0; i < 8; ++i) {
      xs[i] = n(gen);
      ys[i] = 0.5 * xs[i] + n(gen);
    }
    const double r = pearson_correlation(xs, ys);
    Vec xt(8), yt(8);
    for (std::size_t i = 0; i < 8; ++i) {
      xt[i] = 3.0 * xs[i] - 7.0;
      yt[i] = -0.25 * ys[i] + 2.0;
    }
    EXPECT_NEAR(pearson_correlation(xt, ys), r, 1e-12);
    EXPECT_NEAR(pearson_correlation(xs, yt), -r, 1e-12);
  }
}

TEST(SelectAnchor, Examples) {
  EXPECT_EQ(select_anchor_augmentation(std::vector<AugScoreRow>{{"A", 0.1}, {"B", 0.3}}), "B");
  EXPECT_EQ(select_anchor_augmentation(std::vector<AugScoreRow>{{"B", 0.2}, {"A", 0.2}}), "A");
  EXPECT_EQ(select_anchor_augmentation(std::vector<AugScoreRow>{{"only", -1.0}}), "only");
  try {
    select_anchor_augmentation(std::vector<AugScoreRow>{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyInput);
  }
}

TEST(SelectAnchor, InvariantUnderPositiveAffineRescaling) {
  std::mt19937_64 gen(35);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<AugScoreRow> rows;
    for (int i = 0; i < 6; ++i) rows.push_back({"aug" + std::to_string(i), u(gen)});
    const auto chosen = select_anchor_augmentation(rows);
    for (auto& r : rows) r.mean_score = 4.0 * r.mean_score + 3.0;
    EXPECT_EQ(select_anchor_augmentation(rows), chosen);
  }
}

}  // namespace
}  // namespace agc
