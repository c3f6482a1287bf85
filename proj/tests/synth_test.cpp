#include <gtest/gtest.h>

#include <cmath>

#include "agc/synth.hpp"
#include "test_support.hpp"

namespace agc::synth {
namespace {

SynthConfig small(std::size_t samples = 64) {
  SynthConfig c;
  c.samples = samples;
  return c;
}

TEST(Synth, SameSeedSameWorld) {
  const auto a = build_world(small());
  const auto b = build_world(small());
  for (std::size_t c = 0; c < a.bank.num_classes(); ++c) {
    EXPECT_TRUE(std::ranges::equal(a.bank.row(c), b.bank.row(c)));
  }
  for (std::size_t i = 0; i < a.clean.samples.size(); ++i) {
    EXPECT_EQ(a.adversarial.samples[i].original, b.adversarial.samples[i].original);
    EXPECT_EQ(a.adversarial.samples[i].views, b.adversarial.samples[i].views);
  }
  auto other = small();
  other.seed = 8;
  EXPECT_NE(build_world(other).clean.samples[0].original, a.clean.samples[0].original);
}

TEST(Synth, ThreadedGenerationMatchesSerial) {
  const auto a = build_world(small(100), 1);
  const auto b = build_world(small(100), 6);
  for (std::size_t i = 0; i < 100; ++i) {
    EXPECT_EQ(a.clean.samples[i].views, b.clean.samples[i].views);
    EXPECT_EQ(a.adversarial.samples[i].original, b.adversarial.samples[i].original);
    EXPECT_EQ(a.attack_t[i], b.attack_t[i]);
  }
}

TEST(Synth, PlanarTwoClassWorldIsSeparated) {
  SynthConfig c;
  c.d = 2;
  c.classes = 2;
  const auto bank = generate_prototypes(c);
  EXPECT_GE(angle(bank.feature(0), bank.feature(1)), 2.0 * (c.sigma_clean + c.delta));
}

TEST(Synth, CrowdedLowDimensionFails) {
  SynthConfig c;
  c.d = 3;
  c.classes = 64;
  try {
    generate_prototypes(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SeparationFailure);
  }
}

TEST(Synth, NoiselessCleanFeaturesArePrototypes) {
  auto c = small(48);
  c.sigma_clean = 0.0;
  const auto w = build_world(c);
  for (const auto& s : w.clean.samples) {
    EXPECT_LT(testing::max_abs_diff(s.original.values(), w.bank.row(s.label)), 1e-15);
  }
  EXPECT_EQ(evaluate_accuracy(w.clean, AgcConfig{}, EvalMode::None).accuracy, 1.0);
}

TEST(Synth, DefaultCleanAccuracyIsHigh) {
  const auto w = build_world(SynthConfig{});
  EXPECT_GE(evaluate_accuracy(w.clean, AgcConfig{}, EvalMode::None).accuracy, 0.99);
  for (std::size_t i = 0; i < w.clean.samples.size(); ++i) {
    EXPECT_EQ(w.clean.samples[i].label, i % 16);
  }
}

TEST(Synth, AttacksCrossTheBoundaryByDelta) {
  const auto c = small(256);
  const auto w = build_world(c);
  for (const auto& s : w.adversarial.samples) {
    EXPECT_LE(margin(s.original, w.bank, s.label), -c.delta);
  }
}

TEST(Synth, BisectionStopsJustPastTheTarget) {
  const auto c = small(64);
  const auto w = build_world(c);
  for (std::size_t i = 0; i < 64; ++i) {
    const auto& zc = w.clean_features[i];
    const std::size_t y = w.clean.samples[i].label;
    if (margin(zc, w.bank, y) <= -c.delta) continue;
    const auto target = runner_up(zc, w.bank, y);
    const auto u = tangent_direction(zc, w.bank.feature(target));
    const auto before = geodesic_point(zc, u, w.attack_t[i] - 1e-9);
    EXPECT_GT(margin(before, w.bank, y), -c.delta);
    EXPECT_NEAR(margin(w.adversarial.samples[i].original, w.bank, y), -c.delta, 1e-8);
  }
}

TEST(Synth, SymmetricTwoClassAttackCrossesTheBisector) {
  const auto bank = build_text_bank(std::vector<double>{1, 0, 0, 1}, 2, {"a", "b"});
  const auto z = normalize(std::vector<double>{1.0, 0.0});
  const double delta = 0.05;
  const auto r = attack_feature(z, bank, 0, delta);
  EXPECT_EQ(r.target, 1u);
  // the margin cos t - sin t equals -delta at t = pi/4 + asin(delta / sqrt 2)
  const double expected = std::numbers::pi / 4 + std::asin(delta / std::numbers::sqrt2);
  EXPECT_NEAR(r.t, expected, 1e-10);
}

TEST(Synth, NoiselessViewsSitAtTheirCenter) {
  auto c = small(16);
  c.sigma_view = 0.0;
  const auto w = build_world(c);
  for (std::size_t i = 0; i < 16; ++i) {
    for (const auto& v : w.adversarial.samples[i].views) {
      EXPECT_LT(testing::max_abs_diff(v.values(), w.clean_features[i].values()), 1e-15);
    }
  }
}

TEST(Synth, MixedEndpointsMatchNamedModes) {
  std::mt19937_64 gen(40);
  const auto a = testing::random_unit(gen, 16);
  const auto b = testing::random_unit(gen, 16);
  EXPECT_EQ(view_center(a, b, ViewMode::mixed(1.0)), a);
  EXPECT_EQ(view_center(a, b, ViewMode::mixed(0.0)), b);
  const auto half = view_center(a, b, ViewMode::mixed(0.5));
  EXPECT_NEAR(angle(half, a), 0.5 * angle(a, b), 1e-12);
  EXPECT_NEAR(angle(half, b), 0.5 * angle(a, b), 1e-12);
}

TEST(Synth, ParseViewMode) {
  EXPECT_EQ(parse_view_mode("recovering")->lambda, 1.0);
  EXPECT_EQ(parse_view_mode("adversarial_centered")->lambda, 0.0);
  EXPECT_EQ(parse_view_mode("mixed:0.25")->lambda, 0.25);
  EXPECT_FALSE(parse_view_mode("mixed:1.5"));
  EXPECT_FALSE(parse_view_mode("mixed:x"));
  EXPECT_FALSE(parse_view_mode("other"));
}

TEST(Synth, AnchorLandsNearTheCleanFeature) {
  const auto w = build_world(small(64));
  for (std::size_t i = 0; i < 64; ++i) {
    const auto anchor = aggregate_anchor(std::span<const UnitFeature<double>>(w.adversarial.samples[i].views));
    EXPECT_LT(angle(anchor, w.clean_features[i]), 0.2);
  }
}

TEST(Synth, RobustAccuracyFallsAsViewsDriftAdversarial) {
  double prev = 2.0;
  for (double lambda : {1.0, 0.75, 0.5, 0.25, 0.0}) {
    auto c = small(256);
    c.view_mode = ViewMode::mixed(lambda);
    const auto w = build_world(c);
    const double acc = evaluate_accuracy(w.adversarial, AgcConfig{}, EvalMode::Agc).accuracy;
    EXPECT_LE(acc, prev + 1e-12) << "lambda " << lambda;
    prev = acc;
  }
  EXPECT_LT(prev, 0.1);
}

TEST(Synth, AdversarialFeaturesDeviateMore) {
  const auto r = run_synth_experiment(small(256), AgcConfig{});
  EXPECT_GT(r.adversarial.diagnostics.dev, r.clean.diagnostics.dev);
  EXPECT_GT(r.adversarial.diagnostics.beta, r.clean.diagnostics.beta);
  EXPECT_EQ(r.adversarial.none, 0.0);
}

TEST(Synth, ConfigValidation) {
  SynthConfig c;
  c.d = 1;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.delta = 0.0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.view_mode = ViewMode::mixed(-0.1);
  EXPECT_THROW(c.validate(), Error);
}

}  // namespace
}  // namespace agc::synth
