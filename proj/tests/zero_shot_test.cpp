#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "agc/zero_shot.hpp"
#include "test_support.hpp"

namespace agc {
namespace {

using testing::basis;
using testing::Vec;

TextBank<double> two_axis_bank() { return build_text_bank(Vec{1, 0, 0, 1}, 2, {"a", "b"}); }

TEST(TextBank, NormalizesRowsInOrder) {
  const auto bank = build_text_bank(Vec{2, 0, 0, 3}, 2, {"x", "y"});
  ASSERT_EQ(bank.num_classes(), 2u);
  EXPECT_EQ(bank.row(0)[0], 1.0);
  EXPECT_EQ(bank.row(0)[1], 0.0);
  EXPECT_EQ(bank.row(1)[1], 1.0);
  EXPECT_EQ(bank.names()[1], "y");
}

TEST(TextBank, UnitRowsAreUnchanged) {
  const Vec raw{0.6, 0.8, 1.0, 0.0};
  const auto bank = build_text_bank(raw, 2, {"p", "q"});
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(bank.row(i / 2)[i % 2], raw[i]);
}

TEST(TextBank, ZeroRowReportsItsIndex) {
  try {
    build_text_bank(Vec{1, 0, 0, 1, 0, 0}, 2, {"a", "b", "c"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroNorm);
    EXPECT_EQ(e.index(), 2u);
  }
}

TEST(TextBank, RejectsDuplicateNamesAndTooFewClasses) {
  try {
    build_text_bank(Vec{1, 0, 0, 1}, 2, {"a", "a"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DuplicateName);
  }
  EXPECT_THROW(build_text_bank(Vec{1, 0}, 2, {"solo"}), Error);
}

TEST(Predict, ExactClassFeature) {
  std::mt19937_64 gen(11);
  const auto bank = testing::random_bank(gen, 5, 8);
  const auto p = predict(bank.feature(2), bank);
  EXPECT_EQ(p.class_index, 2u);
  EXPECT_NEAR(p.similarities[2], 1.0, 1e-12);
}

TEST(Predict, TiesGoToLowestIndex) {
  const auto p = predict(normalize(Vec{1, 1}), two_axis_bank());
  EXPECT_EQ(p.class_index, 0u);
}

TEST(Predict, MatchesExhaustiveScan) {
  std::mt19937_64 gen(12);
  for (int trial = 0; trial < 200; ++trial) {
    const auto bank = testing::random_bank(gen, 16, 32);
    const auto z = testing::random_unit(gen, 32);
    std::size_t best = 0;
    long double best_sim = -2.0L;
    for (std::size_t c = 0; c < 16; ++c) {
      const long double s = testing::ldot(testing::widen(z.values()), testing::widen(bank.row(c)));
      if (s > best_sim) {
        best_sim = s;
        best = c;
      }
    }
    EXPECT_EQ(predict(z, bank).class_index, best);
  }
}

TEST(Predict, InvariantToPositiveScaling) {
  std::mt19937_64 gen(13);
  const auto bank = testing::random_bank(gen, 10, 16);
  for (int i = 0; i < 50; ++i) {
    auto v = testing::gaussian_vec(gen, 16);
    const auto base = predict(normalize(v), bank).class_index;
    for (auto& x : v) x *= 37.5;
    EXPECT_EQ(predict(normalize(v), bank).class_index, base);
  }
}

TEST(Predict, DimMismatch) {
  EXPECT_THROW(predict(basis(3, 0), two_axis_bank()), Error);
}

TEST(Margin, Examples) {
  const auto bank = two_axis_bank();
  EXPECT_DOUBLE_EQ(margin(basis(2, 0), bank, 0), 1.0);
  EXPECT_DOUBLE_EQ(margin(basis(2, 0), bank, 1), -1.0);
  EXPECT_NEAR(margin(normalize(Vec{1, 1}), bank, 1), 0.0, 1e-15);
}

TEST(Margin, MatchesBruteForceAndSignAgreesWithPrediction) {
  std::mt19937_64 gen(14);
  for (int trial = 0; trial < 300; ++trial) {
    const auto bank = testing::random_bank(gen, 16, 32);
    const auto z = testing::random_unit(gen, 32);
    const std::size_t y = static_cast<std::size_t>(trial) % 16;
    const double m = margin(z, bank, y);
    EXPECT_NEAR(m, static_cast<double>(testing::oracle_margin(z.values(), bank, y)), 1e-14);
    if (m > 0) {
      EXPECT_EQ(predict(z, bank).class_index, y);
    } else if (m < 0) {
      EXPECT_NE(predict(z, bank).class_index, y);
    }
  }
}

TEST(Margin, BadLabel) {
  try {
    margin(basis(2, 0), two_axis_bank(), 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadLabel);
  }
  EXPECT_THROW(runner_up(basis(2, 0), two_axis_bank(), 5), Error);
}

TEST(RunnerUp, Examples) {
  const auto bank3 = build_text_bank(Vec{1, 0, 0, 0, 1, 0, 0, 0, 1}, 3, {"a", "b", "c"});
  EXPECT_EQ(runner_up(basis(3, 0), bank3, 0), 1u);
  EXPECT_EQ(runner_up(basis(2, 1), two_axis_bank(), 0), 1u);
  EXPECT_EQ(runner_up(basis(2, 0), two_axis_bank(), 0), 1u);

  std::mt19937_64 gen(15);
  const auto bank = testing::random_bank(gen, 6, 12);
  const auto z = bank.feature(3);
  std::size_t best = 0;
  double best_sim = -2.0;
  for (std::size_t c = 0; c < 6; ++c) {
    if (c == 3) continue;
    const double s = dot(z.values(), bank.row(c));
    if (s > best_sim) {
      best_sim = s;
      best = c;
    }
  }
  EXPECT_EQ(runner_up(z, bank, 3), best);
}

TEST(MarginDerivative, OrthogonalDirectionGivesZero) {
  const auto bank = build_text_bank(Vec{1, 0, 0, 0, 1, 0}, 3, {"a", "b"});
  const auto z = normalize(Vec{1, 1, 0});
  const TangentVector<double> u(Vec{0, 0, 1}, z);
  EXPECT_DOUBLE_EQ(margin_directional_derivative(z, u, bank, 0), 0.0);
}

TEST(MarginDerivative, PlanarExampleIsSqrtTwo) {
  const double c = std::cos(std::numbers::pi / 4), s = std::sin(std::numbers::pi / 4);
  const auto z = UnitFeature<double>::assume_unit({c, s});
  const auto u = tangent_direction(z, basis(2, 0));
  EXPECT_NEAR(u[0], s, 1e-15);
  EXPECT_NEAR(u[1], -c, 1e-15);
  const double analytic = margin_directional_derivative(z, u, two_axis_bank(), 0);
  EXPECT_NEAR(analytic, std::numbers::sqrt2, 1e-15);
  const double h = 1e-6;
  const double fd = (margin(geodesic_point(z, u, h), two_axis_bank(), 0) - margin(z, two_axis_bank(), 0)) / h;
  EXPECT_NEAR(fd, std::numbers::sqrt2, 1e-5);
}

TEST(MarginDerivative, AgreesWithFiniteDifferencesWhenRunnerUpIsStable) {
  std::mt19937_64 gen(16);
  int tested = 0;
  while (tested < 300) {
    const auto bank = testing::random_bank(gen, 16, 32);
    const auto z = testing::random_unit(gen, 32);
    const std::size_t y = static_cast<std::size_t>(tested) % 16;
    auto sims = similarities(z.values(), bank);
    sims[y] = -3.0;
    std::sort(sims.begin(), sims.end(), std::greater<>());
    if (sims[0] - sims[1] < 1e-3) continue;
    const auto u = tangent_direction(z, testing::random_unit(gen, 32));
    const double h = 1e-5;
    const double fd = (margin(geodesic_point(z, u, h), bank, y) - margin(z, bank, y)) / h;
    EXPECT_NEAR(margin_directional_derivative(z, u, bank, y), fd, 1e-4);
    ++tested;
  }
}

TEST(MarginDerivative, InvariantUnderCommonRotation) {
  std::mt19937_64 gen(17);
  const std::size_t d = 16, classes = 6;
  const auto q = testing::random_orthogonal(gen, d);
  for (int i = 0; i < 100; ++i) {
    const auto bank = testing::random_bank(gen, classes, d);
    Vec rotated;
    for (std::size_t c = 0; c < classes; ++c) {
      const auto r = testing::apply(q, bank.row(c));
      rotated.insert(rotated.end(), r.begin(), r.end());
    }
    const auto qbank = build_text_bank(rotated, d, testing::names(classes));
    const auto z = testing::random_unit(gen, d);
    const auto a = testing::random_unit(gen, d);
    const auto qz = testing::rotate(q, z);
    const auto u = tangent_direction(z, a);
    const auto qu = tangent_direction(qz, testing::rotate(q, a));
    const std::size_t y = static_cast<std::size_t>(i) % classes;
    EXPECT_NEAR(margin(z, bank, y), margin(qz, qbank, y), 1e-6);
    EXPECT_NEAR(margin_directional_derivative(z, u, bank, y),
                margin_directional_derivative(qz, qu, qbank, y), 1e-6);
  }
}

}  // namespace
}  // namespace agc
