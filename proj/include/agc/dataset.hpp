#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "agc/sphere.hpp"
#include "agc/zero_shot.hpp"

namespace agc {

enum class Condition : unsigned char { Clean = 0, Adversarial = 1, Unspecified = 2 };

constexpr const char* to_string(Condition c) noexcept {
  switch (c) {
    case Condition::Clean: return "clean";
    case Condition::Adversarial: return "adversarial";
    case Condition::Unspecified: return "unspecified";
  }
  return "unspecified";
}

/// One labelled input: its feature and the features of its augmented views.
template <std::floating_point T>
struct Sample {
  std::size_t label = 0;
  UnitFeature<T> original;
  std::vector<UnitFeature<T>> views;
};

/// Normalized, in-memory form of an embedding bundle.
template <std::floating_point T>
struct Dataset {
  Condition condition = Condition::Unspecified;
  TextBank<T> bank;
  std::vector<Sample<T>> samples;

  std::size_t dim() const noexcept { return bank.dim(); }
  std::size_t min_views() const noexcept {
    if (samples.empty()) return 0;
    std::size_t n = samples.front().views.size();
    for (const auto& s : samples) n = std::min(n, s.views.size());
    return n;
  }
};

}  // namespace agc
