#pragma once

// Cosine-similarity zero-shot classification over a bank of class text
// features, classification margins, and the first-order margin change along
// a tangent direction.

#include <cstddef>
#include <limits>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "agc/error.hpp"
#include "agc/sphere.hpp"

namespace agc {

/// C >= 2 unit-norm class features of a common dimension, with unique names.
/// Rows are stored contiguously.
template <std::floating_point T>
class TextBank {
 public:
  TextBank() = default;

  std::size_t num_classes() const noexcept { return names_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  const std::vector<std::string>& names() const noexcept { return names_; }

  std::span<const T> row(std::size_t c) const noexcept {
    return std::span<const T>(rows_).subspan(c * dim_, dim_);
  }
  UnitFeature<T> feature(std::size_t c) const {
    auto r = row(c);
    return UnitFeature<T>::assume_unit(std::vector<T>(r.begin(), r.end()));
  }

  template <std::floating_point U>
  friend TextBank<U> build_text_bank(std::span<const U>, std::size_t, std::vector<std::string>);

 private:
  std::vector<T> rows_;
  std::vector<std::string> names_;
  std::size_t dim_ = 0;
};

/// Normalizes each row of a row-major C x d matrix. Throws ZeroNorm (index =
/// row) for a zero row and DuplicateName for repeated names.
template <std::floating_point T>
TextBank<T> build_text_bank(std::span<const T> raw, std::size_t dim,
                            std::vector<std::string> names) {
  const std::size_t classes = names.size();
  if (classes < 2) throw Error(ErrorCode::InvalidArgument, "text bank needs at least 2 classes");
  if (dim < 2 || raw.size() != classes * dim) {
    throw Error(ErrorCode::DimMismatch, "text bank matrix does not match C x d");
  }
  std::set<std::string> seen;
  for (std::size_t c = 0; c < classes; ++c) {
    if (!seen.insert(names[c]).second) {
      throw Error(ErrorCode::DuplicateName, "duplicate class name '" + names[c] + "'", c);
    }
  }
  TextBank<T> bank;
  bank.dim_ = dim;
  bank.names_ = std::move(names);
  bank.rows_.reserve(raw.size());
  for (std::size_t c = 0; c < classes; ++c) {
    UnitFeature<T> f;
    try {
      f = normalize(raw.subspan(c * dim, dim));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ZeroNorm) {
        throw Error(ErrorCode::ZeroNorm, "text bank row " + std::to_string(c) + " has zero norm", c);
      }
      throw;
    }
    bank.rows_.insert(bank.rows_.end(), f.values().begin(), f.values().end());
  }
  return bank;
}

template <std::floating_point T>
TextBank<T> build_text_bank(const std::vector<T>& raw, std::size_t dim,
                            std::vector<std::string> names) {
  return build_text_bank(std::span<const T>(raw), dim, std::move(names));
}

struct Prediction {
  std::size_t class_index = 0;
  std::vector<double> similarities;
};

/// Index of the maximum, lowest index on ties; `skip` is excluded.
inline std::size_t argmax(std::span<const double> xs,
                          std::size_t skip = std::numeric_limits<std::size_t>::max()) {
  std::size_t best = skip == 0 ? 1 : 0;
  for (std::size_t i = best + 1; i < xs.size(); ++i) {
    if (i != skip && xs[i] > xs[best]) best = i;
  }
  return best;
}

/// v^T t_c for every class of the bank.
template <std::floating_point T>
std::vector<double> similarities(std::span<const T> v, const TextBank<T>& bank) {
  require_same_dim(v.size(), bank.dim(), "similarities");
  std::vector<double> out(bank.num_classes());
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = dot(v, bank.row(c));
  return out;
}

template <std::floating_point T>
Prediction predict(const UnitFeature<T>& z, const TextBank<T>& bank) {
  Prediction p;
  p.similarities = similarities(z.values(), bank);
  p.class_index = argmax(p.similarities);
  return p;
}

namespace detail {
template <std::floating_point T>
void require_label(const TextBank<T>& bank, std::size_t y) {
  if (y >= bank.num_classes()) {
    throw Error(ErrorCode::BadLabel,
                "label " + std::to_string(y) + " outside [0, " +
                    std::to_string(bank.num_classes()) + ")",
                y);
  }
}
}  // namespace detail

/// Most similar class other than y (lowest index on ties).
template <std::floating_point T>
std::size_t runner_up(const UnitFeature<T>& z, const TextBank<T>& bank, std::size_t y) {
  detail::require_label(bank, y);
  const auto sims = similarities(z.values(), bank);
  return argmax(sims, y);
}

/// z^T t_y - max_{j != y} z^T t_j.
template <std::floating_point T>
double margin(const UnitFeature<T>& z, const TextBank<T>& bank, std::size_t y) {
  detail::require_label(bank, y);
  const auto sims = similarities(z.values(), bank);
  return sims[y] - sims[argmax(sims, y)];
}

/// u^T t_y - u^T t_{j*}, with j* the runner-up at the base point z.
///
/// j* is held fixed, so this is the one-sided derivative of the margin only
/// where the runner-up is unique.
template <std::floating_point T>
double margin_directional_derivative(const UnitFeature<T>& z, const TangentVector<T>& u,
                                     const TextBank<T>& bank, std::size_t y) {
  require_same_dim(z.dim(), u.dim(), "margin_directional_derivative");
  const std::size_t j = runner_up(z, bank, y);
  return dot(u.values(), bank.row(y)) - dot(u.values(), bank.row(j));
}

}  // namespace agc
