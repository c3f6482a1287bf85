#pragma once

// Primitives of unit-hypersphere geometry: normalization, angles, tangent
// projection and great-circle (geodesic) evaluation.
//
// Storage is templated on the scalar type; every reduction is carried out in
// double regardless of storage.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "agc/error.hpp"

namespace agc {

/// Norm tolerance of the unit-norm invariant for a storage precision.
template <std::floating_point T>
inline constexpr double unit_tolerance = sizeof(T) >= sizeof(double) ? 1e-6 : 1e-4;

inline constexpr double kZeroNormThreshold = 1e-12;
inline constexpr double kDegenerateDirectionThreshold = 1e-9;

template <std::floating_point A, std::floating_point B>
double dot(std::span<const A> a, std::span<const B> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return acc;
}

template <std::floating_point T>
double norm(std::span<const T> v) {
  return std::sqrt(dot(v, v));
}

/// A point on the unit hypersphere S^{d-1}, d >= 2.
template <std::floating_point T>
class UnitFeature {
 public:
  using value_type = T;

  UnitFeature() = default;

  /// Wraps values the caller guarantees are already unit norm.
  static UnitFeature assume_unit(std::vector<T> values) {
    UnitFeature f;
    f.values_ = std::move(values);
    return f;
  }

  std::span<const T> values() const noexcept { return values_; }
  std::size_t dim() const noexcept { return values_.size(); }
  T operator[](std::size_t i) const noexcept { return values_[i]; }

  template <std::floating_point U>
  UnitFeature<U> cast() const {
    return UnitFeature<U>::assume_unit(std::vector<U>(values_.begin(), values_.end()));
  }

  friend bool operator==(const UnitFeature&, const UnitFeature&) = default;

 private:
  std::vector<T> values_;
};

/// Unit vector in the tangent space of `base()`.
template <std::floating_point T>
class TangentVector {
 public:
  TangentVector() = default;
  TangentVector(std::vector<T> values, UnitFeature<T> base)
      : values_(std::move(values)), base_(std::move(base)) {}

  std::span<const T> values() const noexcept { return values_; }
  std::size_t dim() const noexcept { return values_.size(); }
  const UnitFeature<T>& base() const noexcept { return base_; }
  T operator[](std::size_t i) const noexcept { return values_[i]; }

 private:
  std::vector<T> values_;
  UnitFeature<T> base_;
};

template <std::floating_point A, std::floating_point B>
double dot(const UnitFeature<A>& a, const UnitFeature<B>& b) {
  return dot(a.values(), b.values());
}

inline void require_same_dim(std::size_t a, std::size_t b, const char* where) {
  if (a != b) {
    throw Error(ErrorCode::DimMismatch,
                std::string(where) + ": " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

/// Scales `v` to unit norm. Throws ZeroNorm when ||v|| < 1e-12.
template <std::floating_point T>
UnitFeature<T> normalize(std::span<const T> v) {
  if (v.size() < 2) {
    throw Error(ErrorCode::InvalidArgument, "normalize: dimension must be >= 2");
  }
  const double n = norm(v);
  if (!(n >= kZeroNormThreshold)) {
    throw Error(ErrorCode::ZeroNorm, "normalize: vector norm below 1e-12");
  }
  std::vector<T> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = static_cast<T>(static_cast<double>(v[i]) / n);
  }
  return UnitFeature<T>::assume_unit(std::move(out));
}

template <std::floating_point T>
UnitFeature<T> normalize(const std::vector<T>& v) {
  return normalize(std::span<const T>(v));
}

/// Geodesic distance arccos(z^T a), inner product clamped to [-1, 1].
template <std::floating_point T>
double angle(const UnitFeature<T>& z, const UnitFeature<T>& a) {
  require_same_dim(z.dim(), a.dim(), "angle");
  return std::acos(std::clamp(dot(z, a), -1.0, 1.0));
}

/// Unit tangent at z pointing along the geodesic toward a:
/// normalize(a - (a^T z) z). Undefined for coincident or antipodal points.
template <std::floating_point T>
TangentVector<T> tangent_direction(const UnitFeature<T>& z, const UnitFeature<T>& a) {
  require_same_dim(z.dim(), a.dim(), "tangent_direction");
  const std::size_t d = z.dim();
  const double c = dot(z, a);
  std::vector<double> r(d);
  double rr = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    r[i] = static_cast<double>(a[i]) - c * static_cast<double>(z[i]);
    rr += r[i] * r[i];
  }
  const double rn = std::sqrt(rr);
  if (!(rn >= kDegenerateDirectionThreshold)) {
    throw Error(ErrorCode::DegenerateDirection,
                "tangent_direction: points are coincident or antipodal");
  }
  std::vector<T> u(d);
  for (std::size_t i = 0; i < d; ++i) u[i] = static_cast<T>(r[i] / rn);
  return TangentVector<T>(std::move(u), z);
}

/// cos(t) z + sin(t) u, renormalized. t may be negative or exceed the angle
/// to whatever point u was derived from.
template <std::floating_point T>
UnitFeature<T> geodesic_point(const UnitFeature<T>& z, const TangentVector<T>& u, double t) {
  require_same_dim(z.dim(), u.dim(), "geodesic_point");
  const double c = std::cos(t);
  const double s = std::sin(t);
  const std::size_t d = z.dim();
  std::vector<double> p(d);
  double pp = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    p[i] = c * static_cast<double>(z[i]) + s * static_cast<double>(u[i]);
    pp += p[i] * p[i];
  }
  const double pn = std::sqrt(pp);
  std::vector<T> out(d);
  for (std::size_t i = 0; i < d; ++i) out[i] = static_cast<T>(p[i] / pn);
  return UnitFeature<T>::assume_unit(std::move(out));
}

/// Angular distance travelled by geodesic_point for a parameter t, i.e. the
/// angle between z and geodesic_point(z, u, t).
inline double wrapped_angle(double t) {
  const double two_pi = 2.0 * std::numbers::pi;
  const double r = std::fmod(std::abs(t), two_pi);
  return std::min(r, two_pi - r);
}

}  // namespace agc
