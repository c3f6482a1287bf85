#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace agc {

enum class ErrorCode {
  // geometry / classification
  ZeroNorm,
  DimMismatch,
  DegenerateDirection,
  BadLabel,
  DuplicateName,
  NeedTwoViews,
  AntipodalAnchor,
  EmptyInput,
  InvalidArgument,
  // analysis
  NoValidViews,
  DegenerateVariance,
  // synthetic world
  SeparationFailure,
  AttackFailure,
  // file formats
  BadMagic,
  UnsupportedVersion,
  Truncated,
  LabelOutOfRange,
  ZeroNormFeature,
  TrailingData,
  ManifestFormat,
  IoFailure,
};

constexpr const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ZeroNorm: return "ZeroNorm";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::DegenerateDirection: return "DegenerateDirection";
    case ErrorCode::BadLabel: return "BadLabel";
    case ErrorCode::DuplicateName: return "DuplicateName";
    case ErrorCode::NeedTwoViews: return "NeedTwoViews";
    case ErrorCode::AntipodalAnchor: return "AntipodalAnchor";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NoValidViews: return "NoValidViews";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::SeparationFailure: return "SeparationFailure";
    case ErrorCode::AttackFailure: return "AttackFailure";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::Truncated: return "Truncated";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::ZeroNormFeature: return "ZeroNormFeature";
    case ErrorCode::TrailingData: return "TrailingData";
    case ErrorCode::ManifestFormat: return "ManifestFormat";
    case ErrorCode::IoFailure: return "IoFailure";
  }
  return "Unknown";
}

/// Numeric degeneracies (as opposed to malformed data or bad arguments).
constexpr bool is_numeric(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ZeroNorm:
    case ErrorCode::DegenerateDirection:
    case ErrorCode::NeedTwoViews:
    case ErrorCode::AntipodalAnchor:
    case ErrorCode::NoValidViews:
    case ErrorCode::DegenerateVariance:
    case ErrorCode::SeparationFailure:
    case ErrorCode::AttackFailure:
      return true;
    default:
      return false;
  }
}

/// Single exception type for the library. `index()` carries the row, sample
/// or byte offset the error refers to, when there is one; `which()` is a
/// secondary position (e.g. the view within a sample).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what,
        std::optional<std::size_t> index = std::nullopt,
        std::optional<std::size_t> which = std::nullopt)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code),
        index_(index),
        which_(which) {}

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> index() const noexcept { return index_; }
  std::optional<std::size_t> which() const noexcept { return which_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> index_;
  std::optional<std::size_t> which_;
};

}  // namespace agc
