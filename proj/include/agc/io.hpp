#pragma once

// AGCB embedding bundles and augmentation manifests.
//
// AGCB layout, all integers little-endian:
//
//   offset  size   field
//   0       4      magic "AGCB"
//   4       4      u32 version (= 1)
//   8       4      u32 d
//   12      4      u32 C (classes)
//   16      4      u32 M (samples)
//   20      4      u32 N (views per sample)
//   24      1      u8 condition (0 clean, 1 adversarial, 2 unspecified)
//   25      3      zero padding
//   28      ...    C names, each u16 byte length + UTF-8 bytes
//           C*d*4  bank rows, f32
//           ...    M records: u32 label, d f32 original, N*d f32 views
//
// Features are kept as raw f32 in EmbeddingBundle so that a read/write round
// trip is byte exact; to_dataset() normalizes into double.

#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "agc/aug_eval.hpp"
#include "agc/dataset.hpp"
#include "agc/error.hpp"
#include "agc/sphere.hpp"
#include "agc/zero_shot.hpp"

namespace agc::io {

inline constexpr std::array<char, 4> kMagic{'A', 'G', 'C', 'B'};
inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::size_t kHeaderSize = 28;
inline constexpr double kBankNormWarning = 1e-3;

struct EmbeddingBundle {
  std::uint32_t version = kFormatVersion;
  std::uint32_t d = 0;
  std::uint32_t classes = 0;
  std::uint32_t samples = 0;
  std::uint32_t views = 0;
  Condition condition = Condition::Unspecified;
  std::vector<std::string> names;
  std::vector<float> bank;       // classes x d
  std::vector<std::uint32_t> labels;
  std::vector<float> originals;  // samples x d
  std::vector<float> view_data;  // samples x views x d

  std::span<const float> bank_row(std::size_t c) const {
    return std::span<const float>(bank).subspan(c * d, d);
  }
  std::span<const float> original(std::size_t m) const {
    return std::span<const float>(originals).subspan(m * d, d);
  }
  std::span<const float> view(std::size_t m, std::size_t v) const {
    return std::span<const float>(view_data).subspan((m * views + v) * d, d);
  }

  friend bool operator==(const EmbeddingBundle&, const EmbeddingBundle&) = default;
};

/// Byte offset of sample m's record.
inline std::size_t record_offset(const EmbeddingBundle& b, std::size_t m) {
  std::size_t off = kHeaderSize;
  for (const auto& n : b.names) off += 2 + n.size();
  off += std::size_t{b.classes} * b.d * 4;
  return off + m * (4 + (std::size_t{b.d} + std::size_t{b.views} * b.d) * 4);
}

namespace detail {

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<std::byte>(v)); }
  void u16(std::uint16_t v) {
    u8(static_cast<std::uint8_t>(v));
    u8(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) u8(static_cast<std::uint8_t>(v >> s));
  }
  void f32(float f) { u32(std::bit_cast<std::uint32_t>(f)); }
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::byte*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  std::vector<std::byte> take() { return std::move(out_); }

 private:
  std::vector<std::byte> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::byte> data) : data_(data) {}

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }

  void need(std::size_t n, const char* field) const {
    if (remaining() < n) {
      throw Error(ErrorCode::Truncated,
                  std::string("file ends inside ") + field + " at byte offset " +
                      std::to_string(pos_),
                  pos_);
    }
  }
  std::uint8_t u8(const char* field) {
    need(1, field);
    return static_cast<std::uint8_t>(data_[pos_++]);
  }
  std::uint16_t u16(const char* field) {
    need(2, field);
    std::uint16_t v = 0;
    for (int s = 0; s < 16; s += 8) v |= std::uint16_t(std::uint8_t(data_[pos_++])) << s;
    return v;
  }
  std::uint32_t u32(const char* field) {
    need(4, field);
    std::uint32_t v = 0;
    for (int s = 0; s < 32; s += 8) v |= std::uint32_t(std::uint8_t(data_[pos_++])) << s;
    return v;
  }
  void f32s(std::vector<float>& out, std::size_t n, const char* field) {
    need(n * 4, field);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t v = 0;
      for (int s = 0; s < 32; s += 8) v |= std::uint32_t(std::uint8_t(data_[pos_++])) << s;
      out.push_back(std::bit_cast<float>(v));
    }
  }
  std::string str(std::size_t n, const char* field) {
    need(n, field);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::byte> data_;
  std::size_t pos_ = 0;
};

inline bool near_zero(std::span<const float> v) { return !(norm(v) >= kZeroNormThreshold); }

}  // namespace detail

/// Checks sizes, labels and feature norms. Throws LabelOutOfRange (index =
/// sample) and ZeroNormFeature (index = sample, which = 0 for the original,
/// v + 1 for view v). Zero bank rows are ZeroNorm with index = row.
inline void validate(const EmbeddingBundle& b) {
  if (b.d < 2) throw Error(ErrorCode::InvalidArgument, "bundle dimension must be >= 2");
  if (b.classes < 2) throw Error(ErrorCode::InvalidArgument, "bundle needs >= 2 classes");
  if (b.samples < 1) throw Error(ErrorCode::InvalidArgument, "bundle needs >= 1 sample");
  if (b.names.size() != b.classes || b.bank.size() != std::size_t{b.classes} * b.d ||
      b.labels.size() != b.samples || b.originals.size() != std::size_t{b.samples} * b.d ||
      b.view_data.size() != std::size_t{b.samples} * b.views * b.d) {
    throw Error(ErrorCode::DimMismatch, "bundle payload sizes do not match its header");
  }
  for (std::size_t c = 0; c < b.classes; ++c) {
    if (b.names[c].size() > 0xFFFF) throw Error(ErrorCode::InvalidArgument, "class name too long", c);
    if (detail::near_zero(b.bank_row(c))) {
      throw Error(ErrorCode::ZeroNorm, "bank row " + std::to_string(c) + " has zero norm", c);
    }
  }
  for (std::size_t m = 0; m < b.samples; ++m) {
    if (b.labels[m] >= b.classes) {
      throw Error(ErrorCode::LabelOutOfRange,
                  "sample " + std::to_string(m) + " has label " + std::to_string(b.labels[m]) +
                      " >= " + std::to_string(b.classes),
                  m);
    }
    if (detail::near_zero(b.original(m))) {
      throw Error(ErrorCode::ZeroNormFeature,
                  "sample " + std::to_string(m) + " original feature has zero norm", m, 0);
    }
    for (std::size_t v = 0; v < b.views; ++v) {
      if (detail::near_zero(b.view(m, v))) {
        throw Error(ErrorCode::ZeroNormFeature,
                    "sample " + std::to_string(m) + " view " + std::to_string(v) +
                        " has zero norm",
                    m, v + 1);
      }
    }
  }
}

inline std::vector<std::byte> encode_bundle(const EmbeddingBundle& b) {
  validate(b);
  detail::Writer w;
  w.bytes(kMagic.data(), kMagic.size());
  w.u32(b.version);
  w.u32(b.d);
  w.u32(b.classes);
  w.u32(b.samples);
  w.u32(b.views);
  w.u8(static_cast<std::uint8_t>(b.condition));
  w.u8(0);
  w.u8(0);
  w.u8(0);
  for (const auto& n : b.names) {
    w.u16(static_cast<std::uint16_t>(n.size()));
    w.bytes(n.data(), n.size());
  }
  for (float f : b.bank) w.f32(f);
  const std::size_t view_floats = std::size_t{b.views} * b.d;
  for (std::size_t m = 0; m < b.samples; ++m) {
    w.u32(b.labels[m]);
    for (float f : b.original(m)) w.f32(f);
    const auto* v = b.view_data.data() + m * view_floats;
    for (std::size_t k = 0; k < view_floats; ++k) w.f32(v[k]);
  }
  return w.take();
}

inline EmbeddingBundle decode_bundle(std::span<const std::byte> data) {
  detail::Reader r(data);
  EmbeddingBundle b;
  const auto magic = r.str(4, "magic");
  if (magic != std::string(kMagic.data(), kMagic.size())) {
    throw Error(ErrorCode::BadMagic, "expected magic 'AGCB'", 0);
  }
  b.version = r.u32("version");
  if (b.version != kFormatVersion) {
    throw Error(ErrorCode::UnsupportedVersion, "bundle version " + std::to_string(b.version), 4);
  }
  b.d = r.u32("header");
  b.classes = r.u32("header");
  b.samples = r.u32("header");
  b.views = r.u32("header");
  const auto cond = r.u8("header");
  if (cond > 2) throw Error(ErrorCode::InvalidArgument, "unknown condition byte", 24);
  b.condition = static_cast<Condition>(cond);
  for (int i = 0; i < 3; ++i) r.u8("header padding");

  for (std::size_t c = 0; c < b.classes; ++c) {
    const auto len = r.u16("class name length");
    b.names.push_back(r.str(len, "class name"));
  }
  const std::size_t d = b.d;
  r.need(b.classes * d * 4, "bank rows");
  b.bank.reserve(b.classes * d);
  r.f32s(b.bank, b.classes * d, "bank rows");

  for (std::size_t m = 0; m < b.samples; ++m) {
    b.labels.push_back(r.u32("sample label"));
    r.f32s(b.originals, d, "original feature");
    r.f32s(b.view_data, std::size_t{b.views} * d, "view features");
  }
  if (r.remaining() != 0) {
    throw Error(ErrorCode::TrailingData,
                std::to_string(r.remaining()) + " unexpected bytes after the last record",
                r.offset());
  }
  validate(b);
  return b;
}

inline std::vector<std::byte> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::byte> out(raw.size());
  std::memcpy(out.data(), raw.data(), raw.size());
  return out;
}

inline void write_file(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

inline EmbeddingBundle read_bundle(const std::filesystem::path& path) {
  return decode_bundle(read_file(path));
}

inline void write_bundle(const EmbeddingBundle& b, const std::filesystem::path& path) {
  write_file(path, encode_bundle(b));
}

struct LoadReport {
  double max_bank_norm_deviation = 0.0;
  double max_feature_norm_deviation = 0.0;
  std::vector<std::string> warnings;
};

namespace detail {
template <std::floating_point T>
UnitFeature<T> to_unit(std::span<const float> v, double& max_dev) {
  const double n = norm(v);
  max_dev = std::max(max_dev, std::abs(n - 1.0));
  std::vector<T> out(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) out[k] = static_cast<T>(static_cast<double>(v[k]) / n);
  return UnitFeature<T>::assume_unit(std::move(out));
}
}  // namespace detail

/// Normalized in-memory view of a bundle.
template <std::floating_point T = double>
Dataset<T> to_dataset(const EmbeddingBundle& b, LoadReport* report = nullptr) {
  validate(b);
  LoadReport local;
  LoadReport& rep = report ? *report : local;
  Dataset<T> ds;
  ds.condition = b.condition;
  std::vector<T> raw(b.bank.begin(), b.bank.end());
  for (std::size_t c = 0; c < b.classes; ++c) {
    const double dev = std::abs(norm(b.bank_row(c)) - 1.0);
    rep.max_bank_norm_deviation = std::max(rep.max_bank_norm_deviation, dev);
    if (dev > kBankNormWarning) {
      rep.warnings.push_back("bank row " + std::to_string(c) + " norm deviates from 1 by " +
                             std::to_string(dev));
    }
  }
  ds.bank = build_text_bank(std::span<const T>(raw), b.d, b.names);
  ds.samples.resize(b.samples);
  for (std::size_t m = 0; m < b.samples; ++m) {
    auto& s = ds.samples[m];
    s.label = b.labels[m];
    s.original = detail::to_unit<T>(b.original(m), rep.max_feature_norm_deviation);
    s.views.reserve(b.views);
    for (std::size_t v = 0; v < b.views; ++v) {
      s.views.push_back(detail::to_unit<T>(b.view(m, v), rep.max_feature_norm_deviation));
    }
  }
  return ds;
}

/// Stores a dataset as f32. Every sample must have the same number of views.
template <std::floating_point T>
EmbeddingBundle from_dataset(const Dataset<T>& ds) {
  EmbeddingBundle b;
  b.d = static_cast<std::uint32_t>(ds.dim());
  b.classes = static_cast<std::uint32_t>(ds.bank.num_classes());
  b.samples = static_cast<std::uint32_t>(ds.samples.size());
  b.views = static_cast<std::uint32_t>(ds.samples.empty() ? 0 : ds.samples.front().views.size());
  b.condition = ds.condition;
  b.names = ds.bank.names();
  for (std::size_t c = 0; c < b.classes; ++c) {
    for (T x : ds.bank.row(c)) b.bank.push_back(static_cast<float>(x));
  }
  for (const auto& s : ds.samples) {
    if (s.views.size() != b.views) {
      throw Error(ErrorCode::DimMismatch, "samples carry different view counts");
    }
    b.labels.push_back(static_cast<std::uint32_t>(s.label));
    for (T x : s.original.values()) b.originals.push_back(static_cast<float>(x));
    for (const auto& v : s.views) {
      for (T x : v.values()) b.view_data.push_back(static_cast<float>(x));
    }
  }
  validate(b);
  return b;
}

struct ManifestEntry {
  std::string name;
  Intensity intensity = Intensity::Unspecified;
  std::filesystem::path path;
};

/// Parses `name<TAB>intensity<TAB>path` lines. Blank lines and lines starting
/// with '#' are ignored; relative paths resolve against `base_dir`.
inline std::vector<ManifestEntry> parse_manifest(const std::string& text,
                                                 const std::filesystem::path& base_dir = {}) {
  std::vector<ManifestEntry> entries;
  std::set<std::pair<std::string, Intensity>> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 3 || fields[0].empty() || fields[2].empty()) {
      throw Error(ErrorCode::ManifestFormat,
                  "line " + std::to_string(line_no) + ": expected name<TAB>intensity<TAB>path",
                  line_no);
    }
    const auto intensity = parse_intensity(fields[1]);
    if (!intensity) {
      throw Error(ErrorCode::ManifestFormat,
                  "line " + std::to_string(line_no) + ": unknown intensity '" + fields[1] + "'",
                  line_no);
    }
    if (!seen.emplace(fields[0], *intensity).second) {
      throw Error(ErrorCode::ManifestFormat,
                  "line " + std::to_string(line_no) + ": duplicate entry " + fields[0] + "/" +
                      fields[1],
                  line_no);
    }
    std::filesystem::path p(fields[2]);
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    entries.push_back({fields[0], *intensity, p});
  }
  return entries;
}

inline std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open manifest " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), path.parent_path());
}

inline std::string format_manifest(std::span<const ManifestEntry> entries) {
  std::string out;
  for (const auto& e : entries) {
    out += e.name + '\t' + to_string(e.intensity) + '\t' + e.path.string() + '\n';
  }
  return out;
}

/// Manifest bundles must agree on d, C, M and per-sample labels.
inline void check_manifest_bundles(std::span<const EmbeddingBundle> bundles) {
  if (bundles.empty()) throw Error(ErrorCode::EmptyInput, "manifest has no entries");
  const auto& first = bundles.front();
  for (std::size_t i = 1; i < bundles.size(); ++i) {
    const auto& b = bundles[i];
    if (b.d != first.d || b.classes != first.classes || b.samples != first.samples ||
        b.labels != first.labels) {
      throw Error(ErrorCode::DimMismatch,
                  "manifest entry " + std::to_string(i) +
                      " does not share d, C, M and sample order with entry 0",
                  i);
    }
  }
}

}  // namespace agc::io
