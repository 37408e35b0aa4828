// SPDX-License-Identifier: Apache-2.0
//
// Tensor containers, dataset records, and their on-disk formats.

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace mrkit {

/// Error categories. Every failure surfaced by the library carries one.
enum class Errc {
  invalid_argument,
  bad_magic,
  version_mismatch,
  bad_header,
  truncated_payload,
  trailing_bytes,
  non_finite,
  io_failure,
  malformed_record,
  missing_field,
  invariant_violation,
};

inline std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::bad_magic: return "bad_magic";
    case Errc::version_mismatch: return "version_mismatch";
    case Errc::bad_header: return "bad_header";
    case Errc::truncated_payload: return "truncated_payload";
    case Errc::trailing_bytes: return "trailing_bytes";
    case Errc::non_finite: return "non_finite";
    case Errc::io_failure: return "io_failure";
    case Errc::malformed_record: return "malformed_record";
    case Errc::missing_field: return "missing_field";
    case Errc::invariant_violation: return "invariant_violation";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool ok, const std::string& what) {
  if (!ok) fail(Errc::invalid_argument, what);
}

// ============================================================================
// Tensors
// ============================================================================

struct FrameTag {};
struct QueryTag {};

/// Dense N x R x D row-major tensor. For frame features R is the patch
/// count; for Q-Former style embeddings R is the query count. Immutable
/// once constructed; all values are finite.
template <class Tag>
class Tensor3 {
 public:
  Tensor3(std::size_t n_frames, std::size_t rows, std::size_t dim, std::vector<double> data)
      : n_(n_frames), rows_(rows), dim_(dim), data_(std::move(data)) {
    require(n_ >= 1 && rows_ >= 1 && dim_ >= 1, "tensor dimensions must be >= 1");
    require(data_.size() == n_ * rows_ * dim_, "tensor data length does not match N*R*D");
    for (double v : data_) {
      if (!std::isfinite(v)) fail(Errc::non_finite, "tensor contains a non-finite value");
    }
  }

  std::size_t n_frames() const noexcept { return n_; }
  std::size_t rows() const noexcept { return rows_; }
  std::size_t dim() const noexcept { return dim_; }

  std::size_t n_patches() const noexcept
    requires std::same_as<Tag, FrameTag>
  {
    return rows_;
  }
  std::size_t n_queries() const noexcept
    requires std::same_as<Tag, QueryTag>
  {
    return rows_;
  }

  std::size_t frame_size() const noexcept { return rows_ * dim_; }
  std::span<const double> data() const noexcept { return data_; }

  /// The rows x dim slab of one frame.
  std::span<const double> frame(std::size_t i) const {
    return std::span<const double>(data_).subspan(i * frame_size(), frame_size());
  }

  double at(std::size_t i, std::size_t r, std::size_t c) const {
    return data_[(i * rows_ + r) * dim_ + c];
  }

  friend bool operator==(const Tensor3&, const Tensor3&) = default;

 private:
  std::size_t n_;
  std::size_t rows_;
  std::size_t dim_;
  std::vector<double> data_;
};

using FrameTensor = Tensor3<FrameTag>;
using QueryTensor = Tensor3<QueryTag>;

/// Frames `indices` of `t`, in the given order. Empty index list yields nullopt.
template <class Tag>
std::optional<Tensor3<Tag>> gather_frames(const Tensor3<Tag>& t, std::span<const std::size_t> indices) {
  if (indices.empty()) return std::nullopt;
  std::vector<double> out;
  out.reserve(indices.size() * t.frame_size());
  for (std::size_t i : indices) {
    require(i < t.n_frames(), "frame index out of range");
    auto slab = t.frame(i);
    out.insert(out.end(), slab.begin(), slab.end());
  }
  return Tensor3<Tag>(indices.size(), t.rows(), t.dim(), std::move(out));
}

// ============================================================================
// MREB tensor files
// ============================================================================
//
// "MREB" | u16 version=1 | u16 reserved=0 | u32 N | u32 R | u32 D | N*R*D f32
// All little-endian, frame-major.

namespace mreb {

inline constexpr std::array<char, 4> kMagic = {'M', 'R', 'E', 'B'};
inline constexpr std::uint16_t kVersion = 1;
inline constexpr std::size_t kHeaderSize = 20;

inline std::size_t file_size(std::size_t n, std::size_t rows, std::size_t dim) {
  return kHeaderSize + 4 * n * rows * dim;
}

namespace detail {

inline void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xffu));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<unsigned char>((v >> s) & 0xffu));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}

inline std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}

}  // namespace detail

template <class Tag>
std::vector<unsigned char> encode(const Tensor3<Tag>& t) {
  std::vector<unsigned char> out;
  out.reserve(file_size(t.n_frames(), t.rows(), t.dim()));
  out.insert(out.end(), kMagic.begin(), kMagic.end());
  detail::put_u16(out, kVersion);
  detail::put_u16(out, 0);
  detail::put_u32(out, static_cast<std::uint32_t>(t.n_frames()));
  detail::put_u32(out, static_cast<std::uint32_t>(t.rows()));
  detail::put_u32(out, static_cast<std::uint32_t>(t.dim()));
  for (double v : t.data()) {
    auto f = static_cast<float>(v);
    if (!std::isfinite(f)) fail(Errc::non_finite, "value overflows 32-bit float");
    detail::put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

template <class Tag>
Tensor3<Tag> decode(std::span<const unsigned char> bytes) {
  if (bytes.size() < 4 || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin()))
    fail(Errc::bad_magic, "not an MREB file (bad magic)");
  if (bytes.size() < kHeaderSize) fail(Errc::truncated_payload, "MREB header truncated");
  const unsigned char* p = bytes.data();
  if (detail::get_u16(p + 4) != kVersion)
    fail(Errc::version_mismatch, "unsupported MREB version " + std::to_string(detail::get_u16(p + 4)));
  if (detail::get_u16(p + 6) != 0) fail(Errc::bad_header, "MREB reserved field must be zero");
  const std::uint64_t n = detail::get_u32(p + 8);
  const std::uint64_t r = detail::get_u32(p + 12);
  const std::uint64_t d = detail::get_u32(p + 16);
  if (n == 0 || r == 0 || d == 0) fail(Errc::bad_header, "MREB dimensions must be >= 1");
  const std::uint64_t count = n * r * d;
  const std::uint64_t payload = bytes.size() - kHeaderSize;
  if (payload < count * 4)
    fail(Errc::truncated_payload, "MREB payload holds " + std::to_string(payload / 4) + " values, header claims " +
                                      std::to_string(count));
  if (payload > count * 4) fail(Errc::trailing_bytes, "MREB payload is longer than the header claims");
  std::vector<double> data(static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < data.size(); ++i) {
    float f = std::bit_cast<float>(detail::get_u32(p + kHeaderSize + 4 * i));
    if (!std::isfinite(f)) fail(Errc::non_finite, "MREB payload contains a non-finite value");
    data[i] = f;
  }
  return Tensor3<Tag>(n, r, d, std::move(data));
}

}  // namespace mreb

template <class Tag>
void save_tensor(const Tensor3<Tag>& t, const std::filesystem::path& path) {
  auto bytes = mreb::encode(t);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::io_failure, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(Errc::io_failure, "write failed: " + path.string());
}

template <class Tag>
Tensor3<Tag> load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io_failure, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return mreb::decode<Tag>(bytes);
}

inline FrameTensor load_frame_tensor(const std::filesystem::path& path) { return load_tensor<FrameTag>(path); }
inline void save_frame_tensor(const FrameTensor& t, const std::filesystem::path& path) { save_tensor(t, path); }
inline QueryTensor load_query_tensor(const std::filesystem::path& path) { return load_tensor<QueryTag>(path); }

// ============================================================================
// Moments, records, sampling
// ============================================================================

/// A temporal interval in seconds.
struct Moment {
  double start = 0.0;
  double end = 0.0;

  double length() const noexcept { return end - start; }
  friend bool operator==(const Moment&, const Moment&) = default;
};

/// A (start, end) pair in whatever unit the time scheme uses: seconds,
/// or 1-based frame indices.
struct NumberPair {
  double start = 0.0;
  double end = 0.0;

  friend bool operator==(const NumberPair&, const NumberPair&) = default;
};

/// Swap reversed endpoints, then clamp to [0, duration].
inline Moment normalize_moment(Moment m, double duration) {
  if (m.start > m.end) std::swap(m.start, m.end);
  m.start = std::clamp(m.start, 0.0, duration);
  m.end = std::clamp(m.end, 0.0, duration);
  return m;
}

struct VideoRecord {
  std::string video_id;
  double duration = 0.0;
  std::string query;
  std::vector<Moment> ground_truth;

  friend bool operator==(const VideoRecord&, const VideoRecord&) = default;
};

inline VideoRecord normalize_record(VideoRecord r) {
  require(std::isfinite(r.duration) && r.duration > 0.0, "record duration must be > 0");
  for (auto& m : r.ground_truth) m = normalize_moment(m, r.duration);
  return r;
}

/// Per-frame sampling instants of a video.
class SamplingPlan {
 public:
  SamplingPlan(double duration, std::vector<double> timestamps)
      : duration_(duration), timestamps_(std::move(timestamps)) {
    require(std::isfinite(duration_) && duration_ > 0.0, "sampling plan duration must be > 0");
    require(!timestamps_.empty(), "sampling plan needs at least one frame");
    for (std::size_t i = 0; i < timestamps_.size(); ++i) {
      require(timestamps_[i] >= 0.0 && timestamps_[i] <= duration_, "timestamp outside [0, duration]");
      if (i > 0) require(timestamps_[i] > timestamps_[i - 1], "timestamps must be strictly increasing");
    }
  }

  /// N instants spread evenly over [0, duration], first at 0 and last at
  /// duration (a single frame sits at 0).
  static SamplingPlan uniform(std::size_t n_frames, double duration) {
    require(n_frames >= 1, "sampling plan needs at least one frame");
    std::vector<double> ts(n_frames, 0.0);
    for (std::size_t i = 1; i < n_frames; ++i)
      ts[i] = duration * static_cast<double>(i) / static_cast<double>(n_frames - 1);
    if (n_frames > 1) ts.back() = duration;
    return SamplingPlan(duration, std::move(ts));
  }

  std::size_t n_frames() const noexcept { return timestamps_.size(); }
  double duration() const noexcept { return duration_; }
  std::span<const double> timestamps() const noexcept { return timestamps_; }
  double rate() const noexcept { return static_cast<double>(n_frames()) / duration_; }

 private:
  double duration_;
  std::vector<double> timestamps_;
};

// ============================================================================
// JSON-lines record files
// ============================================================================

struct PredictionRecord {
  std::string video_id;
  std::optional<std::string> pred_raw;
  std::optional<std::vector<Moment>> pred_moments;
};

namespace detail {

inline std::string at_line(std::size_t line) { return "line " + std::to_string(line) + ": "; }

inline const nlohmann::json& field(const nlohmann::json& obj, const char* name, std::size_t line) {
  auto it = obj.find(name);
  if (it == obj.end()) fail(Errc::missing_field, at_line(line) + "missing field '" + name + "'");
  return *it;
}

inline std::vector<Moment> parse_pairs(const nlohmann::json& v, const char* name, std::size_t line) {
  if (!v.is_array()) fail(Errc::malformed_record, at_line(line) + "'" + name + "' must be an array");
  std::vector<Moment> out;
  for (const auto& pair : v) {
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() || !pair[1].is_number())
      fail(Errc::malformed_record, at_line(line) + "'" + name + "' entries must be [start, end] number pairs");
    Moment m{pair[0].get<double>(), pair[1].get<double>()};
    if (!std::isfinite(m.start) || !std::isfinite(m.end))
      fail(Errc::malformed_record, at_line(line) + "non-finite moment");
    out.push_back(m);
  }
  return out;
}

template <class Fn>
void for_each_json_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) fail(Errc::io_failure, "cannot open " + path.string());
  std::string text;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj = nlohmann::json::parse(text, nullptr, false);
    if (obj.is_discarded() || !obj.is_object())
      fail(Errc::malformed_record, at_line(line_no) + "not a JSON object");
    fn(obj, line_no);
  }
}

}  // namespace detail

inline VideoRecord parse_record(const nlohmann::json& obj, std::size_t line_no = 1) {
  using detail::at_line;
  using detail::field;
  VideoRecord r;
  const auto& id = field(obj, "video_id", line_no);
  const auto& dur = field(obj, "duration", line_no);
  const auto& q = field(obj, "query", line_no);
  if (!id.is_string()) fail(Errc::malformed_record, at_line(line_no) + "'video_id' must be a string");
  if (!dur.is_number()) fail(Errc::malformed_record, at_line(line_no) + "'duration' must be a number");
  if (!q.is_string()) fail(Errc::malformed_record, at_line(line_no) + "'query' must be a string");
  r.video_id = id.get<std::string>();
  r.duration = dur.get<double>();
  r.query = q.get<std::string>();
  if (!std::isfinite(r.duration) || r.duration <= 0.0)
    fail(Errc::malformed_record, at_line(line_no) + "duration must be > 0");
  r.ground_truth = detail::parse_pairs(field(obj, "moments", line_no), "moments", line_no);
  return normalize_record(std::move(r));
}

inline std::vector<VideoRecord> load_records(const std::filesystem::path& path) {
  std::vector<VideoRecord> out;
  detail::for_each_json_line(path, [&](const nlohmann::json& obj, std::size_t line) {
    out.push_back(parse_record(obj, line));
  });
  return out;
}

inline nlohmann::ordered_json record_to_json(const VideoRecord& r) {
  nlohmann::ordered_json j;
  j["video_id"] = r.video_id;
  j["duration"] = r.duration;
  j["query"] = r.query;
  j["moments"] = nlohmann::ordered_json::array();
  for (const auto& m : r.ground_truth) j["moments"].push_back({m.start, m.end});
  return j;
}

inline void save_records(std::span<const VideoRecord> records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(Errc::io_failure, "cannot open " + path.string() + " for writing");
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
  if (!out) fail(Errc::io_failure, "write failed: " + path.string());
}

/// Prediction lines carry `video_id` plus `pred_raw` (string) or
/// `pred_moments` (pairs). Other fields are ignored.
inline std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path) {
  std::vector<PredictionRecord> out;
  detail::for_each_json_line(path, [&](const nlohmann::json& obj, std::size_t line) {
    PredictionRecord p;
    const auto& id = detail::field(obj, "video_id", line);
    if (!id.is_string()) fail(Errc::malformed_record, detail::at_line(line) + "'video_id' must be a string");
    p.video_id = id.get<std::string>();
    if (auto it = obj.find("pred_raw"); it != obj.end()) {
      if (!it->is_string()) fail(Errc::malformed_record, detail::at_line(line) + "'pred_raw' must be a string");
      p.pred_raw = it->get<std::string>();
    }
    if (auto it = obj.find("pred_moments"); it != obj.end())
      p.pred_moments = detail::parse_pairs(*it, "pred_moments", line);
    if (!p.pred_raw && !p.pred_moments)
      fail(Errc::missing_field, detail::at_line(line) + "missing field 'pred_raw' or 'pred_moments'");
    out.push_back(std::move(p));
  });
  return out;
}

}  // namespace mrkit
