// SPDX-License-Identifier: Apache-2.0
//
// Time-token encoding. Densely sampled videos (at least one frame per
// second) are labelled with relative frame indices 1..N; sparser ones with
// timestamps rounded to whole seconds. The interleaved model input places
// each time token before its frame block, bracketed by special tokens.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mrkit/core.hpp"
#include "mrkit/dtc.hpp"

namespace mrkit {

enum class TimeSchemeKind { relative_index, rounded_timestamp, absolute_index };

enum class SchemePreference { automatic, index, timestamp, absolute };

inline std::string_view to_string(TimeSchemeKind k) {
  switch (k) {
    case TimeSchemeKind::relative_index: return "relative_index";
    case TimeSchemeKind::rounded_timestamp: return "rounded_timestamp";
    case TimeSchemeKind::absolute_index: return "absolute_index";
  }
  return "relative_index";
}

inline std::string_view to_string(SchemePreference p) {
  switch (p) {
    case SchemePreference::automatic: return "auto";
    case SchemePreference::index: return "index";
    case SchemePreference::timestamp: return "timestamp";
    case SchemePreference::absolute: return "absolute";
  }
  return "auto";
}

inline SchemePreference parse_scheme_preference(std::string_view s) {
  if (s == "auto") return SchemePreference::automatic;
  if (s == "index") return SchemePreference::index;
  if (s == "timestamp") return SchemePreference::timestamp;
  if (s == "absolute") return SchemePreference::absolute;
  fail(Errc::invalid_argument, "unknown time scheme '" + std::string(s) + "'");
}

struct TimeScheme {
  TimeSchemeKind kind = TimeSchemeKind::relative_index;
  std::vector<double> index_to_seconds;  // sampled timestamps, position i <-> index i+1
  double native_fps = 0.0;               // absolute_index only
};

/// Relative indices when N / T >= 1, rounded timestamps otherwise.
inline TimeScheme choose_scheme(const SamplingPlan& plan) {
  TimeScheme s;
  s.index_to_seconds.assign(plan.timestamps().begin(), plan.timestamps().end());
  s.kind = plan.rate() >= 1.0 ? TimeSchemeKind::relative_index : TimeSchemeKind::rounded_timestamp;
  return s;
}

/// Scheme with an explicit override. `absolute` labels frames by their
/// 1-based position in the source video at `native_fps`.
inline TimeScheme make_scheme(const SamplingPlan& plan, SchemePreference pref, double native_fps = 30.0) {
  TimeScheme s = choose_scheme(plan);
  switch (pref) {
    case SchemePreference::automatic: break;
    case SchemePreference::index: s.kind = TimeSchemeKind::relative_index; break;
    case SchemePreference::timestamp: s.kind = TimeSchemeKind::rounded_timestamp; break;
    case SchemePreference::absolute:
      require(std::isfinite(native_fps) && native_fps > 0.0, "native fps must be > 0");
      s.kind = TimeSchemeKind::absolute_index;
      s.native_fps = native_fps;
      break;
  }
  return s;
}

/// Nearest integer, halves rounded up (2.5 -> 3, -2.5 -> -2).
inline long long round_half_up(double x) { return static_cast<long long>(std::floor(x + 0.5)); }

inline std::vector<std::string> encode_times(const TimeScheme& scheme, const SamplingPlan& plan) {
  const auto ts = plan.timestamps();
  std::vector<std::string> out;
  out.reserve(ts.size());
  switch (scheme.kind) {
    case TimeSchemeKind::relative_index:
      for (std::size_t i = 0; i < ts.size(); ++i) out.push_back(std::to_string(i + 1));
      break;
    case TimeSchemeKind::rounded_timestamp: {
      const long long cap = round_half_up(plan.duration());
      for (double t : ts) out.push_back(std::to_string(std::clamp(round_half_up(t), 0LL, cap)));
      break;
    }
    case TimeSchemeKind::absolute_index:
      for (double t : ts) out.push_back(std::to_string(round_half_up(t * scheme.native_fps) + 1));
      break;
  }
  return out;
}

// ============================================================================
// Interleaved sequence
// ============================================================================

inline constexpr std::string_view kTimeBegin = "<time_begin>";
inline constexpr std::string_view kTimeEnd = "<time_end>";
inline constexpr std::string_view kFrameBegin = "<frame_begin>";
inline constexpr std::string_view kFrameEnd = "<frame_end>";

/// Which begin/end marker pairs to emit. All four combinations are the
/// prompt-design ablation settings.
struct SpecialTokens {
  bool time = true;
  bool frame = true;
};

enum class ElementKind { special, time, frame, query, prompt };

struct SequenceElement {
  ElementKind kind = ElementKind::special;
  std::string text;         // special / time / query / prompt
  std::size_t frame = 0;    // frame: 0-based position in the video
  std::size_t tokens = 0;   // frame: tokens in the block

  friend bool operator==(const SequenceElement&, const SequenceElement&) = default;
};

struct InterleavedSequence {
  std::vector<SequenceElement> elements;

  std::size_t size() const noexcept { return elements.size(); }

  /// One line of text; frame blocks appear as `<frame:i:m>` with 1-based i
  /// and m tokens. Line breaks inside the query or prompt become spaces.
  std::string serialize() const {
    std::string out;
    for (const auto& e : elements) {
      if (!out.empty()) out += ' ';
      if (e.kind == ElementKind::frame) {
        out += "<frame:" + std::to_string(e.frame + 1) + ":" + std::to_string(e.tokens) + ">";
      } else {
        for (char c : e.text) out += (c == '\n' || c == '\r') ? ' ' : c;
      }
    }
    return out;
  }
};

inline std::size_t expected_sequence_length(std::size_t n_frames, SpecialTokens special = {}) {
  return n_frames * (2 + (special.time ? 2 : 0) + (special.frame ? 2 : 0)) + 2;
}

inline InterleavedSequence build_sequence(std::span<const std::string> times, const LanguageSequence& frames,
                                          std::string_view query, std::string_view prompt,
                                          SpecialTokens special = {}) {
  if (times.size() != frames.n_frames())
    fail(Errc::invalid_argument, "got " + std::to_string(times.size()) + " time tokens for " +
                                     std::to_string(frames.n_frames()) + " frames");
  InterleavedSequence seq;
  seq.elements.reserve(expected_sequence_length(times.size(), special));
  auto mark = [&](std::string_view s) { seq.elements.push_back({ElementKind::special, std::string(s), 0, 0}); };
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (special.time) mark(kTimeBegin);
    seq.elements.push_back({ElementKind::time, times[i], 0, 0});
    if (special.time) mark(kTimeEnd);
    if (special.frame) mark(kFrameBegin);
    seq.elements.push_back({ElementKind::frame, {}, i, frames.per_frame[i].tokens});
    if (special.frame) mark(kFrameEnd);
  }
  seq.elements.push_back({ElementKind::query, std::string(query), 0, 0});
  seq.elements.push_back({ElementKind::prompt, std::string(prompt), 0, 0});
  return seq;
}

// ============================================================================
// Predicted values <-> seconds
// ============================================================================

/// Seconds at a (possibly fractional) 1-based index, interpolating linearly
/// between sampled timestamps. Index is clamped to [1, N].
inline double index_to_seconds(const TimeScheme& scheme, double index) {
  const auto& ts = scheme.index_to_seconds;
  require(!ts.empty(), "time scheme has no index map");
  const double x = std::clamp(index, 1.0, static_cast<double>(ts.size())) - 1.0;
  const auto lo = static_cast<std::size_t>(std::floor(x));
  if (lo + 1 >= ts.size()) return ts.back();
  const double frac = x - static_cast<double>(lo);
  if (frac == 0.0) return ts[lo];
  return ts[lo] + frac * (ts[lo + 1] - ts[lo]);
}

/// Inverse of index_to_seconds: exact integers for sampled timestamps,
/// linear interpolation between them, clamped to [1, N].
inline double seconds_to_index(const TimeScheme& scheme, double seconds) {
  const auto& ts = scheme.index_to_seconds;
  require(!ts.empty(), "time scheme has no index map");
  if (seconds <= ts.front()) return 1.0;
  if (seconds >= ts.back()) return static_cast<double>(ts.size());
  auto it = std::lower_bound(ts.begin(), ts.end(), seconds);
  const auto hi = static_cast<std::size_t>(it - ts.begin());
  if (*it == seconds) return static_cast<double>(hi + 1);
  const std::size_t lo = hi - 1;
  return static_cast<double>(lo + 1) + (seconds - ts[lo]) / (ts[hi] - ts[lo]);
}

/// Express a time in the scheme's own units (what a model would emit).
inline double to_scheme_units(const TimeScheme& scheme, double seconds) {
  switch (scheme.kind) {
    case TimeSchemeKind::relative_index: return seconds_to_index(scheme, seconds);
    case TimeSchemeKind::rounded_timestamp: return seconds;
    case TimeSchemeKind::absolute_index: return seconds * scheme.native_fps + 1.0;
  }
  return seconds;
}

/// Map predicted pairs back to moments in seconds. Index values are clamped
/// to [1, N] before lookup; timestamps to [0, duration].
inline std::vector<Moment> decode_moments(std::span<const NumberPair> pairs, const TimeScheme& scheme,
                                          double duration) {
  std::vector<Moment> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    Moment m;
    switch (scheme.kind) {
      case TimeSchemeKind::relative_index:
        m = {index_to_seconds(scheme, p.start), index_to_seconds(scheme, p.end)};
        break;
      case TimeSchemeKind::rounded_timestamp:
        m = {p.start, p.end};
        break;
      case TimeSchemeKind::absolute_index:
        m = {(p.start - 1.0) / scheme.native_fps, (p.end - 1.0) / scheme.native_fps};
        break;
    }
    out.push_back(normalize_moment(m, duration));
  }
  return out;
}

}  // namespace mrkit
