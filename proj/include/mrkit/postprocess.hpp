// SPDX-License-Identifier: Apache-2.0
//
// Normalization of raw predictor output into a nested moment list.
//
// Recognized input, informally:
//
//   text     := anything; markers "<...>" are dropped first
//   windows  := runs of text separated by a ']' that is later followed by '['
//               (covers "],[", "][", "] , [", "]] [[" ...)
//   number   := [+-]? (digits ['.' digits*] | '.' digits)
//
// Signs directly after a digit or '.' are read as separators ("3-7" is 3, 7).
// Numbers in scientific notation are skipped. Each window contributes its
// first two numbers, ordered so start <= end; windows with fewer than two
// numbers are dropped. No pairs at all yields the fallback [[-1, -1]].
//
// Canonical output: "[[a, b], [c, d]]" with the shortest fixed-notation
// decimal that round-trips each value.

#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "mrkit/core.hpp"

namespace mrkit {

struct ParsedPrediction {
  std::vector<NumberPair> moments;
  bool was_fallback = false;

  friend bool operator==(const ParsedPrediction&, const ParsedPrediction&) = default;
};

inline ParsedPrediction fallback_prediction() { return {{NumberPair{-1.0, -1.0}}, true}; }

namespace parse_detail {

inline constexpr std::size_t kMaxMarkerLength = 64;

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

inline bool marker_char(char c) {
  return c != '<' && c != '>' && c != '[' && c != ']' && c != ',' &&
         !std::isspace(static_cast<unsigned char>(c));
}

/// Remove "<...>" markers such as "</s>", "<pad>", "<|endoftext|>".
inline std::string strip_markers(std::string_view in) {
  std::string out;
  out.reserve(in.size());
  std::size_t i = 0;
  while (i < in.size()) {
    if (in[i] == '<') {
      std::size_t j = i + 1;
      while (j < in.size() && j - i <= kMaxMarkerLength && marker_char(in[j])) ++j;
      if (j < in.size() && in[j] == '>' && j > i + 1) {
        i = j + 1;
        continue;
      }
    }
    out += in[i++];
  }
  return out;
}

/// Split on every ']' that is eventually followed by '['.
inline std::vector<std::string_view> split_windows(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t begin = 0;
  bool closed = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == ']') {
      closed = true;
    } else if (s[i] == '[' && closed) {
      out.push_back(s.substr(begin, i - begin));
      begin = i;
      closed = false;
    }
  }
  out.push_back(s.substr(begin));
  return out;
}

/// Numbers in a window, in order of appearance.
inline std::vector<double> extract_numbers(std::string_view w) {
  std::vector<double> out;
  std::size_t i = 0;
  while (i < w.size()) {
    std::size_t start = i;
    bool sign = false;
    if ((w[i] == '-' || w[i] == '+') && (i == 0 || (!is_digit(w[i - 1]) && w[i - 1] != '.'))) {
      sign = true;
      ++i;
    }
    std::size_t digits_begin = i;
    while (i < w.size() && is_digit(w[i])) ++i;
    bool int_digits = i > digits_begin;
    bool frac_digits = false;
    if (i < w.size() && w[i] == '.') {
      std::size_t frac_begin = i + 1;
      std::size_t j = frac_begin;
      while (j < w.size() && is_digit(w[j])) ++j;
      frac_digits = j > frac_begin;
      if (int_digits || frac_digits) i = j;
    }
    if (!int_digits && !frac_digits) {
      i = (sign ? start : i) + 1;
      continue;
    }
    std::size_t end = i;
    // Skip the exponent form entirely.
    if (i < w.size() && (w[i] == 'e' || w[i] == 'E')) {
      std::size_t j = i + 1;
      if (j < w.size() && (w[j] == '+' || w[j] == '-')) ++j;
      if (j < w.size() && is_digit(w[j])) {
        while (j < w.size() && is_digit(w[j])) ++j;
        i = j;
        continue;
      }
    }
    std::string_view token = w.substr(start, end - start);
    if (!token.empty() && token.front() == '+') token.remove_prefix(1);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec == std::errc() && ptr == token.data() + token.size() && std::isfinite(value)) out.push_back(value);
  }
  return out;
}

}  // namespace parse_detail

/// Total: every input maps to a non-empty, sound moment list.
inline ParsedPrediction post_process(std::string_view raw) {
  const std::string cleaned = parse_detail::strip_markers(raw);
  ParsedPrediction out;
  for (auto window : parse_detail::split_windows(cleaned)) {
    auto numbers = parse_detail::extract_numbers(window);
    if (numbers.size() < 2) continue;
    NumberPair p{numbers[0], numbers[1]};
    if (p.start > p.end) std::swap(p.start, p.end);
    out.moments.push_back(p);
  }
  if (out.moments.empty()) return fallback_prediction();
  if (out.moments.size() == 1 && out.moments[0] == NumberPair{-1.0, -1.0}) out.was_fallback = true;
  return out;
}

/// Shortest fixed-notation decimal that parses back to `v`; integral
/// values have no decimal point.
inline std::string format_number(double v) {
  if (v == 0.0) v = 0.0;  // drop the sign of -0
  char buf[512];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed);
  if (ec != std::errc()) fail(Errc::invalid_argument, "number cannot be rendered");
  return std::string(buf, ptr);
}

inline std::string render(std::span<const NumberPair> moments) {
  std::string out = "[";
  for (std::size_t i = 0; i < moments.size(); ++i) {
    if (i) out += ", ";
    out += "[" + format_number(moments[i].start) + ", " + format_number(moments[i].end) + "]";
  }
  out += "]";
  return out;
}

inline std::string render(const ParsedPrediction& parsed) { return render(parsed.moments); }

}  // namespace mrkit
