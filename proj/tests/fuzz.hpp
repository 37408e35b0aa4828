// SPDX-License-Identifier: Apache-2.0
//
// Seeded generators of predictor-style strings for the parser tests.

#pragma once

#include <random>
#include <regex>
#include <string>
#include <vector>

#include "mrkit/harness.hpp"
#include "mrkit/postprocess.hpp"

namespace fuzz {

/// One to four ordered pairs on a 0.1 grid in [0, 200].
inline std::vector<mrkit::NumberPair> random_pairs(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(1, 4), tenth(0, 2000);
  std::vector<mrkit::NumberPair> out(static_cast<std::size_t>(count(rng)));
  for (auto& p : out) {
    double a = tenth(rng) / 10.0, b = tenth(rng) / 10.0;
    if (a > b) std::swap(a, b);
    p = {a, b};
  }
  return out;
}

/// A corrupted rendering the parser is expected to recover exactly: any
/// subset of the recoverable corruptions, plus whitespace, markers and a
/// digit-free preamble.
inline std::string recoverable_mutation(const std::vector<mrkit::NumberPair>& pairs, std::mt19937_64& rng) {
  std::vector<mrkit::Corruption> kinds;
  for (auto k : mrkit::kRecoverableCorruptions)
    if (rng() % 2) kinds.push_back(k);
  std::string s = mrkit::corrupt(pairs, kinds);

  static const char* const kPreambles[] = {"", "The relevant windows are ", "Answer: ", "<s>", "windows: "};
  static const char* const kMarkers[] = {"</s>", "<pad>", "<|endoftext|>", "<eos>"};
  std::string out = kPreambles[rng() % 5];
  for (char c : s) {
    out += c;
    if (rng() % 10 == 0 && (c == ',' || c == '[' || c == ']')) out += rng() % 2 ? " " : "  ";
  }
  if (rng() % 3 == 0) out += kMarkers[rng() % 4];
  if (rng() % 4 == 0) out += "\n";
  return out;
}

/// Arbitrary edits: deletions, insertions and substitutions drawn from the
/// characters a broken generator tends to produce.
inline std::string arbitrary_mutation(std::string s, std::mt19937_64& rng) {
  static const std::string kAlphabet = "[],.-+0123456789 <>/seE\n\tx";
  const int edits = 1 + static_cast<int>(rng() % 6);
  for (int i = 0; i < edits; ++i) {
    const std::size_t pos = s.empty() ? 0 : rng() % (s.size() + 1);
    const char c = kAlphabet[rng() % kAlphabet.size()];
    switch (rng() % 3) {
      case 0:
        if (pos < s.size()) s.erase(pos, 1);
        break;
      case 1: s.insert(pos, 1, c); break;
      default:
        if (pos < s.size()) s[pos] = c;
        break;
    }
  }
  return s;
}

/// The canonical output grammar.
inline bool grammar_valid(const std::string& s) {
  static const std::regex re(R"(\[\[-?\d+(\.\d+)?, -?\d+(\.\d+)?\](, \[-?\d+(\.\d+)?, -?\d+(\.\d+)?\])*\])");
  return std::regex_match(s, re);
}

}  // namespace fuzz
