// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>
#include <set>

#include "mrkit/timecode.hpp"

using namespace mrkit;

namespace {

LanguageSequence dummy_frames(std::size_t n, std::size_t tokens = 1) {
  LanguageSequence s;
  for (std::size_t i = 0; i < n; ++i) s.per_frame.push_back(TokenBlock{tokens, 1, std::vector<double>(tokens, 0.0)});
  s.key_mask.assign(n, true);
  return s;
}

}  // namespace

TEST(ChooseScheme, BranchRule) {
  EXPECT_EQ(choose_scheme(SamplingPlan::uniform(60, 30.0)).kind, TimeSchemeKind::relative_index);
  EXPECT_EQ(choose_scheme(SamplingPlan::uniform(80, 150.0)).kind, TimeSchemeKind::rounded_timestamp);
  EXPECT_EQ(choose_scheme(SamplingPlan::uniform(40, 40.0)).kind, TimeSchemeKind::relative_index);
}

TEST(ChooseScheme, Overrides) {
  auto plan = SamplingPlan::uniform(10, 100.0);
  EXPECT_EQ(make_scheme(plan, SchemePreference::index).kind, TimeSchemeKind::relative_index);
  EXPECT_EQ(make_scheme(SamplingPlan::uniform(60, 30.0), SchemePreference::timestamp).kind,
            TimeSchemeKind::rounded_timestamp);
  EXPECT_THROW(make_scheme(plan, SchemePreference::absolute, 0.0), Error);
  EXPECT_EQ(parse_scheme_preference("auto"), SchemePreference::automatic);
  EXPECT_THROW(parse_scheme_preference("frames"), Error);
}

TEST(EncodeTimes, DocumentedCollisions) {
  SamplingPlan a(10.0, {2.8, 3.3});
  TimeScheme ts{TimeSchemeKind::rounded_timestamp, {2.8, 3.3}, 0.0};
  EXPECT_EQ(encode_times(ts, a), (std::vector<std::string>{"3", "3"}));
  SamplingPlan b(10.0, {0.7, 1.1});
  ts.index_to_seconds = {0.7, 1.1};
  EXPECT_EQ(encode_times(ts, b), (std::vector<std::string>{"1", "1"}));
}

TEST(EncodeTimes, RelativeIgnoresTimestamps) {
  SamplingPlan p(100.0, {3.0, 50.0, 99.0});
  TimeScheme ts{TimeSchemeKind::relative_index, {3.0, 50.0, 99.0}, 0.0};
  EXPECT_EQ(encode_times(ts, p), (std::vector<std::string>{"1", "2", "3"}));
}

TEST(EncodeTimes, HalfUpAndClamp) {
  EXPECT_EQ(round_half_up(2.5), 3);
  EXPECT_EQ(round_half_up(-2.5), -2);
  SamplingPlan p(10.4, {0.49, 2.5, 10.4});
  TimeScheme ts{TimeSchemeKind::rounded_timestamp, {}, 0.0};
  EXPECT_EQ(encode_times(ts, p), (std::vector<std::string>{"0", "3", "10"}));
}

TEST(EncodeTimes, AbsoluteIndex) {
  SamplingPlan p(2.0, {0.0, 1.0, 2.0});
  auto ts = make_scheme(p, SchemePreference::absolute, 30.0);
  EXPECT_EQ(encode_times(ts, p), (std::vector<std::string>{"1", "31", "61"}));
}

TEST(EncodeTimes, RelativeNeverCollides) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 200;
    const double dur = 1.0 + static_cast<double>(rng() % 1000) / 10.0;
    auto plan = SamplingPlan::uniform(n, dur);
    auto times = encode_times(make_scheme(plan, SchemePreference::index), plan);
    EXPECT_EQ(std::set<std::string>(times.begin(), times.end()).size(), n);
  }
}

TEST(BuildSequence, SmallestSequence) {
  std::vector<std::string> times = {"1"};
  auto seq = build_sequence(times, dummy_frames(1, 4), "q", "p");
  ASSERT_EQ(seq.size(), 8u);
  EXPECT_EQ(seq.serialize(), "<time_begin> 1 <time_end> <frame_begin> <frame:1:4> <frame_end> q p");
}

TEST(BuildSequence, LengthFormula) {
  for (std::size_t n : {1u, 2u, 5u, 60u, 80u}) {
    std::vector<std::string> times(n, "t");
    for (bool time : {false, true})
      for (bool frame : {false, true}) {
        SpecialTokens sp{time, frame};
        auto seq = build_sequence(times, dummy_frames(n), "q", "p", sp);
        EXPECT_EQ(seq.size(), expected_sequence_length(n, sp));
      }
    EXPECT_EQ(expected_sequence_length(n), 6 * n + 2);
    EXPECT_EQ(expected_sequence_length(n, {false, false}), 2 * n + 2);
  }
}

TEST(BuildSequence, MismatchedCounts) {
  std::vector<std::string> times = {"1", "2"};
  EXPECT_THROW(build_sequence(times, dummy_frames(3), "q", "p"), Error);
}

TEST(BuildSequence, NewlinesFlattenInSerialization) {
  std::vector<std::string> times = {"1"};
  auto seq = build_sequence(times, dummy_frames(1), "a\nb", "p", {false, false});
  EXPECT_EQ(seq.serialize(), "1 <frame:1:1> a b p");
}

TEST(DecodeMoments, IndexEndpointsAndClamp) {
  TimeScheme ts{TimeSchemeKind::relative_index, {0.0, 0.5, 1.0}, 0.0};
  std::vector<NumberPair> pairs = {{1, 3}, {0, 99}, {1.5, 2}};
  auto m = decode_moments(pairs, ts, 1.0);
  EXPECT_EQ(m[0], (Moment{0.0, 1.0}));
  EXPECT_EQ(m[1], (Moment{0.0, 1.0}));
  EXPECT_EQ(m[2], (Moment{0.25, 0.5}));
}

TEST(DecodeMoments, TimestampPassThroughAndClamp) {
  TimeScheme ts{TimeSchemeKind::rounded_timestamp, {}, 0.0};
  std::vector<NumberPair> pairs = {{10, 20}, {-5, 200}};
  auto m = decode_moments(pairs, ts, 150.0);
  EXPECT_EQ(m[0], (Moment{10.0, 20.0}));
  EXPECT_EQ(m[1], (Moment{0.0, 150.0}));
}

TEST(DecodeMoments, AbsoluteIndex) {
  TimeScheme ts{TimeSchemeKind::absolute_index, {0.0, 1.0}, 30.0};
  std::vector<NumberPair> pairs = {{1, 31}};
  EXPECT_EQ(decode_moments(pairs, ts, 1.0)[0], (Moment{0.0, 1.0}));
}

TEST(DecodeMoments, IndexRoundTrip) {
  auto plan = SamplingPlan::uniform(60, 30.0);
  auto ts = choose_scheme(plan);
  for (std::size_t i = 1; i <= 60; ++i) {
    const double s = index_to_seconds(ts, static_cast<double>(i));
    EXPECT_EQ(seconds_to_index(ts, s), static_cast<double>(i));
  }
  for (double s = 0.0; s <= 30.0; s += 0.37) EXPECT_NEAR(index_to_seconds(ts, seconds_to_index(ts, s)), s, 1e-9);
}
