// SPDX-License-Identifier: Apache-2.0
//
// End-to-end runner: synthetic videos with planted event boundaries, a
// stand-in for the Q-Former, mockable moment predictors, the full
// selection -> compression -> encoding -> prediction -> parsing -> scoring
// pipeline, and a parallel batch driver.

#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "mrkit/core.hpp"
#include "mrkit/dtc.hpp"
#include "mrkit/ifs.hpp"
#include "mrkit/metrics.hpp"
#include "mrkit/postprocess.hpp"
#include "mrkit/random.hpp"
#include "mrkit/timecode.hpp"

namespace mrkit {

// ============================================================================
// Synthetic videos
// ============================================================================

/// Frames [start_frame, end_frame) share one feature level.
struct Segment {
  std::size_t start_frame = 0;
  std::size_t end_frame = 0;
  double level = 0.0;
  bool relevant = false;  // contributes a ground-truth moment
};

struct SyntheticSpec {
  std::size_t n_frames = 60;
  std::size_t n_patches = 4;
  std::size_t dim = 16;
  double duration = 30.0;
  std::vector<Segment> segments;
  double noise_std = 0.0;
  std::uint64_t seed = 0;
  std::string video_id = "synthetic";
  std::string query = "synthetic event";
};

struct SyntheticVideo {
  FrameTensor frames;
  VideoRecord record;
  SamplingPlan plan;
  std::vector<std::size_t> boundaries;  // first frame of every segment after the first
};

inline void validate(const SyntheticSpec& spec) {
  require(spec.n_frames >= 2 && spec.n_patches >= 1 && spec.dim >= 1, "synthetic spec needs N >= 2, P >= 1, D >= 1");
  require(spec.noise_std >= 0.0, "noise_std must be >= 0");
  require(!spec.segments.empty(), "synthetic spec needs at least one segment");
  std::size_t expect = 0;
  for (const auto& s : spec.segments) {
    require(s.start_frame == expect && s.end_frame >= s.start_frame + 2,
            "segments must tile [0, N) in order, each at least 2 frames long");
    expect = s.end_frame;
  }
  require(expect == spec.n_frames, "segments must end at N");
}

/// Moment spanned by frames [start, end) under `plan`: from the first
/// frame's timestamp to the next segment's first timestamp (or the last
/// sampled timestamp for the final segment).
inline Moment segment_moment(const SamplingPlan& plan, std::size_t start, std::size_t end) {
  auto ts = plan.timestamps();
  return Moment{ts[start], ts[std::min(end, ts.size() - 1)]};
}

/// Every frame is level * base + noise, with one seeded unit-RMS base
/// vector per video. Ground truth is the relevant segments (all segments when none is
/// flagged), mapped to seconds under a uniform sampling plan.
inline SyntheticVideo generate_synthetic(const SyntheticSpec& spec) {
  validate(spec);
  rng::Engine e(spec.seed);
  const std::size_t slab = spec.n_patches * spec.dim;
  std::vector<double> base(slab);
  double ss = 0.0;
  for (double& v : base) {
    v = rng::normal(e);
    ss += v * v;
  }
  // Unit RMS, so a level step of g moves every frame by g * sqrt(P * D0).
  const double rms = std::sqrt(ss / static_cast<double>(slab));
  if (rms > 0.0)
    for (double& v : base) v /= rms;
  else
    std::fill(base.begin(), base.end(), 1.0);

  std::vector<double> data(spec.n_frames * slab);
  for (const auto& seg : spec.segments) {
    for (std::size_t f = seg.start_frame; f < seg.end_frame; ++f) {
      for (std::size_t j = 0; j < slab; ++j) {
        double v = seg.level * base[j];
        if (spec.noise_std > 0.0) v += spec.noise_std * rng::normal(e);
        data[f * slab + j] = v;
      }
    }
  }

  auto plan = SamplingPlan::uniform(spec.n_frames, spec.duration);
  VideoRecord rec{spec.video_id, spec.duration, spec.query, {}};
  const bool any_relevant =
      std::any_of(spec.segments.begin(), spec.segments.end(), [](const Segment& s) { return s.relevant; });
  std::vector<std::size_t> boundaries;
  for (std::size_t i = 0; i < spec.segments.size(); ++i) {
    const auto& s = spec.segments[i];
    if (i > 0) boundaries.push_back(s.start_frame);
    if (s.relevant || !any_relevant) rec.ground_truth.push_back(segment_moment(plan, s.start_frame, s.end_frame));
  }
  return {FrameTensor(spec.n_frames, spec.n_patches, spec.dim, std::move(data)), normalize_record(std::move(rec)),
          std::move(plan), std::move(boundaries)};
}

struct SimulationConfig {
  std::size_t videos = 100;
  std::uint64_t seed = 2024;
  std::size_t n_frames = 60;
  std::size_t n_patches = 4;
  std::size_t dim = 16;
  double duration = 30.0;
  double noise_std = 0.01;
  std::size_t min_segment = 4;
  std::size_t max_segments = 5;
};

/// Random segment layout: 2..max_segments segments of at least
/// min_segment frames, levels at least 1 apart, one or two relevant.
inline SyntheticSpec random_synthetic_spec(const SimulationConfig& cfg, std::size_t index) {
  require(cfg.min_segment >= 2 && cfg.n_frames >= 2 * cfg.min_segment, "frames too few for two segments");
  rng::Engine e(rng::stream_seed(cfg.seed, index));
  SyntheticSpec spec;
  spec.n_frames = cfg.n_frames;
  spec.n_patches = cfg.n_patches;
  spec.dim = cfg.dim;
  spec.duration = cfg.duration;
  spec.noise_std = cfg.noise_std;
  spec.seed = e();
  spec.video_id = "syn" + std::to_string(index);
  spec.query = "event " + std::to_string(index);

  const std::size_t max_segments = std::max<std::size_t>(2, std::min(cfg.max_segments, cfg.n_frames / cfg.min_segment));
  const std::size_t n_seg = rng::uniform_int(e, 2, max_segments);
  // Cut points on a grid that keeps every segment >= min_segment frames.
  const std::size_t slack = cfg.n_frames - n_seg * cfg.min_segment;
  std::vector<std::size_t> extra(n_seg - 1);
  for (auto& x : extra) x = rng::uniform_int(e, 0, slack);
  std::sort(extra.begin(), extra.end());
  std::size_t prev_extra = 0, start = 0;
  double level = rng::uniform(e, -2.0, 2.0);
  for (std::size_t i = 0; i < n_seg; ++i) {
    const std::size_t add = (i + 1 < n_seg ? extra[i] : slack) - prev_extra;
    prev_extra = i + 1 < n_seg ? extra[i] : slack;
    const std::size_t end = start + cfg.min_segment + add;
    spec.segments.push_back({start, end, level, false});
    start = end;
    const double step = rng::uniform(e, 1.0, 3.0);
    level += rng::uniform01(e) < 0.5 ? -step : step;
  }
  spec.segments[rng::uniform_int(e, 0, n_seg - 1)].relevant = true;
  if (n_seg > 2 && rng::uniform01(e) < 0.3) spec.segments[rng::uniform_int(e, 0, n_seg - 1)].relevant = true;
  return spec;
}

// ============================================================================
// Q-Former stand-in
// ============================================================================

struct QFormerConfig {
  std::size_t n_queries = 32;
  std::size_t query_dim = 32;
  std::uint64_t seed = 7;
};

/// Deterministic per-frame linear map from a P x D0 slab to a Q x D1 block:
/// out = A * slab * B with seeded Gaussian A (Q x P) and B (D0 x D1).
inline QueryTensor mock_qformer(const FrameTensor& frames, const QFormerConfig& cfg) {
  require(cfg.n_queries >= 1 && cfg.query_dim >= 1, "Q-Former shape must be >= 1");
  const std::size_t p = frames.rows(), d0 = frames.dim(), q = cfg.n_queries, d1 = cfg.query_dim;
  rng::Engine e(cfg.seed);
  std::vector<double> a(q * p), b(d0 * d1);
  for (double& v : a) v = rng::normal(e) / std::sqrt(static_cast<double>(p));
  for (double& v : b) v = rng::normal(e) / std::sqrt(static_cast<double>(d0));

  std::vector<double> out(frames.n_frames() * q * d1, 0.0);
  std::vector<double> mid(q * d0);
  for (std::size_t f = 0; f < frames.n_frames(); ++f) {
    auto slab = frames.frame(f);
    std::fill(mid.begin(), mid.end(), 0.0);
    for (std::size_t qi = 0; qi < q; ++qi)
      for (std::size_t pi = 0; pi < p; ++pi)
        for (std::size_t c = 0; c < d0; ++c) mid[qi * d0 + c] += a[qi * p + pi] * slab[pi * d0 + c];
    double* dst = out.data() + f * q * d1;
    for (std::size_t qi = 0; qi < q; ++qi)
      for (std::size_t c = 0; c < d0; ++c)
        for (std::size_t k = 0; k < d1; ++k) dst[qi * d1 + k] += mid[qi * d0 + c] * b[c * d1 + k];
  }
  return QueryTensor(frames.n_frames(), q, d1, std::move(out));
}

// ============================================================================
// Mock predictors
// ============================================================================

enum class PredictorKind { echo_gt, jitter_gt, corrupt_format, fixed_string };

inline PredictorKind parse_predictor_kind(std::string_view s) {
  if (s == "echo_gt") return PredictorKind::echo_gt;
  if (s == "jitter_gt") return PredictorKind::jitter_gt;
  if (s == "corrupt_format") return PredictorKind::corrupt_format;
  if (s == "fixed_string") return PredictorKind::fixed_string;
  fail(Errc::invalid_argument, "unknown predictor '" + std::string(s) + "'");
}

inline std::string_view to_string(PredictorKind k) {
  switch (k) {
    case PredictorKind::echo_gt: return "echo_gt";
    case PredictorKind::jitter_gt: return "jitter_gt";
    case PredictorKind::corrupt_format: return "corrupt_format";
    case PredictorKind::fixed_string: return "fixed_string";
  }
  return "echo_gt";
}

struct PredictorSpec {
  PredictorKind kind = PredictorKind::echo_gt;
  double jitter_frac = 0.0;
  double corruption_rate = 0.0;
  std::uint64_t seed = 0;
  std::string fixed_text;
  bool allow_empty = false;  // let corrupt_format also emit empty output

  void validate() const {
    require(jitter_frac >= 0.0 && jitter_frac < 0.5, "jitter_frac must lie in [0, 0.5)");
    require(corruption_rate >= 0.0 && corruption_rate <= 1.0, "corruption_rate must lie in [0, 1]");
  }
};

/// What a predictor sees for one query.
struct PredictionContext {
  const VideoRecord& record;
  const TimeScheme& scheme;
  const InterleavedSequence& sequence;
  std::uint64_t stream = 0;  // per-query index, for seeding
};

using MomentPredictor = std::function<std::string(const PredictionContext&)>;

/// Formatting failures a language model is known to produce.
enum class Corruption { drop_last_bracket, drop_first_bracket, drop_window_comma, trailing_eos, swap_endpoints, empty };

inline constexpr std::array kRecoverableCorruptions = {Corruption::drop_last_bracket, Corruption::drop_first_bracket,
                                                       Corruption::drop_window_comma, Corruption::trailing_eos,
                                                       Corruption::swap_endpoints};

/// Render pairs with the given corruptions applied.
inline std::string corrupt(std::vector<NumberPair> pairs, std::span<const Corruption> kinds) {
  bool drop_last = false, drop_first = false, drop_comma = false, eos = false;
  for (auto k : kinds) {
    switch (k) {
      case Corruption::empty: return "";
      case Corruption::swap_endpoints:
        for (auto& p : pairs) std::swap(p.start, p.end);
        break;
      case Corruption::drop_last_bracket: drop_last = true; break;
      case Corruption::drop_first_bracket: drop_first = true; break;
      case Corruption::drop_window_comma: drop_comma = true; break;
      case Corruption::trailing_eos: eos = true; break;
    }
  }
  std::string s = "[";
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (i) s += drop_comma ? "" : ",";
    s += "[" + format_number(pairs[i].start) + ", " + format_number(pairs[i].end) + "]";
  }
  s += "]";
  if (drop_last) s.pop_back();
  if (drop_first) s.erase(0, 1);
  if (eos) s += "</s>";
  return s;
}

inline MomentPredictor make_mock_predictor(const PredictorSpec& spec) {
  spec.validate();
  return [spec](const PredictionContext& ctx) -> std::string {
    if (spec.kind == PredictorKind::fixed_string) return spec.fixed_text;
    rng::Engine e(rng::stream_seed(spec.seed, ctx.stream));
    std::vector<NumberPair> pairs;
    for (const auto& g : ctx.record.ground_truth) {
      Moment m = g;
      if (spec.kind == PredictorKind::jitter_gt) {
        const double len = g.length();
        m.start += rng::uniform(e, -spec.jitter_frac, spec.jitter_frac) * len;
        m.end += rng::uniform(e, -spec.jitter_frac, spec.jitter_frac) * len;
      }
      pairs.push_back({to_scheme_units(ctx.scheme, m.start), to_scheme_units(ctx.scheme, m.end)});
    }
    if (spec.kind != PredictorKind::corrupt_format || rng::uniform01(e) >= spec.corruption_rate)
      return render(pairs);
    std::vector<Corruption> kinds;
    if (spec.allow_empty && rng::uniform01(e) < 1.0 / 6.0) {
      kinds.push_back(Corruption::empty);
    } else {
      for (auto k : kRecoverableCorruptions)
        if (rng::uniform01(e) < 0.5) kinds.push_back(k);
      if (kinds.empty()) kinds.push_back(kRecoverableCorruptions[rng::uniform_int(e, 0, kRecoverableCorruptions.size() - 1)]);
    }
    return corrupt(std::move(pairs), kinds);
  };
}

// ============================================================================
// Pipeline
// ============================================================================

enum class Stage { ifs, qformer, dtc, timecode, predict, postprocess, decode, metrics };
inline constexpr std::size_t kStageCount = 8;

inline std::string_view to_string(Stage s) {
  static constexpr std::array<std::string_view, kStageCount> names = {
      "ifs", "qformer", "dtc", "timecode", "predict", "postprocess", "decode", "metrics"};
  return names[static_cast<std::size_t>(s)];
}

/// A failure inside one pipeline stage.
class StageError : public Error {
 public:
  StageError(Stage stage, Errc code, const std::string& what)
      : Error(code, std::string(to_string(stage)) + ": " + what), stage_(stage) {}
  Stage stage() const noexcept { return stage_; }

 private:
  Stage stage_;
};

struct PipelineConfig {
  double sigma = kDefaultSigma;
  std::size_t k = 32;
  QFormerConfig qformer;
  CompressionConfig compression;
  std::size_t lang_dim = 0;  // 0: identity projector into D1
  std::uint64_t projector_seed = 11;
  SchemePreference scheme = SchemePreference::automatic;
  double native_fps = 30.0;
  SpecialTokens special;
  std::string prompt = "Given the video and the query, find the relevant windows.";
  EvalOptions eval;
  PredictorSpec predictor;
  std::size_t workers = 1;
  bool check_invariants = true;
};

struct StageTimings {
  std::array<std::chrono::nanoseconds, kStageCount> per_stage{};

  std::chrono::nanoseconds total() const {
    std::chrono::nanoseconds t{0};
    for (auto d : per_stage) t += d;
    return t;
  }
  StageTimings& operator+=(const StageTimings& o) {
    for (std::size_t i = 0; i < kStageCount; ++i) per_stage[i] += o.per_stage[i];
    return *this;
  }
};

struct PipelineResult {
  IfsResult ifs;
  std::size_t total_tokens = 0;
  TimeScheme scheme;
  std::size_t sequence_length = 0;
  std::string raw_output;
  ParsedPrediction parsed;
  EvalPair pair;
  StageTimings timings;
};

inline Projector make_projector(const PipelineConfig& cfg) {
  const std::size_t d1 = cfg.qformer.query_dim;
  if (cfg.lang_dim == 0 || cfg.lang_dim == d1) return Projector::identity(d1);
  return Projector::seeded_linear(d1, cfg.lang_dim, cfg.projector_seed);
}

namespace harness_detail {

inline void check(bool ok, Stage stage, const std::string& what) {
  if (!ok) throw StageError(stage, Errc::invariant_violation, what);
}

template <class Fn>
auto timed(StageTimings& t, Stage stage, Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      t.per_stage[static_cast<std::size_t>(stage)] += std::chrono::steady_clock::now() - t0;
    } else {
      auto r = fn();
      t.per_stage[static_cast<std::size_t>(stage)] += std::chrono::steady_clock::now() - t0;
      return r;
    }
  } catch (const StageError&) {
    throw;
  } catch (const Error& err) {
    throw StageError(stage, err.code(), err.what());
  } catch (const std::exception& err) {
    throw StageError(stage, Errc::invariant_violation, err.what());
  }
}

}  // namespace harness_detail

/// One query through every stage.
inline PipelineResult run_pipeline(const FrameTensor& frames, const VideoRecord& record, const SamplingPlan& plan,
                                   const PipelineConfig& cfg, const MomentPredictor& predictor,
                                   std::uint64_t stream = 0) {
  using harness_detail::check;
  using harness_detail::timed;
  PipelineResult res;
  auto& tm = res.timings;
  const std::size_t n = frames.n_frames();
  if (plan.n_frames() != n)
    throw StageError(Stage::timecode, Errc::invalid_argument, "sampling plan and frame tensor disagree on N");

  res.ifs = timed(tm, Stage::ifs, [&] { return run_ifs(frames, cfg.sigma, std::min(cfg.k, n)); });
  auto queries = timed(tm, Stage::qformer, [&] { return mock_qformer(frames, cfg.qformer); });
  auto language = timed(tm, Stage::dtc, [&] {
    return compress_and_project(queries, res.ifs.split, cfg.compression, make_projector(cfg));
  });
  res.total_tokens = language.total_tokens();
  InterleavedSequence seq = timed(tm, Stage::timecode, [&] {
    res.scheme = make_scheme(plan, cfg.scheme, cfg.native_fps);
    auto times = encode_times(res.scheme, plan);
    return build_sequence(times, language, record.query, cfg.prompt, cfg.special);
  });
  res.sequence_length = seq.size();
  res.raw_output = timed(tm, Stage::predict, [&] {
    return predictor(PredictionContext{record, res.scheme, seq, stream});
  });
  res.parsed = timed(tm, Stage::postprocess, [&] { return post_process(res.raw_output); });
  res.pair.predictions =
      timed(tm, Stage::decode, [&] { return decode_moments(res.parsed.moments, res.scheme, record.duration); });
  res.pair.ground_truth = record.ground_truth;

  if (cfg.check_invariants) {
    timed(tm, Stage::metrics, [&] {
      const auto& split = res.ifs.split;
      check(split.key_indices.size() + split.nonkey_indices.size() == n, Stage::ifs, "split does not cover all frames");
      check(!split.key_indices.empty() && split.key_indices.front() == 0, Stage::ifs, "frame 0 is not a key frame");
      const std::size_t q = cfg.qformer.n_queries;
      const std::size_t want = split.key_indices.size() * q +
                               split.nonkey_indices.size() * cfg.compression.tokens_per_nonkey(q);
      check(res.total_tokens == want, Stage::dtc, "token count law violated");
      check(res.sequence_length == expected_sequence_length(n, cfg.special), Stage::timecode,
            "interleaved sequence has the wrong length");
      check(!res.parsed.moments.empty(), Stage::postprocess, "empty parse result");
      for (const auto& m : res.pair.predictions)
        check(m.start <= m.end && m.start >= 0.0 && m.end <= record.duration, Stage::decode, "decoded moment out of range");
      check(!res.pair.ground_truth.empty(), Stage::metrics, "record has no ground truth");
    });
  }
  return res;
}

/// Uniform sampling over the record's duration.
inline PipelineResult run_pipeline(const FrameTensor& frames, const VideoRecord& record, const PipelineConfig& cfg,
                                   const MomentPredictor& predictor, std::uint64_t stream = 0) {
  return run_pipeline(frames, record, SamplingPlan::uniform(frames.n_frames(), record.duration), cfg, predictor,
                      stream);
}

// ============================================================================
// Batches
// ============================================================================

struct BatchItem {
  std::function<FrameTensor()> frames;  // loaded lazily inside the worker
  VideoRecord record;
};

struct QueryOutcome {
  std::string video_id;
  std::string raw_output;
  ParsedPrediction parsed;
  std::vector<Moment> moments;
};

struct SuiteResult {
  EvalReport report;
  StageTimings timings;                      // summed over queries
  std::chrono::nanoseconds wall{0};
  std::vector<QueryOutcome> outcomes;        // input order
};

/// Run every item on a pool of cfg.workers threads. Results are merged in
/// input order, so the report does not depend on the pool width.
inline SuiteResult run_batch(std::span<const BatchItem> items, const PipelineConfig& cfg,
                             const MomentPredictor& predictor) {
  if (items.empty()) fail(Errc::invalid_argument, "no queries");
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<PipelineResult> results(items.size());
  std::vector<std::exception_ptr> errors(items.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < items.size(); i = next++) {
      try {
        auto frames = items[i].frames();
        results[i] = run_pipeline(frames, items[i].record, cfg, predictor, i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t width = std::clamp<std::size_t>(cfg.workers, 1, items.size());
  if (width == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < width; ++w) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  SuiteResult out;
  EvalAccumulator acc(cfg.eval);
  std::vector<EvalPair> pairs;
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto& r = results[i];
    acc.add(r.pair);
    out.timings += r.timings;
    out.outcomes.push_back({items[i].record.video_id, r.raw_output, r.parsed, r.pair.predictions});
    if (cfg.eval.map_protocol == MapProtocol::corpus) pairs.push_back(std::move(r.pair));
  }
  out.report = cfg.eval.map_protocol == MapProtocol::corpus ? evaluate(pairs, cfg.eval) : acc.report();
  out.report.map_protocol = cfg.eval.map_protocol;
  out.wall = std::chrono::steady_clock::now() - t0;
  return out;
}

inline SuiteResult run_simulation(const SimulationConfig& sim, const PipelineConfig& cfg) {
  require(sim.videos >= 1, "no queries");
  std::vector<BatchItem> items;
  items.reserve(sim.videos);
  for (std::size_t i = 0; i < sim.videos; ++i) {
    auto spec = random_synthetic_spec(sim, i);
    auto record = generate_synthetic(spec).record;
    items.push_back({[spec] { return generate_synthetic(spec).frames; }, std::move(record)});
  }
  return run_batch(items, cfg, make_mock_predictor(cfg.predictor));
}

// ============================================================================
// Settings: flat "key = value" files mirroring the CLI flags
// ============================================================================

struct Settings {
  PipelineConfig pipeline;
  SimulationConfig simulation;
};

namespace settings_detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out))
    fail(Errc::invalid_argument, "setting '" + key + "' expects a number, got '" + v + "'");
  return out;
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    fail(Errc::invalid_argument, "setting '" + key + "' expects a non-negative integer, got '" + v + "'");
  return out;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(Errc::invalid_argument, "setting '" + key + "' expects true/false, got '" + v + "'");
}

inline std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
  if (out.empty()) fail(Errc::invalid_argument, "setting '" + key + "' expects a comma-separated list");
  return out;
}

inline SpecialTokens to_special(const std::string& key, const std::string& v) {
  if (v == "both") return {true, true};
  if (v == "time") return {true, false};
  if (v == "frame") return {false, true};
  if (v == "none") return {false, false};
  fail(Errc::invalid_argument, "setting '" + key + "' expects both|time|frame|none, got '" + v + "'");
}

}  // namespace settings_detail

/// Every recognized key, in documentation order.
inline constexpr std::array<std::string_view, 31> kSettingKeys = {
    "k", "sigma", "queries", "query-dim", "qformer-seed", "method", "target-tokens", "pool-window",
    "lang-dim", "projector-seed", "scheme", "fps", "special-tokens", "prompt", "r1", "map",
    "map-protocol", "predictor", "jitter", "corruption-rate", "allow-empty", "predictor-seed",
    "fixed-text", "workers", "videos", "seed", "frames", "patches", "dim", "duration", "noise"};

inline void apply_setting(Settings& s, std::string key, const std::string& value) {
  using namespace settings_detail;
  std::replace(key.begin(), key.end(), '_', '-');
  auto& p = s.pipeline;
  auto& sim = s.simulation;
  if (key == "k") p.k = to_uint(key, value);
  else if (key == "sigma") p.sigma = to_double(key, value);
  else if (key == "queries") p.qformer.n_queries = to_uint(key, value);
  else if (key == "query-dim") p.qformer.query_dim = to_uint(key, value);
  else if (key == "qformer-seed") p.qformer.seed = to_uint(key, value);
  else if (key == "method") p.compression.method = parse_compression_method(value);
  else if (key == "target-tokens") p.compression.target_tokens = to_uint(key, value);
  else if (key == "pool-window") p.compression.pool_window = to_uint(key, value);
  else if (key == "lang-dim") p.lang_dim = to_uint(key, value);
  else if (key == "projector-seed") p.projector_seed = to_uint(key, value);
  else if (key == "scheme") p.scheme = parse_scheme_preference(value);
  else if (key == "fps") p.native_fps = to_double(key, value);
  else if (key == "special-tokens") p.special = to_special(key, value);
  else if (key == "prompt") p.prompt = value;
  else if (key == "r1") p.eval.taus_r1 = to_list(key, value);
  else if (key == "map") p.eval.taus_map = to_list(key, value);
  else if (key == "map-protocol") p.eval.map_protocol = parse_map_protocol(value);
  else if (key == "predictor") p.predictor.kind = parse_predictor_kind(value);
  else if (key == "jitter") p.predictor.jitter_frac = to_double(key, value);
  else if (key == "corruption-rate") p.predictor.corruption_rate = to_double(key, value);
  else if (key == "allow-empty") p.predictor.allow_empty = to_bool(key, value);
  else if (key == "predictor-seed") p.predictor.seed = to_uint(key, value);
  else if (key == "fixed-text") p.predictor.fixed_text = value;
  else if (key == "workers") p.workers = to_uint(key, value);
  else if (key == "videos") sim.videos = to_uint(key, value);
  else if (key == "seed") sim.seed = to_uint(key, value);
  else if (key == "frames") sim.n_frames = to_uint(key, value);
  else if (key == "patches") sim.n_patches = to_uint(key, value);
  else if (key == "dim") sim.dim = to_uint(key, value);
  else if (key == "duration") sim.duration = to_double(key, value);
  else if (key == "noise") sim.noise_std = to_double(key, value);
  else fail(Errc::invalid_argument, "unknown setting '" + key + "'");
}

/// Lines are `key = value`; blank lines and lines starting with '#' are skipped.
inline void load_settings(Settings& s, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io_failure, "cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto t = settings_detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      fail(Errc::malformed_record, path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    apply_setting(s, settings_detail::trim(t.substr(0, eq)), settings_detail::trim(t.substr(eq + 1)));
  }
}

/// Records from `records_path`, frames from `frames_dir/<video_id>.mreb`,
/// settings from `config_path` (may be empty).
inline SuiteResult run_suite(const std::filesystem::path& records_path, const std::filesystem::path& frames_dir,
                             const std::filesystem::path& config_path, const Settings& base = {}) {
  Settings s = base;
  if (!config_path.empty()) load_settings(s, config_path);
  auto records = load_records(records_path);
  if (records.empty()) fail(Errc::invalid_argument, "no queries");
  std::vector<BatchItem> items;
  items.reserve(records.size());
  for (auto& r : records) {
    auto path = frames_dir / (r.video_id + ".mreb");
    items.push_back({[path] { return load_frame_tensor(path); }, std::move(r)});
  }
  return run_batch(items, s.pipeline, make_mock_predictor(s.pipeline.predictor));
}

inline nlohmann::ordered_json timings_to_json(const SuiteResult& r) {
  nlohmann::ordered_json j;
  j["stages_ns"] = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < kStageCount; ++i)
    j["stages_ns"][std::string(to_string(static_cast<Stage>(i)))] = r.timings.per_stage[i].count();
  j["total_ns"] = r.timings.total().count();
  j["wall_ns"] = r.wall.count();
  return j;
}

}  // namespace mrkit
