// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "mrkit/harness.hpp"

namespace fs = std::filesystem;
using namespace mrkit;

namespace {

SyntheticSpec two_segment_spec() {
  SyntheticSpec s;
  s.n_frames = 10;
  s.n_patches = 2;
  s.dim = 3;
  s.duration = 9.0;
  s.segments = {{0, 4, 1.0, false}, {4, 10, 3.0, true}};
  s.seed = 42;
  return s;
}

PipelineConfig small_config() {
  PipelineConfig cfg;
  cfg.k = 8;
  cfg.qformer = {8, 6, 7};
  cfg.compression = {CompressionMethod::variance_select, 4, 2};
  return cfg;
}

SimulationConfig small_sim(std::size_t videos = 20) {
  SimulationConfig sim;
  sim.videos = videos;
  sim.n_frames = 24;
  sim.dim = 4;
  sim.duration = 12.0;
  return sim;
}

}  // namespace

TEST(Synthetic, NoiselessHasOneChange) {
  auto v = generate_synthetic(two_segment_spec());
  auto d = change_norms(frame_deltas(v.frames));
  for (std::size_t i = 1; i < d.size(); ++i) {
    if (i == 4)
      EXPECT_GT(d[i], 0.0);
    else
      EXPECT_EQ(d[i], 0.0) << i;
  }
  EXPECT_EQ(v.boundaries, (std::vector<std::size_t>{4}));
  EXPECT_EQ(v.record.ground_truth, (std::vector<Moment>{{4.0, 9.0}}));
}

TEST(Synthetic, SameSeedSameBytes) {
  auto s = two_segment_spec();
  s.noise_std = 0.1;
  EXPECT_EQ(generate_synthetic(s).frames, generate_synthetic(s).frames);
  auto t = s;
  t.seed = 43;
  EXPECT_NE(generate_synthetic(s).frames, generate_synthetic(t).frames);
}

TEST(Synthetic, ValidationErrors) {
  auto s = two_segment_spec();
  s.segments[1].start_frame = 5;
  EXPECT_THROW(generate_synthetic(s), Error);
  s = two_segment_spec();
  s.segments = {{0, 1, 1.0, false}, {1, 10, 2.0, false}};
  EXPECT_THROW(generate_synthetic(s), Error);
  s = two_segment_spec();
  s.segments.pop_back();
  EXPECT_THROW(generate_synthetic(s), Error);
}

TEST(Synthetic, RandomSpecsAreValidAndReproducible) {
  SimulationConfig sim;
  for (std::size_t i = 0; i < 200; ++i) {
    auto a = random_synthetic_spec(sim, i);
    EXPECT_NO_THROW(validate(a));
    EXPECT_GE(a.segments.size(), 2u);
    for (const auto& seg : a.segments) EXPECT_GE(seg.end_frame - seg.start_frame, sim.min_segment);
    EXPECT_EQ(random_synthetic_spec(sim, i).seed, a.seed);
  }
}

TEST(Synthetic, DefaultPipelineKeepsEveryBoundary) {
  // Simulation layouts at the default sigma and k.
  SimulationConfig sim;
  PipelineConfig cfg;
  for (std::size_t i = 0; i < 300; ++i) {
    auto v = generate_synthetic(random_synthetic_spec(sim, i));
    auto r = run_ifs(v.frames, cfg.sigma, cfg.k);
    for (auto b : v.boundaries)
      EXPECT_TRUE(std::binary_search(r.split.key_indices.begin(), r.split.key_indices.end(), b)) << i;
  }
}

TEST(MockQFormer, ShapeAndDeterminism) {
  auto v = generate_synthetic(two_segment_spec());
  auto q = mock_qformer(v.frames, {5, 7, 1});
  EXPECT_EQ(q.n_frames(), 10u);
  EXPECT_EQ(q.n_queries(), 5u);
  EXPECT_EQ(q.dim(), 7u);
  EXPECT_EQ(q, mock_qformer(v.frames, {5, 7, 1}));
}

TEST(Corrupt, Grammar) {
  std::vector<NumberPair> p = {{1, 2}, {3.5, 4}};
  using C = Corruption;
  EXPECT_EQ(corrupt(p, std::vector<C>{}), "[[1, 2],[3.5, 4]]");
  EXPECT_EQ(corrupt(p, std::vector<C>{C::drop_last_bracket}), "[[1, 2],[3.5, 4]");
  EXPECT_EQ(corrupt(p, std::vector<C>{C::drop_first_bracket}), "[1, 2],[3.5, 4]]");
  EXPECT_EQ(corrupt(p, std::vector<C>{C::drop_window_comma}), "[[1, 2][3.5, 4]]");
  EXPECT_EQ(corrupt(p, std::vector<C>{C::trailing_eos}), "[[1, 2],[3.5, 4]]</s>");
  EXPECT_EQ(corrupt(p, std::vector<C>{C::swap_endpoints}), "[[2, 1],[4, 3.5]]");
  EXPECT_EQ(corrupt(p, std::vector<C>{C::empty, C::trailing_eos}), "");
}

TEST(Pipeline, EchoIsPerfect) {
  auto v = generate_synthetic(two_segment_spec());
  PredictorSpec ps;
  auto r = run_pipeline(v.frames, v.record, v.plan, small_config(), make_mock_predictor(ps));
  ASSERT_EQ(r.pair.predictions.size(), 1u);
  EXPECT_NEAR(temporal_iou(r.pair.predictions[0], r.pair.ground_truth[0]), 1.0, 1e-12);
  EXPECT_EQ(r.scheme.kind, TimeSchemeKind::relative_index);
  EXPECT_EQ(r.sequence_length, 62u);
  // 8 key frames x 8 queries + 2 non-key frames x 4 kept.
  EXPECT_EQ(r.total_tokens, 72u);
}

TEST(Pipeline, TimestampSchemeEcho) {
  auto s = two_segment_spec();
  s.duration = 100.0;
  auto v = generate_synthetic(s);
  auto r = run_pipeline(v.frames, v.record, v.plan, small_config(), make_mock_predictor({}));
  EXPECT_EQ(r.scheme.kind, TimeSchemeKind::rounded_timestamp);
  EXPECT_NEAR(temporal_iou(r.pair.predictions[0], r.pair.ground_truth[0]), 1.0, 1e-12);
}

TEST(Pipeline, KLargerThanNIsClamped) {
  auto v = generate_synthetic(two_segment_spec());
  auto cfg = small_config();
  cfg.k = 100;
  auto r = run_pipeline(v.frames, v.record, v.plan, cfg, make_mock_predictor({}));
  EXPECT_EQ(r.ifs.split.key_indices.size(), 10u);
  EXPECT_EQ(r.total_tokens, 80u);
}

TEST(Pipeline, GarbageOutputFallsBack) {
  auto v = generate_synthetic(two_segment_spec());
  PredictorSpec ps;
  ps.kind = PredictorKind::fixed_string;
  ps.fixed_text = "I cannot find it.";
  auto r = run_pipeline(v.frames, v.record, v.plan, small_config(), make_mock_predictor(ps));
  EXPECT_TRUE(r.parsed.was_fallback);
  EXPECT_EQ(best_iou(r.pair.predictions[0], r.pair.ground_truth), 0.0);
}

TEST(Pipeline, ErrorsNameTheStage) {
  auto v = generate_synthetic(two_segment_spec());
  MomentPredictor boom = [](const PredictionContext&) -> std::string { throw std::runtime_error("model crashed"); };
  try {
    run_pipeline(v.frames, v.record, v.plan, small_config(), boom);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), Stage::predict);
  }
  auto cfg = small_config();
  cfg.compression.target_tokens = 99;
  try {
    run_pipeline(v.frames, v.record, v.plan, cfg, make_mock_predictor({}));
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), Stage::dtc);
    EXPECT_EQ(e.code(), Errc::invalid_argument);
  }
}

TEST(Simulation, JitterStaysAboveBound) {
  auto cfg = small_config();
  cfg.predictor.kind = PredictorKind::jitter_gt;
  cfg.predictor.jitter_frac = 0.05;
  auto res = run_simulation(small_sim(), cfg);
  EXPECT_EQ(res.report.r1.at(0.5), 100.0);
  const double bound = (1 - 2 * 0.05) / (1 + 2 * 0.05);
  for (const auto& o : res.outcomes) EXPECT_FALSE(o.parsed.was_fallback);
  EXPECT_GE(res.report.miou, 100.0 * bound);
}

TEST(Simulation, CorruptMatchesEcho) {
  auto cfg = small_config();
  auto echo = run_simulation(small_sim(), cfg);
  cfg.predictor.kind = PredictorKind::corrupt_format;
  cfg.predictor.corruption_rate = 1.0;
  auto bad = run_simulation(small_sim(), cfg);
  EXPECT_EQ(report_to_json(echo.report).dump(), report_to_json(bad.report).dump());
  EXPECT_NE(echo.outcomes[0].raw_output, bad.outcomes[0].raw_output);
}

TEST(Simulation, EmptyCorruptionNeedsOptIn) {
  auto cfg = small_config();
  cfg.predictor.kind = PredictorKind::corrupt_format;
  cfg.predictor.corruption_rate = 1.0;
  cfg.predictor.allow_empty = true;
  auto res = run_simulation(small_sim(60), cfg);
  std::size_t empties = 0;
  for (const auto& o : res.outcomes) empties += o.raw_output.empty();
  EXPECT_GT(empties, 0u);
}

TEST(Simulation, WorkerCountDoesNotChangeReport) {
  auto cfg = small_config();
  cfg.predictor.kind = PredictorKind::jitter_gt;
  cfg.predictor.jitter_frac = 0.2;
  auto a = run_simulation(small_sim(), cfg);
  cfg.workers = 4;
  auto b = run_simulation(small_sim(), cfg);
  EXPECT_EQ(report_to_json(a.report).dump(), report_to_json(b.report).dump());
}

TEST(Suite, EmptyRecordFile) {
  auto dir = fs::temp_directory_path() / "mrkit_test_harness";
  fs::create_directories(dir);
  std::ofstream(dir / "empty.jsonl").close();
  try {
    run_suite(dir / "empty.jsonl", dir, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("no queries"), std::string::npos);
  }
}

TEST(Suite, RunsFromFiles) {
  auto dir = fs::temp_directory_path() / "mrkit_test_harness_files";
  fs::create_directories(dir);
  auto v = generate_synthetic(two_segment_spec());
  v.record.video_id = "clip";
  save_frame_tensor(v.frames, dir / "clip.mreb");
  save_records(std::vector<VideoRecord>{v.record}, dir / "records.jsonl");
  std::ofstream(dir / "run.cfg") << "# small\nk = 8\nqueries = 8\nquery_dim = 6\ntarget-tokens = 4\n";
  auto res = run_suite(dir / "records.jsonl", dir, dir / "run.cfg");
  EXPECT_EQ(res.report.n_queries, 1u);
  EXPECT_EQ(res.report.miou, 100.0);
}

TEST(Settings, ParsingAndErrors) {
  Settings s;
  apply_setting(s, "map", "0.3, 0.5");
  apply_setting(s, "special_tokens", "time");
  apply_setting(s, "method", "avgpool");
  EXPECT_EQ(s.pipeline.eval.taus_map, (std::vector<double>{0.3, 0.5}));
  EXPECT_FALSE(s.pipeline.special.frame);
  EXPECT_EQ(s.pipeline.compression.method, CompressionMethod::average_pooling);
  EXPECT_THROW(apply_setting(s, "bogus", "1"), Error);
  EXPECT_THROW(apply_setting(s, "k", "-3"), Error);
  EXPECT_THROW(apply_setting(s, "sigma", "abc"), Error);
  EXPECT_THROW(apply_setting(s, "allow-empty", "maybe"), Error);
}
