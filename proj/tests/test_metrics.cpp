// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "mrkit/metrics.hpp"
#include "oracles.hpp"

using namespace mrkit;

namespace {

// Q1: top-1 (0,4) vs (2,8) -> 0.25; the hit comes at rank 2.
// Q2: (12,20) vs (10,20) -> 0.8.
// Q3: (0,6) vs (0,10) -> 0.6; (21,30) vs (20,30) -> 0.9; (50,60) misses.
std::vector<EvalPair> three_query_fixture() {
  return {
      {{{0, 4}, {2, 8}}, {{2, 8}}},
      {{{12, 20}}, {{10, 20}}},
      {{{0, 6}, {21, 30}, {50, 60}}, {{0, 10}, {20, 30}}},
  };
}

}  // namespace

TEST(TemporalIou, HandValues) {
  EXPECT_EQ(temporal_iou({2, 8}, {2, 8}), 1.0);
  EXPECT_EQ(temporal_iou({0, 4}, {2, 8}), 0.25);
  EXPECT_EQ(temporal_iou({0, 1}, {5, 6}), 0.0);
  EXPECT_EQ(temporal_iou({-1, -1}, {2, 8}), 0.0);
  EXPECT_EQ(temporal_iou({3, 3}, {3, 3}), 0.0);
  EXPECT_EQ(temporal_iou({3, 3}, {0, 6}), 0.0);
}

TEST(TemporalIou, AgreesWithGridOracleAndIsSymmetric) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 100);
  for (int i = 0; i < 200; ++i) {
    double a0 = u(rng), a1 = u(rng), b0 = u(rng), b1 = u(rng);
    if (a0 > a1) std::swap(a0, a1);
    if (b0 > b1) std::swap(b0, b1);
    const double v = temporal_iou({a0, a1}, {b0, b1});
    EXPECT_EQ(v, temporal_iou({b0, b1}, {a0, a1}));
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    EXPECT_NEAR(v, oracle::grid_iou(a0, a1, b0, b1), 1e-3);
  }
}

TEST(Recall, ThresholdStraddle) {
  std::vector<EvalPair> one = {{{{0, 6}}, {{0, 10}}}};
  EXPECT_EQ(recall_at_k(one, 1, 0.5), 100.0);
  EXPECT_EQ(recall_at_k(one, 1, 0.7), 0.0);
  std::vector<EvalPair> two = {{{{1, 10}}, {{0, 10}}}, {{{0, 3}}, {{0, 10}}}};
  EXPECT_EQ(recall_at_k(two, 1, 0.5), 50.0);
  EXPECT_THROW(recall_at_k(std::vector<EvalPair>{}, 1, 0.5), Error);
}

TEST(Recall, DeeperKOnlyHelps) {
  std::vector<EvalPair> p = {{{{50, 60}, {0, 10}}, {{0, 10}}}};
  EXPECT_EQ(recall_at_k(p, 1, 0.5), 0.0);
  EXPECT_EQ(recall_at_k(p, 5, 0.5), 100.0);
}

TEST(MeanIou, Arithmetic) {
  std::vector<EvalPair> a = {{{{0, 10}}, {{0, 10}}}, {{{20, 30}}, {{0, 10}}}};
  EXPECT_EQ(mean_iou(a), 50.0);
  std::vector<EvalPair> b = {{{{0, 4}}, {{0, 16}}}, {{{0, 12}}, {{0, 16}}}};
  EXPECT_EQ(mean_iou(b), 50.0);
}

TEST(AveragePrecision, HandCurves) {
  EXPECT_EQ(average_precision({{{0, 10}}, {{0, 10}}}, 0.5), 1.0);
  EXPECT_EQ(average_precision({{{50, 60}, {0, 10}}, {{0, 10}}}, 0.5), 0.5);
  EXPECT_EQ(average_precision({{{0, 10}}, {{0, 10}, {20, 30}}}, 0.5), 0.5);
  // A duplicate cannot claim an already matched ground truth.
  EXPECT_EQ(average_precision({{{0, 10}, {0, 10}}, {{0, 10}}}, 0.5), 1.0);
}

TEST(Evaluate, ThreeQueryFixture) {
  auto pairs = three_query_fixture();
  auto r = evaluate(pairs);
  EXPECT_EQ(r.n_queries, 3u);
  EXPECT_NEAR(r.r1.at(0.5), 200.0 / 3.0, 1e-9);
  EXPECT_NEAR(r.r1.at(0.7), 100.0 / 3.0, 1e-9);
  EXPECT_NEAR(r.miou, 55.0, 1e-9);
  EXPECT_NEAR(r.map_at.at(0.5), 250.0 / 3.0, 1e-9);
  EXPECT_NEAR(r.map_at.at(0.75), 175.0 / 3.0, 1e-9);

  auto j = report_to_json(r);
  EXPECT_EQ(j["r1"]["0.5"], 66.67);
  EXPECT_EQ(j["r1"]["0.7"], 33.33);
  EXPECT_EQ(j["miou"], 55.0);
  EXPECT_EQ(j["map"]["0.5"], 83.33);
  EXPECT_EQ(j["map"]["0.75"], 58.33);
}

TEST(Evaluate, PerfectAndFallback) {
  std::vector<EvalPair> perfect = {{{{2, 8}}, {{2, 8}}}, {{{0, 1}, {5, 9}}, {{0, 1}, {5, 9}}}};
  auto r = evaluate(perfect);
  for (auto [t, v] : r.r1) EXPECT_EQ(v, 100.0);
  for (auto [t, v] : r.map_at) EXPECT_EQ(v, 100.0);
  EXPECT_EQ(r.miou, 100.0);

  std::vector<EvalPair> fallback = {{{{-1, -1}}, {{2, 8}}}, {{{-1, -1}}, {{0, 30}}}};
  r = evaluate(fallback);
  for (auto [t, v] : r.r1) EXPECT_EQ(v, 0.0);
  for (auto [t, v] : r.map_at) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(r.miou, 0.0);
}

TEST(Evaluate, CorpusProtocol) {
  auto pairs = three_query_fixture();
  EvalOptions opts;
  opts.map_protocol = MapProtocol::corpus;
  auto r = evaluate(pairs, opts);
  // Pooled order: rank 1 of Q1..Q3 (miss, hit, hit), then rank 2 (hit, -, hit), rank 3 (miss).
  // tau 0.5: precisions 1/2, 2/3, 3/4, 4/5 over 4 GT.
  EXPECT_NEAR(r.map_at.at(0.5), 100.0 * (0.5 + 2.0 / 3 + 0.75 + 0.8) / 4.0, 1e-9);
  EXPECT_EQ(report_to_json(r)["conventions"].get<std::string>().find("pooled") != std::string::npos, true);
}

TEST(Accumulator, MergeMatchesSinglePass) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0, 50);
  std::vector<EvalPair> pairs;
  for (int i = 0; i < 60; ++i) {
    EvalPair p;
    for (int j = 0; j < 3; ++j) {
      double a = u(rng), b = u(rng);
      p.predictions.push_back({std::min(a, b), std::max(a, b)});
    }
    double a = u(rng), b = u(rng);
    p.ground_truth.push_back({std::min(a, b), std::max(a, b) + 1.0});
    pairs.push_back(p);
  }
  EvalAccumulator whole, left, right;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    whole.add(pairs[i]);
    (i < 25 ? left : right).add(pairs[i]);
  }
  left.merge(right);
  auto a = whole.report(), b = left.report();
  EXPECT_EQ(a.n_queries, b.n_queries);
  EXPECT_NEAR(a.miou, b.miou, 1e-9);
  for (auto [t, v] : a.r1) EXPECT_NEAR(v, b.r1.at(t), 1e-9);
  for (auto [t, v] : a.map_at) EXPECT_NEAR(v, b.map_at.at(t), 1e-9);

  EvalOptions other;
  other.taus_r1 = {0.3};
  EXPECT_THROW(whole.merge(EvalAccumulator(other)), Error);
}

TEST(Evaluate, MonotoneInThreshold) {
  std::mt19937_64 rng(5150);
  std::uniform_real_distribution<double> u(0, 60);
  std::vector<double> taus;
  for (int i = 1; i <= 19; ++i) taus.push_back(i * 0.05);
  for (int ds = 0; ds < 200; ++ds) {
    std::vector<EvalPair> pairs;
    for (int q = 0; q < 5; ++q) {
      EvalPair p;
      for (int j = 0, n = 1 + static_cast<int>(rng() % 4); j < n; ++j) {
        double a = u(rng), b = u(rng);
        p.predictions.push_back({std::min(a, b), std::max(a, b)});
      }
      for (int j = 0, n = 1 + static_cast<int>(rng() % 3); j < n; ++j) {
        double a = u(rng), b = u(rng);
        p.ground_truth.push_back({std::min(a, b), std::max(a, b)});
      }
      pairs.push_back(p);
    }
    auto r = evaluate(pairs, taus, taus);
    for (std::size_t i = 1; i < taus.size(); ++i) {
      ASSERT_LE(r.r1.at(taus[i]), r.r1.at(taus[i - 1]));
      ASSERT_LE(r.map_at.at(taus[i]), r.map_at.at(taus[i - 1]) + 1e-12) << "dataset " << ds;
    }
  }
}

TEST(Report, RoundingAndKeys) {
  EXPECT_EQ(round_percent(12.345), 12.35);
  EXPECT_EQ(round_percent(100.0 / 3.0), 33.33);
  EXPECT_EQ(threshold_key(0.5), "0.5");
  EXPECT_EQ(threshold_key(0.75), "0.75");
  EXPECT_EQ(parse_map_protocol("corpus"), MapProtocol::corpus);
  EXPECT_THROW(parse_map_protocol("coco"), Error);
}
