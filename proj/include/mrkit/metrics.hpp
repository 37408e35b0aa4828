// SPDX-License-Identifier: Apache-2.0
//
// Moment-retrieval metrics: temporal IoU, Recall@K at IoU thresholds,
// mean IoU, and mean average precision.
//
// Conventions: predictions carry no scores, so rank is list position. R1
// and mIoU take the best IoU over all ground-truth moments. AP matches
// predictions greedily in rank order to the highest-IoU unmatched
// ground truth and sums precision at each true positive over |GT|.

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mrkit/core.hpp"

namespace mrkit {

inline double temporal_iou(const Moment& a, const Moment& b) {
  const double inter = std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
  const double uni = (a.end - a.start) + (b.end - b.start) - inter;
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

struct EvalPair {
  std::vector<Moment> predictions;  // ranked
  std::vector<Moment> ground_truth;
};

inline double best_iou(const Moment& pred, std::span<const Moment> gt) {
  double best = 0.0;
  for (const auto& g : gt) best = std::max(best, temporal_iou(pred, g));
  return best;
}

namespace metrics_detail {

inline void check_pair(const EvalPair& p) {
  require(!p.predictions.empty(), "evaluation pair has no predictions");
  require(!p.ground_truth.empty(), "evaluation pair has no ground truth");
}

inline void check_pairs(std::span<const EvalPair> pairs) {
  require(!pairs.empty(), "no queries to evaluate");
  for (const auto& p : pairs) check_pair(p);
}

/// Per-prediction true-positive flags under greedy rank-order matching.
inline std::vector<bool> match_greedy(const EvalPair& pair, double tau) {
  std::vector<bool> used(pair.ground_truth.size(), false);
  std::vector<bool> tp(pair.predictions.size(), false);
  for (std::size_t r = 0; r < pair.predictions.size(); ++r) {
    double best = -1.0;
    std::size_t best_g = 0;
    for (std::size_t g = 0; g < pair.ground_truth.size(); ++g) {
      if (used[g]) continue;
      const double iou = temporal_iou(pair.predictions[r], pair.ground_truth[g]);
      if (iou > best) {
        best = iou;
        best_g = g;
      }
    }
    if (best >= tau && best > 0.0) {
      used[best_g] = true;
      tp[r] = true;
    }
  }
  return tp;
}

}  // namespace metrics_detail

/// Whether any of the first k predictions reaches IoU >= tau with any GT.
inline bool hit_at_k(const EvalPair& pair, std::size_t k, double tau) {
  const std::size_t n = std::min(k, pair.predictions.size());
  for (std::size_t r = 0; r < n; ++r) {
    if (best_iou(pair.predictions[r], pair.ground_truth) >= tau) return true;
  }
  return false;
}

inline double recall_at_k(std::span<const EvalPair> pairs, std::size_t k, double tau) {
  require(k >= 1, "k must be >= 1");
  metrics_detail::check_pairs(pairs);
  std::size_t hits = 0;
  for (const auto& p : pairs) hits += hit_at_k(p, k, tau) ? 1 : 0;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(pairs.size());
}

inline double mean_iou(std::span<const EvalPair> pairs) {
  metrics_detail::check_pairs(pairs);
  double sum = 0.0;
  for (const auto& p : pairs) sum += best_iou(p.predictions.front(), p.ground_truth);
  return 100.0 * sum / static_cast<double>(pairs.size());
}

/// All-point AP of one ranked prediction list, in [0, 1].
inline double average_precision(const EvalPair& pair, double tau) {
  metrics_detail::check_pair(pair);
  auto tp = metrics_detail::match_greedy(pair, tau);
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < tp.size(); ++r) {
    if (!tp[r]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(r + 1);
  }
  return sum / static_cast<double>(pair.ground_truth.size());
}

/// AP over the pooled predictions of all queries, ranked by (position,
/// query order), against the pooled ground truth. Matching stays within
/// each query.
inline double corpus_average_precision(std::span<const EvalPair> pairs, double tau) {
  metrics_detail::check_pairs(pairs);
  std::vector<std::vector<bool>> tp;
  std::size_t max_rank = 0, total_gt = 0;
  for (const auto& p : pairs) {
    tp.push_back(metrics_detail::match_greedy(p, tau));
    max_rank = std::max(max_rank, p.predictions.size());
    total_gt += p.ground_truth.size();
  }
  double sum = 0.0;
  std::size_t seen = 0, hits = 0;
  for (std::size_t r = 0; r < max_rank; ++r) {
    for (const auto& flags : tp) {
      if (r >= flags.size()) continue;
      ++seen;
      if (flags[r]) {
        ++hits;
        sum += static_cast<double>(hits) / static_cast<double>(seen);
      }
    }
  }
  return sum / static_cast<double>(total_gt);
}

enum class MapProtocol { per_query, corpus };

inline MapProtocol parse_map_protocol(std::string_view s) {
  if (s == "per_query") return MapProtocol::per_query;
  if (s == "corpus") return MapProtocol::corpus;
  fail(Errc::invalid_argument, "unknown mAP protocol '" + std::string(s) + "'");
}

inline std::string_view to_string(MapProtocol p) { return p == MapProtocol::corpus ? "corpus" : "per_query"; }

struct EvalOptions {
  std::vector<double> taus_r1{0.5, 0.7};
  std::vector<double> taus_map{0.5, 0.75};
  MapProtocol map_protocol = MapProtocol::per_query;
};

/// Percentages in [0, 100], unrounded.
struct EvalReport {
  std::size_t n_queries = 0;
  std::map<double, double> r1;
  double miou = 0.0;
  std::map<double, double> map_at;
  MapProtocol map_protocol = MapProtocol::per_query;
};

/// Sums behind the per-query metrics. Merging is associative and
/// commutative, so shards can be reduced in any grouping.
class EvalAccumulator {
 public:
  explicit EvalAccumulator(const EvalOptions& opts = {}) {
    for (double t : opts.taus_r1) r1_hits_[t] = 0;
    for (double t : opts.taus_map) ap_sum_[t] = 0.0;
  }

  void add(const EvalPair& pair) {
    metrics_detail::check_pair(pair);
    ++n_;
    for (auto& [tau, hits] : r1_hits_) hits += hit_at_k(pair, 1, tau) ? 1 : 0;
    iou_sum_ += best_iou(pair.predictions.front(), pair.ground_truth);
    for (auto& [tau, sum] : ap_sum_) sum += average_precision(pair, tau);
  }

  void merge(const EvalAccumulator& other) {
    require(other.r1_hits_.size() == r1_hits_.size() && other.ap_sum_.size() == ap_sum_.size(),
            "cannot merge accumulators with different thresholds");
    n_ += other.n_;
    iou_sum_ += other.iou_sum_;
    for (auto& [tau, hits] : r1_hits_) hits += other.r1_hits_.at(tau);
    for (auto& [tau, sum] : ap_sum_) sum += other.ap_sum_.at(tau);
  }

  std::size_t size() const noexcept { return n_; }

  EvalReport report() const {
    require(n_ > 0, "no queries");
    const double n = static_cast<double>(n_);
    EvalReport r;
    r.n_queries = n_;
    r.miou = 100.0 * iou_sum_ / n;
    for (const auto& [tau, hits] : r1_hits_) r.r1[tau] = 100.0 * static_cast<double>(hits) / n;
    for (const auto& [tau, sum] : ap_sum_) r.map_at[tau] = 100.0 * sum / n;
    return r;
  }

 private:
  std::size_t n_ = 0;
  double iou_sum_ = 0.0;
  std::map<double, std::size_t> r1_hits_;
  std::map<double, double> ap_sum_;
};

inline EvalReport evaluate(std::span<const EvalPair> pairs, const EvalOptions& opts = {}) {
  metrics_detail::check_pairs(pairs);
  EvalAccumulator acc(opts);
  for (const auto& p : pairs) acc.add(p);
  EvalReport r = acc.report();
  r.map_protocol = opts.map_protocol;
  if (opts.map_protocol == MapProtocol::corpus) {
    for (auto& [tau, v] : r.map_at) v = 100.0 * corpus_average_precision(pairs, tau);
  }
  return r;
}

inline EvalReport evaluate(std::span<const EvalPair> pairs, std::span<const double> taus_r1,
                           std::span<const double> taus_map) {
  EvalOptions opts;
  opts.taus_r1.assign(taus_r1.begin(), taus_r1.end());
  opts.taus_map.assign(taus_map.begin(), taus_map.end());
  return evaluate(pairs, opts);
}

// ============================================================================
// Report serialization
// ============================================================================

/// Two decimals, halves rounded up.
inline double round_percent(double v) { return std::floor(v * 100.0 + 0.5 + 1e-9) / 100.0; }

inline std::string threshold_key(double tau) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), tau);
  return std::string(buf, ptr);
}

inline std::string conventions_text(MapProtocol protocol) {
  std::string s =
      "rank = list position (no confidence scores); R1 and mIoU use the top-1 prediction's best IoU over "
      "ground-truth moments; AP uses greedy rank-order matching to the highest-IoU unmatched ground truth, "
      "all-point, normalized by |GT|; ";
  s += protocol == MapProtocol::corpus ? "mAP is computed over the pooled corpus" : "mAP is per-query AP averaged over queries";
  s += "; percentages rounded half-up to two decimals";
  return s;
}

inline nlohmann::ordered_json report_to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["n_queries"] = r.n_queries;
  j["r1"] = nlohmann::ordered_json::object();
  for (const auto& [tau, v] : r.r1) j["r1"][threshold_key(tau)] = round_percent(v);
  j["miou"] = round_percent(r.miou);
  j["map"] = nlohmann::ordered_json::object();
  for (const auto& [tau, v] : r.map_at) j["map"][threshold_key(tau)] = round_percent(v);
  j["conventions"] = conventions_text(r.map_protocol);
  return j;
}

}  // namespace mrkit
