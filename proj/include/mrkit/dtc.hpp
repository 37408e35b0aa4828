// SPDX-License-Identifier: Apache-2.0
//
// Dynamic token compression for non-key frames, and projection of every
// frame's token block into the language-model embedding space.

#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mrkit/core.hpp"
#include "mrkit/ifs.hpp"
#include "mrkit/random.hpp"

namespace mrkit {

enum class CompressionMethod { none, average_pooling, variance_select };

inline std::string_view to_string(CompressionMethod m) {
  switch (m) {
    case CompressionMethod::none: return "none";
    case CompressionMethod::average_pooling: return "avgpool";
    case CompressionMethod::variance_select: return "variance";
  }
  return "none";
}

inline CompressionMethod parse_compression_method(std::string_view s) {
  if (s == "none") return CompressionMethod::none;
  if (s == "avgpool" || s == "average_pooling") return CompressionMethod::average_pooling;
  if (s == "variance" || s == "variance_select") return CompressionMethod::variance_select;
  fail(Errc::invalid_argument, "unknown compression method '" + std::string(s) + "'");
}

struct CompressionConfig {
  CompressionMethod method = CompressionMethod::variance_select;
  std::size_t target_tokens = 16;  // variance_select: kept queries; avgpool: 0 or ceil(Q / window)
  std::size_t pool_window = 2;

  /// Tokens each non-key frame carries after compression, for Q input queries.
  std::size_t tokens_per_nonkey(std::size_t n_queries) const {
    switch (method) {
      case CompressionMethod::none: return n_queries;
      case CompressionMethod::average_pooling: return (n_queries + pool_window - 1) / pool_window;
      case CompressionMethod::variance_select: return target_tokens;
    }
    return n_queries;
  }

  void validate(std::size_t n_queries) const {
    switch (method) {
      case CompressionMethod::none: break;
      case CompressionMethod::average_pooling:
        require(pool_window >= 1, "pool window must be >= 1");
        require(target_tokens == 0 || target_tokens == tokens_per_nonkey(n_queries),
                "average pooling yields ceil(Q / window) tokens; target_tokens disagrees");
        break;
      case CompressionMethod::variance_select:
        require(target_tokens >= 1 && target_tokens <= n_queries, "target tokens must lie in [1, Q]");
        break;
    }
  }
};

/// m x dim block of token embeddings.
struct TokenBlock {
  std::size_t tokens = 0;
  std::size_t dim = 0;
  std::vector<double> data;

  std::span<const double> token(std::size_t j) const {
    return std::span<const double>(data).subspan(j * dim, dim);
  }
  friend bool operator==(const TokenBlock&, const TokenBlock&) = default;
};

template <class Tag>
TokenBlock block_of(const Tensor3<Tag>& t, std::size_t frame) {
  auto slab = t.frame(frame);
  return TokenBlock{t.rows(), t.dim(), std::vector<double>(slab.begin(), slab.end())};
}

/// Mean of each run of `window` consecutive tokens; a short trailing run is
/// averaged over what it has.
inline TokenBlock average_pool(const TokenBlock& in, std::size_t window) {
  require(window >= 1, "pool window must be >= 1");
  require(in.tokens >= 1, "cannot pool an empty block");
  TokenBlock out{(in.tokens + window - 1) / window, in.dim, {}};
  out.data.assign(out.tokens * in.dim, 0.0);
  for (std::size_t j = 0; j < out.tokens; ++j) {
    const std::size_t lo = j * window;
    const std::size_t hi = std::min(lo + window, in.tokens);
    for (std::size_t t = lo; t < hi; ++t) {
      auto row = in.token(t);
      for (std::size_t c = 0; c < in.dim; ++c) out.data[j * in.dim + c] += row[c];
    }
    for (std::size_t c = 0; c < in.dim; ++c) out.data[j * in.dim + c] /= static_cast<double>(hi - lo);
  }
  return out;
}

/// Average-pool into exactly `bins` contiguous groups; group j covers tokens
/// [floor(j*m/bins), floor((j+1)*m/bins)). Matches average_pool whenever m
/// is a multiple of bins.
inline TokenBlock average_pool_to(const TokenBlock& in, std::size_t bins) {
  require(bins >= 1 && bins <= in.tokens, "bin count must lie in [1, tokens]");
  TokenBlock out{bins, in.dim, std::vector<double>(bins * in.dim, 0.0)};
  for (std::size_t j = 0; j < bins; ++j) {
    const std::size_t lo = j * in.tokens / bins;
    const std::size_t hi = (j + 1) * in.tokens / bins;
    for (std::size_t t = lo; t < hi; ++t) {
      auto row = in.token(t);
      for (std::size_t c = 0; c < in.dim; ++c) out.data[j * in.dim + c] += row[c];
    }
    for (std::size_t c = 0; c < in.dim; ++c) out.data[j * in.dim + c] /= static_cast<double>(hi - lo);
  }
  return out;
}

/// Per-query variance across frames: population variance of every
/// dimension over the frames, averaged over dimensions.
inline std::vector<double> query_variances(const QueryTensor& nonkey) {
  require(nonkey.n_frames() >= 2, "query variance needs at least 2 frames");
  const std::size_t n = nonkey.n_frames(), q = nonkey.rows(), dim = nonkey.dim();
  std::vector<double> out(q, 0.0);
  for (std::size_t qi = 0; qi < q; ++qi) {
    double acc = 0.0;
    for (std::size_t c = 0; c < dim; ++c) {
      double mean = 0.0;
      for (std::size_t f = 0; f < n; ++f) mean += nonkey.at(f, qi, c);
      mean /= static_cast<double>(n);
      double ss = 0.0;
      for (std::size_t f = 0; f < n; ++f) {
        const double dev = nonkey.at(f, qi, c) - mean;
        ss += dev * dev;
      }
      acc += ss / static_cast<double>(n);
    }
    out[qi] = acc / static_cast<double>(dim);
  }
  return out;
}

/// Indices of the t largest values, ties toward the lower index, returned
/// in ascending index order.
inline std::vector<std::size_t> top_indices(std::span<const double> values, std::size_t t) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  order.resize(t);
  std::sort(order.begin(), order.end());
  return order;
}

struct VarianceSelection {
  QueryTensor kept;
  std::vector<std::size_t> kept_query_indices;
};

inline VarianceSelection variance_select(const QueryTensor& nonkey, std::size_t t) {
  require(t >= 1 && t <= nonkey.rows(), "kept query count must lie in [1, Q]");
  auto variances = query_variances(nonkey);
  auto kept_idx = top_indices(variances, t);
  std::vector<double> data;
  data.reserve(nonkey.n_frames() * t * nonkey.dim());
  for (std::size_t f = 0; f < nonkey.n_frames(); ++f) {
    for (std::size_t qi : kept_idx) {
      for (std::size_t c = 0; c < nonkey.dim(); ++c) data.push_back(nonkey.at(f, qi, c));
    }
  }
  return {QueryTensor(nonkey.n_frames(), t, nonkey.dim(), std::move(data)), std::move(kept_idx)};
}

// ============================================================================
// Projection into the language space
// ============================================================================

/// A pure per-token map from in_dim to out_dim.
class Projector {
 public:
  using Fn = std::function<void(std::span<const double>, std::span<double>)>;

  Projector(std::size_t in_dim, std::size_t out_dim, Fn fn) : in_(in_dim), out_(out_dim), fn_(std::move(fn)) {
    require(in_ >= 1 && out_ >= 1, "projector dimensions must be >= 1");
  }

  static Projector identity(std::size_t dim) {
    return Projector(dim, dim, [](std::span<const double> in, std::span<double> out) {
      std::copy(in.begin(), in.end(), out.begin());
    });
  }

  /// `weights` is out_dim x in_dim, row-major.
  static Projector linear(std::size_t in_dim, std::size_t out_dim, std::vector<double> weights) {
    require(weights.size() == in_dim * out_dim, "projector weight matrix has the wrong size");
    return Projector(in_dim, out_dim, [w = std::move(weights), in_dim, out_dim](std::span<const double> in, std::span<double> out) {
      for (std::size_t r = 0; r < out_dim; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < in_dim; ++c) acc += w[r * in_dim + c] * in[c];
        out[r] = acc;
      }
    });
  }

  /// Dense linear map with N(0, 1/in_dim) weights drawn from a seeded mt19937_64.
  static Projector seeded_linear(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed) {
    rng::Engine e(seed);
    std::vector<double> w(in_dim * out_dim);
    const double scale = 1.0 / std::sqrt(static_cast<double>(in_dim));
    for (double& v : w) v = scale * rng::normal(e);
    return linear(in_dim, out_dim, std::move(w));
  }

  std::size_t in_dim() const noexcept { return in_; }
  std::size_t out_dim() const noexcept { return out_; }

  TokenBlock apply(const TokenBlock& block) const {
    if (block.dim != in_)
      fail(Errc::invalid_argument, "projector expects dim " + std::to_string(in_) + ", got " + std::to_string(block.dim));
    TokenBlock out{block.tokens, out_, std::vector<double>(block.tokens * out_, 0.0)};
    for (std::size_t j = 0; j < block.tokens; ++j)
      fn_(block.token(j), std::span<double>(out.data).subspan(j * out_, out_));
    return out;
  }

 private:
  std::size_t in_;
  std::size_t out_;
  Fn fn_;
};

/// Per-frame language-space token blocks in video order.
struct LanguageSequence {
  std::vector<TokenBlock> per_frame;
  std::vector<bool> key_mask;
  std::vector<std::size_t> kept_query_indices;  // variance_select only

  std::size_t n_frames() const noexcept { return per_frame.size(); }
  std::size_t total_tokens() const {
    std::size_t total = 0;
    for (const auto& b : per_frame) total += b.tokens;
    return total;
  }
  std::vector<std::size_t> tokens_per_frame() const {
    std::vector<std::size_t> out;
    out.reserve(per_frame.size());
    for (const auto& b : per_frame) out.push_back(b.tokens);
    return out;
  }
};

/// Compress the non-key blocks per `cfg`, project every block, and restore
/// video order from `split`. `key` and `nonkey` hold the frames listed in
/// split.key_indices / split.nonkey_indices, in that order.
inline LanguageSequence compress_and_project(const QueryTensor& key, const std::optional<QueryTensor>& nonkey,
                                             const FrameSplit& split, const CompressionConfig& cfg,
                                             const Projector& projector) {
  const std::size_t n_nonkey = nonkey ? nonkey->n_frames() : 0;
  require(key.n_frames() == split.key_indices.size(), "key tensor does not match the split");
  require(n_nonkey == split.nonkey_indices.size(), "non-key tensor does not match the split");
  const std::size_t q = key.rows();
  if (nonkey) require(nonkey->rows() == q && nonkey->dim() == key.dim(), "key and non-key tensors disagree on shape");
  if (projector.in_dim() != key.dim())
    fail(Errc::invalid_argument, "projector input dim " + std::to_string(projector.in_dim()) +
                                     " does not match embedding dim " + std::to_string(key.dim()));
  cfg.validate(q);

  const std::size_t n = key.n_frames() + n_nonkey;
  LanguageSequence out;
  out.per_frame.resize(n);
  out.key_mask.assign(n, false);

  for (std::size_t j = 0; j < key.n_frames(); ++j) {
    const std::size_t at = split.key_indices[j];
    require(at < n, "split index out of range");
    out.per_frame[at] = projector.apply(block_of(key, j));
    out.key_mask[at] = true;
  }
  if (!nonkey) return out;

  std::vector<TokenBlock> compressed;
  compressed.reserve(n_nonkey);
  switch (cfg.method) {
    case CompressionMethod::none:
      for (std::size_t j = 0; j < n_nonkey; ++j) compressed.push_back(block_of(*nonkey, j));
      break;
    case CompressionMethod::average_pooling:
      for (std::size_t j = 0; j < n_nonkey; ++j) compressed.push_back(average_pool(block_of(*nonkey, j), cfg.pool_window));
      break;
    case CompressionMethod::variance_select:
      if (n_nonkey >= 2) {
        auto sel = variance_select(*nonkey, cfg.target_tokens);
        for (std::size_t j = 0; j < n_nonkey; ++j) compressed.push_back(block_of(sel.kept, j));
        out.kept_query_indices = std::move(sel.kept_query_indices);
      } else {
        // Variance is undefined for one frame; pool down to the same token count.
        compressed.push_back(average_pool_to(block_of(*nonkey, 0), cfg.target_tokens));
      }
      break;
  }

  for (std::size_t j = 0; j < n_nonkey; ++j) {
    const std::size_t at = split.nonkey_indices[j];
    require(at < n && !out.key_mask[at], "split index out of range or duplicated");
    out.per_frame[at] = projector.apply(compressed[j]);
  }
  return out;
}

/// Convenience form taking the full per-frame tensor.
inline LanguageSequence compress_and_project(const QueryTensor& all, const FrameSplit& split,
                                             const CompressionConfig& cfg, const Projector& projector) {
  require(split.key_indices.size() + split.nonkey_indices.size() == all.n_frames(), "split does not cover the tensor");
  auto key = gather_frames(all, split.key_indices);
  require(key.has_value(), "split has no key frames");
  return compress_and_project(*key, gather_frames(all, split.nonkey_indices), split, cfg, projector);
}

}  // namespace mrkit
