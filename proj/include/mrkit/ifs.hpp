// SPDX-License-Identifier: Apache-2.0
//
// Informative frame selection: score each frame by how much it differs from
// its predecessor, smooth the scores, and keep the top-k frames as key frames.

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "mrkit/core.hpp"

namespace mrkit {

struct ChangeProfile {
  std::vector<double> raw;       // d, with raw[0] = max(raw[1..])
  std::vector<double> smoothed;  // d-hat
  double sigma = 0.0;
};

struct FrameSplit {
  std::vector<std::size_t> key_indices;
  std::vector<std::size_t> nonkey_indices;
  std::size_t k = 0;

  friend bool operator==(const FrameSplit&, const FrameSplit&) = default;
};

struct IfsResult {
  FrameSplit split;
  ChangeProfile profile;
};

inline constexpr double kDefaultSigma = 1.0;

/// Row i holds f[i] - f[i-1]; row 0 is zero.
inline FrameTensor frame_deltas(const FrameTensor& f) {
  require(f.n_frames() >= 2, "frame_deltas needs at least 2 frames");
  const std::size_t slab = f.frame_size();
  std::vector<double> out(f.data().size(), 0.0);
  auto in = f.data();
  for (std::size_t i = 1; i < f.n_frames(); ++i) {
    for (std::size_t j = 0; j < slab; ++j) out[i * slab + j] = in[i * slab + j] - in[(i - 1) * slab + j];
  }
  return FrameTensor(f.n_frames(), f.rows(), f.dim(), std::move(out));
}

/// Frobenius norm of every delta slab; entry 0 is the max of the others.
inline std::vector<double> change_norms(const FrameTensor& deltas) {
  std::vector<double> d(deltas.n_frames(), 0.0);
  for (std::size_t i = 1; i < d.size(); ++i) {
    double ss = 0.0;
    for (double v : deltas.frame(i)) ss += v * v;
    d[i] = std::sqrt(ss);
  }
  if (d.size() > 1) d[0] = *std::max_element(d.begin() + 1, d.end());
  return d;
}

/// Sampled Gaussian truncated at radius ceil(3 sigma) and renormalized.
/// sigma = 0 gives the unit impulse.
inline std::vector<double> gaussian_kernel(double sigma) {
  require(std::isfinite(sigma) && sigma >= 0.0, "sigma must be >= 0");
  if (sigma == 0.0) return {1.0};
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> w(static_cast<std::size_t>(2 * radius + 1));
  for (std::ptrdiff_t x = -radius; x <= radius; ++x)
    w[static_cast<std::size_t>(x + radius)] = std::exp(-0.5 * (x / sigma) * (x / sigma));
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= total;
  return w;
}

/// Index into [0, n) under half-sample symmetric reflection
/// (... c b a | a b c | c b a ...), valid for any offset.
inline std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  const auto period = static_cast<std::ptrdiff_t>(2 * n);
  std::ptrdiff_t m = i % period;
  if (m < 0) m += period;
  if (m >= static_cast<std::ptrdiff_t>(n)) m = period - 1 - m;
  return static_cast<std::size_t>(m);
}

/// Convolve `x` with a centered odd-length kernel using reflect padding.
inline std::vector<double> convolve_reflect(std::span<const double> x, std::span<const double> kernel) {
  const auto radius = static_cast<std::ptrdiff_t>(kernel.size() / 2);
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    double acc = 0.0;
    for (std::ptrdiff_t o = -radius; o <= radius; ++o)
      acc += kernel[static_cast<std::size_t>(o + radius)] * x[reflect_index(static_cast<std::ptrdiff_t>(i) + o, x.size())];
    out[i] = acc;
  }
  return out;
}

/// Gaussian-smooth entries 1..N-1; entry 0 passes through untouched.
inline std::vector<double> gaussian_smooth(std::span<const double> d, double sigma) {
  auto kernel = gaussian_kernel(sigma);
  std::vector<double> out(d.begin(), d.end());
  if (d.size() <= 1 || sigma == 0.0) return out;
  auto tail = convolve_reflect(d.subspan(1), kernel);
  std::copy(tail.begin(), tail.end(), out.begin() + 1);
  return out;
}

inline ChangeProfile change_profile(const FrameTensor& f, double sigma) {
  ChangeProfile p;
  p.sigma = sigma;
  p.raw = change_norms(frame_deltas(f));
  p.smoothed = gaussian_smooth(p.raw, sigma);
  // A normalized kernel cannot lift a value above the max; clip the ulp of
  // rounding that the convolution can add so frame 0 stays on top.
  for (std::size_t i = 1; i < p.smoothed.size(); ++i) p.smoothed[i] = std::min(p.smoothed[i], p.smoothed[0]);
  return p;
}

/// Top-k frames by smoothed score, ties toward the lower index.
inline FrameSplit select_key_frames(const ChangeProfile& profile, std::size_t k) {
  const auto& s = profile.smoothed;
  require(k >= 1 && k <= s.size(), "k must lie in [1, N]");
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });

  FrameSplit split;
  split.k = k;
  split.key_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  split.nonkey_indices.assign(order.begin() + static_cast<std::ptrdiff_t>(k), order.end());
  std::sort(split.key_indices.begin(), split.key_indices.end());
  std::sort(split.nonkey_indices.begin(), split.nonkey_indices.end());
  return split;
}

inline IfsResult run_ifs(const FrameTensor& f, double sigma, std::size_t k) {
  IfsResult r;
  r.profile = change_profile(f, sigma);
  r.split = select_key_frames(r.profile, k);
  return r;
}

}  // namespace mrkit
