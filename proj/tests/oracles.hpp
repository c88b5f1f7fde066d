#pragma once

// Direct, unoptimized reference implementations used as test oracles. None
// of these share code with the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "frnet/random.hpp"
#include "frnet/tensor.hpp"
#include "frnet/volume.hpp"

namespace oracle {

inline frnet::Tensor random_tensor(const frnet::Shape& shape, frnet::Rng& rng, double lo = -1.0, double hi = 1.0,
                                   bool requires_grad = true) {
  std::vector<double> v(frnet::shape_count(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return frnet::Tensor::from_data(shape, std::move(v), requires_grad);
}

// out[n,co,z,y,x] = b[co] + sum over ci,kd,kh,kw of in * w, zero padding.
inline std::vector<double> conv3d(const std::vector<double>& in, const frnet::Shape& is, const std::vector<double>& w,
                                  const frnet::Shape& ws, const std::vector<double>& b, std::size_t s,
                                  std::size_t p, frnet::Shape& os) {
  const std::size_t N = is[0], Ci = is[1], D = is[2], H = is[3], W = is[4];
  const std::size_t Co = ws[0], K0 = ws[2], K1 = ws[3], K2 = ws[4];
  const std::size_t Do = (D + 2 * p - K0) / s + 1, Ho = (H + 2 * p - K1) / s + 1, Wo = (W + 2 * p - K2) / s + 1;
  os = {N, Co, Do, Ho, Wo};
  std::vector<double> out(N * Co * Do * Ho * Wo);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t co = 0; co < Co; ++co)
      for (std::size_t z = 0; z < Do; ++z)
        for (std::size_t y = 0; y < Ho; ++y)
          for (std::size_t x = 0; x < Wo; ++x) {
            double acc = b[co];
            for (std::size_t ci = 0; ci < Ci; ++ci)
              for (std::size_t kd = 0; kd < K0; ++kd)
                for (std::size_t kh = 0; kh < K1; ++kh)
                  for (std::size_t kw = 0; kw < K2; ++kw) {
                    const long iz = long(z * s + kd) - long(p);
                    const long iy = long(y * s + kh) - long(p);
                    const long ix = long(x * s + kw) - long(p);
                    if (iz < 0 || iy < 0 || ix < 0 || iz >= long(D) || iy >= long(H) || ix >= long(W)) continue;
                    acc += in[(((n * Ci + ci) * D + iz) * H + iy) * W + ix] *
                           w[(((co * Ci + ci) * K0 + kd) * K1 + kh) * K2 + kw];
                  }
            out[(((n * Co + co) * Do + z) * Ho + y) * Wo + x] = acc;
          }
  return out;
}

// Scatter form: every input voxel paints a k^3 block of the output.
// Weight layout [Ci, Co, k, k, k].
inline std::vector<double> conv_transpose3d(const std::vector<double>& in, const frnet::Shape& is,
                                            const std::vector<double>& w, const frnet::Shape& ws,
                                            const std::vector<double>& b, std::size_t s, frnet::Shape& os) {
  const std::size_t N = is[0], Ci = is[1], D = is[2], H = is[3], W = is[4];
  const std::size_t Co = ws[1], K = ws[2];
  const std::size_t Do = (D - 1) * s + K, Ho = (H - 1) * s + K, Wo = (W - 1) * s + K;
  os = {N, Co, Do, Ho, Wo};
  std::vector<double> out(N * Co * Do * Ho * Wo);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t co = 0; co < Co; ++co)
      for (std::size_t i = 0; i < Do * Ho * Wo; ++i) out[(n * Co + co) * Do * Ho * Wo + i] = b[co];
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t ci = 0; ci < Ci; ++ci)
      for (std::size_t z = 0; z < D; ++z)
        for (std::size_t y = 0; y < H; ++y)
          for (std::size_t x = 0; x < W; ++x) {
            const double v = in[(((n * Ci + ci) * D + z) * H + y) * W + x];
            for (std::size_t co = 0; co < Co; ++co)
              for (std::size_t a = 0; a < K; ++a)
                for (std::size_t c = 0; c < K; ++c)
                  for (std::size_t e = 0; e < K; ++e)
                    out[(((n * Co + co) * Do + z * s + a) * Ho + y * s + c) * Wo + x * s + e] +=
                        v * w[(((ci * Co + co) * K + a) * K + c) * K + e];
          }
  return out;
}

inline double max_abs_diff(const std::vector<double>& a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Worst relative error between the tape gradient and a central finite
// difference, over every element of every leaf (or `max_probes` randomly
// chosen elements per leaf when set). Relative error uses max(|a|, |n|),
// floored at the finite-difference roundoff level of the loss so that
// vanishing components are compared against what the difference quotient can
// resolve: 64 ulps of |f| over the 2h step, scaled by the 1e-4 target.
inline double gradient_error(std::vector<frnet::Tensor> leaves, const std::function<frnet::Tensor()>& loss,
                             double h = 1e-5, std::size_t max_probes = 0, std::uint64_t probe_seed = 7) {
  for (auto& l : leaves) l.zero_grad();
  const auto f0 = loss();
  const double roundoff = 64 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(f0.item())) / (2 * h);
  const double floor = roundoff / 1e-4;
  f0.backward();
  std::vector<std::vector<double>> analytic;
  for (auto& l : leaves) {
    analytic.emplace_back(l.numel(), 0.0);
    if (l.has_grad()) std::copy(l.grad().begin(), l.grad().end(), analytic.back().begin());
  }
  frnet::NoGradGuard no_grad;
  frnet::Rng rng(probe_seed);
  double worst = 0.0;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    auto data = leaves[li].mutable_data();
    std::vector<std::size_t> idx;
    if (max_probes == 0 || max_probes >= data.size()) {
      for (std::size_t i = 0; i < data.size(); ++i) idx.push_back(i);
    } else {
      for (std::size_t i = 0; i < max_probes; ++i) idx.push_back(rng.below(data.size()));
    }
    for (std::size_t i : idx) {
      const double orig = data[i];
      data[i] = orig + h;
      const double fp = loss().item();
      data[i] = orig - h;
      const double fm = loss().item();
      data[i] = orig;
      const double numeric = (fp - fm) / (2 * h);
      const double a = analytic[li][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  for (auto& l : leaves) l.zero_grad();
  return worst;
}

// Random weights so the upstream gradient of a non-scalar op is generic.
inline std::vector<double> random_weights(std::size_t n, frnet::Rng& rng) {
  std::vector<double> w(n);
  for (auto& x : w) x = rng.uniform(-1.0, 1.0);
  return w;
}

inline frnet::LabelVolume random_labels(frnet::Extents e, frnet::Rng& rng) {
  frnet::LabelVolume v(e);
  for (auto& x : v.values()) x = static_cast<std::uint8_t>(rng.below(2));
  return v;
}

}  // namespace oracle
