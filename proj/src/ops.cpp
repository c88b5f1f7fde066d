#include <algorithm>
#include <cmath>
#include <string>

#include "frnet/error.hpp"
#include "frnet/tensor.hpp"

namespace frnet {
namespace {

constexpr const char* kAxisNames[] = {"batch", "channel", "depth", "height", "width"};

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(t.shape()));
  }
}

// Output positions o with 0 <= o*stride + tap - padding < extent.
struct TapRange {
  std::size_t lo = 0;
  std::size_t hi = 0;
};

TapRange tap_range(std::size_t extent, std::size_t out_extent, std::size_t tap, std::size_t stride,
                   std::size_t padding) {
  TapRange r;
  if (tap < padding) r.lo = (padding - tap + stride - 1) / stride;
  const long long last = static_cast<long long>(extent) - 1 + static_cast<long long>(padding) -
                         static_cast<long long>(tap);
  if (last < 0) return {0, 0};
  r.hi = std::min(out_extent, static_cast<std::size_t>(last) / stride + 1);
  if (r.hi < r.lo) r.hi = r.lo;
  return r;
}

struct ConvGeometry {
  std::size_t batch, in_ch, out_ch;
  std::size_t in[3];
  std::size_t out[3];
  std::size_t kernel[3];
  std::size_t stride, padding;

  std::size_t in_plane() const { return in[0] * in[1] * in[2]; }
  std::size_t out_plane() const { return out[0] * out[1] * out[2]; }
  std::size_t taps() const { return kernel[0] * kernel[1] * kernel[2]; }
};

ConvGeometry conv_geometry(const Tensor& input, const Tensor& weight, const Tensor& bias,
                           std::size_t stride, std::size_t padding) {
  require_rank(input, 5, "conv3d input");
  require_rank(weight, 5, "conv3d weight");
  require_rank(bias, 1, "conv3d bias");
  if (stride == 0) throw ConfigError("conv3d: stride must be positive");
  if (weight.dim(1) != input.dim(1)) {
    throw ShapeError("conv3d: channel axis mismatch, input has " + std::to_string(input.dim(1)) +
                     " channels but weight expects " + std::to_string(weight.dim(1)));
  }
  if (bias.dim(0) != weight.dim(0)) {
    throw ShapeError("conv3d: bias has " + std::to_string(bias.dim(0)) + " entries for " +
                     std::to_string(weight.dim(0)) + " output channels");
  }
  ConvGeometry g{};
  g.batch = input.dim(0);
  g.in_ch = input.dim(1);
  g.out_ch = weight.dim(0);
  g.stride = stride;
  g.padding = padding;
  for (int a = 0; a < 3; ++a) {
    g.in[a] = input.dim(2 + a);
    g.kernel[a] = weight.dim(2 + a);
    const std::size_t padded = g.in[a] + 2 * padding;
    if (padded < g.kernel[a]) {
      throw ConfigError(std::string("conv3d: kernel larger than padded ") + kAxisNames[2 + a] + " axis");
    }
    if ((padded - g.kernel[a]) % stride != 0) {
      throw ConfigError(std::string("conv3d: ") + kAxisNames[2 + a] + " extent " + std::to_string(g.in[a]) +
                        " with padding " + std::to_string(padding) + " is not divisible by stride " +
                        std::to_string(stride));
    }
    g.out[a] = (padded - g.kernel[a]) / stride + 1;
  }
  return g;
}

void conv_forward(const ConvGeometry& g, const double* in, const double* w, const double* b, double* out) {
  const std::size_t s = g.stride, p = g.padding;
  const std::size_t H = g.in[1], W = g.in[2];
  const std::size_t Ho = g.out[1], Wo = g.out[2];
  const std::size_t kh = g.kernel[1], kw = g.kernel[2];
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t co = 0; co < g.out_ch; ++co) {
      double* out_plane = out + (n * g.out_ch + co) * g.out_plane();
      std::fill(out_plane, out_plane + g.out_plane(), b[co]);
      for (std::size_t ci = 0; ci < g.in_ch; ++ci) {
        const double* in_plane = in + (n * g.in_ch + ci) * g.in_plane();
        const double* wk = w + (co * g.in_ch + ci) * g.taps();
        for (std::size_t a = 0; a < g.kernel[0]; ++a) {
          const TapRange zr = tap_range(g.in[0], g.out[0], a, s, p);
          for (std::size_t oz = zr.lo; oz < zr.hi; ++oz) {
            const std::size_t iz = oz * s + a - p;
            for (std::size_t bb = 0; bb < kh; ++bb) {
              const TapRange yr = tap_range(H, Ho, bb, s, p);
              for (std::size_t oy = yr.lo; oy < yr.hi; ++oy) {
                const std::size_t iy = oy * s + bb - p;
                double* orow = out_plane + (oz * Ho + oy) * Wo;
                const double* irow = in_plane + (iz * H + iy) * W;
                for (std::size_t c = 0; c < kw; ++c) {
                  const double wv = wk[(a * kh + bb) * kw + c];
                  const TapRange xr = tap_range(W, Wo, c, s, p);
                  if (s == 1) {
                    const double* src = irow + c - p;
                    for (std::size_t ox = xr.lo; ox < xr.hi; ++ox) orow[ox] += wv * src[ox];
                  } else {
                    for (std::size_t ox = xr.lo; ox < xr.hi; ++ox) orow[ox] += wv * irow[ox * s + c - p];
                  }
                }
              }
            }
          }
        }
      }
    }
  }
}

void conv_backward_input(const ConvGeometry& g, const double* w, const double* gout, double* gin) {
  const std::size_t s = g.stride, p = g.padding;
  const std::size_t H = g.in[1], W = g.in[2];
  const std::size_t Ho = g.out[1], Wo = g.out[2];
  const std::size_t kh = g.kernel[1], kw = g.kernel[2];
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t ci = 0; ci < g.in_ch; ++ci) {
      double* gin_plane = gin + (n * g.in_ch + ci) * g.in_plane();
      for (std::size_t co = 0; co < g.out_ch; ++co) {
        const double* gout_plane = gout + (n * g.out_ch + co) * g.out_plane();
        const double* wk = w + (co * g.in_ch + ci) * g.taps();
        for (std::size_t a = 0; a < g.kernel[0]; ++a) {
          const TapRange zr = tap_range(g.in[0], g.out[0], a, s, p);
          for (std::size_t oz = zr.lo; oz < zr.hi; ++oz) {
            const std::size_t iz = oz * s + a - p;
            for (std::size_t bb = 0; bb < kh; ++bb) {
              const TapRange yr = tap_range(H, Ho, bb, s, p);
              for (std::size_t oy = yr.lo; oy < yr.hi; ++oy) {
                const std::size_t iy = oy * s + bb - p;
                const double* grow = gout_plane + (oz * Ho + oy) * Wo;
                double* irow = gin_plane + (iz * H + iy) * W;
                for (std::size_t c = 0; c < kw; ++c) {
                  const double wv = wk[(a * kh + bb) * kw + c];
                  const TapRange xr = tap_range(W, Wo, c, s, p);
                  if (s == 1) {
                    double* dst = irow + c - p;
                    for (std::size_t ox = xr.lo; ox < xr.hi; ++ox) dst[ox] += wv * grow[ox];
                  } else {
                    for (std::size_t ox = xr.lo; ox < xr.hi; ++ox) irow[ox * s + c - p] += wv * grow[ox];
                  }
                }
              }
            }
          }
        }
      }
    }
  }
}

void conv_backward_weight(const ConvGeometry& g, const double* in, const double* gout, double* gw) {
  const std::size_t s = g.stride, p = g.padding;
  const std::size_t H = g.in[1], W = g.in[2];
  const std::size_t Ho = g.out[1], Wo = g.out[2];
  const std::size_t kh = g.kernel[1], kw = g.kernel[2];
  std::vector<double> acc(g.taps());
  for (std::size_t co = 0; co < g.out_ch; ++co) {
    for (std::size_t ci = 0; ci < g.in_ch; ++ci) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t n = 0; n < g.batch; ++n) {
        const double* in_plane = in + (n * g.in_ch + ci) * g.in_plane();
        const double* gout_plane = gout + (n * g.out_ch + co) * g.out_plane();
        for (std::size_t a = 0; a < g.kernel[0]; ++a) {
          const TapRange zr = tap_range(g.in[0], g.out[0], a, s, p);
          for (std::size_t oz = zr.lo; oz < zr.hi; ++oz) {
            const std::size_t iz = oz * s + a - p;
            for (std::size_t bb = 0; bb < kh; ++bb) {
              const TapRange yr = tap_range(H, Ho, bb, s, p);
              for (std::size_t oy = yr.lo; oy < yr.hi; ++oy) {
                const std::size_t iy = oy * s + bb - p;
                const double* grow = gout_plane + (oz * Ho + oy) * Wo;
                const double* irow = in_plane + (iz * H + iy) * W;
                for (std::size_t c = 0; c < kw; ++c) {
                  const TapRange xr = tap_range(W, Wo, c, s, p);
                  double dot = 0.0;
                  if (s == 1) {
                    const double* src = irow + c - p;
                    for (std::size_t ox = xr.lo; ox < xr.hi; ++ox) dot += grow[ox] * src[ox];
                  } else {
                    for (std::size_t ox = xr.lo; ox < xr.hi; ++ox) dot += grow[ox] * irow[ox * s + c - p];
                  }
                  acc[(a * kh + bb) * kw + c] += dot;
                }
              }
            }
          }
        }
      }
      double* dst = gw + (co * g.in_ch + ci) * g.taps();
      for (std::size_t t = 0; t < g.taps(); ++t) dst[t] += acc[t];
    }
  }
}

void bias_backward(std::size_t batch, std::size_t channels, std::size_t plane, const double* gout,
                   double* gb) {
  for (std::size_t c = 0; c < channels; ++c) {
    double total = 0.0;
    for (std::size_t n = 0; n < batch; ++n) {
      const double* src = gout + (n * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) total += src[i];
    }
    gb[c] += total;
  }
}

}  // namespace

Tensor conv3d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
  const ConvGeometry g = conv_geometry(input, weight, bias, stride, padding);
  const Shape out_shape{g.batch, g.out_ch, g.out[0], g.out[1], g.out[2]};
  std::vector<double> out(shape_count(out_shape));
  conv_forward(g, input.data().data(), weight.data().data(), bias.data().data(), out.data());

  return make_result(out_shape, std::move(out), {input, weight, bias},
                     [g, input, weight](std::span<const double> gout, std::span<const std::span<double>> gin) {
                       if (!gin[0].empty()) conv_backward_input(g, weight.data().data(), gout.data(), gin[0].data());
                       if (!gin[1].empty()) conv_backward_weight(g, input.data().data(), gout.data(), gin[1].data());
                       if (!gin[2].empty()) bias_backward(g.batch, g.out_ch, g.out_plane(), gout.data(), gin[2].data());
                     });
}

Tensor conv_transpose3d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride) {
  require_rank(input, 5, "conv_transpose3d input");
  require_rank(weight, 5, "conv_transpose3d weight");
  require_rank(bias, 1, "conv_transpose3d bias");
  if (stride == 0) throw ConfigError("conv_transpose3d: stride must be positive");
  if (weight.dim(0) != input.dim(1)) {
    throw ShapeError("conv_transpose3d: channel axis mismatch, input has " + std::to_string(input.dim(1)) +
                     " channels but weight expects " + std::to_string(weight.dim(0)));
  }
  for (std::size_t a = 2; a < 5; ++a) {
    if (weight.dim(a) != stride) {
      throw ConfigError("conv_transpose3d: only kernel extent == stride is supported (kernel " +
                        shape_string(weight.shape()) + ", stride " + std::to_string(stride) + ")");
    }
  }
  const std::size_t out_ch = weight.dim(1);
  if (bias.dim(0) != out_ch) {
    throw ShapeError("conv_transpose3d: bias has " + std::to_string(bias.dim(0)) + " entries for " +
                     std::to_string(out_ch) + " output channels");
  }
  const std::size_t N = input.dim(0), Ci = input.dim(1);
  const std::size_t D = input.dim(2), H = input.dim(3), W = input.dim(4);
  const std::size_t s = stride;
  const std::size_t Do = D * s, Ho = H * s, Wo = W * s;
  const std::size_t in_plane = D * H * W, out_plane = Do * Ho * Wo, taps = s * s * s;
  const Shape out_shape{N, out_ch, Do, Ho, Wo};

  std::vector<double> out(shape_count(out_shape));
  {
    const double* in = input.data().data();
    const double* w = weight.data().data();
    const double* b = bias.data().data();
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t co = 0; co < out_ch; ++co) {
        double* op = out.data() + (n * out_ch + co) * out_plane;
        std::fill(op, op + out_plane, b[co]);
        for (std::size_t ci = 0; ci < Ci; ++ci) {
          const double* ip = in + (n * Ci + ci) * in_plane;
          const double* wk = w + (ci * out_ch + co) * taps;
          for (std::size_t z = 0; z < D; ++z)
            for (std::size_t a = 0; a < s; ++a)
              for (std::size_t y = 0; y < H; ++y)
                for (std::size_t bb = 0; bb < s; ++bb) {
                  const double* irow = ip + (z * H + y) * W;
                  double* orow = op + ((z * s + a) * Ho + (y * s + bb)) * Wo;
                  for (std::size_t c = 0; c < s; ++c) {
                    const double wv = wk[(a * s + bb) * s + c];
                    for (std::size_t x = 0; x < W; ++x) orow[x * s + c] += wv * irow[x];
                  }
                }
        }
      }
    }
  }

  return make_result(
      out_shape, std::move(out), {input, weight, bias},
      [=](std::span<const double> gout, std::span<const std::span<double>> gin) {
        const double* in = input.data().data();
        const double* w = weight.data().data();
        for (std::size_t n = 0; n < N; ++n) {
          for (std::size_t ci = 0; ci < Ci; ++ci) {
            const double* ip = in + (n * Ci + ci) * in_plane;
            for (std::size_t co = 0; co < out_ch; ++co) {
              const double* gp = gout.data() + (n * out_ch + co) * out_plane;
              const double* wk = w + (ci * out_ch + co) * taps;
              double* gip = gin[0].empty() ? nullptr : gin[0].data() + (n * Ci + ci) * in_plane;
              double* gwk = gin[1].empty() ? nullptr : gin[1].data() + (ci * out_ch + co) * taps;
              for (std::size_t z = 0; z < D; ++z)
                for (std::size_t a = 0; a < s; ++a)
                  for (std::size_t y = 0; y < H; ++y)
                    for (std::size_t bb = 0; bb < s; ++bb) {
                      const double* grow = gp + ((z * s + a) * Ho + (y * s + bb)) * Wo;
                      const std::size_t row = (z * H + y) * W;
                      for (std::size_t c = 0; c < s; ++c) {
                        const std::size_t tap = (a * s + bb) * s + c;
                        if (gip) {
                          const double wv = wk[tap];
                          for (std::size_t x = 0; x < W; ++x) gip[row + x] += wv * grow[x * s + c];
                        }
                        if (gwk) {
                          double dot = 0.0;
                          for (std::size_t x = 0; x < W; ++x) dot += ip[row + x] * grow[x * s + c];
                          gwk[tap] += dot;
                        }
                      }
                    }
            }
          }
        }
        if (!gin[2].empty()) bias_backward(N, out_ch, out_plane, gout.data(), gin[2].data());
      });
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.data().begin(), x.data().end());
  for (auto& v : out) v = v < 0.0 ? 0.0 : v;  // NaN propagates
  return make_result(x.shape(), std::move(out), {x},
                     [x](std::span<const double> gout, std::span<const std::span<double>> gin) {
                       const auto xs = x.data();
                       for (std::size_t i = 0; i < gout.size(); ++i) {
                         if (xs[i] > 0.0) gin[0][i] += gout[i];
                       }
                     });
}

Tensor add(const Tensor& x, const Tensor& y) {
  if (x.shape() != y.shape()) {
    throw ShapeError("add: shapes " + shape_string(x.shape()) + " and " + shape_string(y.shape()) + " differ");
  }
  std::vector<double> out(x.numel());
  const auto xs = x.data(), ys = y.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xs[i] + ys[i];
  return make_result(x.shape(), std::move(out), {x, y},
                     [](std::span<const double> gout, std::span<const std::span<double>> gin) {
                       for (auto& g : gin) {
                         if (g.empty()) continue;
                         for (std::size_t i = 0; i < gout.size(); ++i) g[i] += gout[i];
                       }
                     });
}

Tensor concat_channels(const Tensor& x, const Tensor& y) {
  require_rank(x, 5, "concat_channels");
  require_rank(y, 5, "concat_channels");
  for (std::size_t a : {0, 2, 3, 4}) {
    if (x.dim(a) != y.dim(a)) {
      throw ShapeError(std::string("concat_channels: ") + kAxisNames[a] + " axis differs (" +
                       std::to_string(x.dim(a)) + " vs " + std::to_string(y.dim(a)) + ")");
    }
  }
  const std::size_t N = x.dim(0), cx = x.dim(1), cy = y.dim(1);
  const std::size_t plane = x.dim(2) * x.dim(3) * x.dim(4);
  const Shape shape{N, cx + cy, x.dim(2), x.dim(3), x.dim(4)};
  std::vector<double> out(shape_count(shape));
  for (std::size_t n = 0; n < N; ++n) {
    std::copy_n(x.data().data() + n * cx * plane, cx * plane, out.data() + n * (cx + cy) * plane);
    std::copy_n(y.data().data() + n * cy * plane, cy * plane, out.data() + (n * (cx + cy) + cx) * plane);
  }
  return make_result(shape, std::move(out), {x, y},
                     [=](std::span<const double> gout, std::span<const std::span<double>> gin) {
                       for (std::size_t n = 0; n < N; ++n) {
                         const double* src = gout.data() + n * (cx + cy) * plane;
                         if (!gin[0].empty()) {
                           double* dst = gin[0].data() + n * cx * plane;
                           for (std::size_t i = 0; i < cx * plane; ++i) dst[i] += src[i];
                         }
                         if (!gin[1].empty()) {
                           double* dst = gin[1].data() + n * cy * plane;
                           for (std::size_t i = 0; i < cy * plane; ++i) dst[i] += src[cx * plane + i];
                         }
                       }
                     });
}

Tensor softmax_channels(const Tensor& logits) {
  if (logits.rank() < 2) throw ShapeError("softmax_channels: rank must be >= 2");
  const std::size_t N = logits.dim(0), C = logits.dim(1);
  const std::size_t plane = logits.numel() / (N * C);
  const auto xs = logits.data();
  std::vector<double> out(xs.size());
  for (std::size_t n = 0; n < N; ++n) {
    const std::size_t base = n * C * plane;
    for (std::size_t v = 0; v < plane; ++v) {
      double peak = xs[base + v];
      for (std::size_t c = 1; c < C; ++c) peak = std::max(peak, xs[base + c * plane + v]);
      double total = 0.0;
      for (std::size_t c = 0; c < C; ++c) {
        const double e = std::exp(xs[base + c * plane + v] - peak);
        out[base + c * plane + v] = e;
        total += e;
      }
      for (std::size_t c = 0; c < C; ++c) out[base + c * plane + v] /= total;
    }
  }
  auto probs = std::make_shared<std::vector<double>>(out);
  return make_result(logits.shape(), std::move(out), {logits},
                     [=](std::span<const double> gout, std::span<const std::span<double>> gin) {
                       const auto& p = *probs;
                       for (std::size_t n = 0; n < N; ++n) {
                         const std::size_t base = n * C * plane;
                         for (std::size_t v = 0; v < plane; ++v) {
                           double inner = 0.0;
                           for (std::size_t c = 0; c < C; ++c) inner += gout[base + c * plane + v] * p[base + c * plane + v];
                           for (std::size_t c = 0; c < C; ++c) {
                             const std::size_t i = base + c * plane + v;
                             gin[0][i] += p[i] * (gout[i] - inner);
                           }
                         }
                       }
                     });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return make_result({1}, {total}, {x}, [](std::span<const double> gout, std::span<const std::span<double>> gin) {
    for (auto& g : gin[0]) g += gout[0];
  });
}

Tensor weighted_sum(const Tensor& x, std::span<const double> weights) {
  if (weights.size() != x.numel()) {
    throw ShapeError("weighted_sum: " + std::to_string(weights.size()) + " weights for " +
                     std::to_string(x.numel()) + " values");
  }
  double total = 0.0;
  const auto xs = x.data();
  for (std::size_t i = 0; i < xs.size(); ++i) total += weights[i] * xs[i];
  std::vector<double> w(weights.begin(), weights.end());
  return make_result({1}, {total}, {x},
                     [w = std::move(w)](std::span<const double> gout, std::span<const std::span<double>> gin) {
                       for (std::size_t i = 0; i < w.size(); ++i) gin[0][i] += gout[0] * w[i];
                     });
}

}  // namespace frnet
