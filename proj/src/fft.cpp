#include "frnet/fft.hpp"

#include <cmath>
#include <numbers>

#include "frnet/error.hpp"

namespace frnet {

FftPlan::FftPlan(std::size_t n) : n_(n) {
  if (n == 0) throw ContractError("FFT length must be positive");
  std::size_t rest = n;
  for (std::size_t f : {4, 2, 3, 5}) {
    while (rest % f == 0) {
      factors_.push_back(f);
      rest /= f;
    }
  }
  for (std::size_t f = 7; f * f <= rest; f += 2) {
    while (rest % f == 0) {
      factors_.push_back(f);
      rest /= f;
    }
  }
  if (rest > 1) factors_.push_back(rest);

  twiddles_.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n);
    twiddles_[j] = {std::cos(angle), std::sin(angle)};
  }
}

void FftPlan::execute(std::span<std::complex<double>> data, bool inverse) const {
  if (data.size() != n_) throw ShapeError("FFT plan of length " + std::to_string(n_) + " applied to " +
                                          std::to_string(data.size()) + " samples");
  if (n_ == 1) return;
  std::vector<std::complex<double>> input(data.begin(), data.end());
  recurse(input.data(), 1, data.data(), n_, 0, inverse);
}

// Decimation in time: out[k + q m] = sum_r W_n^{r (k + q m)} Y_r[k], where Y_r
// is the length-m transform of the subsequence in[r], in[r + p], ...
void FftPlan::recurse(const std::complex<double>* in, std::size_t stride, std::complex<double>* out,
                      std::size_t n, std::size_t factor_index, bool inverse) const {
  if (n == 1) {
    out[0] = in[0];
    return;
  }
  const std::size_t p = factors_[factor_index];
  const std::size_t m = n / p;
  for (std::size_t r = 0; r < p; ++r) {
    recurse(in + r * stride, stride * p, out + r * m, m, factor_index + 1, inverse);
  }

  const std::size_t scale = n_ / n;  // W_n^j == W_N^{j * scale}
  auto twiddle = [&](std::size_t j) {
    const auto w = twiddles_[(j % n) * scale];
    return inverse ? std::conj(w) : w;
  };

  std::complex<double> tmp[8];
  std::vector<std::complex<double>> heap;
  std::complex<double>* t = tmp;
  if (p > 8) {
    heap.resize(p);
    t = heap.data();
  }

  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t r = 0; r < p; ++r) t[r] = out[r * m + k] * twiddle(r * k);
    if (p == 2) {
      out[k] = t[0] + t[1];
      out[k + m] = t[0] - t[1];
    } else if (p == 4) {
      const auto a = t[0] + t[2], b = t[0] - t[2];
      const auto c = t[1] + t[3];
      // -i (t1 - t3) forward, +i inverse
      const auto d = inverse ? std::complex<double>(-(t[1] - t[3]).imag(), (t[1] - t[3]).real())
                             : std::complex<double>((t[1] - t[3]).imag(), -(t[1] - t[3]).real());
      out[k] = a + c;
      out[k + m] = b + d;
      out[k + 2 * m] = a - c;
      out[k + 3 * m] = b - d;
    } else {
      // W_p^{rq} = W_n^{rq m}
      for (std::size_t q = 0; q < p; ++q) {
        std::complex<double> acc = t[0];
        for (std::size_t r = 1; r < p; ++r) acc += t[r] * twiddle((r * q % p) * m);
        out[k + q * m] = acc;
      }
    }
  }
}

namespace {

void transform_axes(ComplexVolume& v, bool inverse) {
  const auto& e = v.extents();
  const std::size_t extent[] = {e.depth, e.height, e.width};
  const std::size_t stride[] = {e.height * e.width, e.width, 1};
  for (int axis = 0; axis < 3; ++axis) {
    if (extent[axis] == 0) throw ContractError("FFT of a volume with a zero-extent axis");
  }
  std::vector<std::complex<double>> line;
  for (int axis = 2; axis >= 0; --axis) {
    const FftPlan plan(extent[axis]);
    line.resize(extent[axis]);
    const int a1 = axis == 0 ? 1 : 0;
    const int a2 = axis == 2 ? 1 : 2;
    for (std::size_t i = 0; i < extent[a1]; ++i) {
      for (std::size_t j = 0; j < extent[a2]; ++j) {
        const std::size_t base = i * stride[a1] + j * stride[a2];
        for (std::size_t k = 0; k < extent[axis]; ++k) line[k] = v[base + k * stride[axis]];
        plan.execute(line, inverse);
        for (std::size_t k = 0; k < extent[axis]; ++k) v[base + k * stride[axis]] = line[k];
      }
    }
  }
}

// Moves frequency f (stored at index f mod N) to index f + floor(N/2), or back.
ComplexVolume recenter(const ComplexVolume& v, bool to_centered) {
  const auto& e = v.extents();
  ComplexVolume out(e);
  auto shift = [to_centered](std::size_t i, std::size_t n) {
    const std::size_t h = n / 2;
    return to_centered ? (i + h) % n : (i + n - h) % n;
  };
  for (std::size_t z = 0; z < e.depth; ++z)
    for (std::size_t y = 0; y < e.height; ++y)
      for (std::size_t x = 0; x < e.width; ++x)
        out(shift(z, e.depth), shift(y, e.height), shift(x, e.width)) = v(z, y, x);
  return out;
}

}  // namespace

KSpaceVolume fft3d(const ComplexVolume& volume) {
  if (volume.extents().count() == 0) throw ContractError("FFT of a volume with a zero-extent axis");
  ComplexVolume work = volume;
  transform_axes(work, false);
  return {recenter(work, true)};
}

KSpaceVolume fft3d(const RealVolume& volume) {
  ComplexVolume c(volume.extents());
  for (std::size_t i = 0; i < volume.size(); ++i) c[i] = volume[i];
  return fft3d(c);
}

ComplexVolume ifft3d(const KSpaceVolume& kspace) {
  if (kspace.extents().count() == 0) throw ContractError("inverse FFT of a volume with a zero-extent axis");
  ComplexVolume work = recenter(kspace.data, false);
  transform_axes(work, true);
  const double scale = 1.0 / static_cast<double>(work.size());
  for (auto& v : work.values()) v *= scale;
  return work;
}

}  // namespace frnet
