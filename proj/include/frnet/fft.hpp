#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "frnet/volume.hpp"

namespace frnet {

// Mixed-radix Cooley-Tukey DFT for arbitrary lengths. Each prime factor p is
// handled by a direct p-point butterfly, so cost is O(n * sum of factors).
class FftPlan {
 public:
  explicit FftPlan(std::size_t n);

  std::size_t size() const { return n_; }
  // Unnormalized transform in place; `inverse` flips the exponent sign.
  void execute(std::span<std::complex<double>> data, bool inverse) const;

 private:
  void recurse(const std::complex<double>* in, std::size_t stride, std::complex<double>* out, std::size_t n,
               std::size_t factor_index, bool inverse) const;

  std::size_t n_;
  std::vector<std::size_t> factors_;
  std::vector<std::complex<double>> twiddles_;  // exp(-2 pi i j / n)
};

// k-space with centered coordinates: index m on an axis of extent N holds the
// frequency (m - N/2), i.e. k = 2 pi (m - floor(N/2)) / N.
struct KSpaceVolume {
  ComplexVolume data;

  const Extents& extents() const { return data.extents(); }
};

inline double centered_frequency(std::size_t index, std::size_t extent) {
  return 2.0 * 3.14159265358979323846 * (static_cast<double>(index) - static_cast<double>(extent / 2)) /
         static_cast<double>(extent);
}

KSpaceVolume fft3d(const RealVolume& volume);
KSpaceVolume fft3d(const ComplexVolume& volume);
// Inverse with 1/(D*H*W) normalization.
ComplexVolume ifft3d(const KSpaceVolume& kspace);

}  // namespace frnet
