#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "frnet/error.hpp"

namespace frnet {

struct Extents {
  std::size_t depth = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t count() const { return depth * height * width; }
  bool is_cube() const { return depth == height && height == width; }
  bool operator==(const Extents&) const = default;

  std::string to_string() const {
    return std::to_string(depth) + "x" + std::to_string(height) + "x" + std::to_string(width);
  }
};

// Dense D x H x W grid, last axis fastest.
template <class T>
class Volume {
 public:
  using value_type = T;

  Volume() = default;
  explicit Volume(Extents extents, T fill = T{})
      : extents_(extents), values_(extents.count(), fill) {}
  Volume(Extents extents, std::vector<T> values) : extents_(extents), values_(std::move(values)) {
    if (values_.size() != extents_.count()) {
      throw ShapeError("volume " + extents_.to_string() + " needs " +
                       std::to_string(extents_.count()) + " values, got " +
                       std::to_string(values_.size()));
    }
  }

  const Extents& extents() const { return extents_; }
  std::size_t size() const { return values_.size(); }

  std::size_t index(std::size_t z, std::size_t y, std::size_t x) const {
    return (z * extents_.height + y) * extents_.width + x;
  }
  T& operator()(std::size_t z, std::size_t y, std::size_t x) { return values_[index(z, y, x)]; }
  const T& operator()(std::size_t z, std::size_t y, std::size_t x) const {
    return values_[index(z, y, x)];
  }
  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }

  std::vector<T>& values() { return values_; }
  const std::vector<T>& values() const { return values_; }

  bool operator==(const Volume&) const = default;

 private:
  Extents extents_;
  std::vector<T> values_;
};

using RealVolume = Volume<double>;
using ComplexVolume = Volume<std::complex<double>>;
// Class labels; 0 = non-brain, 1 = brain.
using LabelVolume = Volume<std::uint8_t>;
// Boundary weight map B; nonnegative.
using DensityMap = Volume<double>;

inline void require_same_extents(const Extents& a, const Extents& b, const char* what) {
  if (!(a == b)) {
    throw ShapeError(std::string(what) + ": extents " + a.to_string() + " vs " + b.to_string());
  }
}

// Throws ContractError when any label exceeds 1.
void require_binary(const LabelVolume& mask, const char* what);

}  // namespace frnet
