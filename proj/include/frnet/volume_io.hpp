#pragma once

#include <cstdint>
#include <filesystem>
#include <variant>

#include "frnet/volume.hpp"

namespace frnet {

// On-disk volume layout, all fields little-endian:
//   bytes 0..3   magic "FRV1"
//   bytes 4..15  depth, height, width as uint32
//   bytes 16..19 dtype code as uint32
//   payload      product(extents) values, last axis fastest
enum class DType : std::uint32_t {
  real64 = 1,   // float64
  uint8 = 2,    // labels
  complex = 3,  // (float64 re, float64 im) pairs
};

inline constexpr std::size_t kVolumeHeaderBytes = 20;

std::size_t dtype_size(DType dtype);
const char* dtype_name(DType dtype);

using AnyVolume = std::variant<RealVolume, LabelVolume, ComplexVolume>;

struct VolumeHeader {
  Extents extents;
  DType dtype;
};

// Writes go to a temp file that is renamed into place.
void write_volume(const std::filesystem::path& path, const RealVolume& volume);
void write_volume(const std::filesystem::path& path, const LabelVolume& volume);
void write_volume(const std::filesystem::path& path, const ComplexVolume& volume);

VolumeHeader read_volume_header(const std::filesystem::path& path);
AnyVolume read_volume(const std::filesystem::path& path);
RealVolume read_real_volume(const std::filesystem::path& path);
LabelVolume read_label_volume(const std::filesystem::path& path);
// Label volume whose values must all be 0 or 1.
LabelVolume read_binary_mask(const std::filesystem::path& path);
ComplexVolume read_complex_volume(const std::filesystem::path& path);

}  // namespace frnet
