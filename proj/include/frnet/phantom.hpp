#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "frnet/manifest.hpp"
#include "frnet/volume.hpp"

namespace frnet {

struct PhantomParams {
  std::size_t extent = 32;
  // Brain ellipsoid semi-axes (depth, height, width) as fractions of extent.
  std::array<double, 3> semi_axes{0.3, 0.3, 0.3};
  // Centre offset from the grid centre, in voxels.
  std::array<double, 3> center_offset{0.0, 0.0, 0.0};
  // Dark gap between brain and skull, and the skull shell itself, in voxels.
  double rim_thickness = 2.0;
  double skull_thickness = 2.0;
  double background_intensity = 0.1;
  double brain_intensity = 0.6;
  double skull_intensity = 1.0;
  // 1 = uniform brain; smaller values pull the brain, most strongly near its
  // surface, towards the background intensity.
  double contrast = 1.0;
  double noise_std = 0.0;
  // Multiplicative field in [1 - amplitude, 1 + amplitude].
  double bias_amplitude = 0.0;
  std::uint64_t seed = 0;

  // Throws ConfigError for shells leaving the grid or invalid intensities.
  void validate() const;
};

struct Phantom {
  RealVolume volume;
  LabelVolume mask;
};

Phantom generate_phantom(const PhantomParams& params);

// Parameter ranges for one group tag; each phantom samples uniformly within.
struct PhantomFamily {
  std::string name;
  std::array<double, 2> semi_axis{0.28, 0.32};
  std::array<double, 2> contrast{0.9, 1.0};
  double rim_thickness = 2.0;
  double skull_thickness = 2.0;
  double noise_std = 0.03;
  double bias_amplitude = 0.1;
  double max_center_offset = 1.0;
};

// Built-in families: "large", "small", "low-contrast", "thin-rim".
const std::vector<PhantomFamily>& phantom_families();
const PhantomFamily& phantom_family(const std::string& name);
// "4" selects the first four built-ins; otherwise a comma-separated name list.
std::vector<PhantomFamily> parse_groups(const std::string& spec);

PhantomParams sample_phantom_params(const PhantomFamily& family, std::size_t extent, std::uint64_t seed);

// Writes `count` phantoms spread round-robin over the families plus
// manifest.json into out_dir. Returns the manifest (unsplit).
DatasetManifest generate_dataset(const std::vector<PhantomFamily>& families, std::size_t count, std::size_t extent,
                                 std::uint64_t seed, const std::filesystem::path& out_dir);

// One of the 48 axis permutations/flips of the cube combined with an
// isotropic scale about the centre.
struct GeometricTransform {
  std::array<int, 3> permutation{0, 1, 2};  // output axis a reads input axis permutation[a]
  std::array<bool, 3> flip{false, false, false};
  double scale = 1.0;

  static GeometricTransform symmetry(int index, double scale = 1.0);
  bool is_identity() const;
};

struct AugmentOptions {
  bool reorient = true;
  bool resize = true;
  double scale_min = 0.9;
  double scale_max = 1.1;
};

GeometricTransform draw_transform(std::uint64_t seed, const AugmentOptions& options = {});

// Trilinear resampling, clamped to the edge.
RealVolume transform_volume(const RealVolume& volume, const GeometricTransform& t);
// Nearest-neighbour resampling, zero outside.
LabelVolume transform_mask(const LabelVolume& mask, const GeometricTransform& t);

// Shared random transform applied to both; requires cubic extents.
Phantom augment(const RealVolume& volume, const LabelVolume& mask, std::uint64_t seed,
                const AugmentOptions& options = {});

}  // namespace frnet
