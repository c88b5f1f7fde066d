#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "frnet/fft.hpp"
#include "frnet/volume.hpp"

namespace frnet {

struct DatasetManifest;

enum class Axis { x, y, z };

Axis parse_axis(const std::string& name);
std::string to_string(Axis axis);

struct ArtifactConfig {
  // Standard deviation of the per-line motion amounts, in voxels.
  double sigma = 0.0;
  std::uint64_t seed = 0;
  // Lines run along this axis; x is the fastest (width) axis.
  Axis readout = Axis::x;
};

// Multiplies every k-space line (samples sharing both phase-encode
// coordinates) by exp(i (k_a s_a + k_b s_b)), with s_a, s_b ~ N(0, sigma^2)
// drawn per line in row-major line order. The two phase-encode axes are
// taken in depth, height, width order skipping the readout axis.
void apply_motion_phase(KSpaceVolume& kspace, const ArtifactConfig& config);

// fft3d -> per-line phase shifts -> ifft3d, before the modulus.
ComplexVolume simulate_motion_complex(const RealVolume& volume, const ArtifactConfig& config);

// Magnitude image of simulate_motion_complex.
RealVolume simulate_motion(const RealVolume& volume, const ArtifactConfig& config);

// ||a - b|| / ||b||
double normalized_rms_deviation(const RealVolume& corrupted, const RealVolume& original);

struct CorruptionError {
  std::size_t entry;
  std::string message;
};

struct CorruptionResult {
  std::vector<CorruptionError> errors;
  std::size_t written = 0;
};

// Appends one corrupted copy of every original entry per sigma, written under
// `out_dir`, sharing the original's mask, group, and split. Unreadable
// entries are recorded and skipped.
CorruptionResult corrupt_dataset(DatasetManifest& manifest, const std::vector<double>& sigmas, std::uint64_t seed,
                                 const std::filesystem::path& out_dir);

}  // namespace frnet
