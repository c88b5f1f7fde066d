#include "frnet/artifact.hpp"

#include <cmath>
#include <sstream>

#include "frnet/error.hpp"
#include "frnet/manifest.hpp"
#include "frnet/random.hpp"
#include "frnet/volume_io.hpp"

namespace frnet {

Axis parse_axis(const std::string& name) {
  if (name == "x") return Axis::x;
  if (name == "y") return Axis::y;
  if (name == "z") return Axis::z;
  throw ConfigError("unknown axis '" + name + "' (expected x, y or z)");
}

std::string to_string(Axis axis) {
  switch (axis) {
    case Axis::x: return "x";
    case Axis::y: return "y";
    case Axis::z: return "z";
  }
  return "?";
}

void apply_motion_phase(KSpaceVolume& kspace, const ArtifactConfig& config) {
  if (!(config.sigma >= 0.0)) throw ContractError("motion sigma must be nonnegative");
  const auto& e = kspace.extents();
  const std::size_t extent[] = {e.depth, e.height, e.width};
  const std::size_t stride[] = {e.height * e.width, e.width, 1};
  // Storage axis index: depth = z, height = y, width = x.
  const int readout = config.readout == Axis::z ? 0 : config.readout == Axis::y ? 1 : 2;
  const int a = readout == 0 ? 1 : 0;
  const int b = readout == 2 ? 1 : 2;

  Rng rng(config.seed);
  auto& values = kspace.data.values();
  for (std::size_t i = 0; i < extent[a]; ++i) {
    const double ka = centered_frequency(i, extent[a]);
    for (std::size_t j = 0; j < extent[b]; ++j) {
      const double kb = centered_frequency(j, extent[b]);
      const double shift_a = rng.normal() * config.sigma;
      const double shift_b = rng.normal() * config.sigma;
      const double phase = ka * shift_a + kb * shift_b;
      if (phase == 0.0) continue;
      const std::complex<double> factor(std::cos(phase), std::sin(phase));
      const std::size_t base = i * stride[a] + j * stride[b];
      for (std::size_t k = 0; k < extent[readout]; ++k) values[base + k * stride[readout]] *= factor;
    }
  }
}

ComplexVolume simulate_motion_complex(const RealVolume& volume, const ArtifactConfig& config) {
  KSpaceVolume k = fft3d(volume);
  apply_motion_phase(k, config);
  return ifft3d(k);
}

RealVolume simulate_motion(const RealVolume& volume, const ArtifactConfig& config) {
  const ComplexVolume c = simulate_motion_complex(volume, config);
  RealVolume out(volume.extents());
  for (std::size_t i = 0; i < c.size(); ++i) out[i] = std::abs(c[i]);
  return out;
}

double normalized_rms_deviation(const RealVolume& corrupted, const RealVolume& original) {
  require_same_extents(corrupted.extents(), original.extents(), "normalized_rms_deviation");
  double diff = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < original.size(); ++i) {
    const double d = corrupted[i] - original[i];
    diff += d * d;
    ref += original[i] * original[i];
  }
  if (ref == 0.0) return diff == 0.0 ? 0.0 : INFINITY;
  return std::sqrt(diff / ref);
}

CorruptionResult corrupt_dataset(DatasetManifest& manifest, const std::vector<double>& sigmas, std::uint64_t seed,
                                 const std::filesystem::path& out_dir) {
  CorruptionResult result;
  for (double s : sigmas) {
    if (!(s >= 0.0)) throw ConfigError("motion sigmas must be nonnegative");
  }
  const std::size_t originals = manifest.entries.size();
  for (std::size_t i = 0; i < originals; ++i) {
    if (sigmas.empty()) break;
    const ManifestEntry source = manifest.entries[i];
    RealVolume volume;
    try {
      volume = read_real_volume(manifest.resolve(source.volume));
    } catch (const Error& e) {
      result.errors.push_back({i, e.what()});
      continue;
    }
    for (std::size_t s = 0; s < sigmas.size(); ++s) {
      ArtifactConfig config;
      config.sigma = sigmas[s];
      config.seed = mix_seed(seed, i, s);
      const RealVolume corrupted = simulate_motion(volume, config);
      std::ostringstream name;
      name << "motion_" << i << "_s" << s << ".frv";
      const auto path = out_dir / name.str();
      write_volume(path, corrupted);

      ManifestEntry entry = source;
      entry.volume = std::filesystem::absolute(path).lexically_normal().string();
      entry.mask = std::filesystem::absolute(manifest.resolve(source.mask)).lexically_normal().string();
      entry.motion_sigma = sigmas[s];
      entry.source = i;
      manifest.entries.push_back(std::move(entry));
      ++result.written;
    }
  }
  return result;
}

}  // namespace frnet
