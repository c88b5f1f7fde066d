#include "frnet/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "frnet/error.hpp"
#include "frnet/random.hpp"
#include "frnet/volume_io.hpp"

namespace frnet {

void PhantomParams::validate() const {
  if (extent < 4) throw ConfigError("phantom extent must be >= 4");
  const double center = (static_cast<double>(extent) - 1.0) / 2.0;
  for (int a = 0; a < 3; ++a) {
    if (!(semi_axes[a] > 0.0)) throw ConfigError("phantom semi-axes must be positive");
    const double outer = semi_axes[a] * static_cast<double>(extent) + rim_thickness + skull_thickness;
    const double c = center + center_offset[a];
    if (c - outer < 0.0 || c + outer > static_cast<double>(extent) - 1.0) {
      throw ConfigError("phantom head (brain + rim + skull) does not fit inside the " + std::to_string(extent) +
                        "^3 grid");
    }
  }
  if (rim_thickness < 0.0 || skull_thickness < 0.0) throw ConfigError("shell thicknesses must be nonnegative");
  if (background_intensity < 0.0 || brain_intensity < 0.0 || skull_intensity < 0.0) {
    throw ConfigError("phantom intensities must be nonnegative");
  }
  if (!(contrast > 0.0 && contrast <= 1.0)) throw ConfigError("phantom contrast must lie in (0, 1]");
  if (noise_std < 0.0 || bias_amplitude < 0.0) throw ConfigError("noise and bias amplitude must be nonnegative");
}

Phantom generate_phantom(const PhantomParams& params) {
  params.validate();
  const std::size_t N = params.extent;
  const Extents extents{N, N, N};
  Phantom out{RealVolume(extents), LabelVolume(extents)};

  Rng rng(params.seed);
  std::array<double, 3> phase{};
  for (auto& p : phase) p = rng.uniform(0.0, 2.0 * std::numbers::pi);
  std::array<double, 4> bias_coef{};
  double l1 = 0.0;
  for (auto& b : bias_coef) {
    b = rng.normal();
    l1 += std::abs(b);
  }
  for (auto& b : bias_coef) b /= l1;

  const double half = (static_cast<double>(N) - 1.0) / 2.0;
  const double frequency = 2.0 * std::numbers::pi / std::max(4.0, static_cast<double>(N) / 4.0);
  std::array<double, 3> center{}, brain{}, rim{}, skull{};
  for (int a = 0; a < 3; ++a) {
    center[a] = half + params.center_offset[a];
    brain[a] = params.semi_axes[a] * static_cast<double>(N);
    rim[a] = brain[a] + params.rim_thickness;
    skull[a] = rim[a] + params.skull_thickness;
  }
  const double gap = params.brain_intensity - params.background_intensity;

  for (std::size_t z = 0; z < N; ++z) {
    for (std::size_t y = 0; y < N; ++y) {
      for (std::size_t x = 0; x < N; ++x) {
        const double pos[3] = {static_cast<double>(z), static_cast<double>(y), static_cast<double>(x)};
        double r_brain = 0.0, r_rim = 0.0, r_skull = 0.0;
        for (int a = 0; a < 3; ++a) {
          const double d = pos[a] - center[a];
          r_brain += (d / brain[a]) * (d / brain[a]);
          r_rim += (d / rim[a]) * (d / rim[a]);
          r_skull += (d / skull[a]) * (d / skull[a]);
        }
        double value = params.background_intensity;
        if (r_brain <= 1.0) {
          out.mask(z, y, x) = 1;
          if (params.contrast < 1.0) {
            const double texture = 0.5 + 0.5 * std::sin(frequency * pos[0] + phase[0]) *
                                             std::sin(frequency * pos[1] + phase[1]) *
                                             std::sin(frequency * pos[2] + phase[2]);
            const double pattern = r_brain * (0.5 + 0.5 * texture);
            value = params.background_intensity + gap * (1.0 - (1.0 - params.contrast) * pattern);
          } else {
            value = params.brain_intensity;
          }
        } else if (r_rim > 1.0 && r_skull <= 1.0) {
          value = params.skull_intensity;
        }
        if (params.bias_amplitude > 0.0) {
          const double u = (pos[0] - half) / half, v = (pos[1] - half) / half, w = (pos[2] - half) / half;
          const double field = bias_coef[0] * u + bias_coef[1] * v + bias_coef[2] * w + bias_coef[3] * u * v;
          value *= 1.0 + params.bias_amplitude * field;
        }
        out.volume(z, y, x) = value;
      }
    }
  }
  if (params.noise_std > 0.0) {
    for (auto& v : out.volume.values()) v += rng.normal() * params.noise_std;
  }
  return out;
}

const std::vector<PhantomFamily>& phantom_families() {
  static const std::vector<PhantomFamily> families = [] {
    std::vector<PhantomFamily> f(4);
    f[0].name = "large";
    f[0].semi_axis = {0.29, 0.32};
    f[0].contrast = {0.85, 1.0};
    f[0].max_center_offset = 0.5;
    f[1].name = "small";
    f[1].semi_axis = {0.20, 0.24};
    f[1].contrast = {0.8, 1.0};
    f[2].name = "low-contrast";
    f[2].semi_axis = {0.25, 0.29};
    f[2].contrast = {0.45, 0.6};
    f[3].name = "thin-rim";
    f[3].semi_axis = {0.26, 0.30};
    f[3].contrast = {0.3, 0.45};
    f[3].rim_thickness = 1.0;
    f[3].skull_thickness = 1.0;
    return f;
  }();
  return families;
}

const PhantomFamily& phantom_family(const std::string& name) {
  for (const auto& f : phantom_families()) {
    if (f.name == name) return f;
  }
  throw ConfigError("unknown phantom group '" + name + "'");
}

std::vector<PhantomFamily> parse_groups(const std::string& spec) {
  const auto& all = phantom_families();
  if (!spec.empty() && std::all_of(spec.begin(), spec.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    const std::size_t n = std::stoul(spec);
    if (n < 1 || n > all.size()) {
      throw ConfigError("group count must be between 1 and " + std::to_string(all.size()));
    }
    return {all.begin(), all.begin() + static_cast<long>(n)};
  }
  std::vector<PhantomFamily> out;
  std::size_t start = 0;
  while (start <= spec.size()) {
    const std::size_t end = std::min(spec.find(',', start), spec.size());
    const std::string name = spec.substr(start, end - start);
    if (name.empty()) throw ConfigError("empty group name in '" + spec + "'");
    out.push_back(phantom_family(name));
    start = end + 1;
  }
  return out;
}

PhantomParams sample_phantom_params(const PhantomFamily& family, std::size_t extent, std::uint64_t seed) {
  Rng rng(seed);
  PhantomParams p;
  p.extent = extent;
  for (auto& s : p.semi_axes) s = rng.uniform(family.semi_axis[0], family.semi_axis[1]);
  for (auto& c : p.center_offset) c = rng.uniform(-family.max_center_offset, family.max_center_offset);
  p.contrast = rng.uniform(family.contrast[0], family.contrast[1]);
  p.rim_thickness = family.rim_thickness;
  p.skull_thickness = family.skull_thickness;
  p.noise_std = family.noise_std;
  p.bias_amplitude = family.bias_amplitude;
  p.seed = rng.next_u64();
  return p;
}

DatasetManifest generate_dataset(const std::vector<PhantomFamily>& families, std::size_t count, std::size_t extent,
                                 std::uint64_t seed, const std::filesystem::path& out_dir) {
  if (families.empty()) throw ConfigError("at least one phantom group is required");
  if (count == 0) throw ConfigError("phantom count must be positive");
  DatasetManifest manifest;
  manifest.extents = {extent, extent, extent};
  manifest.base_dir = out_dir;
  for (std::size_t i = 0; i < count; ++i) {
    const auto& family = families[i % families.size()];
    const Phantom ph = generate_phantom(sample_phantom_params(family, extent, mix_seed(seed, i)));
    char vol_name[32], mask_name[32];
    std::snprintf(vol_name, sizeof vol_name, "vol_%03zu.frv", i);
    std::snprintf(mask_name, sizeof mask_name, "mask_%03zu.frv", i);
    write_volume(out_dir / vol_name, ph.volume);
    write_volume(out_dir / mask_name, ph.mask);
    manifest.entries.push_back({vol_name, mask_name, family.name, "", std::nullopt, std::nullopt});
  }
  save_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

GeometricTransform GeometricTransform::symmetry(int index, double scale) {
  if (index < 0 || index >= 48) throw ContractError("cube symmetry index must lie in [0, 48)");
  static constexpr std::array<std::array<int, 3>, 6> perms{
      {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  GeometricTransform t;
  t.permutation = perms[index / 8];
  for (int a = 0; a < 3; ++a) t.flip[a] = ((index % 8) >> a) & 1;
  t.scale = scale;
  return t;
}

bool GeometricTransform::is_identity() const {
  return permutation == std::array<int, 3>{0, 1, 2} && flip == std::array<bool, 3>{false, false, false} &&
         scale == 1.0;
}

GeometricTransform draw_transform(std::uint64_t seed, const AugmentOptions& options) {
  Rng rng(seed);
  const int index = options.reorient ? static_cast<int>(rng.below(48)) : 0;
  const double scale = options.resize ? rng.uniform(options.scale_min, options.scale_max) : 1.0;
  return GeometricTransform::symmetry(index, scale);
}

namespace {

// Input-space position feeding output voxel (z, y, x).
std::array<double, 3> source_position(const GeometricTransform& t, std::size_t n, std::size_t z, std::size_t y,
                                      std::size_t x) {
  const double c = (static_cast<double>(n) - 1.0) / 2.0;
  const double p[3] = {static_cast<double>(z), static_cast<double>(y), static_cast<double>(x)};
  std::array<double, 3> q{};
  for (int a = 0; a < 3; ++a) {
    double s = t.scale == 1.0 ? p[a] : c + (p[a] - c) / t.scale;
    if (t.flip[a]) s = static_cast<double>(n) - 1.0 - s;
    q[t.permutation[a]] = s;
  }
  return q;
}

void require_cube(const Extents& e, const char* what) {
  if (!e.is_cube()) throw ContractError(std::string(what) + " requires cubic extents, got " + e.to_string());
}

}  // namespace

RealVolume transform_volume(const RealVolume& volume, const GeometricTransform& t) {
  const auto& e = volume.extents();
  require_cube(e, "transform_volume");
  const std::size_t n = e.depth;
  RealVolume out(e);
  const double hi = static_cast<double>(n) - 1.0;
  for (std::size_t z = 0; z < n; ++z)
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x < n; ++x) {
        auto q = source_position(t, n, z, y, x);
        std::size_t i0[3], i1[3];
        double f[3];
        for (int a = 0; a < 3; ++a) {
          const double s = std::clamp(q[a], 0.0, hi);
          const double fl = std::floor(s);
          i0[a] = static_cast<std::size_t>(fl);
          i1[a] = std::min(i0[a] + 1, n - 1);
          f[a] = s - fl;
        }
        double acc = 0.0;
        for (int corner = 0; corner < 8; ++corner) {
          double w = 1.0;
          std::size_t idx[3];
          for (int a = 0; a < 3; ++a) {
            const bool upper = (corner >> (2 - a)) & 1;
            w *= upper ? f[a] : 1.0 - f[a];
            idx[a] = upper ? i1[a] : i0[a];
          }
          if (w != 0.0) acc += w * volume(idx[0], idx[1], idx[2]);
        }
        out(z, y, x) = acc;
      }
  return out;
}

LabelVolume transform_mask(const LabelVolume& mask, const GeometricTransform& t) {
  const auto& e = mask.extents();
  require_cube(e, "transform_mask");
  const std::size_t n = e.depth;
  LabelVolume out(e, 0);
  for (std::size_t z = 0; z < n; ++z)
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x < n; ++x) {
        auto q = source_position(t, n, z, y, x);
        long idx[3];
        bool inside = true;
        for (int a = 0; a < 3; ++a) {
          idx[a] = static_cast<long>(std::floor(q[a] + 0.5));
          inside = inside && idx[a] >= 0 && idx[a] < static_cast<long>(n);
        }
        if (inside) out(z, y, x) = mask(idx[0], idx[1], idx[2]);
      }
  return out;
}

Phantom augment(const RealVolume& volume, const LabelVolume& mask, std::uint64_t seed, const AugmentOptions& options) {
  require_cube(volume.extents(), "augment");
  require_same_extents(volume.extents(), mask.extents(), "augment");
  const GeometricTransform t = draw_transform(seed, options);
  if (t.is_identity()) return {volume, mask};
  return {transform_volume(volume, t), transform_mask(mask, t)};
}

}  // namespace frnet
