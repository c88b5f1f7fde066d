#include <algorithm>
#include <cmath>

#include "frnet/error.hpp"
#include "frnet/losses.hpp"

namespace frnet {

LabelVolume extract_boundary(const LabelVolume& mask, Connectivity connectivity) {
  require_binary(mask, "extract_boundary");
  const auto& e = mask.extents();
  const long D = static_cast<long>(e.depth), H = static_cast<long>(e.height), W = static_cast<long>(e.width);
  LabelVolume boundary(e, 0);

  auto outside_or_background = [&](long z, long y, long x) {
    if (z < 0 || y < 0 || x < 0 || z >= D || y >= H || x >= W) return true;
    return mask(z, y, x) == 0;
  };

  for (long z = 0; z < D; ++z) {
    for (long y = 0; y < H; ++y) {
      for (long x = 0; x < W; ++x) {
        if (mask(z, y, x) == 0) continue;
        bool edge = false;
        if (connectivity == Connectivity::six) {
          edge = outside_or_background(z - 1, y, x) || outside_or_background(z + 1, y, x) ||
                 outside_or_background(z, y - 1, x) || outside_or_background(z, y + 1, x) ||
                 outside_or_background(z, y, x - 1) || outside_or_background(z, y, x + 1);
        } else {
          for (long dz = -1; dz <= 1 && !edge; ++dz)
            for (long dy = -1; dy <= 1 && !edge; ++dy)
              for (long dx = -1; dx <= 1 && !edge; ++dx) {
                if (dz == 0 && dy == 0 && dx == 0) continue;
                edge = outside_or_background(z + dz, y + dy, x + dx);
              }
        }
        if (edge) boundary(z, y, x) = 1;
      }
    }
  }
  return boundary;
}

namespace {

// In-place 1D filtering of every line along `axis` (0 = depth, 2 = width);
// positions outside the volume contribute zero.
void filter_axis(std::vector<double>& data, const Extents& e, int axis, const std::vector<double>& kernel) {
  const long radius = static_cast<long>(kernel.size() / 2);
  const std::size_t extent[] = {e.depth, e.height, e.width};
  const std::size_t stride[] = {e.height * e.width, e.width, 1};
  const long len = static_cast<long>(extent[axis]);
  const std::size_t step = stride[axis];
  std::vector<double> line(extent[axis]);

  const int a1 = axis == 0 ? 1 : 0;
  const int a2 = axis == 2 ? 1 : 2;
  for (std::size_t i = 0; i < extent[a1]; ++i) {
    for (std::size_t j = 0; j < extent[a2]; ++j) {
      const std::size_t base = i * stride[a1] + j * stride[a2];
      for (long k = 0; k < len; ++k) line[k] = data[base + k * step];
      for (long k = 0; k < len; ++k) {
        double acc = 0.0;
        const long lo = std::max(-radius, -k), hi = std::min(radius, len - 1 - k);
        for (long t = lo; t <= hi; ++t) acc += kernel[t + radius] * line[k + t];
        data[base + k * step] = acc;
      }
    }
  }
}

}  // namespace

DensityMapResult density_map(const LabelVolume& boundary, double sigma, double floor) {
  require_binary(boundary, "density_map");
  if (!(sigma > 0.0)) throw ContractError("density_map: sigma must be positive");
  if (!(floor >= 0.0)) throw ContractError("density_map: floor must be nonnegative");

  const auto& e = boundary.extents();
  DensityMapResult result;
  result.map = DensityMap(e, 0.0);
  auto& values = result.map.values();
  bool any = false;
  for (std::size_t i = 0; i < boundary.size(); ++i) {
    values[i] = boundary[i];
    any = any || boundary[i] != 0;
  }
  if (!any) {
    std::fill(values.begin(), values.end(), floor);
    result.empty_boundary = true;
    return result;
  }

  const long radius = std::max(1L, static_cast<long>(std::floor(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  for (long t = -radius; t <= radius; ++t) {
    kernel[t + radius] = std::exp(-static_cast<double>(t * t) / (2.0 * sigma * sigma));
  }
  for (int axis = 0; axis < 3; ++axis) filter_axis(values, e, axis, kernel);

  const double peak = *std::max_element(values.begin(), values.end());
  for (auto& v : values) v = v / peak + floor;
  return result;
}

DensityMapResult boundary_density(const LabelVolume& mask, const LossConfig& config) {
  return density_map(extract_boundary(mask, config.connectivity), config.density_sigma, config.density_floor);
}

}  // namespace frnet
