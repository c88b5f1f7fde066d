#pragma once

#include <span>
#include <string>
#include <vector>

#include "frnet/tensor.hpp"
#include "frnet/volume.hpp"

namespace frnet {

// Probabilities are clamped to this floor before every log.
inline constexpr double kProbabilityFloor = 1e-12;

enum class LossKind { ce, wce, focal, boundary };

std::string to_string(LossKind kind);
LossKind parse_loss(const std::string& name);

enum class Connectivity { six, twenty_six };

struct LossConfig {
  LossKind kind = LossKind::boundary;
  std::vector<double> alpha{1.0, 1.0};
  double gamma = 2.0;
  double density_sigma = 3.0;
  // Added to the peak-normalized density map; 0 gives the literal map.
  double density_floor = 0.05;
  Connectivity connectivity = Connectivity::six;

  void validate(std::size_t num_classes) const;
};

// All losses take softmax output [N, C, D, H, W] and one label volume per
// batch item, and return a scalar tensor.

// mean_v -log p_t
Tensor cross_entropy(const Tensor& probs, std::span<const LabelVolume> labels);
// sum_v -alpha[class(v)] log p_t / voxel count
Tensor weighted_cross_entropy(const Tensor& probs, std::span<const LabelVolume> labels,
                              std::span<const double> alpha);
// mean_v -(1 - p_t)^gamma log p_t; the modulating factor is differentiated.
Tensor focal_loss(const Tensor& probs, std::span<const LabelVolume> labels, double gamma);
// sum_v -B_v log p_t / sum_v B_v; B is a constant.
Tensor boundary_loss(const Tensor& probs, std::span<const LabelVolume> labels, std::span<const DensityMap> density);

inline Tensor cross_entropy(const Tensor& probs, const LabelVolume& labels) {
  return cross_entropy(probs, std::span(&labels, 1));
}
inline Tensor weighted_cross_entropy(const Tensor& probs, const LabelVolume& labels, std::span<const double> alpha) {
  return weighted_cross_entropy(probs, std::span(&labels, 1), alpha);
}
inline Tensor focal_loss(const Tensor& probs, const LabelVolume& labels, double gamma) {
  return focal_loss(probs, std::span(&labels, 1), gamma);
}
inline Tensor boundary_loss(const Tensor& probs, const LabelVolume& labels, const DensityMap& density) {
  return boundary_loss(probs, std::span(&labels, 1), std::span(&density, 1));
}

// Inner boundary: brain voxels with at least one non-brain neighbour, where
// positions outside the volume count as non-brain.
LabelVolume extract_boundary(const LabelVolume& mask, Connectivity connectivity = Connectivity::six);

struct DensityMapResult {
  DensityMap map;
  // True when the boundary was empty and the map is the floor everywhere.
  bool empty_boundary = false;
};

// Separable Gaussian (truncated at floor(3 sigma) voxels per axis) of the
// binary boundary, rescaled to peak 1, plus `floor`.
DensityMapResult density_map(const LabelVolume& boundary, double sigma, double floor);

// Boundary extraction followed by density_map, per the loss configuration.
DensityMapResult boundary_density(const LabelVolume& mask, const LossConfig& config);

// Dispatches on config.kind. `density` is required only for boundary loss.
Tensor compute_loss(const LossConfig& config, const Tensor& probs, std::span<const LabelVolume> labels,
                    std::span<const DensityMap> density = {});

}  // namespace frnet
