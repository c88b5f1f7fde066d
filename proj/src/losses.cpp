#include "frnet/losses.hpp"

#include <algorithm>
#include <cmath>

#include "frnet/error.hpp"

namespace frnet {

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::ce: return "ce";
    case LossKind::wce: return "wce";
    case LossKind::focal: return "focal";
    case LossKind::boundary: return "boundary";
  }
  return "unknown";
}

LossKind parse_loss(const std::string& name) {
  if (name == "ce") return LossKind::ce;
  if (name == "wce") return LossKind::wce;
  if (name == "focal") return LossKind::focal;
  if (name == "boundary") return LossKind::boundary;
  throw ConfigError("unknown loss '" + name + "' (expected ce, wce, focal or boundary)");
}

void LossConfig::validate(std::size_t num_classes) const {
  if (kind == LossKind::wce && alpha.size() != num_classes) {
    throw ConfigError("wce needs one alpha per class (" + std::to_string(num_classes) + "), got " +
                      std::to_string(alpha.size()));
  }
  for (double a : alpha) {
    if (!(a > 0.0)) throw ConfigError("alpha entries must be positive");
  }
  if (!(gamma >= 0.0)) throw ConfigError("gamma must be nonnegative");
  if (!(density_sigma > 0.0)) throw ConfigError("density sigma must be positive");
  if (!(density_floor >= 0.0)) throw ConfigError("density floor must be nonnegative");
}

void require_binary(const LabelVolume& mask, const char* what) {
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] > 1) {
      throw ContractError(std::string(what) + ": mask is not binary (value " + std::to_string(mask[i]) +
                          " at index " + std::to_string(i) + ")");
    }
  }
}

namespace {

struct Gathered {
  std::size_t batch, classes, plane;
};

Gathered check_inputs(const Tensor& probs, std::span<const LabelVolume> labels, const char* what) {
  if (probs.rank() != 5) throw ShapeError(std::string(what) + ": probabilities must be [N, C, D, H, W]");
  const std::size_t N = probs.dim(0), C = probs.dim(1);
  if (labels.size() != N) {
    throw ShapeError(std::string(what) + ": " + std::to_string(labels.size()) + " label volumes for batch of " +
                     std::to_string(N));
  }
  const Extents spatial{probs.dim(2), probs.dim(3), probs.dim(4)};
  for (const auto& l : labels) {
    require_same_extents(l.extents(), spatial, what);
    for (std::size_t i = 0; i < l.size(); ++i) {
      if (l[i] >= C) {
        throw ContractError(std::string(what) + ": label " + std::to_string(l[i]) + " >= class count " +
                            std::to_string(C));
      }
    }
  }
  return {N, C, spatial.count()};
}

// sum_v weight_v * f(p_t,v) / normalizer, with f(p) = -(1-p)^gamma log p.
// gamma == 0 reduces f to -log p exactly.
Tensor weighted_nll(const Tensor& probs, std::span<const LabelVolume> labels, std::vector<double> weights,
                    double normalizer, double gamma) {
  const Gathered g = check_inputs(probs, labels, "loss");
  const auto p = probs.data();
  std::vector<std::size_t> target(g.batch * g.plane);
  double total = 0.0;
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t v = 0; v < g.plane; ++v) {
      const std::size_t idx = (n * g.classes + labels[n][v]) * g.plane + v;
      target[n * g.plane + v] = idx;
      const double w = weights[n * g.plane + v];
      if (w == 0.0) continue;
      const double pt = std::max(p[idx], kProbabilityFloor);
      const double modulation = gamma == 0.0 ? 1.0 : std::pow(1.0 - pt, gamma);
      total += w * (-modulation * std::log(pt));
    }
  }
  total /= normalizer;

  return make_result(
      {1}, {total}, {probs},
      [probs, target = std::move(target), weights = std::move(weights), normalizer, gamma](
          std::span<const double> gout, std::span<const std::span<double>> gin) {
        const auto p = probs.data();
        const double scale = gout[0] / normalizer;
        for (std::size_t k = 0; k < target.size(); ++k) {
          const double w = weights[k];
          if (w == 0.0) continue;
          const double raw = p[target[k]];
          if (raw < kProbabilityFloor) continue;  // clamped: flat
          const double q = 1.0 - raw;
          double dfdp;
          if (gamma == 0.0) {
            dfdp = -1.0 / raw;
          } else {
            const double mod = std::pow(q, gamma);
            // d/dp (1-p)^gamma = -gamma (1-p)^(gamma-1); the product with
            // log p tends to 0 as p -> 1 for every gamma > 0.
            const double dmod = q > 0.0 ? -gamma * std::pow(q, gamma - 1.0) : 0.0;
            dfdp = -(dmod * std::log(raw) + mod / raw);
          }
          gin[0][target[k]] += scale * w * dfdp;
        }
      });
}

}  // namespace

Tensor cross_entropy(const Tensor& probs, std::span<const LabelVolume> labels) {
  const Gathered g = check_inputs(probs, labels, "cross_entropy");
  return weighted_nll(probs, labels, std::vector<double>(g.batch * g.plane, 1.0),
                      static_cast<double>(g.batch * g.plane), 0.0);
}

Tensor weighted_cross_entropy(const Tensor& probs, std::span<const LabelVolume> labels,
                              std::span<const double> alpha) {
  const Gathered g = check_inputs(probs, labels, "weighted_cross_entropy");
  if (alpha.size() != g.classes) {
    throw ShapeError("weighted_cross_entropy: " + std::to_string(alpha.size()) + " class weights for " +
                     std::to_string(g.classes) + " classes");
  }
  for (double a : alpha) {
    if (!(a > 0.0)) throw ContractError("weighted_cross_entropy: class weights must be positive");
  }
  std::vector<double> weights(g.batch * g.plane);
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t v = 0; v < g.plane; ++v) weights[n * g.plane + v] = alpha[labels[n][v]];
  }
  return weighted_nll(probs, labels, std::move(weights), static_cast<double>(g.batch * g.plane), 0.0);
}

Tensor focal_loss(const Tensor& probs, std::span<const LabelVolume> labels, double gamma) {
  const Gathered g = check_inputs(probs, labels, "focal_loss");
  if (!(gamma >= 0.0)) throw ContractError("focal_loss: gamma must be nonnegative");
  return weighted_nll(probs, labels, std::vector<double>(g.batch * g.plane, 1.0),
                      static_cast<double>(g.batch * g.plane), gamma);
}

Tensor boundary_loss(const Tensor& probs, std::span<const LabelVolume> labels, std::span<const DensityMap> density) {
  const Gathered g = check_inputs(probs, labels, "boundary_loss");
  if (density.size() != g.batch) {
    throw ShapeError("boundary_loss: " + std::to_string(density.size()) + " density maps for batch of " +
                     std::to_string(g.batch));
  }
  std::vector<double> weights;
  weights.reserve(g.batch * g.plane);
  double mass = 0.0;
  for (std::size_t n = 0; n < g.batch; ++n) {
    require_same_extents(density[n].extents(), labels[n].extents(), "boundary_loss density map");
    for (double b : density[n].values()) {
      if (!(b >= 0.0)) throw ContractError("boundary_loss: density map must be nonnegative");
      weights.push_back(b);
      mass += b;
    }
  }
  if (mass == 0.0) throw ContractError("boundary_loss: density map sums to zero");
  return weighted_nll(probs, labels, std::move(weights), mass, 0.0);
}

Tensor compute_loss(const LossConfig& config, const Tensor& probs, std::span<const LabelVolume> labels,
                    std::span<const DensityMap> density) {
  switch (config.kind) {
    case LossKind::ce: return cross_entropy(probs, labels);
    case LossKind::wce: return weighted_cross_entropy(probs, labels, config.alpha);
    case LossKind::focal: return focal_loss(probs, labels, config.gamma);
    case LossKind::boundary: return boundary_loss(probs, labels, density);
  }
  throw ConfigError("unhandled loss kind");
}

}  // namespace frnet
