#include <doctest.h>

#include <array>
#include <cmath>

#include "frnet/error.hpp"
#include "frnet/losses.hpp"
#include "oracles.hpp"

using namespace frnet;

namespace {

// Two-class probabilities [N, 2, D, H, W] with p1 = 1 - p0.
Tensor random_probs(std::size_t n, Extents e, Rng& rng, bool requires_grad = false) {
  const std::size_t plane = e.count();
  std::vector<double> v(n * 2 * plane);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t i = 0; i < plane; ++i) {
      const double p = rng.uniform(0.02, 0.98);
      v[(b * 2) * plane + i] = p;
      v[(b * 2 + 1) * plane + i] = 1.0 - p;
    }
  return Tensor::from_data({n, 2, e.depth, e.height, e.width}, std::move(v), requires_grad);
}

// Free-standing probabilities for gradient checks (no simplex constraint).
Tensor random_leaf_probs(std::size_t n, std::size_t c, Extents e, Rng& rng) {
  return oracle::random_tensor({n, c, e.depth, e.height, e.width}, rng, 0.05, 0.95, true);
}

double p_true(const Tensor& probs, const std::vector<LabelVolume>& labels, std::size_t b, std::size_t i) {
  const std::size_t C = probs.dim(1), plane = labels[0].size();
  return std::max(probs.data()[(b * C + labels[b][i]) * plane + i], 1e-12);
}

double loop_ce(const Tensor& p, const std::vector<LabelVolume>& l) {
  double s = 0;
  std::size_t n = 0;
  for (std::size_t b = 0; b < l.size(); ++b)
    for (std::size_t i = 0; i < l[b].size(); ++i, ++n) s += -std::log(p_true(p, l, b, i));
  return s / static_cast<double>(n);
}

double loop_wce(const Tensor& p, const std::vector<LabelVolume>& l, const std::vector<double>& alpha) {
  double s = 0;
  std::size_t n = 0;
  for (std::size_t b = 0; b < l.size(); ++b)
    for (std::size_t i = 0; i < l[b].size(); ++i, ++n) s += -alpha[l[b][i]] * std::log(p_true(p, l, b, i));
  return s / static_cast<double>(n);
}

double loop_focal(const Tensor& p, const std::vector<LabelVolume>& l, double gamma) {
  double s = 0;
  std::size_t n = 0;
  for (std::size_t b = 0; b < l.size(); ++b)
    for (std::size_t i = 0; i < l[b].size(); ++i, ++n) {
      const double pt = p_true(p, l, b, i);
      s += -std::pow(1.0 - pt, gamma) * std::log(pt);
    }
  return s / static_cast<double>(n);
}

double loop_boundary(const Tensor& p, const std::vector<LabelVolume>& l, const std::vector<DensityMap>& B) {
  double s = 0, mass = 0;
  for (std::size_t b = 0; b < l.size(); ++b)
    for (std::size_t i = 0; i < l[b].size(); ++i) {
      s += -B[b][i] * std::log(p_true(p, l, b, i));
      mass += B[b][i];
    }
  return s / mass;
}

std::vector<LabelVolume> random_labels(std::size_t n, Extents e, Rng& rng) {
  std::vector<LabelVolume> out;
  for (std::size_t b = 0; b < n; ++b) out.push_back(oracle::random_labels(e, rng));
  return out;
}

std::vector<DensityMap> random_density(std::size_t n, Extents e, Rng& rng) {
  std::vector<DensityMap> out;
  for (std::size_t b = 0; b < n; ++b) {
    DensityMap m(e);
    for (auto& v : m.values()) v = rng.uniform(0.0, 1.0);
    out.push_back(std::move(m));
  }
  return out;
}

LabelVolume cube_mask(std::size_t n, std::size_t lo, std::size_t hi) {
  LabelVolume m({n, n, n}, 0);
  for (std::size_t z = lo; z < hi; ++z)
    for (std::size_t y = lo; y < hi; ++y)
      for (std::size_t x = lo; x < hi; ++x) m(z, y, x) = 1;
  return m;
}

LabelVolume sphere_mask(std::size_t n, double radius) {
  LabelVolume m({n, n, n}, 0);
  const double c = (static_cast<double>(n) - 1) / 2;
  for (std::size_t z = 0; z < n; ++z)
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x < n; ++x) {
        const double d2 = (z - c) * (z - c) + (y - c) * (y - c) + (x - c) * (x - c);
        m(z, y, x) = d2 <= radius * radius ? 1 : 0;
      }
  return m;
}

// Brute-force boundary: brain voxel with a 6-neighbour that is background
// or outside the grid.
LabelVolume scan_boundary(const LabelVolume& m) {
  const auto& e = m.extents();
  LabelVolume b(e, 0);
  const int off[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}};
  for (std::size_t z = 0; z < e.depth; ++z)
    for (std::size_t y = 0; y < e.height; ++y)
      for (std::size_t x = 0; x < e.width; ++x) {
        if (!m(z, y, x)) continue;
        for (const auto& o : off) {
          const long zz = long(z) + o[0], yy = long(y) + o[1], xx = long(x) + o[2];
          if (zz < 0 || yy < 0 || xx < 0 || zz >= long(e.depth) || yy >= long(e.height) || xx >= long(e.width) ||
              !m(zz, yy, xx)) {
            b(z, y, x) = 1;
            break;
          }
        }
      }
  return b;
}

// Direct (non-separable) Gaussian summation over boundary voxels, with the
// kernel cut to |offset| <= radius on every axis, peak-normalized.
DensityMap direct_gaussian(const LabelVolume& boundary, double sigma, long radius) {
  const auto& e = boundary.extents();
  DensityMap out(e, 0.0);
  for (std::size_t z = 0; z < e.depth; ++z)
    for (std::size_t y = 0; y < e.height; ++y)
      for (std::size_t x = 0; x < e.width; ++x) {
        double acc = 0;
        for (std::size_t bz = 0; bz < e.depth; ++bz)
          for (std::size_t by = 0; by < e.height; ++by)
            for (std::size_t bx = 0; bx < e.width; ++bx) {
              if (!boundary(bz, by, bx)) continue;
              const long dz = long(z) - long(bz), dy = long(y) - long(by), dx = long(x) - long(bx);
              if (std::abs(dz) > radius || std::abs(dy) > radius || std::abs(dx) > radius) continue;
              acc += std::exp(-double(dz * dz + dy * dy + dx * dx) / (2 * sigma * sigma));
            }
        out(z, y, x) = acc;
      }
  const double peak = *std::max_element(out.values().begin(), out.values().end());
  for (auto& v : out.values()) v /= peak;
  return out;
}

}  // namespace

TEST_CASE("analytic loss values") {
  const Extents one{1, 1, 1};
  LabelVolume brain(one, 1);
  const double e1 = std::exp(-1.0);
  auto p = Tensor::from_data({1, 2, 1, 1, 1}, {1 - e1, e1});
  const double alpha[] = {1.0, 2.0};
  CHECK(weighted_cross_entropy(p, brain, alpha).item() == doctest::Approx(2.0).epsilon(1e-14));

  auto half = Tensor::from_data({1, 2, 1, 1, 1}, {0.5, 0.5});
  CHECK(focal_loss(half, brain, 2.0).item() == doctest::Approx(0.25 * std::log(2.0)).epsilon(1e-14));
  CHECK(focal_loss(half, brain, 2.0).item() == doctest::Approx(0.173287).epsilon(1e-6));

  const Extents e{4, 4, 4};
  Rng rng(1);
  auto labels = oracle::random_labels(e, rng);
  auto uniform = Tensor::full({1, 2, 4, 4, 4}, 0.5);
  CHECK(cross_entropy(uniform, labels).item() == doctest::Approx(std::log(2.0)).epsilon(1e-14));

  std::vector<double> perfect(2 * 64);
  for (std::size_t i = 0; i < 64; ++i) perfect[labels[i] * 64 + i] = 1.0;
  auto pp = Tensor::from_data({1, 2, 4, 4, 4}, perfect);
  DensityMap B(e, 0.7);
  CHECK(cross_entropy(pp, labels).item() == 0.0);
  CHECK(weighted_cross_entropy(pp, labels, alpha).item() == 0.0);
  CHECK(focal_loss(pp, labels, 3.0).item() == 0.0);
  CHECK(boundary_loss(pp, labels, B).item() == 0.0);
}

TEST_CASE("losses match direct-loop oracles") {
  Rng rng(2);
  for (std::size_t n : {1u, 2u}) {
    const Extents e{4, 4, 4};
    const auto p = random_probs(n, e, rng);
    const auto l = random_labels(n, e, rng);
    const auto B = random_density(n, e, rng);
    const std::vector<double> alpha{0.3, 1.7};
    CHECK(std::abs(cross_entropy(p, l).item() - loop_ce(p, l)) < 1e-12);
    CHECK(std::abs(weighted_cross_entropy(p, l, alpha).item() - loop_wce(p, l, alpha)) < 1e-12);
    for (double g : {0.0, 0.5, 2.0, 3.0})
      CHECK(std::abs(focal_loss(p, l, g).item() - loop_focal(p, l, g)) < 1e-12);
    CHECK(std::abs(boundary_loss(p, l, B).item() - loop_boundary(p, l, B)) < 1e-12);
  }
}

TEST_CASE("reduction identities hold to 1e-12") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Extents e{4, 4, 4};
    const auto p = random_probs(1, e, rng);
    const auto l = oracle::random_labels(e, rng);
    const double ce = cross_entropy(p, l).item();
    const double ones[] = {1.0, 1.0};
    CHECK(std::abs(focal_loss(p, l, 0.0).item() - ce) < 1e-12);
    CHECK(std::abs(weighted_cross_entropy(p, l, ones).item() - ce) < 1e-12);
    CHECK(std::abs(boundary_loss(p, l, DensityMap(e, 1.0)).item() - ce) < 1e-12);
  }
}

TEST_CASE("boundary loss is invariant to scaling B") {
  Rng rng(4);
  const Extents e{4, 5, 3};
  const auto p = random_probs(1, e, rng);
  const auto l = random_labels(1, e, rng);
  auto B = random_density(1, e, rng);
  const double base = boundary_loss(p, l[0], B[0]).item();
  for (double s : {1e-3, 0.5, 7.0, 1e4}) {
    DensityMap scaled = B[0];
    for (auto& v : scaled.values()) v *= s;
    CHECK(boundary_loss(p, l[0], scaled).item() == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("losses are nonnegative and finite at zero probability") {
  const Extents one{1, 1, 1};
  LabelVolume brain(one, 1);
  auto p = Tensor::from_data({1, 2, 1, 1, 1}, {1.0, 0.0});
  CHECK(cross_entropy(p, brain).item() == doctest::Approx(-std::log(1e-12)));
  CHECK(std::isfinite(focal_loss(p, brain, 2.0).item()));
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const Extents e{2, 3, 2};
    const auto q = random_probs(1, e, rng);
    const auto l = oracle::random_labels(e, rng);
    const double alpha[] = {0.5, 2.0};
    CHECK(cross_entropy(q, l).item() > 0);
    CHECK(weighted_cross_entropy(q, l, alpha).item() > 0);
    CHECK(focal_loss(q, l, 2.0).item() > 0);
    CHECK(boundary_loss(q, l, DensityMap(e, 0.3)).item() > 0);
  }
}

TEST_CASE("loss gradients match finite differences") {
  Rng rng(6);
  const Extents shapes[] = {{2, 2, 2}, {3, 1, 4}, {4, 4, 4}};
  for (const auto& e : shapes) {
    for (std::size_t n : {1u, 2u}) {
      auto p = random_leaf_probs(n, 2, e, rng);
      const auto l = random_labels(n, e, rng);
      const auto B = random_density(n, e, rng);
      const std::vector<double> alpha{0.4, 1.9};
      CHECK(oracle::gradient_error({p}, [&] { return cross_entropy(p, l); }) < 1e-4);
      CHECK(oracle::gradient_error({p}, [&] { return weighted_cross_entropy(p, l, alpha); }) < 1e-4);
      CHECK(oracle::gradient_error({p}, [&] { return focal_loss(p, l, 2.0); }) < 1e-4);
      CHECK(oracle::gradient_error({p}, [&] { return focal_loss(p, l, 0.7); }) < 1e-4);
      CHECK(oracle::gradient_error({p}, [&] { return boundary_loss(p, l, B); }) < 1e-4);
    }
  }
}

TEST_CASE("loss gradients through softmax match finite differences") {
  Rng rng(7);
  const Extents e{3, 2, 3};
  auto logits = oracle::random_tensor({1, 2, 3, 2, 3}, rng, -2, 2, true);
  const auto l = random_labels(1, e, rng);
  const auto B = random_density(1, e, rng);
  LossConfig config;
  for (auto kind : {LossKind::ce, LossKind::wce, LossKind::focal, LossKind::boundary}) {
    config.kind = kind;
    config.alpha = {0.6, 1.4};
    CHECK(oracle::gradient_error({logits}, [&] { return compute_loss(config, softmax_channels(logits), l, B); }) <
          1e-4);
  }
}

TEST_CASE("loss errors") {
  const Extents e{2, 2, 2};
  auto p = Tensor::full({1, 2, 2, 2, 2}, 0.5);
  LabelVolume l(e, 0);
  CHECK_THROWS_AS(boundary_loss(p, l, DensityMap(e, 0.0)), ContractError);
  CHECK_THROWS_AS(cross_entropy(p, LabelVolume({2, 2, 3}, 0)), ShapeError);
  LabelVolume bad(e, 0);
  bad[3] = 2;
  CHECK_THROWS_AS(cross_entropy(p, bad), ContractError);
  LossConfig c;
  c.gamma = -1;
  CHECK_THROWS_AS(c.validate(2), ConfigError);
  c = {};
  c.alpha = {1.0, 0.0};
  CHECK_THROWS_AS(c.validate(2), ConfigError);
  CHECK_THROWS_AS(parse_loss("dice"), ConfigError);
  CHECK(parse_loss("boundary") == LossKind::boundary);
}

TEST_CASE("boundary extraction") {
  CHECK(extract_boundary(LabelVolume({5, 5, 5}, 0)) == LabelVolume({5, 5, 5}, 0));

  LabelVolume single({5, 5, 5}, 0);
  single(2, 3, 1) = 1;
  CHECK(extract_boundary(single) == single);

  const auto cube = cube_mask(9, 2, 7);
  const auto b = extract_boundary(cube);
  std::size_t count = 0;
  for (auto v : b.values()) count += v;
  CHECK(count == 98);
  CHECK(b == scan_boundary(cube));

  // Brain touching the grid edge: positions outside count as background.
  const auto full = LabelVolume({4, 4, 4}, 1);
  std::size_t edge = 0;
  const auto full_boundary = extract_boundary(full);
  for (auto v : full_boundary.values()) edge += v;
  CHECK(edge == 64 - 8);

  Rng rng(8);
  for (int t = 0; t < 5; ++t) {
    const auto m = oracle::random_labels({6, 7, 5}, rng);
    const auto bb = extract_boundary(m);
    CHECK(bb == scan_boundary(m));
    for (std::size_t i = 0; i < m.size(); ++i) CHECK(bb[i] <= m[i]);
  }

  // Interior of a solid sphere (mask minus boundary) is a smaller solid whose
  // own interior boundary is again a closed shell inside the original.
  const auto sphere = sphere_mask(15, 5.5);
  auto interior = sphere;
  const auto shell = extract_boundary(sphere);
  for (std::size_t i = 0; i < interior.size(); ++i) interior[i] = sphere[i] && !shell[i];
  const auto inner_shell = extract_boundary(interior);
  for (std::size_t i = 0; i < interior.size(); ++i) CHECK((inner_shell[i] && shell[i]) == false);

  LabelVolume nonbinary({2, 2, 2}, 0);
  nonbinary[0] = 2;
  CHECK_THROWS_AS(extract_boundary(nonbinary), ContractError);
}

TEST_CASE("26-connected boundary is a superset of the 6-connected one") {
  const auto sphere = sphere_mask(13, 4.7);
  const auto b6 = extract_boundary(sphere, Connectivity::six);
  const auto b26 = extract_boundary(sphere, Connectivity::twenty_six);
  std::size_t n6 = 0, n26 = 0;
  for (std::size_t i = 0; i < b6.size(); ++i) {
    CHECK(b6[i] <= b26[i]);
    n6 += b6[i];
    n26 += b26[i];
  }
  CHECK(n26 > n6);
}

TEST_CASE("density map of a single voxel") {
  LabelVolume b({15, 15, 15}, 0);
  b(7, 7, 7) = 1;
  for (double sigma : {0.7, 1.0, 2.0}) {
    const auto r = density_map(b, sigma, 0.0);
    CHECK_FALSE(r.empty_boundary);
    CHECK(r.map(7, 7, 7) == 1.0);
    CHECK(*std::max_element(r.map.values().begin(), r.map.values().end()) == 1.0);
  }
  const auto r = density_map(b, 2.0, 0.0);
  CHECK(std::abs(r.map(7, 7, 9) / r.map(7, 7, 7) - std::exp(-0.5)) < 1e-3);
  CHECK(std::abs(r.map(9, 7, 7) - 0.60653) < 1e-5);
  // Truncation: the kernel stops at floor(3 sigma) = 6 voxels.
  CHECK(r.map(7, 7, 13) > 0.0);
  CHECK(r.map(7, 7, 14) == 0.0);

  const auto floored = density_map(b, 2.0, 0.05);
  CHECK(floored.map(7, 7, 7) == 1.05);
  for (double v : floored.map.values()) CHECK(v >= 0.05);
}

TEST_CASE("density map decays monotonically away from a plane") {
  LabelVolume b({12, 12, 20}, 0);
  for (std::size_t z = 0; z < 12; ++z)
    for (std::size_t y = 0; y < 12; ++y) b(z, y, 5) = 1;
  const auto r = density_map(b, 1.5, 0.0);
  for (std::size_t x = 5; x + 1 < 20; ++x) CHECK(r.map(6, 6, x + 1) <= r.map(6, 6, x));
  for (std::size_t x = 5; x > 0; --x) CHECK(r.map(6, 6, x - 1) <= r.map(6, 6, x));
  CHECK(r.map(6, 6, 6) < r.map(6, 6, 5));
}

TEST_CASE("density map matches direct Gaussian summation") {
  const auto sphere = sphere_mask(16, 5.0);
  const auto b = extract_boundary(sphere);
  for (double sigma : {1.0, 1.5, 2.0}) {
    const long radius = std::max(1L, static_cast<long>(std::floor(3 * sigma)));
    const auto oracle_map = direct_gaussian(b, sigma, radius);
    const auto r = density_map(b, sigma, 0.0);
    double worst = 0;
    for (std::size_t i = 0; i < b.size(); ++i) worst = std::max(worst, std::abs(r.map[i] - oracle_map[i]));
    CHECK(worst < 1e-3);
  }
}

TEST_CASE("density map mass concentrates near the boundary") {
  const std::size_t n = 28;
  const auto sphere = sphere_mask(n, 9.0);
  const auto b = extract_boundary(sphere);
  const double sigma = 2.0;
  const auto r = density_map(b, sigma, 0.0);
  std::vector<std::array<long, 3>> pts;
  for (std::size_t z = 0; z < n; ++z)
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x < n; ++x)
        if (b(z, y, x)) pts.push_back({long(z), long(y), long(x)});
  double near = 0, total = 0;
  for (std::size_t z = 0; z < n; ++z)
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x < n; ++x) {
        double best = 1e30;
        for (const auto& p : pts) {
          const double d2 = double((p[0] - long(z)) * (p[0] - long(z)) + (p[1] - long(y)) * (p[1] - long(y)) +
                                   (p[2] - long(x)) * (p[2] - long(x)));
          best = std::min(best, d2);
        }
        const double m = r.map(z, y, x);
        total += m;
        if (std::sqrt(best) <= 3 * sigma) near += m;
      }
  CHECK(near / total >= 0.8);
}

TEST_CASE("empty boundary yields the floor and a flag") {
  const auto r = density_map(LabelVolume({4, 4, 4}, 0), 2.0, 0.05);
  CHECK(r.empty_boundary);
  for (double v : r.map.values()) CHECK(v == 0.05);
  CHECK_THROWS_AS(density_map(LabelVolume({4, 4, 4}, 0), 0.0, 0.05), ContractError);
  LossConfig c;
  const auto d = boundary_density(cube_mask(8, 2, 6), c);
  CHECK(*std::max_element(d.map.values().begin(), d.map.values().end()) == doctest::Approx(1.0 + c.density_floor));
}
