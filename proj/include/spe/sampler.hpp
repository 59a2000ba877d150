#pragma once

// Circular sampling on concentric rings whose point counts match the
// concentric square shells of an ordinary pixel grid (4, 12, 20, 28, ...),
// plus the square-grid baseline.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "spe/core.hpp"
#include "spe/image.hpp"
#include "spe/parallel.hpp"

namespace spe {

// Points on ring n (1-based).
constexpr std::int64_t ring_count(std::int64_t n) {
  if (n < 1) throw DomainError("ring_count: ring index must be >= 1");
  return 8 * n - 4;
}

// Points on rings 1..n-1, i.e. the flat index of (n, 0).
constexpr std::int64_t ring_offset(std::int64_t n) {
  if (n < 1) throw DomainError("ring_offset: ring index must be >= 1");
  return 4 * (n - 1) * (n - 1);
}

constexpr std::int64_t grid_size(std::int64_t rings) { return 4 * rings * rings; }

// Angular origin of slot boundaries: straight up in image coordinates.
inline constexpr double kDefaultTheta0 = -kPi / 2.0;

// Slot j of ring n sits at the center of the j-th of 8n-4 equal arcs starting
// at theta0, so the first slot is half a slot gap past theta0.
inline double slot_angle(double theta0, int ring, int slot) {
  const double m = static_cast<double>(ring_count(ring));
  return theta0 + kTwoPi * (slot + 0.5) / m;
}

struct GridPoint {
  int ring = 0;
  int slot = 0;
  double r = 0.0;
  double theta = 0.0;
  double x = 0.0;
  double y = 0.0;
};

struct SamplingGrid {
  int rings = 0;
  double radius = 0.0;
  double ring_spacing = 0.0;
  Point2 center;
  double theta0 = kDefaultTheta0;
  std::vector<GridPoint> points;  // ring-major, slot-minor

  std::size_t size() const { return points.size(); }
  std::size_t index(int ring, int slot) const {
    return static_cast<std::size_t>(ring_offset(ring) + slot);
  }
  const GridPoint& at(int ring, int slot) const { return points[index(ring, slot)]; }
};

// Ring n sits at radius n * radius / N; there is no ring at the center.
inline SamplingGrid build_grid(int rings, double radius, Point2 center = {},
                               double theta0 = kDefaultTheta0) {
  if (rings < 1) detail::fail<DomainError>("build_grid", "need at least one ring");
  if (!(radius > 0.0)) detail::fail<DomainError>("build_grid", "radius must be positive");
  SamplingGrid grid;
  grid.rings = rings;
  grid.radius = radius;
  grid.ring_spacing = radius / rings;
  grid.center = center;
  grid.theta0 = theta0;
  grid.points.reserve(static_cast<std::size_t>(grid_size(rings)));
  for (int n = 1; n <= rings; ++n) {
    const double r = n * grid.ring_spacing;
    const int m = static_cast<int>(ring_count(n));
    for (int j = 0; j < m; ++j) {
      const double theta = slot_angle(theta0, n, j);
      grid.points.push_back({n, j, r, theta, center.x + r * std::cos(theta), center.y + r * std::sin(theta)});
    }
  }
  return grid;
}

// Grid inscribed in an image: centered, radius = half the shorter side.
inline SamplingGrid build_grid_for_image(int rings, int width, int height,
                                         double theta0 = kDefaultTheta0) {
  return build_grid(rings, 0.5 * std::min(width, height), {0.5 * (width - 1), 0.5 * (height - 1)}, theta0);
}

// Per-point feature vectors on a polar raster (ring n holds 8n-4 slots),
// ordered like SamplingGrid::points, channels innermost.
struct PolarField {
  int rings = 0;
  int channels = 0;
  std::vector<double> values;

  PolarField() = default;
  PolarField(int rings_, int channels_, double fill = 0.0)
      : rings(rings_), channels(channels_),
        values(static_cast<std::size_t>(grid_size(rings_)) * channels_, fill) {}

  std::size_t points() const { return static_cast<std::size_t>(grid_size(rings)); }
  std::span<double> point(std::size_t i) { return {values.data() + i * channels, std::size_t(channels)}; }
  std::span<const double> point(std::size_t i) const {
    return {values.data() + i * channels, std::size_t(channels)};
  }

  friend bool operator==(const PolarField&, const PolarField&) = default;
};

// Bilinear sample at every grid point; out-of-bounds points clamp to the edge.
template <class T>
PolarField sample_bilinear(const Image<T>& img, const SamplingGrid& grid, std::size_t workers = 1) {
  if (img.empty()) detail::fail<DomainError>("sample_bilinear", "empty image");
  PolarField field(grid.rings, img.channels());
  parallel_for(grid.size(), workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      sample_bilinear_at(img, grid.points[i].x, grid.points[i].y, field.point(i));
    }
  });
  return field;
}

inline void write_grid_csv(std::ostream& os, const SamplingGrid& grid) {
  os << "n,j,r,theta,x,y\n";
  os.precision(12);
  for (const auto& p : grid.points) {
    os << p.ring << ',' << p.slot << ',' << p.r << ',' << p.theta << ',' << p.x << ',' << p.y << '\n';
  }
}

// ---- square baseline ------------------------------------------------------

struct SquareGrid {
  int side = 0;
  int patch = 0;
  std::vector<Point2> points;  // pixel centers, row-major
  std::vector<int> patch_of;   // row-major patch id per point
  std::vector<int> shell_of;   // concentric square shell, 1 = innermost

  int patches_per_side() const { return side / patch; }
  int patch_count() const { return patches_per_side() * patches_per_side(); }
  int shells() const { return (side + 1) / 2; }

  std::int64_t shell_size(int shell) const {
    std::int64_t count = 0;
    for (int s : shell_of) count += (s == shell);
    return count;
  }
};

inline SquareGrid build_square_grid(int side, int patch) {
  if (side < 1 || patch < 1) detail::fail<ConfigError>("build_square_grid", "side and patch must be positive");
  if (side % patch != 0) detail::fail<ConfigError>("build_square_grid", "patch must divide side");
  SquareGrid g;
  g.side = side;
  g.patch = patch;
  const int per_side = side / patch;
  g.points.reserve(static_cast<std::size_t>(side) * side);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      g.points.push_back({static_cast<double>(x), static_cast<double>(y)});
      g.patch_of.push_back((y / patch) * per_side + x / patch);
      // Chebyshev distance from the grid center in doubled units.
      const int d = std::max(std::abs(2 * x - side + 1), std::abs(2 * y - side + 1));
      g.shell_of.push_back(side % 2 == 0 ? (d + 1) / 2 : d / 2 + 1);
    }
  }
  return g;
}

}  // namespace spe
