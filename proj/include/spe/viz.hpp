#pragma once

// Raster renderers for sampling grids, sector boundaries and matrices.
// Colors come from a fixed palette so rendered output is reproducible.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "spe/image.hpp"
#include "spe/sampler.hpp"
#include "spe/sector_patch.hpp"

namespace spe {

using Rgb = std::array<std::uint8_t, 3>;

// Ring n uses kRingPalette[(n - 1) % 8].
inline constexpr std::array<Rgb, 8> kRingPalette{{{230, 25, 75},
                                                   {60, 180, 75},
                                                   {255, 225, 25},
                                                   {0, 130, 200},
                                                   {245, 130, 48},
                                                   {145, 30, 180},
                                                   {70, 240, 240},
                                                   {240, 50, 230}}};
inline constexpr Rgb kBoundaryColor{255, 255, 255};

struct Rendering {
  Image8 image;
  std::size_t marks = 0;  // points or sectors drawn
};

namespace detail {

inline void put(Image8& img, long x, long y, const Rgb& color) {
  if (x < 0 || y < 0 || x >= img.width() || y >= img.height()) return;
  for (int c = 0; c < 3; ++c) img.at(static_cast<int>(x), static_cast<int>(y), c) = color[c];
}

}  // namespace detail

// One pixel per grid point on a black canvas of the given size. marks counts
// distinct pixels lit, which equals the point count when the canvas is large
// enough that no two points round to the same pixel.
inline Rendering render_grid(const SamplingGrid& grid, int width, int height) {
  Rendering out{Image8(width, height, 3, 0), 0};
  std::vector<std::uint8_t> lit(static_cast<std::size_t>(width) * height, 0);
  for (const auto& p : grid.points) {
    const long x = std::lround(p.x);
    const long y = std::lround(p.y);
    if (x < 0 || y < 0 || x >= width || y >= height) continue;
    detail::put(out.image, x, y, kRingPalette[static_cast<std::size_t>(p.ring - 1) % kRingPalette.size()]);
    auto& flag = lit[static_cast<std::size_t>(y) * width + x];
    if (!flag) {
      flag = 1;
      ++out.marks;
    }
  }
  return out;
}

// Draws each sector's two bounding radii and its inner and outer arcs over
// base (or a black canvas of side 2 * radius when base is empty), centered on
// the canvas.
inline Rendering render_patches(const SectorPatchLayout& layout, const Image8& base = {}) {
  Image8 canvas;
  if (base.empty()) {
    const int side = static_cast<int>(std::ceil(2.0 * layout.radius()));
    canvas = Image8(side, side, 3, 0);
  } else {
    canvas = base;
    if (canvas.channels() != 3) detail::fail<DomainError>("render_patches", "base image must be RGB");
  }
  const double cx = 0.5 * (canvas.width() - 1);
  const double cy = 0.5 * (canvas.height() - 1);
  const auto plot = [&](double r, double theta) {
    detail::put(canvas, std::lround(cx + r * std::cos(theta)), std::lround(cy + r * std::sin(theta)), kBoundaryColor);
  };

  for (const auto& s : layout.specs()) {
    const double start = s.alpha - 0.5 * s.theta_width;
    for (double r = s.r1; r <= s.r2; r += 0.5) plot(r, start);
    for (double r : {s.r1, s.r2}) {
      const int steps = std::max(2, static_cast<int>(std::ceil(r * s.theta_width * 2.0)));
      for (int i = 0; i <= steps; ++i) plot(r, start + s.theta_width * i / steps);
    }
  }
  return {std::move(canvas), layout.patch_count()};
}

// Grayscale rows x cols image of a row-major matrix, normalized to [min, max].
inline Image8 render_matrix(const std::vector<double>& values, int rows, int cols) {
  if (static_cast<std::size_t>(rows) * cols != values.size() || values.empty()) {
    detail::fail<DomainError>("render_matrix", "shape does not match data");
  }
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double span = *hi_it > lo ? *hi_it - lo : 1.0;
  Image8 img(cols, rows, 1);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      img.at(c, r) = to_u8(255.0 * (values[static_cast<std::size_t>(r) * cols + c] - lo) / span);
    }
  }
  return img;
}

}  // namespace spe
