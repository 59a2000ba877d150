#pragma once

// Synthetic fisheye geometry: the square-to-disc map, the exponential radial
// compression, their inverses, an inverse-mapping image warp and the pixel
// density diagnostic.
//
// Coordinate frames:
//   square frame  normalized source coordinates, [-1, 1]^2, centered
//   disc frame    normalized output coordinates, unit disc
// A source image of W x H pixels spans the square with pixel c centered at
// (c + 0.5) * 2 / W - 1. The output raster has side 2R; output pixel c is
// centered at (c + 0.5 - R) / R. After radial compression the content disc
// has radius exp(-k); the output frame is magnified by exp(k) so the content
// always fills the full output disc.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "spe/core.hpp"
#include "spe/image.hpp"
#include "spe/parallel.hpp"

namespace spe {

struct FisheyeParams {
  double k = 0.1;
  double n_exp = 2.0;
  int out_radius = 160;
  int in_width = 320;
  int in_height = 320;

  void validate() const {
    if (!(k >= 0.0)) detail::fail<ConfigError>("FisheyeParams", "k must be >= 0");
    if (!(n_exp > 0.0)) detail::fail<ConfigError>("FisheyeParams", "n_exp must be > 0");
    if (out_radius < 1) detail::fail<ConfigError>("FisheyeParams", "out_radius must be >= 1");
    if (in_width < 1 || in_height < 1) {
      detail::fail<ConfigError>("FisheyeParams", "source size must be positive");
    }
  }

  // d/dr [r exp(-k r^n)] = exp(-k r^n) (1 - k n r^n) is positive on [0, 1]
  // exactly when k * n < 1.
  bool monotone() const { return k * n_exp < 1.0; }

  void require_invertible() const {
    validate();
    if (!monotone()) {
      detail::fail<ConfigError>("FisheyeParams",
                                "radial map is not monotone on [0, 1] (need k * n_exp < 1)");
    }
  }

  // Radius of the unit disc's image under the radial map.
  double max_radius() const { return std::exp(-k); }
};

// ---- pointwise maps -------------------------------------------------------

inline Point2 square_to_disc(Point2 p) {
  if (!(std::abs(p.x) <= 1.0 && std::abs(p.y) <= 1.0)) {
    detail::fail<DomainError>("square_to_disc", "point outside [-1, 1]^2");
  }
  return {p.x * std::sqrt(1.0 - 0.5 * p.y * p.y), p.y * std::sqrt(1.0 - 0.5 * p.x * p.x)};
}

// Closed-form inverse of square_to_disc. Evaluated on (|u|, |v|), i.e. the
// first-quadrant branch, with signs restored afterwards; in that quadrant the
// second radicand equals (u - sqrt2)^2 - v^2 >= 0 for every disc point.
inline Point2 disc_to_square(Point2 p) {
  const double u = std::abs(p.x);
  const double v = std::abs(p.y);
  if (!(u * u + v * v <= 1.0 + 1e-12)) {
    detail::fail<DomainError>("disc_to_square", "point outside the unit disc");
  }
  constexpr double two_sqrt2 = 2.0 * std::numbers::sqrt2;
  const double du = 2.0 + u * u - v * v;
  const double dv = 2.0 - u * u + v * v;
  const double x = 0.5 * std::sqrt(std::max(0.0, du + two_sqrt2 * u)) -
                   0.5 * std::sqrt(std::max(0.0, du - two_sqrt2 * u));
  const double y = 0.5 * std::sqrt(std::max(0.0, dv + two_sqrt2 * v)) -
                   0.5 * std::sqrt(std::max(0.0, dv - two_sqrt2 * v));
  return {std::copysign(std::min(x, 1.0), p.x), std::copysign(std::min(y, 1.0), p.y)};
}

inline double radial_factor(double r, const FisheyeParams& params) {
  return std::exp(-params.k * std::pow(r, params.n_exp));
}

inline double radial_forward(double r, const FisheyeParams& params) {
  return r * radial_factor(r, params);
}

inline Point2 radial_scale(Point2 p, const FisheyeParams& params) {
  const double r = p.norm();
  if (!(r <= 1.0 + 1e-12)) detail::fail<DomainError>("radial_scale", "point outside the unit disc");
  const double f = radial_factor(r, params);
  return {p.x * f, p.y * f};
}

// Bisection on [0, 1]; the result satisfies |forward(r_in) - r_out| <= 1e-6
// with a large margin (the bracket is shrunk to machine precision).
inline double invert_radial_scale(double r_out, const FisheyeParams& params) {
  params.require_invertible();
  const double r_max = params.max_radius();
  if (!(r_out >= 0.0) || r_out > r_max * (1.0 + 1e-12)) {
    detail::fail<DomainError>("invert_radial_scale", "radius outside [0, exp(-k)]");
  }
  if (params.k == 0.0 || r_out == 0.0) return r_out;
  if (r_out >= r_max) return 1.0;
  double lo = 0.0;
  double hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (radial_forward(mid, params) < r_out) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Square frame -> disc frame (including the exp(k) magnification).
inline Point2 fisheye_map(Point2 square_pt, const FisheyeParams& params) {
  const Point2 scaled = radial_scale(square_to_disc(square_pt), params);
  const double zoom = 1.0 / params.max_radius();
  return {scaled.x * zoom, scaled.y * zoom};
}

// Disc frame -> square frame.
inline Point2 fisheye_unmap(Point2 disc_pt, const FisheyeParams& params) {
  const double rho = disc_pt.norm();
  if (!(rho <= 1.0 + 1e-12)) detail::fail<DomainError>("fisheye_unmap", "point outside the disc");
  if (rho == 0.0) return {0.0, 0.0};
  const double r_in = invert_radial_scale(std::min(rho, 1.0) * params.max_radius(), params);
  const double s = r_in / rho;
  return disc_to_square({disc_pt.x * s, disc_pt.y * s});
}

// ---- pixel frames ---------------------------------------------------------

inline double source_px_to_norm(double px, int extent) { return (px + 0.5) * 2.0 / extent - 1.0; }
inline double norm_to_source_px(double v, int extent) { return (v + 1.0) * extent / 2.0 - 0.5; }
inline double output_px_to_norm(double px, int radius) { return (px + 0.5 - radius) / radius; }
inline double norm_to_output_px(double v, int radius) { return v * radius + radius - 0.5; }

// ---- image warp -----------------------------------------------------------

struct WarpOptions {
  std::uint8_t fill = 0;
  std::size_t workers = 1;
};

// Inverse-mapping warp: every output pixel inside the disc pulls a bilinear
// sample from the source. Pixels outside the disc get options.fill.
inline Image8 warp_image(const Image8& src, const FisheyeParams& params,
                         const WarpOptions& options = {}) {
  if (src.empty()) detail::fail<DomainError>("warp_image", "empty source image");
  FisheyeParams p = params;
  p.in_width = src.width();
  p.in_height = src.height();
  p.require_invertible();

  const int side = 2 * p.out_radius;
  Image8 out(side, side, src.channels(), options.fill);
  parallel_for(static_cast<std::size_t>(side), options.workers, [&](std::size_t y0, std::size_t y1) {
    std::vector<double> value(src.channels());
    for (std::size_t y = y0; y < y1; ++y) {
      const double v = output_px_to_norm(static_cast<double>(y), p.out_radius);
      for (int x = 0; x < side; ++x) {
        const double u = output_px_to_norm(x, p.out_radius);
        if (u * u + v * v > 1.0) continue;
        const Point2 sq = fisheye_unmap({u, v}, p);
        sample_bilinear_at(src, norm_to_source_px(sq.x, p.in_width),
                           norm_to_source_px(sq.y, p.in_height), value);
        for (int c = 0; c < src.channels(); ++c) {
          out.at(x, static_cast<int>(y), c) = to_u8(value[c]);
        }
      }
    }
  });
  return out;
}

// Pulls a width x height source-frame image back out of a warped disc.
inline Image8 unwarp_image(const Image8& disc, const FisheyeParams& params, int width, int height,
                           std::size_t workers = 1) {
  if (disc.empty()) detail::fail<DomainError>("unwarp_image", "empty disc image");
  FisheyeParams p = params;
  p.out_radius = disc.width() / 2;
  p.in_width = width;
  p.in_height = height;
  p.require_invertible();
  Image8 out(width, height, disc.channels());
  parallel_for(static_cast<std::size_t>(height), workers, [&](std::size_t y0, std::size_t y1) {
    std::vector<double> value(disc.channels());
    for (std::size_t y = y0; y < y1; ++y) {
      const double sy = source_px_to_norm(static_cast<double>(y), height);
      for (int x = 0; x < width; ++x) {
        const Point2 d = fisheye_map({source_px_to_norm(x, width), sy}, p);
        sample_bilinear_at(disc, norm_to_output_px(d.x, p.out_radius),
                           norm_to_output_px(d.y, p.out_radius), value);
        for (int c = 0; c < disc.channels(); ++c) out.at(x, static_cast<int>(y), c) = to_u8(value[c]);
      }
    }
  });
  return out;
}

// ---- pixel density --------------------------------------------------------

struct DensitySample {
  double x = 0.0;  // mapped position, output pixels
  double y = 0.0;
  double radius_frac = 0.0;  // mapped radius / out_radius
  double density = 0.0;
};

// One entry per source pixel. Entries outside the evaluation radius (or whose
// 3x3 neighborhood leaves the source square) are absent.
struct DensityMap {
  int width = 0;
  int height = 0;
  int out_radius = 0;
  double eval_radius_frac = 0.95;
  std::vector<std::optional<DensitySample>> values;

  const std::optional<DensitySample>& at(int x, int y) const {
    return values[static_cast<std::size_t>(y) * width + x];
  }

  std::size_t retained() const {
    return static_cast<std::size_t>(std::count_if(values.begin(), values.end(),
                                                  [](const auto& v) { return v.has_value(); }));
  }
};

// Signed shoelace area of the mapped 3x3-neighborhood corner quad around a
// source pixel, in output pixels^2. Corners are visited (-,-), (+,-), (+,+),
// (-,+) so an orientation-preserving map yields a positive area.
inline double mapped_corner_area(Point2 center, Point2 step, const FisheyeParams& params) {
  const Point2 offsets[4] = {{-1, -1}, {1, -1}, {1, 1}, {-1, 1}};
  Point2 q[4];
  for (int i = 0; i < 4; ++i) {
    const Point2 d = fisheye_map({center.x + offsets[i].x * step.x, center.y + offsets[i].y * step.y}, params);
    q[i] = {d.x * params.out_radius, d.y * params.out_radius};
  }
  double twice = 0.0;
  for (int i = 0; i < 4; ++i) {
    const Point2& a = q[i];
    const Point2& b = q[(i + 1) % 4];
    twice += a.x * b.y - b.x * a.y;
  }
  return 0.5 * twice;
}

// density = (4 px^2 source corner quad) / (mapped corner quad area).
inline DensityMap density_map(const FisheyeParams& params, double eval_radius_frac = 0.95,
                              std::size_t workers = 1) {
  params.require_invertible();
  if (!(eval_radius_frac > 0.0 && eval_radius_frac <= 1.0)) {
    detail::fail<DomainError>("density_map", "eval_radius_frac must lie in (0, 1]");
  }
  DensityMap map;
  map.width = params.in_width;
  map.height = params.in_height;
  map.out_radius = params.out_radius;
  map.eval_radius_frac = eval_radius_frac;
  map.values.resize(static_cast<std::size_t>(map.width) * map.height);

  const Point2 step{2.0 / params.in_width, 2.0 / params.in_height};
  constexpr double source_area = 4.0;
  parallel_for(static_cast<std::size_t>(map.height), workers, [&](std::size_t y0, std::size_t y1) {
    for (std::size_t y = y0; y < y1; ++y) {
      const double sy = source_px_to_norm(static_cast<double>(y), params.in_height);
      for (int x = 0; x < map.width; ++x) {
        const Point2 s{source_px_to_norm(x, params.in_width), sy};
        if (std::abs(s.x) + step.x > 1.0 || std::abs(s.y) + step.y > 1.0) continue;
        const Point2 d = fisheye_map(s, params);
        const double rf = d.norm();
        if (rf > eval_radius_frac) continue;
        const double area = mapped_corner_area(s, step, params);
        if (!(area > 0.0)) continue;
        map.values[y * map.width + x] = DensitySample{norm_to_output_px(d.x, params.out_radius),
                                                      norm_to_output_px(d.y, params.out_radius), rf,
                                                      source_area / area};
      }
    }
  });
  return map;
}

// Mean density over retained samples with mapped radius in [lo, hi) (fractions
// of out_radius). Empty when no sample falls in the ring.
inline std::optional<double> ring_average(const DensityMap& map, double lo, double hi) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& v : map.values) {
    if (v && v->radius_frac >= lo && v->radius_frac < hi) {
      sum += v->density;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

inline std::vector<std::optional<double>> radial_profile(const DensityMap& map, int bins) {
  std::vector<std::optional<double>> out;
  for (int b = 0; b < bins; ++b) {
    out.push_back(ring_average(map, static_cast<double>(b) / bins, static_cast<double>(b + 1) / bins));
  }
  return out;
}

inline void write_density_csv(std::ostream& os, const DensityMap& map) {
  os << "x,y,density\n";
  os.precision(10);
  for (const auto& v : map.values) {
    if (v) os << v->x << ',' << v->y << ',' << v->density << '\n';
  }
}

// Grayscale heatmap on the output frame, normalized to [min, max] of the
// retained densities. Each output pixel looks up the source pixel it pulls
// from; pixels with no retained density are black.
inline Image8 render_density(const DensityMap& map, const FisheyeParams& params) {
  double lo = INFINITY;
  double hi = -INFINITY;
  for (const auto& v : map.values) {
    if (v) {
      lo = std::min(lo, v->density);
      hi = std::max(hi, v->density);
    }
  }
  const int side = 2 * map.out_radius;
  Image8 out(side, side, 1, 0);
  if (!(hi >= lo)) return out;
  const double span = hi > lo ? hi - lo : 1.0;
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const Point2 d{output_px_to_norm(x, map.out_radius), output_px_to_norm(y, map.out_radius)};
      if (d.norm() > 1.0) continue;
      const Point2 s = fisheye_unmap(d, params);
      const int sx = std::clamp(static_cast<int>(std::lround(norm_to_source_px(s.x, map.width))), 0, map.width - 1);
      const int sy = std::clamp(static_cast<int>(std::lround(norm_to_source_px(s.y, map.height))), 0, map.height - 1);
      if (const auto& v = map.at(sx, sy)) out.at(x, y) = to_u8(1.0 + 254.0 * (v->density - lo) / span);
    }
  }
  return out;
}

}  // namespace spe
