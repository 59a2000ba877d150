#pragma once

// Sector patches: annular sectors over the circular sampling grid, all with
// the same area and the same number of sampling points.
//
// Rings are grouped into bands of g consecutive rings. Band b (1-based)
// holds 4g^2(2b-1) points and spans an annulus of area proportional to
// g^2(2b-1), so splitting it into K_b = q(2b-1) equal angular sectors gives
// every sector p = 4g^2/q points and the same area. Sector boundaries start at
// the grid's theta0 in every band.
//
// Point counts per sector are exact (not just on average) only when
// q divides 4 * odd(g), odd(g) being g with its factors of two removed. With
// slot-centered rings and such q, the per-ring rounding excesses of rings
// that sit symmetrically about the middle of a band cancel, and no slot
// center ever falls on a sector boundary.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "spe/core.hpp"
#include "spe/parallel.hpp"
#include "spe/sampler.hpp"

namespace spe {

struct SectorPatchSpec {
  double r1 = 0.0;
  double r2 = 0.0;
  double theta_width = 0.0;
  double alpha = 0.0;  // angle of the sector center
  int band = 0;        // 1-based
  int sector = 0;      // 0-based within the band

  double area() const { return 0.5 * theta_width * (r2 * r2 - r1 * r1); }
  double anchor_radius() const { return 0.5 * (r1 + r2); }
};

namespace detail {

constexpr int odd_part(int v) {
  while (v > 0 && v % 2 == 0) v /= 2;
  return v;
}

}  // namespace detail

// Empty string when (rings, rings_per_band, angular_mult) yields an exact
// equal-count partition, otherwise the reason it does not.
inline std::string layout_problem(int rings, int rings_per_band, int angular_mult) {
  if (rings < 1 || rings_per_band < 1 || angular_mult < 1) return "all layout parameters must be >= 1";
  if (rings % rings_per_band != 0) return "rings_per_band must divide rings";
  const std::int64_t band1_points = 4LL * rings_per_band * rings_per_band;
  if (band1_points % angular_mult != 0) return "angular_mult must divide 4 * rings_per_band^2";
  if ((4 * detail::odd_part(rings_per_band)) % angular_mult != 0) {
    return "angular_mult must divide 4 * odd_part(rings_per_band) for exact equal point counts";
  }
  return {};
}

class SectorPatchLayout {
 public:
  // radius <= 0 means unit ring spacing.
  static SectorPatchLayout build(int rings, int rings_per_band, int angular_mult, double radius = 0.0,
                                 double theta0 = kDefaultTheta0) {
    if (auto problem = layout_problem(rings, rings_per_band, angular_mult); !problem.empty()) {
      detail::fail<ConfigError>("SectorPatchLayout", problem);
    }
    SectorPatchLayout l;
    l.rings_ = rings;
    l.rings_per_band_ = rings_per_band;
    l.angular_mult_ = angular_mult;
    l.bands_ = rings / rings_per_band;
    l.points_per_patch_ = 4 * rings_per_band * rings_per_band / angular_mult;
    l.radius_ = radius > 0.0 ? radius : static_cast<double>(rings);
    l.ring_spacing_ = l.radius_ / rings;
    l.theta0_ = theta0;

    for (int b = 1; b <= l.bands_; ++b) {
      const int k_b = angular_mult * (2 * b - 1);
      l.band_first_patch_.push_back(static_cast<int>(l.specs_.size()));
      l.sectors_per_band_.push_back(k_b);
      const double width = kTwoPi / k_b;
      for (int s = 0; s < k_b; ++s) {
        l.specs_.push_back({(b - 1) * rings_per_band * l.ring_spacing_, b * rings_per_band * l.ring_spacing_,
                            width, theta0 + width * (s + 0.5), b, s});
      }
    }

    const std::size_t n_points = static_cast<std::size_t>(grid_size(rings));
    l.assignment_.resize(n_points);
    std::vector<int> fill(l.specs_.size(), 0);
    l.members_.assign(l.specs_.size() * l.points_per_patch_, 0);
    std::size_t i = 0;
    for (int n = 1; n <= rings; ++n) {
      const int m = static_cast<int>(ring_count(n));
      for (int j = 0; j < m; ++j, ++i) {
        const int id = l.assign_point(n, j);
        l.assignment_[i] = id;
        if (fill[id] >= l.points_per_patch_) {
          throw std::logic_error("SectorPatchLayout: patch overflow");
        }
        l.members_[static_cast<std::size_t>(id) * l.points_per_patch_ + fill[id]++] = static_cast<int>(i);
      }
    }
    return l;
  }

  int rings() const { return rings_; }
  int rings_per_band() const { return rings_per_band_; }
  int angular_mult() const { return angular_mult_; }
  int bands() const { return bands_; }
  int points_per_patch() const { return points_per_patch_; }
  double radius() const { return radius_; }
  double ring_spacing() const { return ring_spacing_; }
  double theta0() const { return theta0_; }
  std::size_t patch_count() const { return specs_.size(); }
  std::size_t point_count() const { return assignment_.size(); }

  const std::vector<SectorPatchSpec>& specs() const { return specs_; }
  const std::vector<int>& sectors_per_band() const { return sectors_per_band_; }
  const std::vector<int>& assignment() const { return assignment_; }

  // Flat grid indices of a patch's points, in (ring, slot) order.
  std::span<const int> members(std::size_t patch) const {
    return {members_.data() + patch * points_per_patch_, std::size_t(points_per_patch_)};
  }

  int patch_id(int band, int sector) const { return band_first_patch_.at(band - 1) + sector; }

  // Exact rational form of the half-open interval test: slot j of ring n lies
  // (2j+1)/(2M) of a turn past theta0, sector s covers [s/K, (s+1)/K).
  int assign_point(int ring, int slot) const {
    if (ring < 1 || ring > rings_) detail::fail<DomainError>("assign_point", "ring out of range");
    const std::int64_t m = ring_count(ring);
    if (slot < 0 || slot >= m) detail::fail<DomainError>("assign_point", "slot out of range");
    const int band = (ring - 1) / rings_per_band_ + 1;
    const std::int64_t k_b = sectors_per_band_[band - 1];
    const auto sector = static_cast<int>(((2 * static_cast<std::int64_t>(slot) + 1) * k_b) / (2 * m));
    return band_first_patch_[band - 1] + sector;
  }

  // Sector within a band whose interval [alpha - w/2, alpha + w/2) contains
  // theta, with wraparound at 2 pi.
  int assign_angle(int band, double theta) const {
    if (band < 1 || band > bands_) detail::fail<DomainError>("assign_angle", "band out of range");
    const int k_b = sectors_per_band_[band - 1];
    double turns = (theta - theta0_) / kTwoPi;
    turns -= std::floor(turns);
    int sector = static_cast<int>(std::floor(turns * k_b));
    if (sector >= k_b) sector -= k_b;
    if (sector < 0) sector += k_b;
    return sector;
  }

  SamplingGrid grid(Point2 center = {}) const { return build_grid(rings_, radius_, center, theta0_); }

 private:
  int rings_ = 0;
  int rings_per_band_ = 0;
  int angular_mult_ = 0;
  int bands_ = 0;
  int points_per_patch_ = 0;
  double radius_ = 0.0;
  double ring_spacing_ = 0.0;
  double theta0_ = kDefaultTheta0;
  std::vector<SectorPatchSpec> specs_;
  std::vector<int> sectors_per_band_;
  std::vector<int> band_first_patch_;
  std::vector<int> assignment_;
  std::vector<int> members_;
};

// ---- tokens ---------------------------------------------------------------

struct TokenAnchor {
  double r = 0.0;
  double alpha = 0.0;
};

struct TokenSequence {
  std::size_t count = 0;
  std::size_t dim = 0;
  std::vector<double> data;  // count x dim, row-major
  std::vector<TokenAnchor> anchors;

  std::span<double> token(std::size_t t) { return {data.data() + t * dim, dim}; }
  std::span<const double> token(std::size_t t) const { return {data.data() + t * dim, dim}; }
};

inline std::vector<TokenAnchor> layout_anchors(const SectorPatchLayout& layout) {
  std::vector<TokenAnchor> anchors;
  anchors.reserve(layout.patch_count());
  for (const auto& s : layout.specs()) anchors.push_back({s.anchor_radius(), s.alpha});
  return anchors;
}

// Token t is the concatenation of its member points' channel vectors.
inline TokenSequence patchify(const PolarField& field, const SectorPatchLayout& layout,
                              std::size_t workers = 1) {
  if (field.rings != layout.rings() || field.values.size() != field.points() * field.channels) {
    detail::fail<DomainError>("patchify", "field does not match the layout's grid");
  }
  TokenSequence tokens;
  tokens.count = layout.patch_count();
  tokens.dim = static_cast<std::size_t>(layout.points_per_patch()) * field.channels;
  tokens.data.resize(tokens.count * tokens.dim);
  tokens.anchors = layout_anchors(layout);
  parallel_for(tokens.count, workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      auto out = tokens.token(t);
      std::size_t o = 0;
      for (int idx : layout.members(t)) {
        for (double v : field.point(static_cast<std::size_t>(idx))) out[o++] = v;
      }
    }
  });
  return tokens;
}

inline PolarField unpatchify(const TokenSequence& tokens, const SectorPatchLayout& layout,
                             std::size_t workers = 1) {
  const auto p = static_cast<std::size_t>(layout.points_per_patch());
  if (tokens.count != layout.patch_count() || tokens.dim == 0 || tokens.dim % p != 0 ||
      tokens.data.size() != tokens.count * tokens.dim) {
    detail::fail<DomainError>("unpatchify", "token shape does not match the layout");
  }
  PolarField field(layout.rings(), static_cast<int>(tokens.dim / p));
  parallel_for(tokens.count, workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      auto in = tokens.token(t);
      std::size_t o = 0;
      for (int idx : layout.members(t)) {
        for (double& v : field.point(static_cast<std::size_t>(idx))) v = in[o++];
      }
    }
  });
  return field;
}

// Output slot on ring ceil(n / stride) whose arc contains slot j of ring n.
// Since slots are arc centers this is also the nearest output slot in angle.
inline std::pair<int, int> downsample_target(int ring, int slot, int stride) {
  const int out_ring = (ring + stride - 1) / stride;
  const std::int64_t m_in = ring_count(ring);
  const std::int64_t m_out = ring_count(out_ring);
  return {out_ring, static_cast<int>(((2 * static_cast<std::int64_t>(slot) + 1) * m_out) / (2 * m_in))};
}

// Mean of each output point's pre-image. Every output point has at least one
// pre-image because ring stride * n' carries at least as many slots as n'.
inline PolarField downsample_polar(const PolarField& field, int stride, std::size_t workers = 1) {
  if (stride < 1 || field.rings % stride != 0) {
    detail::fail<ConfigError>("downsample_polar", "stride must divide the ring count");
  }
  if (stride == 1) return field;
  const int out_rings = field.rings / stride;
  PolarField out(out_rings, field.channels);
  parallel_for(static_cast<std::size_t>(out_rings), workers, [&](std::size_t begin, std::size_t end) {
    std::vector<int> counts;
    for (std::size_t r = begin; r < end; ++r) {
      const int n_out = static_cast<int>(r) + 1;
      const std::size_t base = static_cast<std::size_t>(ring_offset(n_out));
      counts.assign(static_cast<std::size_t>(ring_count(n_out)), 0);
      for (int n = stride * (n_out - 1) + 1; n <= stride * n_out; ++n) {
        const int m = static_cast<int>(ring_count(n));
        const std::size_t in_base = static_cast<std::size_t>(ring_offset(n));
        for (int j = 0; j < m; ++j) {
          const int j_out = downsample_target(n, j, stride).second;
          auto dst = out.point(base + j_out);
          auto src = field.point(in_base + j);
          for (int c = 0; c < field.channels; ++c) dst[c] += src[c];
          ++counts[j_out];
        }
      }
      for (std::size_t j = 0; j < counts.size(); ++j) {
        for (double& v : out.point(base + j)) v /= counts[j];
      }
    }
  });
  return out;
}

inline nlohmann::json layout_to_json(const SectorPatchLayout& layout) {
  nlohmann::json specs = nlohmann::json::array();
  for (const auto& s : layout.specs()) {
    specs.push_back({{"band", s.band}, {"sector", s.sector}, {"r1", s.r1}, {"r2", s.r2},
                     {"theta", s.theta_width}, {"alpha", s.alpha}, {"area", s.area()}});
  }
  return {{"rings", layout.rings()},
          {"rings_per_band", layout.rings_per_band()},
          {"angular_mult", layout.angular_mult()},
          {"bands", layout.bands()},
          {"radius", layout.radius()},
          {"ring_spacing", layout.ring_spacing()},
          {"theta0", layout.theta0()},
          {"points_per_patch", layout.points_per_patch()},
          {"patch_count", layout.patch_count()},
          {"point_count", layout.point_count()},
          {"sectors_per_band", layout.sectors_per_band()},
          {"specs", std::move(specs)}};
}

}  // namespace spe
