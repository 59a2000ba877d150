#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "spe/sector_patch.hpp"

using namespace spe;

namespace {

// Brute force: scan every sector of the point's band and return the one whose
// half-open interval [alpha - w/2, alpha + w/2) contains theta mod 2 pi.
int brute_force_patch(const SectorPatchLayout& l, const GridPoint& p) {
  const int band = (p.ring - 1) / l.rings_per_band() + 1;
  int found = -1;
  int hits = 0;
  for (std::size_t id = 0; id < l.patch_count(); ++id) {
    const auto& s = l.specs()[id];
    if (s.band != band) continue;
    double rel = std::fmod(p.theta - (s.alpha - 0.5 * s.theta_width), kTwoPi);
    if (rel < 0) rel += kTwoPi;
    if (rel < s.theta_width) {
      found = static_cast<int>(id);
      ++hits;
    }
  }
  EXPECT_EQ(hits, 1);
  return found;
}

PolarField random_field(int rings, int channels, std::uint64_t seed) {
  PolarField f(rings, channels);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0, 1);
  for (double& v : f.values) v = n(rng);
  return f;
}

}  // namespace

TEST(Layout, SingleBand) {
  const auto l = SectorPatchLayout::build(4, 4, 4);
  EXPECT_EQ(l.bands(), 1);
  EXPECT_EQ(l.patch_count(), 4u);
  EXPECT_EQ(l.points_per_patch(), 16);
  std::vector<int> count(4, 0);
  for (int id : l.assignment()) ++count[id];
  EXPECT_EQ(count, std::vector<int>(4, 16));
}

TEST(Layout, TwoBands) {
  const auto l = SectorPatchLayout::build(8, 4, 4);
  EXPECT_EQ(l.sectors_per_band(), (std::vector<int>{4, 12}));
  EXPECT_EQ(l.patch_count(), 16u);
  std::vector<int> count(16, 0);
  for (int id : l.assignment()) ++count[id];
  EXPECT_EQ(count, std::vector<int>(16, 16));
  int band1 = 0;
  for (std::size_t i = 0; i < l.assignment().size(); ++i) band1 += l.specs()[l.assignment()[i]].band == 1;
  EXPECT_EQ(band1, 64);
}

TEST(Layout, SquarePatchParity) {
  const auto l = SectorPatchLayout::build(160, 16, 4, 160.0);
  EXPECT_EQ(l.bands(), 10);
  EXPECT_EQ(l.points_per_patch(), 256);
  EXPECT_EQ(l.patch_count(), 400u);
  EXPECT_EQ(std::accumulate(l.sectors_per_band().begin(), l.sectors_per_band().end(), 0), 400);
}

TEST(Layout, ValidityRule) {
  EXPECT_THROW(SectorPatchLayout::build(10, 4, 4), ConfigError);  // g does not divide N
  EXPECT_THROW(SectorPatchLayout::build(8, 4, 3), ConfigError);   // q does not divide 4g^2
  EXPECT_THROW(SectorPatchLayout::build(8, 4, 8), ConfigError);   // divides 4g^2 but not 4 odd(g)
  EXPECT_THROW(SectorPatchLayout::build(0, 1, 1), ConfigError);
  EXPECT_NO_THROW(SectorPatchLayout::build(12, 6, 12));
  EXPECT_NO_THROW(SectorPatchLayout::build(15, 5, 20));
}

// The exact-count rule is necessary as well as sufficient: for every q that
// divides 4g^2 but not 4 odd(g), brute-force angular assignment leaves some
// sector with the wrong count.
TEST(Layout, ValidityRuleIsTight) {
  for (int g = 1; g <= 8; ++g) {
    for (int q = 1; q <= 4 * g * g; ++q) {
      if ((4 * g * g) % q != 0) continue;
      const int rings = g * std::max(2, 16 / g);
      const bool rule = layout_problem(rings, g, q).empty();
      bool exact = true;
      const auto grid = build_grid(rings, rings);
      for (int b = 1; b <= rings / g && exact; ++b) {
        const int k_b = q * (2 * b - 1);
        std::vector<int> count(k_b, 0);
        for (const auto& p : grid.points) {
          if ((p.ring - 1) / g + 1 != b) continue;
          double turns = (p.theta - kDefaultTheta0) / kTwoPi;
          turns -= std::floor(turns);
          ++count[static_cast<int>(std::floor(turns * k_b)) % k_b];
        }
        for (int c : count) exact = exact && c == 4 * g * g / q;
      }
      EXPECT_EQ(rule, exact) << "g=" << g << " q=" << q;
    }
  }
}

TEST(Layout, AssignmentMatchesBruteForceIntervalScan) {
  for (auto [n, g, q] : {std::tuple{8, 4, 4}, {12, 3, 12}, {20, 5, 10}, {16, 2, 4}}) {
    const auto l = SectorPatchLayout::build(n, g, q, 2.0 * n);
    const auto grid = l.grid();
    for (std::size_t i = 0; i < grid.size(); ++i) {
      ASSERT_EQ(l.assignment()[i], brute_force_patch(l, grid.points[i]));
    }
  }
}

TEST(Layout, PartitionEqualCountEqualAreaExhaustive) {
  for (int n : {4, 8, 16, 32, 64}) {
    for (int g = 1; g <= n; ++g) {
      if (n % g != 0) continue;
      for (int q = 1; q <= 4 * g; ++q) {
        if (!layout_problem(n, g, q).empty()) continue;
        const auto l = SectorPatchLayout::build(n, g, q);
        std::vector<int> count(l.patch_count(), 0);
        for (int id : l.assignment()) ++count[id];
        for (int c : count) ASSERT_EQ(c, l.points_per_patch());
        const double area = l.specs().front().area();
        for (const auto& s : l.specs()) ASSERT_NEAR(s.area(), area, 1e-9 * area);
        EXPECT_EQ(std::accumulate(count.begin(), count.end(), 0), 4 * n * n);
      }
    }
  }
}

TEST(Layout, ShapesShareWithinBand) {
  const auto l = SectorPatchLayout::build(32, 8, 4, 32.0);
  for (const auto& s : l.specs()) {
    const auto& first = l.specs()[l.patch_id(s.band, 0)];
    EXPECT_EQ(s.r1, first.r1);
    EXPECT_EQ(s.r2, first.r2);
    EXPECT_EQ(s.theta_width, first.theta_width);
    EXPECT_NEAR(s.alpha - first.alpha, s.sector * s.theta_width, 1e-12);
  }
}

TEST(Layout, GridStaysInsideDisc) {
  const auto l = SectorPatchLayout::build(160, 16, 4, 160.0);
  const auto grid = l.grid({159.5, 159.5});
  for (const auto& p : grid.points) EXPECT_LE(std::hypot(p.x - 159.5, p.y - 159.5), 160.0 + 1e-9);
}

TEST(AssignPoint, RangeErrors) {
  const auto l = SectorPatchLayout::build(4, 4, 4);
  EXPECT_THROW(l.assign_point(0, 0), DomainError);
  EXPECT_THROW(l.assign_point(5, 0), DomainError);
  EXPECT_THROW(l.assign_point(1, 4), DomainError);
  EXPECT_THROW(l.assign_point(2, -1), DomainError);
}

TEST(AssignAngle, HalfOpenBoundaries) {
  const auto l = SectorPatchLayout::build(4, 4, 4);
  const double w = kTwoPi / 4;
  const double boundary = l.theta0() + w;
  EXPECT_EQ(l.assign_angle(1, boundary + 1e-12), 1);
  EXPECT_EQ(l.assign_angle(1, boundary - 1e-12), 0);
  EXPECT_EQ(l.assign_angle(1, l.theta0()), 0);
  EXPECT_EQ(l.assign_angle(1, l.theta0() - 1e-12), 3);
  EXPECT_EQ(l.assign_angle(1, l.theta0() + 5 * kTwoPi + 0.1), 0);
}

TEST(AssignAngle, ExactlyOneSectorForRandomAngles) {
  const auto l = SectorPatchLayout::build(32, 8, 4);
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> angle(-20.0, 20.0);
  for (int i = 0; i < 1000000; ++i) {
    const double theta = angle(rng);
    const int band = 1 + i % l.bands();
    const int k = l.assign_angle(band, theta);
    const int k_b = l.sectors_per_band()[band - 1];
    ASSERT_GE(k, 0);
    ASSERT_LT(k, k_b);
    // the chosen interval contains theta; neighbours do not
    const auto& s = l.specs()[l.patch_id(band, k)];
    double rel = std::fmod(theta - (s.alpha - 0.5 * s.theta_width), kTwoPi);
    if (rel < 0) rel += kTwoPi;
    ASSERT_TRUE(rel < s.theta_width + 1e-9 || rel > kTwoPi - 1e-9);
  }
}

TEST(AssignAngle, RotationBySectorWidthPermutesCyclically) {
  const auto l = SectorPatchLayout::build(8, 4, 4);
  const auto grid = l.grid();
  for (const auto& p : grid.points) {
    const int band = (p.ring - 1) / 4 + 1;
    const int k_b = l.sectors_per_band()[band - 1];
    const int before = l.assign_angle(band, p.theta);
    const int after = l.assign_angle(band, p.theta + kTwoPi / k_b);
    EXPECT_EQ(after, (before + 1) % k_b);
    EXPECT_EQ(l.patch_id(band, before), l.assign_point(p.ring, p.slot));
  }
}

TEST(Patchify, ConstantField) {
  const auto l = SectorPatchLayout::build(8, 4, 4);
  const PolarField f(8, 3, 2.5);
  const auto t = patchify(f, l);
  EXPECT_EQ(t.count, 16u);
  EXPECT_EQ(t.dim, 48u);
  for (double v : t.data) EXPECT_EQ(v, 2.5);
}

TEST(Patchify, MemberOrderAndAnchors) {
  const auto l = SectorPatchLayout::build(8, 4, 4, 80.0);
  PolarField f(8, 1);
  for (std::size_t i = 0; i < f.points(); ++i) f.values[i] = static_cast<double>(i);
  const auto t = patchify(f, l);
  for (std::size_t id = 0; id < t.count; ++id) {
    auto tok = t.token(id);
    for (std::size_t k = 1; k < tok.size(); ++k) EXPECT_LT(tok[k - 1], tok[k]);
    for (double v : tok) EXPECT_EQ(l.assignment()[static_cast<std::size_t>(v)], static_cast<int>(id));
    const auto& s = l.specs()[id];
    EXPECT_EQ(t.anchors[id].r, 0.5 * (s.r1 + s.r2));
    EXPECT_EQ(t.anchors[id].alpha, s.alpha);
  }
}

TEST(Patchify, SwapTouchesOnlyOwningTokens) {
  const auto l = SectorPatchLayout::build(8, 4, 4);
  const auto f = random_field(8, 2, 1);
  auto g = f;
  // points 0 and 200 live in different patches
  ASSERT_NE(l.assignment()[0], l.assignment()[200]);
  for (int c = 0; c < 2; ++c) std::swap(g.point(0)[c], g.point(200)[c]);
  const auto a = patchify(f, l);
  const auto b = patchify(g, l);
  for (std::size_t t = 0; t < a.count; ++t) {
    const bool touched = static_cast<int>(t) == l.assignment()[0] || static_cast<int>(t) == l.assignment()[200];
    const bool same = std::equal(a.token(t).begin(), a.token(t).end(), b.token(t).begin());
    EXPECT_EQ(same, !touched);
  }
}

TEST(Patchify, ConservesTotals) {
  const auto l = SectorPatchLayout::build(16, 4, 2);
  const auto f = random_field(16, 3, 2);
  const auto t = patchify(f, l);
  long double field_sum = 0, token_sum = 0;
  for (double v : f.values) field_sum += v;
  for (double v : t.data) token_sum += v;
  EXPECT_NEAR(static_cast<double>(token_sum), static_cast<double>(field_sum), 1e-9);
  EXPECT_EQ(t.data.size(), f.values.size());
}

TEST(Patchify, ShapeMismatch) {
  const auto l = SectorPatchLayout::build(8, 4, 4);
  EXPECT_THROW(patchify(PolarField(4, 1), l), DomainError);
}

TEST(Unpatchify, RoundTripBitExact) {
  const auto l = SectorPatchLayout::build(8, 4, 4);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto f = random_field(8, 1 + static_cast<int>(seed % 4), seed);
    EXPECT_EQ(unpatchify(patchify(f, l), l), f);
    const auto t = patchify(f, l);
    EXPECT_EQ(patchify(unpatchify(t, l), l).data, t.data);
  }
  TokenSequence zeros{16, 32, std::vector<double>(16 * 32, 0.0), {}};
  for (double v : unpatchify(zeros, l).values) EXPECT_EQ(v, 0.0);
}

TEST(Unpatchify, ShapeMismatch) {
  const auto l = SectorPatchLayout::build(8, 4, 4);
  TokenSequence bad{16, 17, std::vector<double>(16 * 17), {}};
  EXPECT_THROW(unpatchify(bad, l), DomainError);
  TokenSequence wrong_count{15, 16, std::vector<double>(15 * 16), {}};
  EXPECT_THROW(unpatchify(wrong_count, l), DomainError);
}

TEST(Patchify, ParallelMatchesSerial) {
  const auto l = SectorPatchLayout::build(160, 16, 4);
  const auto f = random_field(160, 3, 4);
  const auto a = patchify(f, l, 1);
  EXPECT_EQ(a.data, patchify(f, l, 5).data);
  EXPECT_EQ(unpatchify(a, l, 1), unpatchify(a, l, 3));
}

TEST(Downsample, IdentityAndConstant) {
  const auto f = random_field(8, 2, 3);
  EXPECT_EQ(downsample_polar(f, 1), f);
  const PolarField c(8, 2, -4.0);
  const auto d = downsample_polar(c, 4);
  EXPECT_EQ(d.rings, 2);
  for (double v : d.values) EXPECT_DOUBLE_EQ(v, -4.0);
  EXPECT_THROW(downsample_polar(c, 3), ConfigError);
  EXPECT_THROW(downsample_polar(c, 0), ConfigError);
}

TEST(Downsample, PreimagesPartitionInput) {
  const int n = 8, s = 2;
  std::map<std::pair<int, int>, int> preimage;
  for (int ring = 1; ring <= n; ++ring) {
    for (int j = 0; j < ring_count(ring); ++j) ++preimage[downsample_target(ring, j, s)];
  }
  // 64 outputs on 4 rings, each hit at least once, 256 inputs in total
  EXPECT_EQ(preimage.size(), 64u);
  int total = 0;
  for (const auto& [key, count] : preimage) {
    EXPECT_GE(count, 1);
    EXPECT_LE(key.first, 4);
    EXPECT_LT(key.second, ring_count(key.first));
    total += count;
  }
  EXPECT_EQ(total, 256);
}

TEST(Downsample, NearestAngleSlot) {
  const auto fine = build_grid(8, 8.0);
  const auto coarse = build_grid(4, 8.0);
  for (const auto& p : fine.points) {
    const auto [ring, slot] = downsample_target(p.ring, p.slot, 2);
    double best = 1e9;
    int best_slot = -1;
    for (int j = 0; j < ring_count(ring); ++j) {
      double d = std::abs(std::remainder(coarse.at(ring, j).theta - p.theta, kTwoPi));
      if (d < best) {
        best = d;
        best_slot = j;
      }
    }
    EXPECT_EQ(slot, best_slot);
  }
}

TEST(Downsample, AveragesPreimages) {
  const auto f = random_field(8, 1, 8);
  const auto d = downsample_polar(f, 2);
  std::map<std::pair<int, int>, std::pair<double, int>> acc;
  std::size_t i = 0;
  for (int ring = 1; ring <= 8; ++ring) {
    for (int j = 0; j < ring_count(ring); ++j, ++i) {
      auto& a = acc[downsample_target(ring, j, 2)];
      a.first += f.values[i];
      ++a.second;
    }
  }
  for (const auto& [key, a] : acc) {
    EXPECT_NEAR(d.values[ring_offset(key.first) + key.second], a.first / a.second, 1e-15);
  }
  EXPECT_EQ(d, downsample_polar(f, 2, 3));
}

TEST(LayoutJson, CarriesSpecsAndCounts) {
  const auto l = SectorPatchLayout::build(8, 4, 4, 16.0);
  const auto j = layout_to_json(l);
  EXPECT_EQ(j["patch_count"], 16);
  EXPECT_EQ(j["points_per_patch"], 16);
  EXPECT_EQ(j["specs"].size(), 16u);
  EXPECT_EQ(j["sectors_per_band"], nlohmann::json({4, 12}));
  EXPECT_DOUBLE_EQ(j["specs"][5]["r2"].get<double>(), 16.0);
}
