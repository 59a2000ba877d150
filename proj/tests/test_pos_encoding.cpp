#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "spe/pos_encoding.hpp"

using namespace spe;

TEST(PolarPe, WorkedExample) {
  const auto pe = polar_pe(1.0, kPi / 2, {4, 1.0, 1.0});
  ASSERT_EQ(pe.size(), 4u);
  EXPECT_NEAR(pe[0], 0.968912421711, 1e-6);
  EXPECT_NEAR(pe[1], -0.247403959255, 1e-6);
  EXPECT_NEAR(pe[2], -0.841470984808, 1e-6);
  EXPECT_NEAR(pe[3], -0.540302305868, 1e-6);
}

TEST(PolarPe, OriginAlternatesZeroOne) {
  const auto pe = polar_pe(0.0, 0.0, {64, 1.0, 1.0});
  for (std::size_t i = 0; i < pe.size(); ++i) EXPECT_EQ(pe[i], i % 2 ? 1.0 : 0.0);
}

TEST(PolarPe, ScalarLoopOracle) {
  // Direct transcription with pow(4, i-1), independent of the ldexp form.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> r(0, 300), t(-10, 10);
  for (int trial = 0; trial < 50; ++trial) {
    const double rr = r(rng), tt = t(rng);
    const int d = 32;
    const auto pe = polar_pe(rr, tt, {d, 1.0, 1.0});
    for (int i = 1; i <= d / 2; ++i) {
      const double phase = rr * std::pow(4.0, i - 1) / d + tt * i;
      EXPECT_NEAR(pe[2 * i - 2], std::sin(phase), 1e-9 * std::max(1.0, std::abs(phase)));
      EXPECT_NEAR(pe[2 * i - 1], std::cos(phase), 1e-9 * std::max(1.0, std::abs(phase)));
    }
  }
}

TEST(PolarPe, BoundedAndFinite) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> r(0, 1e3), t(-100, 100), pw(0.1, 4.0);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto pe = polar_pe(r(rng), t(rng), {1024, pw(rng), 1.0});
    for (double v : pe) {
      ASSERT_TRUE(std::isfinite(v));
      ASSERT_LE(std::abs(v), 1.0);
    }
  }
}

TEST(PolarPe, Deterministic) {
  EXPECT_EQ(polar_pe(12.5, 0.7, {}), polar_pe(12.5, 0.7, {}));
}

TEST(PolarPe, RadiusUnitRescales) {
  EXPECT_EQ(polar_pe(80.0, 0.3, {16, 1.0, 160.0}), polar_pe(0.5, 0.3, {16, 1.0, 1.0}));
}

TEST(PolarPe, SignedPower) {
  EXPECT_EQ(signed_pow(-0.25, 0.5), -0.5);
  EXPECT_EQ(signed_pow(0.25, 0.5), 0.5);
  EXPECT_EQ(signed_pow(0.0, 3.0), 0.0);
  const auto base = polar_pe(3.0, 1.0, {8, 1.0, 1.0});
  const auto cubed = polar_pe(3.0, 1.0, {8, 3.0, 1.0});
  for (std::size_t i = 0; i < base.size(); ++i) EXPECT_NEAR(cubed[i], base[i] * base[i] * base[i], 1e-15);
}

TEST(PolarPe, Errors) {
  EXPECT_THROW(polar_pe(1.0, 0.0, {3, 1.0, 1.0}), ConfigError);
  EXPECT_THROW(polar_pe(1.0, 0.0, {0, 1.0, 1.0}), ConfigError);
  EXPECT_THROW(polar_pe(1.0, 0.0, {2048, 1.0, 1.0}), ConfigError);
  EXPECT_THROW(polar_pe(1.0, 0.0, {4, 0.0, 1.0}), ConfigError);
  EXPECT_THROW(polar_pe(1.0, 0.0, {4, 1.0, 0.0}), ConfigError);
  EXPECT_THROW(polar_pe(-1.0, 0.0, {4, 1.0, 1.0}), DomainError);
  EXPECT_THROW(polar_pe(std::nan(""), 0.0, {4, 1.0, 1.0}), DomainError);
}

TEST(PolarPe, DefaultAnchorsDistinct) {
  const auto layout = SectorPatchLayout::build(160, 16, 4, 160.0);
  const auto anchors = layout_anchors(layout);
  ASSERT_EQ(anchors.size(), 400u);
  const PosEncConfig cfg{1024, 1.0, 160.0};
  const auto m = polar_pe_matrix(anchors, cfg);
  double min_gap = INFINITY;
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    for (std::size_t b = a + 1; b < anchors.size(); ++b) {
      double d2 = 0;
      for (int i = 0; i < 1024; ++i) {
        const double d = m[a * 1024 + i] - m[b * 1024 + i];
        d2 += d * d;
      }
      min_gap = std::min(min_gap, std::sqrt(d2));
    }
  }
  EXPECT_GT(min_gap, 1e-6);
}

TEST(EncodeTokens, AddsEncodingPerAnchor) {
  const auto layout = SectorPatchLayout::build(8, 4, 4, 8.0);
  TokenSequence t{layout.patch_count(), 16, std::vector<double>(layout.patch_count() * 16, 0.5),
                  layout_anchors(layout)};
  const PosEncConfig cfg{16, 1.0, 8.0};
  const auto enc = encode_tokens(t, cfg);
  for (std::size_t k = 0; k < t.count; ++k) {
    const auto pe = polar_pe(t.anchors[k].r, t.anchors[k].alpha, cfg);
    for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(enc.token(k)[i] - pe[i], 0.5, 1e-15);
  }
  TokenSequence wrong = t;
  wrong.dim = 8;
  EXPECT_THROW(encode_tokens(wrong, cfg), DomainError);
}

TEST(EncodeTokens, CsvShape) {
  std::ostringstream os;
  write_pe_csv(os, polar_pe_matrix({{0.0, 0.0}, {1.0, 2.0}}, {4, 1.0, 1.0}), 4);
  const std::string s = os.str();
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 3);
  EXPECT_EQ(s.rfind("token,pe0,pe1,pe2,pe3\n", 0), 0u);
}

TEST(SinusoidalPe, Pattern) {
  const auto pe0 = sinusoidal_pe_1d(0.0, 8);
  for (std::size_t i = 0; i < pe0.size(); ++i) EXPECT_EQ(pe0[i], i % 2 ? 1.0 : 0.0);
  const auto pe = sinusoidal_pe_1d(3.0, 8);
  EXPECT_NEAR(pe[0], std::sin(3.0), 1e-15);
  EXPECT_NEAR(pe[3], std::cos(3.0 / std::pow(10000.0, 0.25)), 1e-15);
  EXPECT_THROW(sinusoidal_pe_1d(1.0, 7), ConfigError);
  EXPECT_THROW(sinusoidal_pe_1d(-1.0, 8), DomainError);
}

TEST(SinusoidalPe, DistinctPositions) {
  std::vector<std::vector<double>> rows;
  for (int p = 0; p < 400; ++p) rows.push_back(sinusoidal_pe_1d(p, 64));
  for (std::size_t a = 0; a < rows.size(); ++a) {
    for (std::size_t b = a + 1; b < rows.size(); ++b) ASSERT_NE(rows[a], rows[b]);
  }
}
