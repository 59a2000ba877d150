#pragma once

#include <cmath>
#include <cstddef>
#include <ostream>
#include <vector>

#include "spe/core.hpp"
#include "spe/sector_patch.hpp"

namespace spe {

struct PosEncConfig {
  int d_model = 1024;
  double power = 1.0;
  double r_unit = 1.0;  // radius divisor; the disc radius for token anchors

  void validate() const {
    if (d_model < 2 || d_model % 2 != 0) detail::fail<ConfigError>("PosEncConfig", "d_model must be even and >= 2");
    // freq grows as 4^(i-1); beyond this the double overflows to inf.
    if (d_model > 1024) detail::fail<ConfigError>("PosEncConfig", "d_model above 1024 overflows the polar frequencies");
    if (!(power > 0.0)) detail::fail<ConfigError>("PosEncConfig", "power must be > 0");
    if (!(r_unit > 0.0)) detail::fail<ConfigError>("PosEncConfig", "r_unit must be > 0");
  }
};

// sign(u) * |u|^power; total for any real power.
inline double signed_pow(double u, double power) {
  if (power == 1.0) return u;
  return std::copysign(std::pow(std::abs(u), power), u);
}

// Pair i (1-based) uses freq_i = 4^(i-1) / d_model and phase r * freq_i +
// theta * i; entries 2i-2 and 2i-1 hold its sine and cosine.
inline std::vector<double> polar_pe(double r, double theta, const PosEncConfig& cfg) {
  cfg.validate();
  if (!(r >= 0.0)) detail::fail<DomainError>("polar_pe", "radius must be >= 0");
  const double rn = r / cfg.r_unit;
  std::vector<double> pe(static_cast<std::size_t>(cfg.d_model));
  for (int i = 1; i <= cfg.d_model / 2; ++i) {
    const double freq = std::ldexp(1.0, 2 * (i - 1)) / cfg.d_model;
    const double phase = rn * freq + theta * i;
    pe[2 * i - 2] = signed_pow(std::sin(phase), cfg.power);
    pe[2 * i - 1] = signed_pow(std::cos(phase), cfg.power);
  }
  return pe;
}

// Original Transformer encoding: interleaved sin/cos at 1/10000^(2i/d).
inline std::vector<double> sinusoidal_pe_1d(double position, int d_model) {
  if (!(position >= 0.0)) detail::fail<DomainError>("sinusoidal_pe_1d", "position must be >= 0");
  if (d_model < 2 || d_model % 2 != 0) detail::fail<ConfigError>("sinusoidal_pe_1d", "d_model must be even");
  std::vector<double> pe(static_cast<std::size_t>(d_model));
  for (int i = 0; i < d_model / 2; ++i) {
    const double angle = position / std::pow(10000.0, 2.0 * i / d_model);
    pe[2 * i] = std::sin(angle);
    pe[2 * i + 1] = std::cos(angle);
  }
  return pe;
}

// tokens x d_model matrix of polar encodings for each token anchor.
inline std::vector<double> polar_pe_matrix(const std::vector<TokenAnchor>& anchors, const PosEncConfig& cfg) {
  std::vector<double> out;
  out.reserve(anchors.size() * cfg.d_model);
  for (const auto& a : anchors) {
    const auto pe = polar_pe(a.r, a.alpha, cfg);
    out.insert(out.end(), pe.begin(), pe.end());
  }
  return out;
}

// Adds polar_pe(anchor) to every token. Tokens must already be embedded to d_model.
inline TokenSequence encode_tokens(TokenSequence tokens, const PosEncConfig& cfg) {
  if (tokens.dim != static_cast<std::size_t>(cfg.d_model) || tokens.anchors.size() != tokens.count) {
    detail::fail<DomainError>("encode_tokens", "token dim must equal d_model");
  }
  for (std::size_t t = 0; t < tokens.count; ++t) {
    const auto pe = polar_pe(tokens.anchors[t].r, tokens.anchors[t].alpha, cfg);
    auto row = tokens.token(t);
    for (std::size_t i = 0; i < row.size(); ++i) row[i] += pe[i];
  }
  return tokens;
}

inline void write_pe_csv(std::ostream& os, const std::vector<double>& matrix, int d_model) {
  os << "token";
  for (int i = 0; i < d_model; ++i) os << ",pe" << i;
  os << '\n';
  os.precision(12);
  const std::size_t rows = matrix.size() / d_model;
  for (std::size_t t = 0; t < rows; ++t) {
    os << t;
    for (int i = 0; i < d_model; ++i) os << ',' << matrix[t * d_model + i];
    os << '\n';
  }
}

}  // namespace spe
