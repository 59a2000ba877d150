#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "spe/core.hpp"

namespace spe {

// Interleaved raster, row-major, channels innermost. Pixel (x, y) has its
// center at the continuous coordinate (x, y).
template <class T>
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, T fill = T{})
      : width_(width), height_(height), channels_(channels) {
    if (width < 0 || height < 0 || channels < 1) {
      detail::fail<ConfigError>("Image", "invalid raster shape");
    }
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  bool empty() const { return data_.empty(); }

  T& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  const T& at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

  std::span<T> pixel(int x, int y) { return {&data_[index(x, y, 0)], std::size_t(channels_)}; }
  std::span<const T> pixel(int x, int y) const {
    return {&data_[index(x, y, 0)], std::size_t(channels_)};
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  std::vector<T> data_;
};

using Image8 = Image<std::uint8_t>;

// Bilinear interpolation between the four surrounding pixel centers.
// Coordinates outside the raster are clamped to the edge.
template <class T>
void sample_bilinear_at(const Image<T>& img, double x, double y, std::span<double> out) {
  const double max_x = img.width() - 1;
  const double max_y = img.height() - 1;
  x = std::clamp(x, 0.0, max_x);
  y = std::clamp(y, 0.0, max_y);
  const int x0 = std::min(static_cast<int>(x), std::max(img.width() - 2, 0));
  const int y0 = std::min(static_cast<int>(y), std::max(img.height() - 2, 0));
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  for (int c = 0; c < img.channels(); ++c) {
    const double v00 = static_cast<double>(img.at(x0, y0, c));
    const double v10 = static_cast<double>(img.at(x1, y0, c));
    const double v01 = static_cast<double>(img.at(x0, y1, c));
    const double v11 = static_cast<double>(img.at(x1, y1, c));
    const double top = v00 + (v10 - v00) * fx;
    const double bottom = v01 + (v11 - v01) * fx;
    out[c] = top + (bottom - top) * fy;
  }
}

inline std::uint8_t to_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace spe
