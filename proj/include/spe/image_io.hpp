#pragma once

// PNG (libpng) and binary PPM/PGM reading and writing. Readers always return
// 8-bit RGB; writers accept 1 or 3 channels.

#include <png.h>

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "spe/image.hpp"

namespace spe {

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline Image8 read_png(const std::string& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw ImageIoError("cannot read PNG " + path + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  Image8 img(static_cast<int>(image.width), static_cast<int>(image.height), 3);
  if (!png_image_finish_read(&image, nullptr, img.data().data(), 0, nullptr)) {
    const std::string message = image.message;
    png_image_free(&image);
    throw ImageIoError("corrupt PNG " + path + ": " + message);
  }
  return img;
}

inline void write_png(const std::string& path, const Image8& img) {
  if (img.channels() != 1 && img.channels() != 3) {
    throw ImageIoError("write_png: only 1 or 3 channels supported");
  }
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.c_str(), 0, img.data().data(), 0, nullptr)) {
    throw ImageIoError("failed writing PNG " + path + ": " + image.message);
  }
}

inline int read_pnm_int(std::istream& in) {
  int value = 0;
  in >> std::ws;
  while (in.peek() == '#') {
    std::string comment;
    std::getline(in, comment);
    in >> std::ws;
  }
  if (!(in >> value)) throw ImageIoError("malformed PNM header");
  return value;
}

inline Image8 read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError("cannot open " + path);
  std::string magic;
  in >> magic;
  if (magic != "P6" && magic != "P5") throw ImageIoError("unsupported PNM type in " + path);
  const int width = read_pnm_int(in);
  const int height = read_pnm_int(in);
  const int maxval = read_pnm_int(in);
  if (width <= 0 || height <= 0 || maxval != 255) {
    throw ImageIoError("unsupported PNM geometry in " + path);
  }
  in.get();
  const int src_channels = magic == "P6" ? 3 : 1;
  std::vector<char> raw(static_cast<std::size_t>(width) * height * src_channels);
  if (!in.read(raw.data(), static_cast<std::streamsize>(raw.size()))) {
    throw ImageIoError("truncated PNM: " + path);
  }
  Image8 img(width, height, 3);
  for (std::size_t i = 0; i < static_cast<std::size_t>(width) * height; ++i) {
    for (int c = 0; c < 3; ++c) {
      img.data()[i * 3 + c] = static_cast<std::uint8_t>(raw[i * src_channels + (src_channels == 3 ? c : 0)]);
    }
  }
  return img;
}

}  // namespace detail

inline void write_pnm(const std::string& path, const Image8& img) {
  if (img.channels() != 1 && img.channels() != 3) {
    throw ImageIoError("write_pnm: only 1 or 3 channels supported");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageIoError("cannot open " + path);
  out << (img.channels() == 3 ? "P6" : "P5") << '\n'
      << img.width() << ' ' << img.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data().data()),
            static_cast<std::streamsize>(img.data().size()));
  if (!out) throw ImageIoError("failed writing " + path);
}

using detail::write_png;

// Dispatches on file content, not extension.
inline Image8 read_image(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw ImageIoError("cannot open " + path);
  unsigned char sig[8] = {};
  probe.read(reinterpret_cast<char*>(sig), 8);
  if (probe.gcount() == 8 && png_sig_cmp(sig, 0, 8) == 0) return detail::read_png(path);
  if (probe.gcount() >= 2 && sig[0] == 'P' && (sig[1] == '6' || sig[1] == '5')) {
    return detail::read_pnm(path);
  }
  throw ImageIoError("unrecognized image format: " + path);
}

// Writes PNM when the path ends in .ppm/.pgm, PNG otherwise.
inline void write_image(const std::string& path, const Image8& img) {
  const auto ends_with = [&](const char* ext) {
    const std::string e(ext);
    return path.size() >= e.size() && path.compare(path.size() - e.size(), e.size(), e) == 0;
  };
  if (ends_with(".ppm") || ends_with(".pgm")) {
    write_pnm(path, img);
  } else {
    write_png(path, img);
  }
}

}  // namespace spe
