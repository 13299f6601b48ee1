#pragma once

#include <png.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "sim2real/core/errors.hpp"
#include "sim2real/imaging/raster.hpp"

namespace sim2real::imaging {

namespace detail {

struct PngImage {
  png_image img;
  PngImage() {
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
  }
  ~PngImage() { png_image_free(&img); }
  PngImage(const PngImage&) = delete;
  PngImage& operator=(const PngImage&) = delete;
};

inline std::vector<std::uint8_t> read_png(const std::filesystem::path& path, png_uint_32 format, int& width, int& height) {
  PngImage p;
  if (!png_image_begin_read_from_file(&p.img, path.c_str()))
    throw IoError("cannot read PNG " + path.string() + ": " + p.img.message);
  p.img.format = format;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(p.img));
  if (!png_image_finish_read(&p.img, nullptr, buf.data(), 0, nullptr))
    throw IoError("cannot decode PNG " + path.string() + ": " + p.img.message);
  width = static_cast<int>(p.img.width);
  height = static_cast<int>(p.img.height);
  return buf;
}

inline void write_png(const std::filesystem::path& path, png_uint_32 format, int width, int height, const std::uint8_t* data) {
  PngImage p;
  p.img.width = static_cast<png_uint_32>(width);
  p.img.height = static_cast<png_uint_32>(height);
  p.img.format = format;
  if (!png_image_write_to_file(&p.img, path.c_str(), 0, data, 0, nullptr))
    throw IoError("cannot write PNG " + path.string() + ": " + p.img.message);
}

}  // namespace detail

inline RasterImage read_image(const std::filesystem::path& path) {
  int w = 0, h = 0;
  auto buf = detail::read_png(path, PNG_FORMAT_RGB, w, h);
  return RasterImage(w, h, std::move(buf));
}

inline void write_image(const std::filesystem::path& path, const RasterImage& image) {
  detail::write_png(path, PNG_FORMAT_RGB, image.width(), image.height(), image.data().data());
}

/// Single-channel PNG; values >= 128 are foreground.
inline BinaryMask read_mask(const std::filesystem::path& path) {
  int w = 0, h = 0;
  auto buf = detail::read_png(path, PNG_FORMAT_GRAY, w, h);
  for (auto& b : buf) b = b >= 128 ? 1 : 0;
  return BinaryMask(w, h, std::move(buf));
}

/// Written as 255 = foreground, 0 = background.
inline void write_mask(const std::filesystem::path& path, const BinaryMask& mask) {
  std::vector<std::uint8_t> buf(mask.data());
  for (auto& b : buf) b = b ? 255 : 0;
  detail::write_png(path, PNG_FORMAT_GRAY, mask.width(), mask.height(), buf.data());
}

}  // namespace sim2real::imaging
