#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "sim2real/core/errors.hpp"
#include "sim2real/core/tensor.hpp"

namespace sim2real::imaging {

/// H x W x 3 interleaved 8-bit RGB raster, row-major.
class RasterImage {
 public:
  static constexpr int kChannels = 3;

  RasterImage() = default;
  RasterImage(int width, int height, std::uint8_t fill = 0)
      : width_(width), height_(height), data_(checked_size(width, height) * kChannels, fill) {}
  RasterImage(int width, int height, std::vector<std::uint8_t> data) : width_(width), height_(height), data_(std::move(data)) {
    if (data_.size() != checked_size(width, height) * kChannels)
      throw ShapeError("RasterImage: data length does not match width*height*3");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t pixels() const noexcept { return static_cast<std::size_t>(width_) * height_; }
  bool empty() const noexcept { return data_.empty(); }

  std::uint8_t& at(int x, int y, int ch) { return data_[(static_cast<std::size_t>(y) * width_ + x) * kChannels + ch]; }
  std::uint8_t at(int x, int y, int ch) const { return data_[(static_cast<std::size_t>(y) * width_ + x) * kChannels + ch]; }

  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    auto* p = &data_[(static_cast<std::size_t>(y) * width_ + x) * kChannels];
    p[0] = r;
    p[1] = g;
    p[2] = b;
  }

  std::vector<std::uint8_t>& data() noexcept { return data_; }
  const std::vector<std::uint8_t>& data() const noexcept { return data_; }

  bool operator==(const RasterImage&) const = default;

 private:
  static std::size_t checked_size(int width, int height) {
    if (width < 0 || height < 0) throw ShapeError("RasterImage: negative dimension");
    return static_cast<std::size_t>(width) * height;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

/// H x W foreground map; one byte per pixel holding 0 or 1.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height, bool fill = false)
      : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height, fill ? 1 : 0) {
    if (width < 0 || height < 0) throw ShapeError("BinaryMask: negative dimension");
  }
  /// Any nonzero byte counts as foreground.
  BinaryMask(int width, int height, std::vector<std::uint8_t> bits) : width_(width), height_(height), data_(std::move(bits)) {
    if (width < 0 || height < 0 || data_.size() != static_cast<std::size_t>(width) * height)
      throw ShapeError("BinaryMask: data length does not match width*height");
    for (auto& b : data_) b = b ? 1 : 0;
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t pixels() const noexcept { return data_.size(); }

  bool at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x] != 0; }
  void set(int x, int y, bool v) { data_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }
  bool operator[](std::size_t i) const { return data_[i] != 0; }

  std::size_t count() const noexcept {
    return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
  }
  double fraction() const noexcept { return data_.empty() ? 0.0 : double(count()) / double(data_.size()); }

  const std::vector<std::uint8_t>& data() const noexcept { return data_; }

  bool operator==(const BinaryMask&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Model-side image: 1 x 3 x H x W tensor with values in [-1, 1].
using NormalizedTensor = Tensor<float>;

template <typename A, typename B>
void require_same_dims(const A& a, const B& b, const char* what) {
  if (a.width() != b.width() || a.height() != b.height())
    throw ShapeError(std::string(what) + ": dimension mismatch (" + std::to_string(a.width()) + "x" +
                     std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                     std::to_string(b.height()) + ")");
}

/// |P ∩ T| / |P ∪ T|. Two empty masks agree perfectly and score 1.
inline double iou(const BinaryMask& prediction, const BinaryMask& truth) {
  require_same_dims(prediction, truth, "iou");
  std::size_t inter = 0, uni = 0;
  const auto& p = prediction.data();
  const auto& t = truth.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    inter += (p[i] & t[i]);
    uni += (p[i] | t[i]);
  }
  if (uni == 0) return 1.0;
  return double(inter) / double(uni);
}

/// Hard mask-guided select: foreground where mask is set, background elsewhere.
inline RasterImage composite(const RasterImage& foreground, const BinaryMask& mask, const RasterImage& background) {
  require_same_dims(foreground, mask, "composite");
  require_same_dims(foreground, background, "composite");
  RasterImage out = background;
  const auto& fg = foreground.data();
  auto& o = out.data();
  for (std::size_t i = 0; i < mask.pixels(); ++i) {
    if (mask[i]) {
      o[3 * i] = fg[3 * i];
      o[3 * i + 1] = fg[3 * i + 1];
      o[3 * i + 2] = fg[3 * i + 2];
    }
  }
  return out;
}

inline std::uint8_t clamp_u8(double v) noexcept {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

/// [0, 255] -> [-1, 1], laid out as 1 x 3 x H x W.
inline NormalizedTensor normalize(const RasterImage& image) {
  NormalizedTensor t(1, 3, image.height(), image.width());
  const auto& d = image.data();
  const std::size_t plane = image.pixels();
  for (std::size_t i = 0; i < plane; ++i)
    for (int ch = 0; ch < 3; ++ch) t.data[ch * plane + i] = float(d[3 * i + ch]) / 127.5f - 1.0f;
  return t;
}

/// Inverse of normalize with clamping; reads sample `index` of a batch.
inline RasterImage denormalize(const NormalizedTensor& t, int index = 0) {
  if (t.c != 3) throw ShapeError("denormalize: expected 3 channels");
  RasterImage out(t.w, t.h);
  auto& d = out.data();
  const std::size_t plane = t.plane();
  const float* src = t.sample(index);
  for (std::size_t i = 0; i < plane; ++i)
    for (int ch = 0; ch < 3; ++ch) d[3 * i + ch] = clamp_u8((double(src[ch * plane + i]) + 1.0) * 127.5);
  return out;
}

/// Bilinear resize with pixel-center alignment.
inline RasterImage resize_bilinear(const RasterImage& src, int width, int height) {
  if (src.width() == width && src.height() == height) return src;
  RasterImage out(width, height);
  const double sx = double(src.width()) / width, sy = double(src.height()) / height;
  for (int y = 0; y < height; ++y) {
    double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, double(src.height() - 1));
    int y0 = int(fy), y1 = std::min(y0 + 1, src.height() - 1);
    double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, double(src.width() - 1));
      int x0 = int(fx), x1 = std::min(x0 + 1, src.width() - 1);
      double wx = fx - x0;
      for (int ch = 0; ch < 3; ++ch) {
        double v = (1 - wy) * ((1 - wx) * src.at(x0, y0, ch) + wx * src.at(x1, y0, ch)) +
                   wy * ((1 - wx) * src.at(x0, y1, ch) + wx * src.at(x1, y1, ch));
        out.at(x, y, ch) = clamp_u8(v);
      }
    }
  }
  return out;
}

inline BinaryMask resize_nearest(const BinaryMask& src, int width, int height) {
  if (src.width() == width && src.height() == height) return src;
  BinaryMask out(width, height);
  for (int y = 0; y < height; ++y) {
    int sy = std::min(int((y + 0.5) * src.height() / height), src.height() - 1);
    for (int x = 0; x < width; ++x) {
      int sx = std::min(int((x + 0.5) * src.width() / width), src.width() - 1);
      out.set(x, y, src.at(sx, sy));
    }
  }
  return out;
}

/// Square-structuring-element dilation by `radius` pixels.
inline BinaryMask dilate(const BinaryMask& m, int radius) {
  if (radius <= 0) return m;
  BinaryMask out(m.width(), m.height());
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) {
      bool hit = false;
      for (int dy = -radius; dy <= radius && !hit; ++dy)
        for (int dx = -radius; dx <= radius && !hit; ++dx) {
          int xx = x + dx, yy = y + dy;
          hit = xx >= 0 && yy >= 0 && xx < m.width() && yy < m.height() && m.at(xx, yy);
        }
      out.set(x, y, hit);
    }
  return out;
}

}  // namespace sim2real::imaging
