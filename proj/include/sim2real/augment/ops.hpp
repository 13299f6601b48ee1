#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "sim2real/core/errors.hpp"
#include "sim2real/core/rng.hpp"
#include "sim2real/imaging/raster.hpp"

namespace sim2real::augment {

using imaging::BinaryMask;
using imaging::RasterImage;

/// v -> 255 - v on every channel whose bit is set in `channels` (bit 0 = R).
inline RasterImage channel_invert(const RasterImage& image, unsigned channels = 0b111) {
  RasterImage out = image;
  auto& d = out.data();
  for (std::size_t i = 0; i < d.size(); ++i)
    if (channels & (1u << (i % 3))) d[i] = static_cast<std::uint8_t>(255 - d[i]);
  return out;
}

inline RasterImage channel_add(const RasterImage& image, int delta) {
  if (delta < -50 || delta > 50) throw ParameterError("channel_add: delta must lie in [-50, 50]");
  RasterImage out = image;
  for (auto& v : out.data()) v = static_cast<std::uint8_t>(std::clamp(int(v) + delta, 0, 255));
  return out;
}

inline RasterImage multiply(const RasterImage& image, double factor) {
  if (!(factor >= 0.25 && factor <= 1.5)) throw ParameterError("multiply: factor must lie in [0.25, 1.5]");
  RasterImage out = image;
  for (auto& v : out.data()) v = imaging::clamp_u8(v * factor);
  return out;
}

/// Contrast about mid-grey 128.
inline RasterImage contrast_normalize(const RasterImage& image, double alpha) {
  if (!(alpha > 0.0)) throw ParameterError("contrast_normalize: alpha must be positive");
  RasterImage out = image;
  for (auto& v : out.data()) v = imaging::clamp_u8(alpha * (double(v) - 128.0) + 128.0);
  return out;
}

/// Each pixel (all three channels) becomes 0 or 255 with probability p.
inline RasterImage salt_pepper(const RasterImage& image, double p, Rng& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw ParameterError("salt_pepper: p must lie in [0, 1]");
  RasterImage out = image;
  auto& d = out.data();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < out.pixels(); ++i) {
    const bool hit = u(rng) < p;
    const bool salt = u(rng) < 0.5;
    if (hit) d[3 * i] = d[3 * i + 1] = d[3 * i + 2] = salt ? 255 : 0;
  }
  return out;
}

/// Mirror index into [0, n) without repeating the edge sample (…2 1 0 1 2…).
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

/// Normalized 1-D Gaussian, truncated at ceil(3 sigma).
inline std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, int(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) sum += k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& v : k) v /= sum;
  return k;
}

/// Separable Gaussian on a single real-valued plane with reflective borders.
inline std::vector<double> gaussian_blur_plane(const std::vector<double>& plane, int width, int height, double sigma) {
  if (sigma <= 0.0) return plane;
  const auto k = gaussian_kernel(sigma);
  const int r = int(k.size() / 2);
  std::vector<double> tmp(plane.size()), out(plane.size());
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int j = -r; j <= r; ++j) acc += k[j + r] * plane[static_cast<std::size_t>(y) * width + reflect_index(x + j, width)];
      tmp[static_cast<std::size_t>(y) * width + x] = acc;
    }
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int j = -r; j <= r; ++j) acc += k[j + r] * tmp[static_cast<std::size_t>(reflect_index(y + j, height)) * width + x];
      out[static_cast<std::size_t>(y) * width + x] = acc;
    }
  return out;
}

/// Gaussian blur of every channel; sigma = 0 is the identity.
inline RasterImage edge_blur(const RasterImage& image, double sigma) {
  if (!(sigma >= 0.0)) throw ParameterError("edge_blur: sigma must be non-negative");
  if (sigma == 0.0) return image;
  const int w = image.width(), h = image.height();
  RasterImage out(w, h);
  std::vector<double> plane(image.pixels());
  for (int ch = 0; ch < 3; ++ch) {
    for (std::size_t i = 0; i < plane.size(); ++i) plane[i] = image.data()[3 * i + ch];
    const auto blurred = gaussian_blur_plane(plane, w, h, sigma);
    for (std::size_t i = 0; i < plane.size(); ++i) out.data()[3 * i + ch] = imaging::clamp_u8(blurred[i]);
  }
  return out;
}

struct PatchPosition {
  int x = 0;
  int y = 0;
  bool operator==(const PatchPosition&) const = default;
};

/// Zeroes `size` x `size` squares with top-left corners at `positions`.
inline RasterImage black_patches_at(const RasterImage& image, const std::vector<PatchPosition>& positions, int size) {
  if (size < 0 || size >= image.width() || size >= image.height())
    throw ParameterError("black_patches: patch size must be smaller than the image");
  RasterImage out = image;
  for (const auto& p : positions)
    for (int y = p.y; y < std::min(p.y + size, image.height()); ++y)
      for (int x = p.x; x < std::min(p.x + size, image.width()); ++x) out.set(x, y, 0, 0, 0);
  return out;
}

/// Random patch positions keep every square fully inside the image. The mask is
/// left alone: a patch occludes an instrument that is still there.
inline RasterImage black_patches(const RasterImage& image, int count, int size, Rng& rng,
                                 std::vector<PatchPosition>* positions_out = nullptr) {
  if (size < 0 || size >= image.width() || size >= image.height())
    throw ParameterError("black_patches: patch size must be smaller than the image");
  if (count < 0) throw ParameterError("black_patches: negative patch count");
  std::vector<PatchPosition> positions;
  for (int i = 0; i < count; ++i)
    positions.push_back({uniform_int(rng, 0, image.width() - size), uniform_int(rng, 0, image.height() - size)});
  if (positions_out) *positions_out = positions;
  return black_patches_at(image, positions, size);
}

/// Per-pixel sampling offsets: output(x, y) = input(x + dx, y + dy).
struct DisplacementField {
  int width = 0, height = 0;
  std::vector<double> dx, dy;

  static DisplacementField constant(int width, int height, double dx, double dy) {
    const std::size_t n = static_cast<std::size_t>(width) * height;
    return {width, height, std::vector<double>(n, dx), std::vector<double>(n, dy)};
  }
};

/// Uniform white noise in [-1, 1], smoothed by a Gaussian of `sigma`, scaled by `alpha`.
inline DisplacementField elastic_field(int width, int height, double alpha, double sigma, Rng& rng) {
  if (!(alpha >= 0.0) || !(sigma > 0.0)) throw ParameterError("elastic_transform: need alpha >= 0 and sigma > 0");
  const std::size_t n = static_cast<std::size_t>(width) * height;
  std::vector<double> nx(n), ny(n);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    nx[i] = u(rng);
    ny[i] = u(rng);
  }
  DisplacementField f{width, height, gaussian_blur_plane(nx, width, height, sigma), gaussian_blur_plane(ny, width, height, sigma)};
  for (std::size_t i = 0; i < n; ++i) {
    f.dx[i] *= alpha;
    f.dy[i] *= alpha;
  }
  return f;
}

/// Warps image (bilinear) and mask (nearest neighbour) with one shared field.
/// Samples outside the frame clamp to the nearest edge pixel.
inline std::pair<RasterImage, BinaryMask> warp(const RasterImage& image, const BinaryMask& mask, const DisplacementField& f) {
  imaging::require_same_dims(image, mask, "warp");
  if (f.width != image.width() || f.height != image.height()) throw ShapeError("warp: field dimension mismatch");
  const int w = image.width(), h = image.height();
  RasterImage out(w, h);
  BinaryMask out_mask(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const double sx = std::clamp(x + f.dx[i], 0.0, double(w - 1));
      const double sy = std::clamp(y + f.dy[i], 0.0, double(h - 1));
      const int x0 = int(sx), y0 = int(sy);
      const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
      const double wx = sx - x0, wy = sy - y0;
      for (int ch = 0; ch < 3; ++ch) {
        const double v = (1 - wy) * ((1 - wx) * image.at(x0, y0, ch) + wx * image.at(x1, y0, ch)) +
                         wy * ((1 - wx) * image.at(x0, y1, ch) + wx * image.at(x1, y1, ch));
        out.at(x, y, ch) = imaging::clamp_u8(v);
      }
      out_mask.set(x, y, mask.at(int(std::lround(sx)), int(std::lround(sy))));
    }
  return {std::move(out), std::move(out_mask)};
}

inline std::pair<RasterImage, BinaryMask> elastic_transform(const RasterImage& image, const BinaryMask& mask, double alpha,
                                                            double sigma, Rng& rng) {
  const auto field = elastic_field(image.width(), image.height(), alpha, sigma, rng);
  if (alpha == 0.0) return {image, mask};
  return warp(image, mask, field);
}

}  // namespace sim2real::augment
