#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "sim2real/core/errors.hpp"
#include "sim2real/core/rng.hpp"
#include "sim2real/imaging/raster.hpp"

namespace sim2real::scenegen {

using imaging::BinaryMask;
using imaging::RasterImage;

struct Range {
  double min = 0.0;
  double max = 0.0;

  bool operator==(const Range&) const = default;
};

/// Sampling ranges for every scene parameter. Degenerate ranges (min == max) are allowed.
struct SceneRanges {
  Range position_x{0.3, 0.7};  // image-width fraction of the instrument centre
  Range position_y{0.3, 0.7};
  Range rotation_deg{0.0, 360.0};
  Range scale{0.4, 0.8};  // instrument length as a fraction of image height
  Range joint_deg{0.0, 60.0};
  Range light_deg{0.0, 360.0};

  void validate() const {
    auto check = [](const Range& r, const char* name) {
      if (!(r.min <= r.max)) throw ConfigError(std::string("scene range '") + name + "' is inverted (min > max)");
    };
    check(position_x, "position_x");
    check(position_y, "position_y");
    check(rotation_deg, "rotation_deg");
    check(scale, "scale");
    check(joint_deg, "joint_deg");
    check(light_deg, "light_deg");
    if (scale.min <= 0.0) throw ConfigError("scene range 'scale' must be positive");
  }

  bool operator==(const SceneRanges&) const = default;
};

struct SceneParams {
  double x = 0.5;  // centre, fraction of width
  double y = 0.5;  // centre, fraction of height
  double rotation_deg = 0.0;
  double scale = 0.5;
  double joint_deg = 0.0;
  std::array<double, 2> light{1.0, 0.0};
  std::uint64_t seed = 0;

  bool operator==(const SceneParams&) const = default;
};

/// Capsule: all points within `radius` of segment a-b.
struct Capsule {
  double ax, ay, bx, by, radius;

  double distance(double px, double py) const noexcept {
    const double vx = bx - ax, vy = by - ay;
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double dx = px - (ax + t * vx), dy = py - (ay + t * vy);
    return std::sqrt(dx * dx + dy * dy);
  }
  bool contains(double px, double py) const noexcept { return distance(px, py) <= radius; }
  double length() const noexcept { return std::hypot(bx - ax, by - ay); }
};

/// Proportions of the toy instrument relative to its total length.
struct InstrumentShape {
  static constexpr double kShaftFraction = 0.7;
  static constexpr double kJawFraction = 0.3;
  static constexpr double kShaftRadius = 0.1;
  static constexpr double kJawRadius = 0.06;
};

/// Shaft capsule plus two jaw capsules hinged at the shaft tip.
struct InstrumentGeometry {
  Capsule shaft;
  Capsule jaw_upper;
  Capsule jaw_lower;

  int part_at(double px, double py) const noexcept {
    if (shaft.contains(px, py)) return 1;
    if (jaw_upper.contains(px, py) || jaw_lower.contains(px, py)) return 2;
    return 0;
  }
};

inline InstrumentGeometry instrument_geometry(const SceneParams& p, int width, int height) {
  const double length = p.scale * height;
  const double theta = p.rotation_deg * std::numbers::pi / 180.0;
  const double dx = std::cos(theta), dy = std::sin(theta);
  const double cx = p.x * width, cy = p.y * height;
  const double tail_x = cx - 0.5 * length * dx, tail_y = cy - 0.5 * length * dy;
  const double pivot_x = cx + (InstrumentShape::kShaftFraction - 0.5) * length * dx;
  const double pivot_y = cy + (InstrumentShape::kShaftFraction - 0.5) * length * dy;
  const double half = 0.5 * p.joint_deg * std::numbers::pi / 180.0;
  const double jaw_len = InstrumentShape::kJawFraction * length;
  auto jaw = [&](double sign) {
    const double a = theta + sign * half;
    return Capsule{pivot_x, pivot_y, pivot_x + jaw_len * std::cos(a), pivot_y + jaw_len * std::sin(a),
                   InstrumentShape::kJawRadius * length};
  };
  return {Capsule{tail_x, tail_y, pivot_x, pivot_y, InstrumentShape::kShaftRadius * length}, jaw(+1.0), jaw(-1.0)};
}

/// Approximate fraction of the instrument's area inside the frame, estimated on a
/// regular grid over the bounding box of the geometry.
inline double in_frame_fraction(const InstrumentGeometry& g, int width, int height) {
  double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
  for (const Capsule* c : {&g.shaft, &g.jaw_upper, &g.jaw_lower}) {
    x0 = std::min({x0, c->ax - c->radius, c->bx - c->radius});
    x1 = std::max({x1, c->ax + c->radius, c->bx + c->radius});
    y0 = std::min({y0, c->ay - c->radius, c->by - c->radius});
    y1 = std::max({y1, c->ay + c->radius, c->by + c->radius});
  }
  constexpr int kSteps = 96;
  std::size_t inside = 0, total = 0;
  for (int i = 0; i < kSteps; ++i)
    for (int j = 0; j < kSteps; ++j) {
      const double px = x0 + (x1 - x0) * (i + 0.5) / kSteps, py = y0 + (y1 - y0) * (j + 0.5) / kSteps;
      if (!g.part_at(px, py)) continue;
      ++total;
      inside += (px >= 0 && py >= 0 && px < width && py < height);
    }
  return total ? double(inside) / double(total) : 0.0;
}

inline constexpr double kMinInFrameFraction = 0.25;

namespace detail {
inline double draw(Rng& rng, const Range& r) { return r.min == r.max ? r.min : uniform(rng, r.min, r.max); }
}  // namespace detail

/// Independent uniform draws from each range. Positions are redrawn (bounded
/// retries) when less than a quarter of the instrument would be visible.
inline SceneParams sample_scene_params(Rng& rng, const SceneRanges& ranges, int width = 128, int height = 128) {
  ranges.validate();
  SceneParams p;
  p.rotation_deg = detail::draw(rng, ranges.rotation_deg);
  p.scale = detail::draw(rng, ranges.scale);
  p.joint_deg = detail::draw(rng, ranges.joint_deg);
  const double light = detail::draw(rng, ranges.light_deg) * std::numbers::pi / 180.0;
  p.light = {std::cos(light), std::sin(light)};
  p.seed = rng();
  for (int attempt = 0; attempt < 64; ++attempt) {
    p.x = detail::draw(rng, ranges.position_x);
    p.y = detail::draw(rng, ranges.position_y);
    if (in_frame_fraction(instrument_geometry(p, width, height), width, height) >= kMinInFrameFraction) return p;
  }
  throw ConfigError("scene ranges cannot keep 25% of the instrument in frame");
}

struct RenderedScene {
  RasterImage image;
  BinaryMask mask;
};

/// Pixel-centre coverage of the instrument geometry.
inline BinaryMask render_mask(const SceneParams& p, int width, int height) {
  const auto g = instrument_geometry(p, width, height);
  BinaryMask mask(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) mask.set(x, y, g.part_at(x + 0.5, y + 0.5) != 0);
  return mask;
}

/// Smooth value noise in [0, 1]: random lattice every `cell` pixels, smoothstep-interpolated.
inline std::vector<float> value_noise(int width, int height, double cell, Rng& rng) {
  const int gw = int(std::ceil(width / cell)) + 2, gh = int(std::ceil(height / cell)) + 2;
  std::vector<float> lattice(static_cast<std::size_t>(gw) * gh);
  for (auto& v : lattice) v = float(uniform(rng, 0.0, 1.0));
  std::vector<float> out(static_cast<std::size_t>(width) * height);
  auto smooth = [](double t) { return t * t * (3 - 2 * t); };
  for (int y = 0; y < height; ++y) {
    const double fy = y / cell;
    const int iy = int(fy);
    const double ty = smooth(fy - iy);
    for (int x = 0; x < width; ++x) {
      const double fx = x / cell;
      const int ix = int(fx);
      const double tx = smooth(fx - ix);
      auto l = [&](int a, int b) { return double(lattice[static_cast<std::size_t>(b) * gw + a]); };
      const double top = l(ix, iy) * (1 - tx) + l(ix + 1, iy) * tx;
      const double bot = l(ix, iy + 1) * (1 - tx) + l(ix + 1, iy + 1) * tx;
      out[static_cast<std::size_t>(y) * width + x] = float(top * (1 - ty) + bot * ty);
    }
  }
  return out;
}

namespace detail {

inline double part_shade(const Capsule& c, const std::array<double, 2>& light) {
  const double len = std::max(c.length(), 1e-9);
  const double nx = -(c.by - c.ay) / len, ny = (c.bx - c.ax) / len;
  return 0.55 + 0.45 * std::abs(nx * light[0] + ny * light[1]);
}

}  // namespace detail

/// Flat-shaded instrument on a uniform dark background.
inline RenderedScene render_synthetic(const SceneParams& p, int width, int height) {
  const auto g = instrument_geometry(p, width, height);
  RenderedScene out{RasterImage(width, height), render_mask(p, width, height)};
  const double shaft_shade = detail::part_shade(g.shaft, p.light);
  const double jaw_shade = 0.5 * (detail::part_shade(g.jaw_upper, p.light) + detail::part_shade(g.jaw_lower, p.light));
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      switch (g.part_at(x + 0.5, y + 0.5)) {
        case 1:
          out.image.set(x, y, imaging::clamp_u8(175 * shaft_shade), imaging::clamp_u8(180 * shaft_shade),
                        imaging::clamp_u8(190 * shaft_shade));
          break;
        case 2:
          out.image.set(x, y, imaging::clamp_u8(125 * jaw_shade), imaging::clamp_u8(128 * jaw_shade),
                        imaging::clamp_u8(140 * jaw_shade));
          break;
        default:
          out.image.set(x, y, 18, 18, 22);
      }
    }
  return out;
}

/// Green-blue textured backdrop of the capture setup.
inline RasterImage green_blue_background(int width, int height, Rng& rng) {
  const auto coarse = value_noise(width, height, std::max(4.0, width / 4.0), rng);
  const auto fine = value_noise(width, height, std::max(2.0, width / 24.0), rng);
  RasterImage bg(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * width + x;
      const double v = 0.75 + 0.35 * coarse[i] + 0.12 * (fine[i] - 0.5);
      bg.set(x, y, imaging::clamp_u8(25 * v), imaging::clamp_u8(135 * v), imaging::clamp_u8(120 * v));
    }
  return bg;
}

/// Same geometry and mask as render_synthetic, rendered with metallic texture,
/// a light-dependent specular streak, vignetting and a green-blue background.
inline RenderedScene render_realistic(const SceneParams& p, int width, int height) {
  Rng rng(derive_seed(p.seed, {tag("realistic")}));
  const auto g = instrument_geometry(p, width, height);
  RenderedScene out{green_blue_background(width, height, rng), render_mask(p, width, height)};
  const auto grain = value_noise(width, height, 1.5, rng);
  const auto brushed = value_noise(width, height, std::max(3.0, width / 16.0), rng);

  const double len = std::max(g.shaft.length(), 1e-9);
  const double ux = (g.shaft.bx - g.shaft.ax) / len, uy = (g.shaft.by - g.shaft.ay) / len;
  const double nx = -uy, ny = ux;
  const double streak_centre = 0.55 * (nx * p.light[0] + ny * p.light[1]);
  const double shaft_shade = detail::part_shade(g.shaft, p.light);
  const double jaw_shade = 0.5 * (detail::part_shade(g.jaw_upper, p.light) + detail::part_shade(g.jaw_lower, p.light));
  const double cx = 0.5 * width, cy = 0.5 * height, rmax = std::hypot(cx, cy);

  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      const std::size_t i = static_cast<std::size_t>(y) * width + x;
      double r = out.image.at(x, y, 0), gr = out.image.at(x, y, 1), b = out.image.at(x, y, 2);
      const double texture = 18.0 * (grain[i] - 0.5) + 22.0 * (brushed[i] - 0.5);
      if (const int part = g.part_at(px, py); part == 1) {
        const double across = ((px - g.shaft.ax) * nx + (py - g.shaft.ay) * ny) / g.shaft.radius;
        const double streak = 95.0 * std::exp(-std::pow((across - streak_centre) / 0.28, 2.0));
        const double base = 140.0 * shaft_shade + texture;
        r = base + streak;
        gr = base + 2 + streak;
        b = base + 6 + streak;
      } else if (part == 2) {
        const double base = 85.0 * jaw_shade + 0.8 * texture;
        r = base + 4;
        gr = base;
        b = base + 2;
      }
      const double rr = std::hypot(px - cx, py - cy) / rmax;
      const double vignette = 1.0 - 0.45 * rr * rr;
      out.image.set(x, y, imaging::clamp_u8(r * vignette), imaging::clamp_u8(gr * vignette),
                    imaging::clamp_u8(b * vignette));
    }
  return out;
}

/// Random-hue textured backdrop used to randomize realistic training backgrounds.
inline RasterImage random_background(int width, int height, Rng& rng) {
  const double base[3] = {uniform(rng, 20, 230), uniform(rng, 20, 230), uniform(rng, 20, 230)};
  const double contrast = uniform(rng, 0.2, 0.7);
  const auto coarse = value_noise(width, height, std::max(3.0, width / uniform(rng, 2.0, 8.0)), rng);
  const auto fine = value_noise(width, height, std::max(1.5, width / uniform(rng, 12.0, 32.0)), rng);
  RasterImage bg(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * width + x;
      const double v = 1.0 + contrast * (coarse[i] - 0.5) + 0.5 * contrast * (fine[i] - 0.5);
      bg.set(x, y, imaging::clamp_u8(base[0] * v), imaging::clamp_u8(base[1] * v), imaging::clamp_u8(base[2] * v));
    }
  return bg;
}

/// Red-brown tissue-like texture with darker vessel streaks, held out for testing.
inline RasterImage organ_background(int width, int height, Rng& rng) {
  const double base_r = uniform(rng, 130, 190), base_g = uniform(rng, 45, 80), base_b = uniform(rng, 35, 65);
  const auto coarse = value_noise(width, height, std::max(3.0, width / 5.0), rng);
  const auto fine = value_noise(width, height, std::max(1.5, width / 20.0), rng);
  const auto vessels = value_noise(width, height, std::max(3.0, width / 6.0), rng);
  RasterImage bg(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * width + x;
      double v = 0.75 + 0.4 * coarse[i] + 0.15 * (fine[i] - 0.5);
      if (std::abs(vessels[i] - 0.5) < 0.03) v *= 0.6;
      bg.set(x, y, imaging::clamp_u8(base_r * v), imaging::clamp_u8(base_g * v), imaging::clamp_u8(base_b * v));
    }
  return bg;
}

}  // namespace sim2real::scenegen
