#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sim2real/augment/ops.hpp"
#include "sim2real/core/errors.hpp"
#include "sim2real/core/rng.hpp"
#include "sim2real/scenegen/scene.hpp"

namespace sim2real::augment {

using nlohmann::json;
using scenegen::Range;

enum class Op { ChannelInvert, ChannelAdd, Multiply, ContrastNormalize, SaltPepper, EdgeBlur, BlackPatches, Elastic };
enum class Kind { Photometric, Geometric };

inline constexpr std::array<Op, 8> kAllOps{Op::ChannelInvert, Op::ChannelAdd,  Op::Multiply,     Op::ContrastNormalize,
                                           Op::SaltPepper,    Op::EdgeBlur,    Op::BlackPatches, Op::Elastic};

inline const char* op_name(Op op) {
  switch (op) {
    case Op::ChannelInvert: return "channel_invert";
    case Op::ChannelAdd: return "channel_add";
    case Op::Multiply: return "multiply";
    case Op::ContrastNormalize: return "contrast_normalize";
    case Op::SaltPepper: return "salt_pepper";
    case Op::EdgeBlur: return "edge_blur";
    case Op::BlackPatches: return "black_patches";
    case Op::Elastic: return "elastic_transform";
  }
  return "?";
}

inline Kind op_kind(Op op) { return op == Op::Elastic ? Kind::Geometric : Kind::Photometric; }

/// One augmentation with its firing probability and parameter ranges.
///
/// `range` holds the op's main parameter: delta (add), factor (multiply), alpha
/// (contrast, elastic), density (salt & pepper), sigma (blur) or patch count.
/// `range2` is the patch side length or the elastic smoothing sigma.
/// `channels` fixes the inverted subset; -1 draws a random nonempty subset per firing.
struct AugmentationSpec {
  Op op = Op::ChannelInvert;
  double probability = 0.3;
  Range range{};
  Range range2{};
  int channels = -1;

  Kind kind() const { return op_kind(op); }

  void validate() const {
    const std::string name = op_name(op);
    if (!(probability >= 0.0 && probability <= 1.0)) throw ConfigError(name + ": probability must lie in [0, 1]");
    if (!(range.min <= range.max) || !(range2.min <= range2.max)) throw ConfigError(name + ": inverted parameter range");
    auto within = [&](const Range& r, double lo, double hi) {
      if (r.min < lo || r.max > hi)
        throw ConfigError(name + ": range must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    };
    switch (op) {
      case Op::ChannelInvert:
        if (channels < -1 || channels > 7) throw ConfigError(name + ": channels must be -1 or a bitmask in [0, 7]");
        break;
      case Op::ChannelAdd: within(range, -50, 50); break;
      case Op::Multiply: within(range, 0.25, 1.5); break;
      case Op::ContrastNormalize:
        if (range.min <= 0) throw ConfigError(name + ": alpha must be positive");
        break;
      case Op::SaltPepper: within(range, 0.0, 1.0); break;
      case Op::EdgeBlur: within(range, 0.0, 1e9); break;
      case Op::BlackPatches:
        within(range, 0, 1e9);
        within(range2, 0, 1e9);
        break;
      case Op::Elastic:
        within(range, 0, 1e9);
        if (range2.min <= 0) throw ConfigError(name + ": sigma must be positive");
        break;
    }
  }
};

/// Default parameter ranges per op.
inline AugmentationSpec default_spec(Op op, double probability = 0.3) {
  switch (op) {
    case Op::ChannelInvert: return {op, probability, {}, {}, -1};
    case Op::ChannelAdd: return {op, probability, {-50, 50}, {}, -1};
    case Op::Multiply: return {op, probability, {0.25, 1.5}, {}, -1};
    case Op::ContrastNormalize: return {op, probability, {0.5, 1.5}, {}, -1};
    case Op::SaltPepper: return {op, probability, {0.0, 0.05}, {}, -1};
    case Op::EdgeBlur: return {op, probability, {0.0, 1.5}, {}, -1};
    case Op::BlackPatches: return {op, probability, {1, 4}, {4, 12}, -1};
    case Op::Elastic: return {op, probability, {0.0, 40.0}, {5.0, 5.0}, -1};
  }
  return {};
}

/// Ordered list of augmentations; order is the order listed in kAllOps.
struct AugmentationPipeline {
  std::vector<AugmentationSpec> specs;
  std::uint64_t master_seed = 0;

  static AugmentationPipeline defaults(double probability = 0.3, std::uint64_t seed = 0) {
    AugmentationPipeline p{{}, seed};
    for (Op op : kAllOps) p.specs.push_back(default_spec(op, probability));
    return p;
  }

  /// Per-image stream: hash(master seed, image index).
  Rng rng_for(std::uint64_t index) const { return Rng(derive_seed(master_seed, {index})); }

  void validate() const {
    for (const auto& s : specs) s.validate();
  }
};

struct AppliedOp {
  Op op;
  json params;
};

struct AugmentResult {
  RasterImage image;
  BinaryMask mask;
  std::vector<AppliedOp> log;
};

inline json log_to_json(const std::vector<AppliedOp>& log) {
  json arr = json::array();
  for (const auto& a : log) arr.push_back({{"op", op_name(a.op)}, {"params", a.params}});
  return arr;
}

namespace detail {
inline double draw(Rng& rng, const Range& r) { return r.min == r.max ? r.min : uniform(rng, r.min, r.max); }
inline int draw_int(Rng& rng, const Range& r) {
  const int lo = int(std::lround(r.min)), hi = int(std::lround(r.max));
  return lo == hi ? lo : uniform_int(rng, lo, hi);
}
}  // namespace detail

/// Fires each spec independently with its probability, in pipeline order.
/// Photometric ops touch only the image; the elastic warp moves image and mask together.
inline AugmentResult apply_pipeline(const RasterImage& image, const BinaryMask& mask, const AugmentationPipeline& pipeline,
                                    Rng& rng) {
  imaging::require_same_dims(image, mask, "apply_pipeline");
  AugmentResult r{image, mask, {}};
  for (const auto& spec : pipeline.specs) {
    spec.validate();
    if (!bernoulli(rng, spec.probability)) continue;
    switch (spec.op) {
      case Op::ChannelInvert: {
        const unsigned ch = spec.channels >= 0 ? unsigned(spec.channels) : unsigned(uniform_int(rng, 1, 7));
        r.image = channel_invert(r.image, ch);
        r.log.push_back({spec.op, {{"channels", ch}}});
        break;
      }
      case Op::ChannelAdd: {
        const int delta = detail::draw_int(rng, spec.range);
        r.image = channel_add(r.image, delta);
        r.log.push_back({spec.op, {{"delta", delta}}});
        break;
      }
      case Op::Multiply: {
        const double f = detail::draw(rng, spec.range);
        r.image = multiply(r.image, f);
        r.log.push_back({spec.op, {{"factor", f}}});
        break;
      }
      case Op::ContrastNormalize: {
        const double a = detail::draw(rng, spec.range);
        r.image = contrast_normalize(r.image, a);
        r.log.push_back({spec.op, {{"alpha", a}}});
        break;
      }
      case Op::SaltPepper: {
        const double p = detail::draw(rng, spec.range);
        r.image = salt_pepper(r.image, p, rng);
        r.log.push_back({spec.op, {{"p", p}}});
        break;
      }
      case Op::EdgeBlur: {
        const double s = detail::draw(rng, spec.range);
        r.image = edge_blur(r.image, s);
        r.log.push_back({spec.op, {{"sigma", s}}});
        break;
      }
      case Op::BlackPatches: {
        const int count = detail::draw_int(rng, spec.range);
        const int size = detail::draw_int(rng, spec.range2);
        std::vector<PatchPosition> pos;
        r.image = black_patches(r.image, count, size, rng, &pos);
        json p = json::array();
        for (const auto& q : pos) p.push_back({q.x, q.y});
        r.log.push_back({spec.op, {{"count", count}, {"size", size}, {"positions", p}}});
        break;
      }
      case Op::Elastic: {
        const double alpha = detail::draw(rng, spec.range);
        const double sigma = detail::draw(rng, spec.range2);
        auto [img, m] = elastic_transform(r.image, r.mask, alpha, sigma, rng);
        r.image = std::move(img);
        r.mask = std::move(m);
        r.log.push_back({spec.op, {{"alpha", alpha}, {"sigma", sigma}}});
        break;
      }
    }
  }
  return r;
}

}  // namespace sim2real::augment
