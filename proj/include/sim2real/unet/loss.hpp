#pragma once

#include <algorithm>
#include <cmath>

#include "sim2real/core/errors.hpp"
#include "sim2real/core/tensor.hpp"
#include "sim2real/imaging/raster.hpp"

namespace sim2real::unet {

inline constexpr double kProbabilityEpsilon = 1e-7;

/// Mean pixelwise binary cross-entropy on probabilities clamped to [eps, 1 - eps].
/// `truth` is N x 1 x H x W with entries in {0, 1}.
template <typename S>
double segmentation_loss(const Tensor<S>& probabilities, const Tensor<S>& truth) {
  require_same_shape(probabilities, truth, "segmentation_loss");
  double acc = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const double p = std::clamp(double(probabilities.data[i]), kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
    const double t = truth.data[i];
    acc -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
  }
  const double loss = acc / double(probabilities.size());
  if (!std::isfinite(loss)) throw NumericError("non-finite segmentation loss");
  return loss;
}

template <typename S>
double segmentation_loss(const Tensor<S>& probabilities, const imaging::BinaryMask& truth) {
  Tensor<S> t(1, 1, truth.height(), truth.width());
  for (std::size_t i = 0; i < truth.pixels(); ++i) t.data[i] = truth[i] ? S(1) : S(0);
  return segmentation_loss(probabilities, t);
}

/// d loss / d logit for a sigmoid output: (p - t) / N. Matches the gradient of
/// the clamped loss wherever the clamp is inactive, and keeps saturated wrong
/// predictions trainable.
template <typename S>
Tensor<S> segmentation_loss_logit_grad(const Tensor<S>& probabilities, const Tensor<S>& truth) {
  require_same_shape(probabilities, truth, "segmentation_loss");
  Tensor<S> g(truth.n, truth.c, truth.h, truth.w);
  const double inv = 1.0 / double(truth.size());
  for (std::size_t i = 0; i < g.size(); ++i) g.data[i] = S((double(probabilities.data[i]) - truth.data[i]) * inv);
  return g;
}

}  // namespace sim2real::unet
