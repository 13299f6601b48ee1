#pragma once

#include <cmath>
#include <utility>

#include "sim2real/core/errors.hpp"
#include "sim2real/core/tensor.hpp"

namespace sim2real::cyclegan {

struct AdversarialLosses {
  double disc_loss = 0.0;
  double gen_loss = 0.0;
};

template <typename S>
double mean_squared_from(const Tensor<S>& scores, double target) {
  double acc = 0.0;
  for (S v : scores.data) {
    if (!std::isfinite(v)) throw NumericError("non-finite discriminator score");
    acc += (double(v) - target) * (double(v) - target);
  }
  return acc / double(scores.size());
}

/// Least-squares GAN losses on discriminator score grids:
/// disc = mean((real - 1)^2) / 2 + mean(fake^2) / 2, gen = mean((fake - 1)^2).
template <typename S>
AdversarialLosses adversarial_losses(const Tensor<S>& real_scores, const Tensor<S>& fake_scores) {
  AdversarialLosses l;
  l.disc_loss = 0.5 * mean_squared_from(real_scores, 1.0) + 0.5 * mean_squared_from(fake_scores, 0.0);
  l.gen_loss = mean_squared_from(fake_scores, 1.0);
  return l;
}

/// Gradient of weight * mean((s - target)^2) with respect to the scores.
template <typename S>
Tensor<S> mean_squared_grad(const Tensor<S>& scores, double target, double weight = 1.0) {
  Tensor<S> g(scores.n, scores.c, scores.h, scores.w);
  const double k = 2.0 * weight / double(scores.size());
  for (std::size_t i = 0; i < g.size(); ++i) g.data[i] = S(k * (double(scores.data[i]) - target));
  return g;
}

/// Mean absolute elementwise difference.
template <typename S>
double cycle_loss(const Tensor<S>& original, const Tensor<S>& reconstructed) {
  require_same_shape(original, reconstructed, "cycle_loss");
  double acc = 0.0;
  for (std::size_t i = 0; i < original.size(); ++i) acc += std::abs(double(reconstructed.data[i]) - double(original.data[i]));
  return acc / double(original.size());
}

/// Gradient of weight * cycle_loss with respect to `reconstructed`.
template <typename S>
Tensor<S> cycle_loss_grad(const Tensor<S>& original, const Tensor<S>& reconstructed, double weight) {
  Tensor<S> g(original.n, original.c, original.h, original.w);
  const double k = weight / double(original.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double d = double(reconstructed.data[i]) - double(original.data[i]);
    g.data[i] = S(d > 0 ? k : (d < 0 ? -k : 0.0));
  }
  return g;
}

inline double total_generator_objective(double adv_s2r, double adv_r2s, double cycle_s, double cycle_r, double lambda) {
  return adv_s2r + adv_r2s + lambda * (cycle_s + cycle_r);
}

}  // namespace sim2real::cyclegan
