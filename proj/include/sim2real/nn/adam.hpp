#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "sim2real/nn/layers.hpp"

namespace sim2real::nn {

struct AdamOptions {
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction over a fixed parameter list.
template <typename S>
class Adam {
 public:
  Adam(ParamList<S> params, AdamOptions options) : params_(std::move(params)), options_(options) {
    for (auto* p : params_) {
      m_.emplace_back(p->size(), S(0));
      v_.emplace_back(p->size(), S(0));
    }
  }

  void step() {
    ++t_;
    const double b1 = options_.beta1, b2 = options_.beta2, lr = options_.learning_rate;
    const double c1 = 1.0 - std::pow(b1, double(t_)), c2 = 1.0 - std::pow(b2, double(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& p = *params_[k];
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double g = p.grad[i];
        m[i] = S(b1 * m[i] + (1.0 - b1) * g);
        v[i] = S(b2 * v[i] + (1.0 - b2) * g * g);
        const double mhat = m[i] / c1, vhat = v[i] / c2;
        p.value[i] = S(p.value[i] - lr * mhat / (std::sqrt(vhat) + options_.epsilon));
      }
    }
  }

  const AdamOptions& options() const noexcept { return options_; }
  std::uint64_t steps() const noexcept { return t_; }
  void set_steps(std::uint64_t t) noexcept { t_ = t; }
  std::vector<std::vector<S>>& first_moments() noexcept { return m_; }
  std::vector<std::vector<S>>& second_moments() noexcept { return v_; }

 private:
  ParamList<S> params_;
  AdamOptions options_;
  std::vector<std::vector<S>> m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace sim2real::nn
