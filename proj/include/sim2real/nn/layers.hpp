#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sim2real/core/errors.hpp"
#include "sim2real/core/rng.hpp"
#include "sim2real/core/tensor.hpp"

namespace sim2real::nn {

template <typename S>
using MatMap = Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename S>
using ConstMatMap = Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

/// Trainable array with its gradient accumulator.
template <typename S>
struct Param {
  std::string name;
  AlignedVector<S> value;
  AlignedVector<S> grad;

  Param() = default;
  Param(std::string n, std::size_t size) : name(std::move(n)), value(size, S(0)), grad(size, S(0)) {}
  std::size_t size() const noexcept { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), S(0)); }
};

template <typename S>
using ParamList = std::vector<Param<S>*>;

template <typename S>
void zero_grads(const ParamList<S>& ps) {
  for (auto* p : ps) p->zero_grad();
}

template <typename S>
std::size_t count_parameters(const ParamList<S>& ps) {
  std::size_t n = 0;
  for (auto* p : ps) n += p->size();
  return n;
}

enum class Padding { Zero, Reflect };

/// Sliding-window geometry of a 2-D convolution: for every kernel tap and output
/// position, the flat input index it reads (or -1 for zero padding).
struct ConvGeometry {
  int in_h = 0, in_w = 0, out_h = 0, out_w = 0, kernel = 0;
  std::vector<int> taps;  // (kernel*kernel) x (out_h*out_w)

  static int reflect(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
  }

  ConvGeometry(int h, int w, int k, int stride, int pad, Padding mode) : in_h(h), in_w(w), kernel(k) {
    out_h = (h + 2 * pad - k) / stride + 1;
    out_w = (w + 2 * pad - k) / stride + 1;
    if (out_h <= 0 || out_w <= 0) throw ShapeError("convolution input smaller than kernel");
    if (mode == Padding::Reflect && (pad >= h || pad >= w)) throw ShapeError("reflect padding exceeds input size");
    const int positions = out_h * out_w;
    taps.resize(static_cast<std::size_t>(k) * k * positions);
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        int* row = &taps[static_cast<std::size_t>(ky * k + kx) * positions];
        for (int oy = 0; oy < out_h; ++oy)
          for (int ox = 0; ox < out_w; ++ox) {
            int iy = oy * stride - pad + ky, ix = ox * stride - pad + kx;
            int idx = -1;
            if (mode == Padding::Reflect) {
              idx = reflect(iy, h) * w + reflect(ix, w);
            } else if (iy >= 0 && iy < h && ix >= 0 && ix < w) {
              idx = iy * w + ix;
            }
            row[oy * out_w + ox] = idx;
          }
      }
  }

  int positions() const noexcept { return out_h * out_w; }

  /// cols[(c*kk + t) * P + p] = x[c][tap(t, p)]
  template <typename S>
  void im2col(const S* x, int channels, S* cols) const {
    const int kk = kernel * kernel, P = positions(), plane = in_h * in_w;
    for (int c = 0; c < channels; ++c) {
      const S* xc = x + static_cast<std::size_t>(c) * plane;
      for (int t = 0; t < kk; ++t) {
        const int* tap = &taps[static_cast<std::size_t>(t) * P];
        S* out = cols + static_cast<std::size_t>(c * kk + t) * P;
        for (int p = 0; p < P; ++p) out[p] = tap[p] >= 0 ? xc[tap[p]] : S(0);
      }
    }
  }

  /// Adjoint of im2col: scatter-add columns back onto the input planes.
  template <typename S>
  void col2im(const S* cols, int channels, S* x) const {
    const int kk = kernel * kernel, P = positions(), plane = in_h * in_w;
    for (int c = 0; c < channels; ++c) {
      S* xc = x + static_cast<std::size_t>(c) * plane;
      for (int t = 0; t < kk; ++t) {
        const int* tap = &taps[static_cast<std::size_t>(t) * P];
        const S* in = cols + static_cast<std::size_t>(c * kk + t) * P;
        for (int p = 0; p < P; ++p)
          if (tap[p] >= 0) xc[tap[p]] += in[p];
      }
    }
  }
};

class GeometryCache {
 public:
  GeometryCache(int k, int stride, int pad, Padding mode) : k_(k), stride_(stride), pad_(pad), mode_(mode) {}
  // Copies start with an empty table; entries are rebuilt on demand.
  GeometryCache(const GeometryCache& o) : k_(o.k_), stride_(o.stride_), pad_(o.pad_), mode_(o.mode_) {}
  GeometryCache& operator=(const GeometryCache& o) {
    if (this != &o) {
      k_ = o.k_, stride_ = o.stride_, pad_ = o.pad_, mode_ = o.mode_;
      cache_.clear();
    }
    return *this;
  }

  // Safe to call concurrently: map nodes never move once inserted.
  const ConvGeometry& get(int h, int w) const {
    std::lock_guard lock(mutex_);
    auto key = std::make_pair(h, w);
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, ConvGeometry(h, w, k_, stride_, pad_, mode_)).first;
    return it->second;
  }

 private:
  int k_, stride_, pad_;
  Padding mode_;
  mutable std::map<std::pair<int, int>, ConvGeometry> cache_;
  mutable std::mutex mutex_;
};

template <typename S>
void init_normal(Param<S>& p, double stddev, Rng& rng) {
  std::normal_distribution<double> d(0.0, stddev);
  for (auto& v : p.value) v = static_cast<S>(d(rng));
}

/// 2-D convolution via im2col + GEMM. Weight layout: out x (in * k * k).
template <typename S>
class Conv2d {
 public:
  Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad, Padding mode, bool bias, const std::string& name)
      : in_(in_channels), out_(out_channels), k_(kernel), stride_(stride), pad_(pad),
        weight_(name + ".weight", static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel),
        bias_(name + ".bias", bias ? out_channels : 0), geometry_(kernel, stride, pad, mode) {}

  int in_channels() const noexcept { return in_; }
  int out_channels() const noexcept { return out_; }
  int fan_in() const noexcept { return in_ * k_ * k_; }
  bool has_bias() const noexcept { return bias_.size() > 0; }

  std::pair<int, int> output_size(int h, int w) const {
    const auto& g = geometry_.get(h, w);
    return {g.out_h, g.out_w};
  }

  Tensor<S> forward(const Tensor<S>& x) const {
    if (x.c != in_) throw ShapeError(weight_.name + ": channel mismatch");
    const auto& g = geometry_.get(x.h, x.w);
    const int K = in_ * k_ * k_, P = g.positions();
    Tensor<S> y(x.n, out_, g.out_h, g.out_w);
    ConstMatMap<S> W(weight_.value.data(), out_, K);
    AlignedVector<S> cols;
    for (int n = 0; n < x.n; ++n) {
      MatMap<S> Y(y.sample(n), out_, P);
      if (is_pointwise()) {
        Y.noalias() = W * ConstMatMap<S>(x.sample(n), K, P);
      } else {
        cols.resize(static_cast<std::size_t>(K) * P);
        g.im2col(x.sample(n), in_, cols.data());
        Y.noalias() = W * ConstMatMap<S>(cols.data(), K, P);
      }
      if (has_bias())
        for (int o = 0; o < out_; ++o) Y.row(o).array() += bias_.value[o];
    }
    return y;
  }

  /// Accumulates parameter gradients; returns the input gradient when requested.
  Tensor<S> backward(const Tensor<S>& x, const Tensor<S>& gy, bool input_grad = true) {
    const auto& g = geometry_.get(x.h, x.w);
    const int K = in_ * k_ * k_, P = g.positions();
    Tensor<S> gx;
    if (input_grad) gx = Tensor<S>(x.n, x.c, x.h, x.w);
    ConstMatMap<S> W(weight_.value.data(), out_, K);
    MatMap<S> gW(weight_.grad.data(), out_, K);
    AlignedVector<S> cols, gcols;
    for (int n = 0; n < x.n; ++n) {
      ConstMatMap<S> GY(gy.sample(n), out_, P);
      if (is_pointwise()) {
        gW.noalias() += GY * ConstMatMap<S>(x.sample(n), K, P).transpose();
        if (input_grad) MatMap<S>(gx.sample(n), K, P).noalias() = W.transpose() * GY;
      } else {
        cols.resize(static_cast<std::size_t>(K) * P);
        g.im2col(x.sample(n), in_, cols.data());
        gW.noalias() += GY * ConstMatMap<S>(cols.data(), K, P).transpose();
        if (input_grad) {
          gcols.resize(cols.size());
          MatMap<S>(gcols.data(), K, P).noalias() = W.transpose() * GY;
          g.col2im(gcols.data(), in_, gx.sample(n));
        }
      }
      if (has_bias())
        for (int o = 0; o < out_; ++o) bias_.grad[o] += GY.row(o).sum();
    }
    return gx;
  }

  Param<S>& weight() noexcept { return weight_; }
  Param<S>& bias() noexcept { return bias_; }

  void params(ParamList<S>& out) {
    out.push_back(&weight_);
    if (has_bias()) out.push_back(&bias_);
  }

 private:
  bool is_pointwise() const noexcept { return k_ == 1 && stride_ == 1 && pad_ == 0; }

  int in_, out_, k_, stride_, pad_;
  Param<S> weight_, bias_;
  GeometryCache geometry_;
};

/// Transposed convolution (adjoint of a zero-padded Conv2d). Weight layout:
/// in x (out * k * k). Output size: (h - 1) * stride - 2 * pad + k + output_pad.
template <typename S>
class ConvTranspose2d {
 public:
  ConvTranspose2d(int in_channels, int out_channels, int kernel, int stride, int pad, int output_pad, bool bias,
                  const std::string& name)
      : in_(in_channels), out_(out_channels), k_(kernel), stride_(stride), pad_(pad), output_pad_(output_pad),
        weight_(name + ".weight", static_cast<std::size_t>(in_channels) * out_channels * kernel * kernel),
        bias_(name + ".bias", bias ? out_channels : 0), geometry_(kernel, stride, pad, Padding::Zero) {}

  int in_channels() const noexcept { return in_; }
  int out_channels() const noexcept { return out_; }
  int fan_in() const noexcept { return in_ * k_ * k_; }
  bool has_bias() const noexcept { return bias_.size() > 0; }

  const ConvGeometry& geometry_for(int h, int w) const {
    const int oh = (h - 1) * stride_ - 2 * pad_ + k_ + output_pad_;
    const int ow = (w - 1) * stride_ - 2 * pad_ + k_ + output_pad_;
    const auto& g = geometry_.get(oh, ow);
    if (g.out_h != h || g.out_w != w) throw ShapeError(weight_.name + ": inconsistent transposed geometry");
    return g;
  }

  Tensor<S> forward(const Tensor<S>& x) const {
    if (x.c != in_) throw ShapeError(weight_.name + ": channel mismatch");
    const auto& g = geometry_for(x.h, x.w);
    const int K = out_ * k_ * k_, P = g.positions();
    Tensor<S> y(x.n, out_, g.in_h, g.in_w);
    ConstMatMap<S> W(weight_.value.data(), in_, K);
    AlignedVector<S> cols(static_cast<std::size_t>(K) * P);
    for (int n = 0; n < x.n; ++n) {
      MatMap<S>(cols.data(), K, P).noalias() = W.transpose() * ConstMatMap<S>(x.sample(n), in_, P);
      g.col2im(cols.data(), out_, y.sample(n));
      if (has_bias()) {
        S* ys = y.sample(n);
        for (int o = 0; o < out_; ++o)
          for (std::size_t i = 0; i < y.plane(); ++i) ys[o * y.plane() + i] += bias_.value[o];
      }
    }
    return y;
  }

  Tensor<S> backward(const Tensor<S>& x, const Tensor<S>& gy, bool input_grad = true) {
    const auto& g = geometry_for(x.h, x.w);
    const int K = out_ * k_ * k_, P = g.positions();
    Tensor<S> gx;
    if (input_grad) gx = Tensor<S>(x.n, x.c, x.h, x.w);
    ConstMatMap<S> W(weight_.value.data(), in_, K);
    MatMap<S> gW(weight_.grad.data(), in_, K);
    AlignedVector<S> gcols(static_cast<std::size_t>(K) * P);
    for (int n = 0; n < x.n; ++n) {
      g.im2col(gy.sample(n), out_, gcols.data());
      ConstMatMap<S> GC(gcols.data(), K, P);
      gW.noalias() += ConstMatMap<S>(x.sample(n), in_, P) * GC.transpose();
      if (input_grad) MatMap<S>(gx.sample(n), in_, P).noalias() = W * GC;
      if (has_bias()) {
        const S* gs = gy.sample(n);
        for (int o = 0; o < out_; ++o) {
          S acc = 0;
          for (std::size_t i = 0; i < gy.plane(); ++i) acc += gs[o * gy.plane() + i];
          bias_.grad[o] += acc;
        }
      }
    }
    return gx;
  }

  Param<S>& weight() noexcept { return weight_; }
  Param<S>& bias() noexcept { return bias_; }

  void params(ParamList<S>& out) {
    out.push_back(&weight_);
    if (has_bias()) out.push_back(&bias_);
  }

 private:
  int in_, out_, k_, stride_, pad_, output_pad_;
  Param<S> weight_, bias_;
  GeometryCache geometry_;
};

/// Per-sample, per-channel normalization without affine parameters.
template <typename S>
struct InstanceNorm {
  static constexpr double kEps = 1e-5;

  /// Returns normalized x; `rstd` receives 1/sqrt(var + eps) per (n, c).
  static Tensor<S> forward(const Tensor<S>& x, std::vector<S>& rstd) {
    Tensor<S> y(x.n, x.c, x.h, x.w);
    const std::size_t plane = x.plane();
    rstd.assign(static_cast<std::size_t>(x.n) * x.c, S(0));
    for (int nc = 0; nc < x.n * x.c; ++nc) {
      const S* in = x.data.data() + nc * plane;
      S* out = y.data.data() + nc * plane;
      double mean = 0.0;
      for (std::size_t i = 0; i < plane; ++i) mean += in[i];
      mean /= double(plane);
      double var = 0.0;
      for (std::size_t i = 0; i < plane; ++i) var += (in[i] - mean) * (in[i] - mean);
      var /= double(plane);
      const double r = 1.0 / std::sqrt(var + kEps);
      rstd[nc] = S(r);
      for (std::size_t i = 0; i < plane; ++i) out[i] = S((in[i] - mean) * r);
    }
    return y;
  }

  /// gx = rstd * (gy - mean(gy) - xhat * mean(gy * xhat))
  static Tensor<S> backward(const Tensor<S>& xhat, const std::vector<S>& rstd, const Tensor<S>& gy) {
    Tensor<S> gx(gy.n, gy.c, gy.h, gy.w);
    const std::size_t plane = gy.plane();
    for (int nc = 0; nc < gy.n * gy.c; ++nc) {
      const S* g = gy.data.data() + nc * plane;
      const S* xh = xhat.data.data() + nc * plane;
      S* out = gx.data.data() + nc * plane;
      double mg = 0.0, mgx = 0.0;
      for (std::size_t i = 0; i < plane; ++i) {
        mg += g[i];
        mgx += double(g[i]) * xh[i];
      }
      mg /= double(plane);
      mgx /= double(plane);
      for (std::size_t i = 0; i < plane; ++i) out[i] = S(rstd[nc] * (g[i] - mg - xh[i] * mgx));
    }
    return gx;
  }
};

enum class Activation { None, ReLU, LeakyReLU, Tanh, Sigmoid };

inline constexpr double kLeakySlope = 0.2;

template <typename S>
void activate(Tensor<S>& t, Activation a) {
  switch (a) {
    case Activation::None: break;
    case Activation::ReLU:
      for (auto& v : t.data) v = v > S(0) ? v : S(0);
      break;
    case Activation::LeakyReLU:
      for (auto& v : t.data) v = v > S(0) ? v : S(kLeakySlope) * v;
      break;
    case Activation::Tanh:
      for (auto& v : t.data) v = std::tanh(v);
      break;
    case Activation::Sigmoid:
      for (auto& v : t.data) v = S(1) / (S(1) + std::exp(-v));
      break;
  }
}

/// Gradient through an activation, expressed in terms of its output.
template <typename S>
Tensor<S> activation_backward(const Tensor<S>& y, Tensor<S> gy, Activation a) {
  switch (a) {
    case Activation::None: break;
    case Activation::ReLU:
      for (std::size_t i = 0; i < gy.size(); ++i)
        if (!(y.data[i] > S(0))) gy.data[i] = S(0);
      break;
    case Activation::LeakyReLU:
      for (std::size_t i = 0; i < gy.size(); ++i)
        if (!(y.data[i] > S(0))) gy.data[i] *= S(kLeakySlope);
      break;
    case Activation::Tanh:
      for (std::size_t i = 0; i < gy.size(); ++i) gy.data[i] *= S(1) - y.data[i] * y.data[i];
      break;
    case Activation::Sigmoid:
      for (std::size_t i = 0; i < gy.size(); ++i) gy.data[i] *= y.data[i] * (S(1) - y.data[i]);
      break;
  }
  return gy;
}

/// Convolution (plain or transposed) followed by optional instance norm and an activation.
template <typename S, typename ConvT>
class ConvBlock {
 public:
  struct Cache {
    Tensor<S> input;
    Tensor<S> normed;  // conv output after normalization (== pre-activation)
    std::vector<S> rstd;
    Tensor<S> output;
  };

  ConvBlock(ConvT conv, bool norm, Activation act) : conv_(std::move(conv)), norm_(norm), act_(act) {}

  Tensor<S> forward(const Tensor<S>& x, Cache& cache) const {
    cache.input = x;
    Tensor<S> z = conv_.forward(x);
    if (norm_) z = InstanceNorm<S>::forward(z, cache.rstd);
    if (norm_) cache.normed = z;
    activate(z, act_);
    cache.output = z;
    return z;
  }

  Tensor<S> forward(const Tensor<S>& x) const {
    Tensor<S> z = conv_.forward(x);
    std::vector<S> rstd;
    if (norm_) z = InstanceNorm<S>::forward(z, rstd);
    activate(z, act_);
    return z;
  }

  Tensor<S> backward(const Cache& cache, const Tensor<S>& gy, bool input_grad = true) {
    Tensor<S> g = activation_backward(cache.output, gy, act_);
    if (norm_) g = InstanceNorm<S>::backward(cache.normed, cache.rstd, g);
    return conv_.backward(cache.input, g, input_grad);
  }

  ConvT& conv() noexcept { return conv_; }
  const ConvT& conv() const noexcept { return conv_; }
  void params(ParamList<S>& out) { conv_.params(out); }

 private:
  ConvT conv_;
  bool norm_;
  Activation act_;
};

/// 2x2 max pooling, stride 2. Ties go to the first element in raster order.
template <typename S>
struct MaxPool2 {
  static Tensor<S> forward(const Tensor<S>& x) {
    if (x.h % 2 || x.w % 2) throw ShapeError("max pool: odd spatial size");
    Tensor<S> y(x.n, x.c, x.h / 2, x.w / 2);
    for (int n = 0; n < x.n; ++n)
      for (int c = 0; c < x.c; ++c)
        for (int oy = 0; oy < y.h; ++oy)
          for (int ox = 0; ox < y.w; ++ox)
            y.at(n, c, oy, ox) = std::max(std::max(x.at(n, c, 2 * oy, 2 * ox), x.at(n, c, 2 * oy, 2 * ox + 1)),
                                          std::max(x.at(n, c, 2 * oy + 1, 2 * ox), x.at(n, c, 2 * oy + 1, 2 * ox + 1)));
    return y;
  }

  static Tensor<S> backward(const Tensor<S>& x, const Tensor<S>& y, const Tensor<S>& gy) {
    Tensor<S> gx(x.n, x.c, x.h, x.w);
    for (int n = 0; n < x.n; ++n)
      for (int c = 0; c < x.c; ++c)
        for (int oy = 0; oy < y.h; ++oy)
          for (int ox = 0; ox < y.w; ++ox) {
            const S m = y.at(n, c, oy, ox);
            bool done = false;
            for (int dy = 0; dy < 2 && !done; ++dy)
              for (int dx = 0; dx < 2 && !done; ++dx)
                if (x.at(n, c, 2 * oy + dy, 2 * ox + dx) == m) {
                  gx.at(n, c, 2 * oy + dy, 2 * ox + dx) = gy.at(n, c, oy, ox);
                  done = true;
                }
          }
    return gx;
  }
};

/// Channel concatenation [a, b].
template <typename S>
Tensor<S> concat_channels(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.n != b.n || a.h != b.h || a.w != b.w) throw ShapeError("concat: spatial mismatch");
  Tensor<S> out(a.n, a.c + b.c, a.h, a.w);
  for (int n = 0; n < a.n; ++n) {
    std::copy(a.sample(n), a.sample(n) + a.sample_size(), out.sample(n));
    std::copy(b.sample(n), b.sample(n) + b.sample_size(), out.sample(n) + a.sample_size());
  }
  return out;
}

template <typename S>
std::pair<Tensor<S>, Tensor<S>> split_channels(const Tensor<S>& g, int first) {
  Tensor<S> a(g.n, first, g.h, g.w), b(g.n, g.c - first, g.h, g.w);
  for (int n = 0; n < g.n; ++n) {
    std::copy(g.sample(n), g.sample(n) + a.sample_size(), a.sample(n));
    std::copy(g.sample(n) + a.sample_size(), g.sample(n) + g.sample_size(), b.sample(n));
  }
  return {std::move(a), std::move(b)};
}

template <typename S>
void add_inplace(Tensor<S>& a, const Tensor<S>& b) {
  require_same_shape(a, b, "add");
  for (std::size_t i = 0; i < a.size(); ++i) a.data[i] += b.data[i];
}

template <typename S>
bool all_finite(const Tensor<S>& t) {
  return std::all_of(t.data.begin(), t.data.end(), [](S v) { return std::isfinite(v); });
}

}  // namespace sim2real::nn
