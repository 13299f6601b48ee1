#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "sim2real/core/errors.hpp"
#include "sim2real/core/rng.hpp"
#include "sim2real/nn/layers.hpp"

namespace sim2real::unet {

using nn::Activation;
using nn::Padding;

/// Encoder/decoder with `depth` poolings. Level i has base_channels * 2^i
/// channels; every convolution is 3x3 zero-padded so spatial size is preserved.
struct UNetSpec {
  int depth = 4;
  int base_channels = 64;

  int divisor() const { return 1 << depth; }
  int channels(int level) const { return base_channels << level; }

  void validate() const {
    if (depth < 1 || depth > 8) throw ConfigError("unet.depth must lie in [1, 8]");
    if (base_channels < 1) throw ConfigError("unet.base_channels must be positive");
  }
};

template <typename S>
class UNet {
  using Conv = nn::Conv2d<S>;
  using ConvT = nn::ConvTranspose2d<S>;
  using Block = nn::ConvBlock<S, Conv>;
  using UpBlock = nn::ConvBlock<S, ConvT>;

  struct DoubleConv {
    Block a, b;
  };

 public:
  struct LevelCache {
    typename Block::Cache a, b;
  };
  struct Cache {
    std::vector<LevelCache> enc;                 // depth + 1 levels (last one is the bottleneck)
    std::vector<Tensor<S>> pooled;               // pooled[i] = maxpool(enc output i)
    std::vector<typename UpBlock::Cache> up;     // indexed by decoder level
    std::vector<LevelCache> dec;
    typename Block::Cache head;                  // 1x1 conv + sigmoid
  };

  explicit UNet(UNetSpec spec) : spec_(spec), head_(Conv(spec.base_channels, 1, 1, 1, 0, Padding::Zero, true, "head"), false, Activation::Sigmoid) {
    spec.validate();
    int in = 3;
    for (int i = 0; i <= spec.depth; ++i) {
      const int c = spec.channels(i);
      enc_.push_back(double_conv(in, c, "enc" + std::to_string(i)));
      in = c;
    }
    for (int i = 0; i < spec.depth; ++i) {
      const int c = spec.channels(i);
      up_.emplace_back(ConvT(2 * c, c, 2, 2, 0, 0, true, "up" + std::to_string(i)), false, Activation::None);
      dec_.push_back(double_conv(2 * c, c, "dec" + std::to_string(i)));
    }
  }

  const UNetSpec& spec() const noexcept { return spec_; }

  /// He-normal weights, zero biases.
  void init(Rng& rng) {
    auto init_conv = [&](auto& conv) {
      nn::init_normal(conv.weight(), std::sqrt(2.0 / conv.fan_in()), rng);
      std::fill(conv.bias().value.begin(), conv.bias().value.end(), S(0));
    };
    for (auto& l : enc_) {
      init_conv(l.a.conv());
      init_conv(l.b.conv());
    }
    for (std::size_t i = 0; i < up_.size(); ++i) {
      init_conv(up_[i].conv());
      init_conv(dec_[i].a.conv());
      init_conv(dec_[i].b.conv());
    }
    init_conv(head_.conv());
  }

  void check_input(const Tensor<S>& x) const {
    if (x.c != 3) throw ShapeError("unet: input must have 3 channels");
    if (x.h % spec_.divisor() || x.w % spec_.divisor())
      throw ShapeError("unet: input " + std::to_string(x.h) + "x" + std::to_string(x.w) + " is not divisible by " +
                       std::to_string(spec_.divisor()));
  }

  /// N x 3 x H x W in [-1, 1] -> N x 1 x H x W probabilities.
  Tensor<S> forward(const Tensor<S>& x, Cache& c) const {
    check_input(x);
    const int depth = spec_.depth;
    c.enc.resize(depth + 1);
    c.pooled.resize(depth);
    c.up.resize(depth);
    c.dec.resize(depth);
    std::vector<const Tensor<S>*> skips(depth);
    Tensor<S> h = x;
    for (int i = 0; i <= depth; ++i) {
      h = enc_[i].a.forward(h, c.enc[i].a);
      h = enc_[i].b.forward(h, c.enc[i].b);
      if (i < depth) {
        c.pooled[i] = nn::MaxPool2<S>::forward(c.enc[i].b.output);
        h = c.pooled[i];
      }
    }
    for (int i = depth - 1; i >= 0; --i) {
      Tensor<S> u = up_[i].forward(h, c.up[i]);
      h = nn::concat_channels(c.enc[i].b.output, u);
      h = dec_[i].a.forward(h, c.dec[i].a);
      h = dec_[i].b.forward(h, c.dec[i].b);
    }
    return head_.forward(h, c.head);
  }

  Tensor<S> forward(const Tensor<S>& x) const {
    Cache c;
    return forward(x, c);
  }

  /// Backpropagates dL/d(logit) of the head (the sigmoid is folded into the loss gradient).
  void backward_from_logits(const Cache& c, const Tensor<S>& g_logits) {
    Tensor<S> g = head_.conv().backward(c.head.input, g_logits);
    backward_body(c, std::move(g));
  }

  /// Backpropagates dL/d(probability).
  void backward(const Cache& c, const Tensor<S>& g_prob) {
    backward_body(c, head_.backward(c.head, g_prob));
  }

  nn::ParamList<S> parameters() {
    nn::ParamList<S> ps;
    for (auto& l : enc_) {
      l.a.params(ps);
      l.b.params(ps);
    }
    for (std::size_t i = 0; i < up_.size(); ++i) {
      up_[i].params(ps);
      dec_[i].a.params(ps);
      dec_[i].b.params(ps);
    }
    head_.params(ps);
    return ps;
  }

 private:
  static DoubleConv double_conv(int in, int out, const std::string& name) {
    return {Block(Conv(in, out, 3, 1, 1, Padding::Zero, true, name + ".a"), false, Activation::ReLU),
            Block(Conv(out, out, 3, 1, 1, Padding::Zero, true, name + ".b"), false, Activation::ReLU)};
  }

  void backward_body(const Cache& c, Tensor<S> g) {
    const int depth = spec_.depth;
    std::vector<Tensor<S>> g_skip(depth);
    for (int i = 0; i < depth; ++i) {
      g = dec_[i].b.backward(c.dec[i].b, g);
      g = dec_[i].a.backward(c.dec[i].a, g);
      auto [gs, gu] = nn::split_channels(g, spec_.channels(i));
      g_skip[i] = std::move(gs);
      g = up_[i].backward(c.up[i], gu);  // gradient w.r.t. the level below
    }
    for (int i = depth; i >= 0; --i) {
      if (i < depth) {
        // g is the gradient w.r.t. pooled[i]; route it through the pool and add the skip gradient.
        Tensor<S> gp = nn::MaxPool2<S>::backward(c.enc[i].b.output, c.pooled[i], g);
        nn::add_inplace(gp, g_skip[i]);
        g = std::move(gp);
      }
      g = enc_[i].b.backward(c.enc[i].b, g);
      g = enc_[i].a.backward(c.enc[i].a, g, i > 0);
    }
  }

  UNetSpec spec_;
  std::vector<DoubleConv> enc_;
  std::vector<UpBlock> up_;
  std::vector<DoubleConv> dec_;
  Block head_;
};

}  // namespace sim2real::unet
