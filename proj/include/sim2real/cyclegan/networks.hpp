#pragma once

#include <string>
#include <vector>

#include "sim2real/core/rng.hpp"
#include "sim2real/nn/layers.hpp"

namespace sim2real::cyclegan {

using nn::Activation;
using nn::Padding;

/// Residual encoder-decoder: 7x7 stem, strided downsampling, residual blocks at
/// the bottleneck, transposed-conv upsampling and a 7x7 tanh head.
struct GeneratorSpec {
  int base_channels = 64;
  int downsampling = 2;
  int residual_blocks = 6;
};

/// PatchGAN: 4x4 convolutions, `layers` strided stages, then two stride-1 stages.
struct DiscriminatorSpec {
  int base_channels = 64;
  int layers = 3;
};

inline constexpr double kInitStd = 0.02;

template <typename S>
class ResnetGenerator {
  using Conv = nn::Conv2d<S>;
  using ConvT = nn::ConvTranspose2d<S>;
  using Block = nn::ConvBlock<S, Conv>;
  using UpBlock = nn::ConvBlock<S, ConvT>;

  struct Residual {
    Block first, second;
  };

 public:
  struct ResidualCache {
    typename Block::Cache first, second;
  };
  struct Cache {
    typename Block::Cache stem;
    std::vector<typename Block::Cache> down;
    std::vector<ResidualCache> residual;
    std::vector<typename UpBlock::Cache> up;
    typename Block::Cache head;
  };

  explicit ResnetGenerator(GeneratorSpec spec, const std::string& name = "G")
      : spec_(spec),
        stem_(Conv(3, spec.base_channels, 7, 1, 3, Padding::Reflect, false, name + ".stem"), true, Activation::ReLU),
        head_(Conv(spec.base_channels, 3, 7, 1, 3, Padding::Reflect, true, name + ".head"), false, Activation::Tanh) {
    int ch = spec.base_channels;
    for (int i = 0; i < spec.downsampling; ++i, ch *= 2)
      down_.emplace_back(Conv(ch, 2 * ch, 3, 2, 1, Padding::Zero, false, name + ".down" + std::to_string(i)), true,
                         Activation::ReLU);
    for (int i = 0; i < spec.residual_blocks; ++i) {
      const std::string n = name + ".res" + std::to_string(i);
      residual_.push_back({Block(Conv(ch, ch, 3, 1, 1, Padding::Reflect, false, n + ".a"), true, Activation::ReLU),
                           Block(Conv(ch, ch, 3, 1, 1, Padding::Reflect, false, n + ".b"), true, Activation::None)});
    }
    for (int i = 0; i < spec.downsampling; ++i, ch /= 2)
      up_.emplace_back(ConvT(ch, ch / 2, 3, 2, 1, 1, false, name + ".up" + std::to_string(i)), true, Activation::ReLU);
  }

  const GeneratorSpec& spec() const noexcept { return spec_; }

  void init(Rng& rng) {
    for (auto* p : parameters())
      if (p->name.ends_with(".bias"))
        std::fill(p->value.begin(), p->value.end(), S(0));
      else
        nn::init_normal(*p, kInitStd, rng);
  }

  Tensor<S> forward(const Tensor<S>& x, Cache& c) const {
    check_input(x);
    Tensor<S> h = stem_.forward(x, c.stem);
    c.down.resize(down_.size());
    for (std::size_t i = 0; i < down_.size(); ++i) h = down_[i].forward(h, c.down[i]);
    c.residual.resize(residual_.size());
    for (std::size_t i = 0; i < residual_.size(); ++i) {
      Tensor<S> r = residual_[i].first.forward(h, c.residual[i].first);
      r = residual_[i].second.forward(r, c.residual[i].second);
      nn::add_inplace(r, h);
      h = std::move(r);
    }
    c.up.resize(up_.size());
    for (std::size_t i = 0; i < up_.size(); ++i) h = up_[i].forward(h, c.up[i]);
    return head_.forward(h, c.head);
  }

  Tensor<S> forward(const Tensor<S>& x) const {
    Cache c;
    return forward(x, c);
  }

  Tensor<S> backward(const Cache& c, const Tensor<S>& gy, bool input_grad = true) {
    Tensor<S> g = head_.backward(c.head, gy);
    for (std::size_t i = up_.size(); i-- > 0;) g = up_[i].backward(c.up[i], g);
    for (std::size_t i = residual_.size(); i-- > 0;) {
      Tensor<S> gr = residual_[i].second.backward(c.residual[i].second, g);
      gr = residual_[i].first.backward(c.residual[i].first, gr);
      nn::add_inplace(g, gr);
    }
    for (std::size_t i = down_.size(); i-- > 0;) g = down_[i].backward(c.down[i], g);
    return stem_.backward(c.stem, g, input_grad);
  }

  nn::ParamList<S> parameters() {
    nn::ParamList<S> ps;
    stem_.params(ps);
    for (auto& b : down_) b.params(ps);
    for (auto& r : residual_) {
      r.first.params(ps);
      r.second.params(ps);
    }
    for (auto& b : up_) b.params(ps);
    head_.params(ps);
    return ps;
  }

 private:
  void check_input(const Tensor<S>& x) const {
    const int f = 1 << spec_.downsampling;
    if (x.c != 3 || x.h % f || x.w % f)
      throw ShapeError("generator input must have 3 channels and sides divisible by " + std::to_string(f));
  }

  GeneratorSpec spec_;
  Block stem_;
  std::vector<Block> down_;
  std::vector<Residual> residual_;
  std::vector<UpBlock> up_;
  Block head_;
};

template <typename S>
class PatchDiscriminator {
  using Conv = nn::Conv2d<S>;
  using Block = nn::ConvBlock<S, Conv>;

 public:
  using Cache = std::vector<typename Block::Cache>;

  explicit PatchDiscriminator(DiscriminatorSpec spec, const std::string& name = "D") : spec_(spec) {
    int ch = spec.base_channels;
    blocks_.emplace_back(Conv(3, ch, 4, 2, 1, Padding::Zero, true, name + ".l0"), false, Activation::LeakyReLU);
    for (int i = 1; i < spec.layers; ++i, ch *= 2)
      blocks_.emplace_back(Conv(ch, 2 * ch, 4, 2, 1, Padding::Zero, false, name + ".l" + std::to_string(i)), true,
                           Activation::LeakyReLU);
    blocks_.emplace_back(Conv(ch, 2 * ch, 4, 1, 1, Padding::Zero, false, name + ".l" + std::to_string(spec.layers)), true,
                         Activation::LeakyReLU);
    blocks_.emplace_back(Conv(2 * ch, 1, 4, 1, 1, Padding::Zero, true, name + ".out"), false, Activation::None);
  }

  const DiscriminatorSpec& spec() const noexcept { return spec_; }

  /// Side length of the score grid for a square input.
  int output_size(int input) const {
    int s = input;
    for (int i = 0; i < spec_.layers; ++i) s = (s + 2 - 4) / 2 + 1;
    return s - 2;
  }

  void init(Rng& rng) {
    for (auto* p : parameters())
      if (p->name.ends_with(".bias"))
        std::fill(p->value.begin(), p->value.end(), S(0));
      else
        nn::init_normal(*p, kInitStd, rng);
  }

  Tensor<S> forward(const Tensor<S>& x, Cache& c) const {
    c.resize(blocks_.size());
    Tensor<S> h = x;
    for (std::size_t i = 0; i < blocks_.size(); ++i) h = blocks_[i].forward(h, c[i]);
    return h;
  }

  Tensor<S> forward(const Tensor<S>& x) const {
    Tensor<S> h = x;
    for (const auto& b : blocks_) h = b.forward(h);
    return h;
  }

  Tensor<S> backward(const Cache& c, const Tensor<S>& gy, bool input_grad = true) {
    Tensor<S> g = gy;
    for (std::size_t i = blocks_.size(); i-- > 0;) g = blocks_[i].backward(c[i], g, i > 0 || input_grad);
    return g;
  }

  nn::ParamList<S> parameters() {
    nn::ParamList<S> ps;
    for (auto& b : blocks_) b.params(ps);
    return ps;
  }

 private:
  DiscriminatorSpec spec_;
  std::vector<Block> blocks_;
};

}  // namespace sim2real::cyclegan
