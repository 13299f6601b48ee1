#pragma once

#include <cstddef>
#include <vector>

#include "sim2real/core/rng.hpp"
#include "sim2real/core/tensor.hpp"

namespace sim2real::cyclegan {

/// History buffer of generated images shown to the discriminators.
template <typename S>
class ImagePool {
 public:
  explicit ImagePool(std::size_t capacity = 50) : capacity_(capacity) {}

  /// Below capacity: store and return the image. Full: with probability 1/2
  /// return the image unchanged, otherwise swap it with a uniformly chosen
  /// stored image and return that one.
  Tensor<S> query(const Tensor<S>& image, Rng& rng) {
    if (capacity_ == 0) return image;
    if (images_.size() < capacity_) {
      images_.push_back(image);
      return image;
    }
    if (bernoulli(rng, 0.5)) return image;
    const std::size_t i = static_cast<std::size_t>(uniform_int(rng, 0, int(images_.size()) - 1));
    Tensor<S> old = std::move(images_[i]);
    images_[i] = image;
    return old;
  }

  std::size_t size() const noexcept { return images_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  const std::vector<Tensor<S>>& images() const noexcept { return images_; }

 private:
  std::size_t capacity_;
  std::vector<Tensor<S>> images_;
};

}  // namespace sim2real::cyclegan
