#pragma once

#include <algorithm>
#include <cstddef>
#include <new>
#include <span>
#include <vector>

#include "sim2real/core/errors.hpp"

namespace sim2real {

/// 64-byte aligned storage. Vectorized reductions choose their head/tail split
/// from the pointer's alignment, so a fixed alignment keeps float results
/// independent of where the allocator happens to place a buffer.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  AlignedAllocator() noexcept = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlignment)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlignment); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

/// Dense NCHW tensor. The numeric carrier for all network code.
template <typename Scalar>
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  AlignedVector<Scalar> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_, Scalar fill = Scalar(0))
      : n(n_), c(c_), h(h_), w(w_), data(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

  std::size_t size() const noexcept { return data.size(); }
  std::size_t plane() const noexcept { return static_cast<std::size_t>(h) * w; }
  std::size_t sample_size() const noexcept { return static_cast<std::size_t>(c) * h * w; }

  Scalar& at(int in, int ic, int y, int x) { return data[((static_cast<std::size_t>(in) * c + ic) * h + y) * w + x]; }
  Scalar at(int in, int ic, int y, int x) const { return data[((static_cast<std::size_t>(in) * c + ic) * h + y) * w + x]; }

  Scalar* sample(int in) { return data.data() + in * sample_size(); }
  const Scalar* sample(int in) const { return data.data() + in * sample_size(); }

  bool same_shape(const Tensor& o) const noexcept { return n == o.n && c == o.c && h == o.h && w == o.w; }

  void fill(Scalar v) { std::fill(data.begin(), data.end(), v); }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> out(n, c, h, w);
    std::transform(data.begin(), data.end(), out.data.begin(), [](Scalar v) { return static_cast<Other>(v); });
    return out;
  }
};

template <typename Scalar>
void require_same_shape(const Tensor<Scalar>& a, const Tensor<Scalar>& b, const char* what) {
  if (!a.same_shape(b)) throw ShapeError(std::string(what) + ": tensor shape mismatch");
}

}  // namespace sim2real
