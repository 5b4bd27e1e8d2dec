#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace bobnet {

// Dense n-dimensional array, row-major with the last axis fastest.
// float carries all production paths; double is used for gradient
// verification where finite differences need the extra precision.
template <typename T>
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<T> data;

  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)), data(numel_of(shape), T(0)) {}

  Tensor(std::vector<std::size_t> s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != numel_of(shape)) throw std::invalid_argument("tensor data length does not match shape");
  }

  static std::size_t numel_of(const std::vector<std::size_t>& s) {
    if (s.empty()) return 0;
    std::size_t n = 1;
    for (std::size_t e : s) n *= e;
    return n;
  }

  std::size_t numel() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape[i]; }

  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }

  // [C,H,W] access.
  T& at(std::size_t c, std::size_t h, std::size_t w) { return data[(c * shape[1] + h) * shape[2] + w]; }
  const T& at(std::size_t c, std::size_t h, std::size_t w) const { return data[(c * shape[1] + h) * shape[2] + w]; }

  // [O,C,H,W] access (conv kernels, batches).
  T& at4(std::size_t o, std::size_t c, std::size_t h, std::size_t w) {
    return data[((o * shape[1] + c) * shape[2] + h) * shape[3] + w];
  }
  const T& at4(std::size_t o, std::size_t c, std::size_t h, std::size_t w) const {
    return data[((o * shape[1] + c) * shape[2] + h) * shape[3] + w];
  }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  bool all_finite() const {
    for (T v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

using Tensor32 = Tensor<float>;
using Tensor64 = Tensor<double>;

}  // namespace bobnet
