#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "spectra/core/error.hpp"

namespace spectra {

/// Row-major 2-D grid of pixels. Value type, cheap to move.
template <class T>
class Image {
public:
  using value_type = T;

  Image() = default;
  Image(int width, int height, const T& fill = T{})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(checked(width)) * static_cast<std::size_t>(checked(height)),
              fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  /// Clamp-to-edge access.
  const T& at_clamped(int x, int y) const {
    return (*this)(std::clamp(x, 0, width_ - 1), std::clamp(y, 0, height_ - 1));
  }

  std::span<T> pixels() { return data_; }
  std::span<const T> pixels() const { return data_; }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  template <class U>
  bool same_shape(const Image<U>& o) const {
    return width_ == o.width() && height_ == o.height();
  }

  bool operator==(const Image&) const = default;

private:
  static int checked(int n) {
    if (n < 0) throw ParameterError("image dimension must be non-negative");
    return n;
  }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using Color3 = std::array<float, 3>;
using GrayImage = Image<float>;
using RgbImage = Image<Color3>;
using Mask = Image<unsigned char>;

template <class A, class B>
void require_same_shape(const Image<A>& a, const Image<B>& b, const char* what) {
  if (!a.same_shape(b)) throw StructuralError(std::string("dimension mismatch: ") + what);
}

/// Applies f to every pixel, producing a new image.
template <class T, class F>
auto map_pixels(const Image<T>& in, F&& f) {
  using U = std::decay_t<decltype(f(in[0]))>;
  Image<U> out(in.width(), in.height());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return out;
}

} // namespace spectra
