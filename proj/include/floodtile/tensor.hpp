#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace floodtile {

// Dense NCHW activation/parameter tensor.
template <typename T>
struct Tensor4 {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> data;

  Tensor4() = default;
  Tensor4(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_), data(size_t(n_) * c_ * h_ * w_, T(0)) {
    if (n_ <= 0 || c_ <= 0 || h_ <= 0 || w_ <= 0)
      throw std::invalid_argument("Tensor4: dimensions must be positive");
  }

  size_t size() const { return data.size(); }
  size_t plane_size() const { return size_t(h) * w; }

  T* plane(int in, int ic) { return data.data() + (size_t(in) * c + ic) * plane_size(); }
  const T* plane(int in, int ic) const {
    return data.data() + (size_t(in) * c + ic) * plane_size();
  }

  T& at(int in, int ic, int iy, int ix) { return plane(in, ic)[size_t(iy) * w + ix]; }
  T at(int in, int ic, int iy, int ix) const { return plane(in, ic)[size_t(iy) * w + ix]; }

  bool same_shape(const Tensor4& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
};

using Tensor4f = Tensor4<float>;
using Tensor4d = Tensor4<double>;

// Row-major 2D grid.
template <typename T>
struct Plane {
  int rows = 0, cols = 0;
  std::vector<T> v;

  Plane() = default;
  Plane(int r, int c, T fill = T(0)) : rows(r), cols(c), v(size_t(r) * c, fill) {}

  T& at(int r, int c) { return v[size_t(r) * cols + c]; }
  T at(int r, int c) const { return v[size_t(r) * cols + c]; }
  T* row(int r) { return v.data() + size_t(r) * cols; }
  const T* row(int r) const { return v.data() + size_t(r) * cols; }
};

}  // namespace floodtile
