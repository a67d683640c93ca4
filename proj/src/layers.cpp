#include "floodtile/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "floodtile/blas.hpp"

namespace floodtile {

namespace {

template <typename T>
void gemm(bool ta, bool tb, int m, int n, int k, T alpha, const T* a, int lda, const T* b,
          int ldb, T beta, T* c, int ldc);

template <>
void gemm<float>(bool ta, bool tb, int m, int n, int k, float alpha, const float* a, int lda,
                 const float* b, int ldb, float beta, float* c, int ldc) {
  blas::gemm_f32(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

template <>
void gemm<double>(bool ta, bool tb, int m, int n, int k, double alpha, const double* a, int lda,
                  const double* b, int ldb, double beta, double* c, int ldc) {
  blas::gemm_f64(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

// cols has one row per (ic, ky, kx), laid out as the out_h*out_w patch values.
template <typename T>
void im2col(const T* src, int channels, int h, int w, int kh, int kw, int pad, int out_h,
            int out_w, T* cols) {
  for (int ic = 0; ic < channels; ++ic) {
    const T* plane = src + size_t(ic) * h * w;
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        T* row = cols + (size_t(ic) * kh * kw + size_t(ky) * kw + kx) * out_h * out_w;
        for (int y = 0; y < out_h; ++y) {
          int sy = y + ky - pad;
          T* dst = row + size_t(y) * out_w;
          if (sy < 0 || sy >= h) {
            std::fill(dst, dst + out_w, T(0));
            continue;
          }
          int x0 = std::max(0, pad - kx);
          int x1 = std::min(out_w, w + pad - kx);
          if (x0 > 0) std::fill(dst, dst + x0, T(0));
          if (x1 < out_w) std::fill(dst + std::max(x0, x1), dst + out_w, T(0));
          if (x1 > x0)
            std::memcpy(dst + x0, plane + size_t(sy) * w + (x0 + kx - pad),
                        size_t(x1 - x0) * sizeof(T));
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, int channels, int h, int w, int kh, int kw, int pad, int out_h,
                int out_w, T* dst) {
  for (int ic = 0; ic < channels; ++ic) {
    T* plane = dst + size_t(ic) * h * w;
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        const T* row = cols + (size_t(ic) * kh * kw + size_t(ky) * kw + kx) * out_h * out_w;
        for (int y = 0; y < out_h; ++y) {
          int sy = y + ky - pad;
          if (sy < 0 || sy >= h) continue;
          int x0 = std::max(0, pad - kx);
          int x1 = std::min(out_w, w + pad - kx);
          const T* srcrow = row + size_t(y) * out_w;
          T* dstrow = plane + size_t(sy) * w + (kx - pad);
          for (int x = x0; x < x1; ++x) dstrow[x] += srcrow[x];
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor4<T> conv2d(const Tensor4<T>& x, const Tensor4<T>& kernel, std::span<const T> bias,
                  int pad) {
  int oc = kernel.n, ic = kernel.c, kh = kernel.h, kw = kernel.w;
  if (x.c != ic) throw std::invalid_argument("conv2d: channel mismatch");
  if (int(bias.size()) != oc) throw std::invalid_argument("conv2d: bias size mismatch");
  int out_h = x.h + 2 * pad - kh + 1;
  int out_w = x.w + 2 * pad - kw + 1;
  if (out_h <= 0 || out_w <= 0) throw std::invalid_argument("conv2d: kernel larger than input");

  Tensor4<T> out(x.n, oc, out_h, out_w);
  int kdim = ic * kh * kw;
  size_t map = size_t(out_h) * out_w;
  bool pointwise = (kh == 1 && kw == 1 && pad == 0);
  std::vector<T> cols;
  if (!pointwise) cols.resize(size_t(kdim) * map);

  for (int n = 0; n < x.n; ++n) {
    const T* src = x.plane(n, 0);
    const T* b = pointwise ? src : cols.data();
    if (!pointwise) im2col(src, ic, x.h, x.w, kh, kw, pad, out_h, out_w, cols.data());
    T* dst = out.plane(n, 0);
    for (int o = 0; o < oc; ++o) std::fill(dst + o * map, dst + (o + 1) * map, bias[o]);
    gemm<T>(false, false, oc, int(map), kdim, T(1), kernel.data.data(), kdim, b, int(map), T(1),
            dst, int(map));
  }
  return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor4<T>& grad_out, const Tensor4<T>& x,
                             const Tensor4<T>& kernel, int pad, bool need_input_grad) {
  int oc = kernel.n, ic = kernel.c, kh = kernel.h, kw = kernel.w;
  if (grad_out.n != x.n || grad_out.c != oc || x.c != ic)
    throw std::invalid_argument("conv2d_backward: shape mismatch");

  ConvGrads<T> g;
  g.kernel = Tensor4<T>(oc, ic, kh, kw);
  g.bias.assign(oc, T(0));
  if (need_input_grad) g.input = Tensor4<T>(x.n, x.c, x.h, x.w);

  int out_h = grad_out.h, out_w = grad_out.w;
  int kdim = ic * kh * kw;
  size_t map = size_t(out_h) * out_w;
  bool pointwise = (kh == 1 && kw == 1 && pad == 0);
  std::vector<T> cols, dcols;
  if (!pointwise) cols.resize(size_t(kdim) * map);
  if (need_input_grad && !pointwise) dcols.resize(size_t(kdim) * map);

  for (int n = 0; n < x.n; ++n) {
    const T* gout = grad_out.plane(n, 0);
    for (int o = 0; o < oc; ++o) {
      T s = 0;
      const T* row = gout + o * map;
      for (size_t i = 0; i < map; ++i) s += row[i];
      g.bias[o] += s;
    }

    const T* src = x.plane(n, 0);
    const T* b = pointwise ? src : cols.data();
    if (!pointwise) im2col(src, ic, x.h, x.w, kh, kw, pad, out_h, out_w, cols.data());
    // dW += gout * cols^T
    gemm<T>(false, true, oc, kdim, int(map), T(1), gout, int(map), b, int(map), T(1),
            g.kernel.data.data(), kdim);

    if (need_input_grad) {
      if (pointwise) {
        // dX = W^T * gout, written directly
        gemm<T>(true, false, kdim, int(map), oc, T(1), kernel.data.data(), kdim, gout, int(map),
                T(0), g.input.plane(n, 0), int(map));
      } else {
        gemm<T>(true, false, kdim, int(map), oc, T(1), kernel.data.data(), kdim, gout, int(map),
                T(0), dcols.data(), int(map));
        col2im_add(dcols.data(), ic, x.h, x.w, kh, kw, pad, out_h, out_w, g.input.plane(n, 0));
      }
    }
  }
  return g;
}

template <typename T>
Tensor4<T> batchnorm_train(const Tensor4<T>& x, std::span<const T> gamma, std::span<const T> beta,
                           std::span<T> run_mean, std::span<T> run_var, T momentum, T eps,
                           BatchNormCache<T>& cache) {
  int c = x.c;
  if (int(gamma.size()) != c || int(beta.size()) != c || int(run_mean.size()) != c ||
      int(run_var.size()) != c)
    throw std::invalid_argument("batchnorm: channel mismatch");

  size_t map = x.plane_size();
  double m = double(x.n) * map;
  cache.mean.assign(c, T(0));
  cache.inv_std.assign(c, T(0));
  cache.xhat = Tensor4<T>(x.n, x.c, x.h, x.w);
  Tensor4<T> out(x.n, x.c, x.h, x.w);

  for (int ch = 0; ch < c; ++ch) {
    double sum = 0, sum2 = 0;
    for (int n = 0; n < x.n; ++n) {
      const T* p = x.plane(n, ch);
      for (size_t i = 0; i < map; ++i) {
        sum += p[i];
        sum2 += double(p[i]) * p[i];
      }
    }
    double mean = sum / m;
    double var = std::max(0.0, sum2 / m - mean * mean);
    T inv_std = T(1.0 / std::sqrt(var + double(eps)));
    cache.mean[ch] = T(mean);
    cache.inv_std[ch] = inv_std;

    double unbiased = m > 1 ? var * m / (m - 1) : var;
    run_mean[ch] = T((1 - double(momentum)) * run_mean[ch] + double(momentum) * mean);
    run_var[ch] = T((1 - double(momentum)) * run_var[ch] + double(momentum) * unbiased);

    for (int n = 0; n < x.n; ++n) {
      const T* p = x.plane(n, ch);
      T* xh = cache.xhat.plane(n, ch);
      T* o = out.plane(n, ch);
      for (size_t i = 0; i < map; ++i) {
        xh[i] = (p[i] - T(mean)) * inv_std;
        o[i] = gamma[ch] * xh[i] + beta[ch];
      }
    }
  }
  return out;
}

template <typename T>
Tensor4<T> batchnorm_eval(const Tensor4<T>& x, std::span<const T> gamma, std::span<const T> beta,
                          std::span<const T> run_mean, std::span<const T> run_var, T eps) {
  int c = x.c;
  if (int(gamma.size()) != c || int(run_mean.size()) != c)
    throw std::invalid_argument("batchnorm: channel mismatch");
  Tensor4<T> out(x.n, x.c, x.h, x.w);
  size_t map = x.plane_size();
  for (int ch = 0; ch < c; ++ch) {
    T inv_std = T(1.0 / std::sqrt(double(run_var[ch]) + double(eps)));
    T scale = gamma[ch] * inv_std;
    T shift = beta[ch] - run_mean[ch] * scale;
    for (int n = 0; n < x.n; ++n) {
      const T* p = x.plane(n, ch);
      T* o = out.plane(n, ch);
      for (size_t i = 0; i < map; ++i) o[i] = scale * p[i] + shift;
    }
  }
  return out;
}

template <typename T>
Tensor4<T> batchnorm_backward(const Tensor4<T>& grad_out, const BatchNormCache<T>& cache,
                              std::span<const T> gamma, std::span<T> grad_gamma,
                              std::span<T> grad_beta) {
  const Tensor4<T>& xhat = cache.xhat;
  if (!grad_out.same_shape(xhat)) throw std::invalid_argument("batchnorm_backward: shape mismatch");
  int c = grad_out.c;
  size_t map = grad_out.plane_size();
  double m = double(grad_out.n) * map;
  Tensor4<T> gin(grad_out.n, grad_out.c, grad_out.h, grad_out.w);

  for (int ch = 0; ch < c; ++ch) {
    double s1 = 0, s2 = 0;
    for (int n = 0; n < grad_out.n; ++n) {
      const T* go = grad_out.plane(n, ch);
      const T* xh = xhat.plane(n, ch);
      for (size_t i = 0; i < map; ++i) {
        s1 += go[i];
        s2 += double(go[i]) * xh[i];
      }
    }
    grad_gamma[ch] += T(s2);
    grad_beta[ch] += T(s1);

    T k = gamma[ch] * cache.inv_std[ch];
    T c1 = T(s1 / m), c2 = T(s2 / m);
    for (int n = 0; n < grad_out.n; ++n) {
      const T* go = grad_out.plane(n, ch);
      const T* xh = xhat.plane(n, ch);
      T* gi = gin.plane(n, ch);
      for (size_t i = 0; i < map; ++i) gi[i] = k * (go[i] - c1 - xh[i] * c2);
    }
  }
  return gin;
}

template <typename T>
Tensor4<T> relu(const Tensor4<T>& x) {
  Tensor4<T> out(x.n, x.c, x.h, x.w);
  for (size_t i = 0; i < x.size(); ++i) out.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
  return out;
}

template <typename T>
Tensor4<T> relu_backward(const Tensor4<T>& grad_out, const Tensor4<T>& out) {
  if (!grad_out.same_shape(out)) throw std::invalid_argument("relu_backward: shape mismatch");
  Tensor4<T> gin(out.n, out.c, out.h, out.w);
  for (size_t i = 0; i < out.size(); ++i)
    gin.data[i] = out.data[i] > T(0) ? grad_out.data[i] : T(0);
  return gin;
}

template <typename T>
PoolResult<T> maxpool2(const Tensor4<T>& x) {
  if (x.h % 2 || x.w % 2) throw std::invalid_argument("maxpool2: odd spatial dims");
  PoolResult<T> r;
  r.out = Tensor4<T>(x.n, x.c, x.h / 2, x.w / 2);
  r.argmax.resize(r.out.size());
  size_t idx = 0;
  for (int n = 0; n < x.n; ++n) {
    for (int c = 0; c < x.c; ++c) {
      const T* p = x.plane(n, c);
      T* o = r.out.plane(n, c);
      for (int y = 0; y < r.out.h; ++y) {
        for (int xo = 0; xo < r.out.w; ++xo) {
          const T* cell = p + size_t(2 * y) * x.w + 2 * xo;
          T best = cell[0];
          uint8_t code = 0;
          if (cell[1] > best) { best = cell[1]; code = 1; }
          if (cell[x.w] > best) { best = cell[x.w]; code = 2; }
          if (cell[x.w + 1] > best) { best = cell[x.w + 1]; code = 3; }
          o[size_t(y) * r.out.w + xo] = best;
          r.argmax[idx++] = code;
        }
      }
    }
  }
  return r;
}

template <typename T>
Tensor4<T> maxpool2_backward(const Tensor4<T>& grad_out, const std::vector<uint8_t>& argmax) {
  if (argmax.size() != grad_out.size())
    throw std::invalid_argument("maxpool2_backward: argmax cache mismatch");
  Tensor4<T> gin(grad_out.n, grad_out.c, grad_out.h * 2, grad_out.w * 2);
  size_t idx = 0;
  for (int n = 0; n < grad_out.n; ++n) {
    for (int c = 0; c < grad_out.c; ++c) {
      const T* go = grad_out.plane(n, c);
      T* gi = gin.plane(n, c);
      for (int y = 0; y < grad_out.h; ++y) {
        for (int xo = 0; xo < grad_out.w; ++xo) {
          uint8_t code = argmax[idx];
          int sy = 2 * y + (code >> 1);
          int sx = 2 * xo + (code & 1);
          gi[size_t(sy) * gin.w + sx] = go[size_t(y) * grad_out.w + xo];
          ++idx;
        }
      }
    }
  }
  return gin;
}

template <typename T>
Tensor4<T> transposed_conv2(const Tensor4<T>& x, const Tensor4<T>& kernel,
                            std::span<const T> bias) {
  int ic = kernel.n, oc = kernel.c;
  if (kernel.h != 2 || kernel.w != 2)
    throw std::invalid_argument("transposed_conv2: kernel must be 2x2");
  if (x.c != ic) throw std::invalid_argument("transposed_conv2: channel mismatch");
  if (int(bias.size()) != oc) throw std::invalid_argument("transposed_conv2: bias size mismatch");

  Tensor4<T> out(x.n, oc, x.h * 2, x.w * 2);
  size_t map = x.plane_size();
  std::vector<T> tmp(size_t(oc) * 4 * map);  // [oc*4][h*w]

  for (int n = 0; n < x.n; ++n) {
    // kernel viewed as [ic][oc*4]; tmp = kernel^T * x_n
    gemm<T>(true, false, oc * 4, int(map), ic, T(1), kernel.data.data(), oc * 4, x.plane(n, 0),
            int(map), T(0), tmp.data(), int(map));
    for (int o = 0; o < oc; ++o) {
      T* oplane = out.plane(n, o);
      for (int ky = 0; ky < 2; ++ky) {
        for (int kx = 0; kx < 2; ++kx) {
          const T* src = tmp.data() + (size_t(o) * 4 + size_t(ky) * 2 + kx) * map;
          for (int y = 0; y < x.h; ++y) {
            T* drow = oplane + size_t(2 * y + ky) * out.w + kx;
            const T* srow = src + size_t(y) * x.w;
            for (int xx = 0; xx < x.w; ++xx) drow[2 * xx] = srow[xx] + bias[o];
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
ConvGrads<T> transposed_conv2_backward(const Tensor4<T>& grad_out, const Tensor4<T>& x,
                                       const Tensor4<T>& kernel) {
  int ic = kernel.n, oc = kernel.c;
  if (grad_out.c != oc || grad_out.h != x.h * 2 || grad_out.w != x.w * 2)
    throw std::invalid_argument("transposed_conv2_backward: shape mismatch");

  ConvGrads<T> g;
  g.kernel = Tensor4<T>(ic, oc, 2, 2);
  g.bias.assign(oc, T(0));
  g.input = Tensor4<T>(x.n, x.c, x.h, x.w);

  size_t map = x.plane_size();
  std::vector<T> g4(size_t(oc) * 4 * map);

  for (int n = 0; n < x.n; ++n) {
    for (int o = 0; o < oc; ++o) {
      const T* oplane = grad_out.plane(n, o);
      double s = 0;
      for (size_t i = 0; i < grad_out.plane_size(); ++i) s += oplane[i];
      g.bias[o] += T(s);
      for (int ky = 0; ky < 2; ++ky) {
        for (int kx = 0; kx < 2; ++kx) {
          T* dst = g4.data() + (size_t(o) * 4 + size_t(ky) * 2 + kx) * map;
          for (int y = 0; y < x.h; ++y) {
            const T* srow = oplane + size_t(2 * y + ky) * grad_out.w + kx;
            T* drow = dst + size_t(y) * x.w;
            for (int xx = 0; xx < x.w; ++xx) drow[xx] = srow[2 * xx];
          }
        }
      }
    }
    // dK[ic][oc*4] += x_n * g4^T;  dX = K * g4
    gemm<T>(false, true, ic, oc * 4, int(map), T(1), x.plane(n, 0), int(map), g4.data(),
            int(map), T(1), g.kernel.data.data(), oc * 4);
    gemm<T>(false, false, ic, int(map), oc * 4, T(1), kernel.data.data(), oc * 4, g4.data(),
            int(map), T(0), g.input.plane(n, 0), int(map));
  }
  return g;
}

template <typename T>
Tensor4<T> concat_channels(const Tensor4<T>& a, const Tensor4<T>& b) {
  if (a.n != b.n || a.h != b.h || a.w != b.w)
    throw std::invalid_argument("concat_channels: spatial mismatch");
  Tensor4<T> out(a.n, a.c + b.c, a.h, a.w);
  size_t map = a.plane_size();
  for (int n = 0; n < a.n; ++n) {
    std::memcpy(out.plane(n, 0), a.plane(n, 0), size_t(a.c) * map * sizeof(T));
    std::memcpy(out.plane(n, a.c), b.plane(n, 0), size_t(b.c) * map * sizeof(T));
  }
  return out;
}

template <typename T>
std::pair<Tensor4<T>, Tensor4<T>> split_channels(const Tensor4<T>& grad, int c_first) {
  if (c_first <= 0 || c_first >= grad.c)
    throw std::invalid_argument("split_channels: bad split point");
  Tensor4<T> a(grad.n, c_first, grad.h, grad.w);
  Tensor4<T> b(grad.n, grad.c - c_first, grad.h, grad.w);
  size_t map = grad.plane_size();
  for (int n = 0; n < grad.n; ++n) {
    std::memcpy(a.plane(n, 0), grad.plane(n, 0), size_t(a.c) * map * sizeof(T));
    std::memcpy(b.plane(n, 0), grad.plane(n, c_first), size_t(b.c) * map * sizeof(T));
  }
  return {std::move(a), std::move(b)};
}

#define FLOODTILE_INSTANTIATE(T)                                                               \
  template Tensor4<T> conv2d<T>(const Tensor4<T>&, const Tensor4<T>&, std::span<const T>,     \
                                int);                                                          \
  template ConvGrads<T> conv2d_backward<T>(const Tensor4<T>&, const Tensor4<T>&,              \
                                           const Tensor4<T>&, int, bool);                      \
  template Tensor4<T> batchnorm_train<T>(const Tensor4<T>&, std::span<const T>,               \
                                         std::span<const T>, std::span<T>, std::span<T>, T,   \
                                         T, BatchNormCache<T>&);                               \
  template Tensor4<T> batchnorm_eval<T>(const Tensor4<T>&, std::span<const T>,                \
                                        std::span<const T>, std::span<const T>,               \
                                        std::span<const T>, T);                                \
  template Tensor4<T> batchnorm_backward<T>(const Tensor4<T>&, const BatchNormCache<T>&,      \
                                            std::span<const T>, std::span<T>, std::span<T>);  \
  template Tensor4<T> relu<T>(const Tensor4<T>&);                                              \
  template Tensor4<T> relu_backward<T>(const Tensor4<T>&, const Tensor4<T>&);                  \
  template PoolResult<T> maxpool2<T>(const Tensor4<T>&);                                       \
  template Tensor4<T> maxpool2_backward<T>(const Tensor4<T>&, const std::vector<uint8_t>&);    \
  template Tensor4<T> transposed_conv2<T>(const Tensor4<T>&, const Tensor4<T>&,                \
                                          std::span<const T>);                                 \
  template ConvGrads<T> transposed_conv2_backward<T>(const Tensor4<T>&, const Tensor4<T>&,     \
                                                     const Tensor4<T>&);                       \
  template Tensor4<T> concat_channels<T>(const Tensor4<T>&, const Tensor4<T>&);                \
  template std::pair<Tensor4<T>, Tensor4<T>> split_channels<T>(const Tensor4<T>&, int);

FLOODTILE_INSTANTIATE(float)
FLOODTILE_INSTANTIATE(double)

#undef FLOODTILE_INSTANTIATE

}  // namespace floodtile
