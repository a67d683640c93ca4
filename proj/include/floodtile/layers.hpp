#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "floodtile/tensor.hpp"

namespace floodtile {

template <typename T>
struct ConvGrads {
  Tensor4<T> input;
  Tensor4<T> kernel;
  std::vector<T> bias;
};

// Stride-1 convolution, kernel [outC][inC][kh][kw], zero padding `pad`.
// The network uses 3x3/pad 1 and 1x1/pad 0, both resolution preserving.
template <typename T>
Tensor4<T> conv2d(const Tensor4<T>& x, const Tensor4<T>& kernel, std::span<const T> bias,
                  int pad);

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor4<T>& grad_out, const Tensor4<T>& x,
                             const Tensor4<T>& kernel, int pad, bool need_input_grad = true);

template <typename T>
struct BatchNormCache {
  std::vector<T> mean, inv_std;
  Tensor4<T> xhat;
};

// Training mode: normalize by batch statistics over N*H*W per channel and
// update running stats in place (running variance stores the unbiased
// estimate). Evaluation mode normalizes by the running stats.
template <typename T>
Tensor4<T> batchnorm_train(const Tensor4<T>& x, std::span<const T> gamma, std::span<const T> beta,
                           std::span<T> run_mean, std::span<T> run_var, T momentum, T eps,
                           BatchNormCache<T>& cache);

template <typename T>
Tensor4<T> batchnorm_eval(const Tensor4<T>& x, std::span<const T> gamma, std::span<const T> beta,
                          std::span<const T> run_mean, std::span<const T> run_var, T eps);

template <typename T>
Tensor4<T> batchnorm_backward(const Tensor4<T>& grad_out, const BatchNormCache<T>& cache,
                              std::span<const T> gamma, std::span<T> grad_gamma,
                              std::span<T> grad_beta);

template <typename T>
Tensor4<T> relu(const Tensor4<T>& x);

// Backward through relu given the forward *output*.
template <typename T>
Tensor4<T> relu_backward(const Tensor4<T>& grad_out, const Tensor4<T>& out);

template <typename T>
struct PoolResult {
  Tensor4<T> out;
  std::vector<uint8_t> argmax;  // 2-bit position code per output cell
};

// 2x2 window, stride 2; requires even H and W.
template <typename T>
PoolResult<T> maxpool2(const Tensor4<T>& x);

template <typename T>
Tensor4<T> maxpool2_backward(const Tensor4<T>& grad_out, const std::vector<uint8_t>& argmax);

// Up-convolution, kernel [inC][outC][2][2], stride 2 = kernel size, so the
// 2x2 blocks tile the doubled output without overlap.
template <typename T>
Tensor4<T> transposed_conv2(const Tensor4<T>& x, const Tensor4<T>& kernel,
                            std::span<const T> bias);

template <typename T>
ConvGrads<T> transposed_conv2_backward(const Tensor4<T>& grad_out, const Tensor4<T>& x,
                                       const Tensor4<T>& kernel);

// Channel concatenation; `a` (decoder features) occupies the leading
// channels, `b` (encoder skip) the trailing ones.
template <typename T>
Tensor4<T> concat_channels(const Tensor4<T>& a, const Tensor4<T>& b);

template <typename T>
std::pair<Tensor4<T>, Tensor4<T>> split_channels(const Tensor4<T>& grad, int c_first);

}  // namespace floodtile
