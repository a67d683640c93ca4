#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "floodtile/layers.hpp"
#include "floodtile/tensor.hpp"

namespace floodtile {

struct UNetConfig {
  int depth = 4;   // encoder/decoder stages
  int width = 16;  // filters in the first encoder block
  int in_channels = 3;
  int out_channels = 1;

  void validate() const;
  // input patch side must be divisible by 2^depth
  bool patch_compatible(int patch) const { return patch > 0 && patch % (1 << depth) == 0; }
};

struct ParamSpec {
  std::string name;
  std::vector<int> shape;
  bool running_stat = false;
  long count() const;
};

// Shape plan shared by construction, counting and the checkpoint format.
std::vector<ParamSpec> unet_parameter_plan(const UNetConfig& cfg);

// Trainable parameters: conv kernels and biases plus batch-norm scale and
// shift. Running statistics are excluded.
long count_parameters(const UNetConfig& cfg);

// Named parameter tensor. The value lives in a Tensor4 whose trailing
// dimensions are 1 for vectors, so conv kernels can be used in place.
template <typename T>
struct Param {
  std::string name;
  std::vector<int> shape;  // logical shape
  Tensor4<T> value;
  std::vector<T> grad;  // empty for running stats
  bool running_stat = false;

  std::vector<T>& flat() { return value.data; }
  const std::vector<T>& flat() const { return value.data; }
  std::span<const T> cspan() const { return {value.data.data(), value.data.size()}; }
  std::span<T> span() { return {value.data.data(), value.data.size()}; }
};

template <typename T>
struct BlockTrace {
  Tensor4<T> in1;
  BatchNormCache<T> bn1;
  Tensor4<T> relu1_out;
  BatchNormCache<T> bn2;
  Tensor4<T> relu2_out;
};

template <typename T>
struct UNetTrace {
  std::vector<BlockTrace<T>> enc;
  std::vector<std::vector<uint8_t>> pool_argmax;
  BlockTrace<T> bottleneck;
  std::vector<Tensor4<T>> up_in;  // indexed by decoder stage
  std::vector<BlockTrace<T>> dec;
};

// Encoder/decoder network: `depth` encoder stages of two 3x3 conv +
// batch-norm + relu units followed by 2x2 max pooling, a double-conv
// bottleneck at width*2^depth, `depth` decoder stages of 2x2
// up-convolution (halving channels), skip concatenation and two conv
// units, and a single 1x1 head convolution.
//
// There is no mode flag: forward() is the evaluation path (const, uses
// running statistics, mutates nothing), forward_train() uses batch
// statistics, updates the running ones and fills a trace for backward().
template <typename T>
class UNetT {
 public:
  UNetT(const UNetConfig& cfg, uint64_t seed);

  const UNetConfig& config() const { return cfg_; }
  std::vector<Param<T>*> params();
  std::vector<const Param<T>*> params() const;
  Param<T>* find_param(const std::string& name);
  long parameter_count() const { return count_parameters(cfg_); }
  void zero_grads();

  Tensor4<T> forward(const Tensor4<T>& x) const;
  Tensor4<T> forward_train(const Tensor4<T>& x, UNetTrace<T>& trace);
  // Accumulates parameter gradients; returns the gradient w.r.t. the input.
  Tensor4<T> backward(const UNetTrace<T>& trace, const Tensor4<T>& grad_out);

  T bn_momentum = T(0.1);
  T bn_eps = T(1e-5);

 private:
  struct ConvUnit {
    Param<T> w, b;
    int pad = 1;
  };
  struct BnUnit {
    Param<T> gamma, beta, rmean, rvar;
  };
  struct Block {
    ConvUnit conv1;
    BnUnit bn1;
    ConvUnit conv2;
    BnUnit bn2;
  };
  struct UpUnit {
    Param<T> w, b;  // [inC][outC][2][2]
  };

  Tensor4<T> block_forward_train(Block& blk, const Tensor4<T>& x, BlockTrace<T>& tr);
  Tensor4<T> block_forward_eval(const Block& blk, const Tensor4<T>& x) const;
  Tensor4<T> block_backward(Block& blk, const BlockTrace<T>& tr, const Tensor4<T>& g);

  void check_input(const Tensor4<T>& x) const;

  UNetConfig cfg_;
  std::vector<Block> enc_;
  Block bottleneck_;
  std::vector<UpUnit> up_;  // indexed by decoder stage k (runs depth-1 .. 0)
  std::vector<Block> dec_;
  ConvUnit head_;
};

using UNet = UNetT<float>;

}  // namespace floodtile
