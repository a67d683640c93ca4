#include "floodtile/unet.hpp"

#include <cmath>
#include <stdexcept>

#include "floodtile/rng.hpp"

namespace floodtile {

void UNetConfig::validate() const {
  if (depth < 2) throw std::invalid_argument("unet: depth must be >= 2");
  if (width < 1) throw std::invalid_argument("unet: width must be >= 1");
  if (in_channels < 1 || out_channels < 1)
    throw std::invalid_argument("unet: channel counts must be >= 1");
}

long ParamSpec::count() const {
  long n = 1;
  for (int d : shape) n *= d;
  return n;
}

namespace {

void push_conv(std::vector<ParamSpec>& out, const std::string& prefix, int ic, int oc, int k) {
  out.push_back({prefix + ".weight", {oc, ic, k, k}, false});
  out.push_back({prefix + ".bias", {oc}, false});
}

void push_bn(std::vector<ParamSpec>& out, const std::string& prefix, int c) {
  out.push_back({prefix + ".gamma", {c}, false});
  out.push_back({prefix + ".beta", {c}, false});
  out.push_back({prefix + ".running_mean", {c}, true});
  out.push_back({prefix + ".running_var", {c}, true});
}

void push_block(std::vector<ParamSpec>& out, const std::string& prefix, int ic, int oc) {
  push_conv(out, prefix + ".conv1", ic, oc, 3);
  push_bn(out, prefix + ".bn1", oc);
  push_conv(out, prefix + ".conv2", oc, oc, 3);
  push_bn(out, prefix + ".bn2", oc);
}

}  // namespace

std::vector<ParamSpec> unet_parameter_plan(const UNetConfig& cfg) {
  cfg.validate();
  std::vector<ParamSpec> plan;
  auto filters = [&](int k) { return cfg.width << k; };

  for (int k = 0; k < cfg.depth; ++k)
    push_block(plan, "enc" + std::to_string(k), k == 0 ? cfg.in_channels : filters(k - 1),
               filters(k));
  push_block(plan, "bottleneck", filters(cfg.depth - 1), filters(cfg.depth));
  for (int k = cfg.depth - 1; k >= 0; --k) {
    std::string prefix = "dec" + std::to_string(k);
    plan.push_back({prefix + ".up.weight", {filters(k + 1), filters(k), 2, 2}, false});
    plan.push_back({prefix + ".up.bias", {filters(k)}, false});
    push_block(plan, prefix, 2 * filters(k), filters(k));
  }
  push_conv(plan, "head", filters(0), cfg.out_channels, 1);
  return plan;
}

long count_parameters(const UNetConfig& cfg) {
  long total = 0;
  for (const auto& p : unet_parameter_plan(cfg))
    if (!p.running_stat) total += p.count();
  return total;
}

namespace {

template <typename T>
Param<T> make_param(const ParamSpec& spec, Rng& rng) {
  Param<T> p;
  p.name = spec.name;
  p.shape = spec.shape;
  p.running_stat = spec.running_stat;

  int dims[4] = {1, 1, 1, 1};
  for (size_t i = 0; i < spec.shape.size() && i < 4; ++i) dims[i] = spec.shape[i];
  p.value = Tensor4<T>(dims[0], dims[1], dims[2], dims[3]);
  if (!spec.running_stat) p.grad.assign(p.value.size(), T(0));

  if (spec.name.ends_with(".weight")) {
    // uniform scaled by 1/sqrt(fan_in); each output cell of the stride-2
    // up-convolution sees exactly in_channels contributions
    bool up = spec.name.find(".up.") != std::string::npos;
    long fan_in = up ? spec.shape[0] : long(spec.shape[1]) * spec.shape[2] * spec.shape[3];
    double limit = 1.0 / std::sqrt(double(fan_in));
    for (auto& v : p.value.data) v = T(rng.uniform(-limit, limit));
  } else if (spec.name.ends_with(".gamma") || spec.name.ends_with(".running_var")) {
    std::fill(p.value.data.begin(), p.value.data.end(), T(1));
  }
  return p;
}

template <typename T>
void accumulate(std::vector<T>& grad, const Tensor4<T>& delta) {
  for (size_t i = 0; i < grad.size(); ++i) grad[i] += delta.data[i];
}

template <typename T>
void accumulate(std::vector<T>& grad, const std::vector<T>& delta) {
  for (size_t i = 0; i < grad.size(); ++i) grad[i] += delta[i];
}

}  // namespace

template <typename T>
UNetT<T>::UNetT(const UNetConfig& cfg, uint64_t seed) : cfg_(cfg) {
  cfg.validate();
  Rng rng(derive_seed(seed, 0x756e6574));  // consumed in plan order
  auto plan = unet_parameter_plan(cfg);
  size_t i = 0;
  auto next = [&]() { return make_param<T>(plan.at(i++), rng); };
  auto take_conv = [&](int pad) {
    ConvUnit u;
    u.w = next();
    u.b = next();
    u.pad = pad;
    return u;
  };
  auto take_bn = [&]() {
    BnUnit u;
    u.gamma = next();
    u.beta = next();
    u.rmean = next();
    u.rvar = next();
    return u;
  };
  auto take_block = [&]() {
    Block b;
    b.conv1 = take_conv(1);
    b.bn1 = take_bn();
    b.conv2 = take_conv(1);
    b.bn2 = take_bn();
    return b;
  };

  for (int k = 0; k < cfg.depth; ++k) enc_.push_back(take_block());
  bottleneck_ = take_block();
  up_.resize(cfg.depth);
  dec_.resize(cfg.depth);
  for (int k = cfg.depth - 1; k >= 0; --k) {
    up_[k].w = next();
    up_[k].b = next();
    dec_[k] = take_block();
  }
  head_ = take_conv(0);
  if (i != plan.size()) throw std::logic_error("unet: parameter plan mismatch");
}

template <typename T>
std::vector<Param<T>*> UNetT<T>::params() {
  std::vector<Param<T>*> out;
  auto add_bn = [&](BnUnit& b) {
    out.push_back(&b.gamma);
    out.push_back(&b.beta);
    out.push_back(&b.rmean);
    out.push_back(&b.rvar);
  };
  auto add_block = [&](Block& b) {
    out.push_back(&b.conv1.w);
    out.push_back(&b.conv1.b);
    add_bn(b.bn1);
    out.push_back(&b.conv2.w);
    out.push_back(&b.conv2.b);
    add_bn(b.bn2);
  };
  for (auto& b : enc_) add_block(b);
  add_block(bottleneck_);
  for (int k = cfg_.depth - 1; k >= 0; --k) {
    out.push_back(&up_[k].w);
    out.push_back(&up_[k].b);
    add_block(dec_[k]);
  }
  out.push_back(&head_.w);
  out.push_back(&head_.b);
  return out;
}

template <typename T>
std::vector<const Param<T>*> UNetT<T>::params() const {
  auto mut = const_cast<UNetT<T>*>(this)->params();
  return {mut.begin(), mut.end()};
}

template <typename T>
Param<T>* UNetT<T>::find_param(const std::string& name) {
  for (auto* p : params())
    if (p->name == name) return p;
  return nullptr;
}

template <typename T>
void UNetT<T>::zero_grads() {
  for (auto* p : params()) std::fill(p->grad.begin(), p->grad.end(), T(0));
}

template <typename T>
void UNetT<T>::check_input(const Tensor4<T>& x) const {
  if (x.c != cfg_.in_channels) throw std::invalid_argument("unet: input channel mismatch");
  if (x.h % (1 << cfg_.depth) || x.w % (1 << cfg_.depth))
    throw std::invalid_argument("unet: input spatial size must be divisible by 2^depth");
}

template <typename T>
Tensor4<T> UNetT<T>::block_forward_train(Block& blk, const Tensor4<T>& x, BlockTrace<T>& tr) {
  tr.in1 = x;
  auto a = conv2d(x, blk.conv1.w.value, blk.conv1.b.cspan(), blk.conv1.pad);
  a = batchnorm_train(a, blk.bn1.gamma.cspan(), blk.bn1.beta.cspan(), blk.bn1.rmean.span(),
                      blk.bn1.rvar.span(), bn_momentum, bn_eps, tr.bn1);
  tr.relu1_out = relu(a);
  a = conv2d(tr.relu1_out, blk.conv2.w.value, blk.conv2.b.cspan(), blk.conv2.pad);
  a = batchnorm_train(a, blk.bn2.gamma.cspan(), blk.bn2.beta.cspan(), blk.bn2.rmean.span(),
                      blk.bn2.rvar.span(), bn_momentum, bn_eps, tr.bn2);
  tr.relu2_out = relu(a);
  return tr.relu2_out;
}

template <typename T>
Tensor4<T> UNetT<T>::block_forward_eval(const Block& blk, const Tensor4<T>& x) const {
  auto a = conv2d(x, blk.conv1.w.value, blk.conv1.b.cspan(), blk.conv1.pad);
  a = batchnorm_eval(a, blk.bn1.gamma.cspan(), blk.bn1.beta.cspan(), blk.bn1.rmean.cspan(),
                     blk.bn1.rvar.cspan(), bn_eps);
  a = relu(a);
  a = conv2d(a, blk.conv2.w.value, blk.conv2.b.cspan(), blk.conv2.pad);
  a = batchnorm_eval(a, blk.bn2.gamma.cspan(), blk.bn2.beta.cspan(), blk.bn2.rmean.cspan(),
                     blk.bn2.rvar.cspan(), bn_eps);
  return relu(a);
}

template <typename T>
Tensor4<T> UNetT<T>::block_backward(Block& blk, const BlockTrace<T>& tr, const Tensor4<T>& g) {
  auto g2 = relu_backward(g, tr.relu2_out);
  g2 = batchnorm_backward(g2, tr.bn2, blk.bn2.gamma.cspan(),
                          std::span<T>(blk.bn2.gamma.grad), std::span<T>(blk.bn2.beta.grad));
  auto cg2 = conv2d_backward(g2, tr.relu1_out, blk.conv2.w.value, blk.conv2.pad);
  accumulate(blk.conv2.w.grad, cg2.kernel);
  accumulate(blk.conv2.b.grad, cg2.bias);

  auto g1 = relu_backward(cg2.input, tr.relu1_out);
  g1 = batchnorm_backward(g1, tr.bn1, blk.bn1.gamma.cspan(),
                          std::span<T>(blk.bn1.gamma.grad), std::span<T>(blk.bn1.beta.grad));
  auto cg1 = conv2d_backward(g1, tr.in1, blk.conv1.w.value, blk.conv1.pad);
  accumulate(blk.conv1.w.grad, cg1.kernel);
  accumulate(blk.conv1.b.grad, cg1.bias);
  return std::move(cg1.input);
}

template <typename T>
Tensor4<T> UNetT<T>::forward(const Tensor4<T>& x) const {
  check_input(x);
  std::vector<Tensor4<T>> skips(cfg_.depth);
  Tensor4<T> a = x;
  for (int k = 0; k < cfg_.depth; ++k) {
    skips[k] = block_forward_eval(enc_[k], a);
    a = maxpool2(skips[k]).out;
  }
  a = block_forward_eval(bottleneck_, a);
  for (int k = cfg_.depth - 1; k >= 0; --k) {
    auto u = transposed_conv2(a, up_[k].w.value, up_[k].b.cspan());
    a = block_forward_eval(dec_[k], concat_channels(u, skips[k]));
  }
  return conv2d(a, head_.w.value, head_.b.cspan(), head_.pad);
}

template <typename T>
Tensor4<T> UNetT<T>::forward_train(const Tensor4<T>& x, UNetTrace<T>& trace) {
  check_input(x);
  trace.enc.resize(cfg_.depth);
  trace.pool_argmax.resize(cfg_.depth);
  trace.up_in.resize(cfg_.depth);
  trace.dec.resize(cfg_.depth);

  Tensor4<T> a = x;
  for (int k = 0; k < cfg_.depth; ++k) {
    a = block_forward_train(enc_[k], a, trace.enc[k]);
    auto pooled = maxpool2(a);
    trace.pool_argmax[k] = std::move(pooled.argmax);
    a = std::move(pooled.out);
  }
  a = block_forward_train(bottleneck_, a, trace.bottleneck);
  for (int k = cfg_.depth - 1; k >= 0; --k) {
    trace.up_in[k] = a;
    auto u = transposed_conv2(a, up_[k].w.value, up_[k].b.cspan());
    auto cat = concat_channels(u, trace.enc[k].relu2_out);
    a = block_forward_train(dec_[k], cat, trace.dec[k]);
  }
  return conv2d(a, head_.w.value, head_.b.cspan(), head_.pad);
}

template <typename T>
Tensor4<T> UNetT<T>::backward(const UNetTrace<T>& trace, const Tensor4<T>& grad_out) {
  if (trace.dec.size() != size_t(cfg_.depth))
    throw std::logic_error("unet: backward without a forward trace");

  auto hg = conv2d_backward(grad_out, trace.dec[0].relu2_out, head_.w.value, head_.pad);
  accumulate(head_.w.grad, hg.kernel);
  accumulate(head_.b.grad, hg.bias);

  Tensor4<T> g = std::move(hg.input);
  std::vector<Tensor4<T>> skip_grad(cfg_.depth);
  for (int k = 0; k < cfg_.depth; ++k) {
    auto gcat = block_backward(dec_[k], trace.dec[k], g);
    int up_channels = cfg_.width << k;
    auto [gu, gs] = split_channels(gcat, up_channels);
    skip_grad[k] = std::move(gs);
    auto ug = transposed_conv2_backward(gu, trace.up_in[k], up_[k].w.value);
    accumulate(up_[k].w.grad, ug.kernel);
    accumulate(up_[k].b.grad, ug.bias);
    g = std::move(ug.input);
  }
  g = block_backward(bottleneck_, trace.bottleneck, g);
  for (int k = cfg_.depth - 1; k >= 0; --k) {
    auto gp = maxpool2_backward(g, trace.pool_argmax[k]);
    for (size_t i = 0; i < gp.size(); ++i) gp.data[i] += skip_grad[k].data[i];
    g = block_backward(enc_[k], trace.enc[k], gp);
  }
  return g;
}

template class UNetT<float>;
template class UNetT<double>;

}  // namespace floodtile
