#include "floodtile/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace floodtile {

void MetricAccumulator::add(double pred, double target) {
  double e = pred - target;
  sse += e * e;
  sum_t += target;
  sum_t2 += target * target;
  max_abs = std::max(max_abs, std::fabs(e));
  ++n;
}

void MetricAccumulator::merge(const MetricAccumulator& o) {
  sse += o.sse;
  sum_t += o.sum_t;
  sum_t2 += o.sum_t2;
  max_abs = std::max(max_abs, o.max_abs);
  n += o.n;
}

namespace {

MetricAccumulator accumulate(std::span<const float> pred, std::span<const float> target,
                             std::span<const uint8_t> mask) {
  if (pred.size() != target.size() || pred.size() != mask.size())
    throw std::invalid_argument("metrics: shape mismatch");
  MetricAccumulator acc;
  for (size_t i = 0; i < pred.size(); ++i)
    if (mask[i]) acc.add(pred[i], target[i]);
  return acc;
}

}  // namespace

double masked_rmse(std::span<const float> pred, std::span<const float> target,
                   std::span<const uint8_t> mask) {
  auto acc = accumulate(pred, target, mask);
  if (acc.n == 0) throw std::invalid_argument("masked_rmse: zero valid cells");
  return std::sqrt(acc.sse / double(acc.n));
}

double nse(std::span<const float> pred, std::span<const float> target,
           std::span<const uint8_t> mask) {
  auto acc = accumulate(pred, target, mask);
  if (acc.n == 0) throw std::invalid_argument("nse: zero valid cells");
  double mean = acc.sum_t / double(acc.n);
  double denom = acc.sum_t2 - double(acc.n) * mean * mean;
  if (denom <= 0) throw std::invalid_argument("NSE undefined: constant valid target");
  return 1.0 - acc.sse / denom;
}

MetricReport finalize_report(const MetricAccumulator& acc) {
  if (acc.n == 0) throw std::invalid_argument("metrics: zero valid cells");
  MetricReport r;
  r.n_valid = acc.n;
  r.rmse = std::sqrt(acc.sse / double(acc.n));
  r.max_abs_error = acc.max_abs;
  double mean = acc.sum_t / double(acc.n);
  double denom = acc.sum_t2 - double(acc.n) * mean * mean;
  if (denom <= 0) throw std::invalid_argument("NSE undefined: constant valid target");
  r.nse = 1.0 - acc.sse / denom;
  return r;
}

MetricReport masked_report(std::span<const float> pred, std::span<const float> target,
                           std::span<const uint8_t> mask) {
  return finalize_report(accumulate(pred, target, mask));
}

std::vector<float> masked_rmse_grad(std::span<const float> pred, std::span<const float> target,
                                    std::span<const uint8_t> mask, bool* stationary) {
  auto acc = accumulate(pred, target, mask);
  if (acc.n == 0) throw std::invalid_argument("masked_rmse_grad: zero valid cells");
  double rmse = std::sqrt(acc.sse / double(acc.n));
  std::vector<float> grad(pred.size(), 0.0f);
  if (stationary) *stationary = (rmse == 0.0);
  if (rmse == 0.0) return grad;
  double scale = 1.0 / (double(acc.n) * rmse);
  for (size_t i = 0; i < pred.size(); ++i)
    if (mask[i]) grad[i] = float((double(pred[i]) - target[i]) * scale);
  return grad;
}

}  // namespace floodtile
