#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace floodtile {

// Streaming accumulator over valid cells; all sums in 64-bit.
struct MetricAccumulator {
  double sse = 0, sum_t = 0, sum_t2 = 0, max_abs = 0;
  long n = 0;

  void add(double pred, double target);
  void merge(const MetricAccumulator& o);
};

struct MetricReport {
  double rmse = 0;
  double nse = 0;
  long n_valid = 0;
  double max_abs_error = 0;
};

// sqrt of the mean squared error over mask-true cells.
double masked_rmse(std::span<const float> pred, std::span<const float> target,
                   std::span<const uint8_t> mask);

// 1 - SSE / sum((target - mean(target))^2) over mask-true cells; throws
// "NSE undefined" when the valid target variance is zero.
double nse(std::span<const float> pred, std::span<const float> target,
           std::span<const uint8_t> mask);

MetricReport finalize_report(const MetricAccumulator& acc);
MetricReport masked_report(std::span<const float> pred, std::span<const float> target,
                           std::span<const uint8_t> mask);

// d RMSE / d pred_i = (pred_i - target_i) / (n_valid * RMSE) at valid
// cells, 0 elsewhere. When RMSE is exactly 0 the gradient is zero and
// *stationary is set.
std::vector<float> masked_rmse_grad(std::span<const float> pred, std::span<const float> target,
                                    std::span<const uint8_t> mask, bool* stationary = nullptr);

}  // namespace floodtile
