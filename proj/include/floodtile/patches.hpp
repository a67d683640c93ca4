#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "floodtile/raster.hpp"
#include "floodtile/rng.hpp"
#include "floodtile/tensor.hpp"

namespace floodtile {

struct SamplerConfig {
  int patch_size = 128;
  int patches_per_image = 400;
  // minimum valid fraction; 0 means the default rule "at least one valid
  // pixel", 0.2 reproduces the stricter alternative
  double valid_threshold = 0.0;
  int max_attempts = 1000;
  uint64_t seed = 0;
  // restrict origins to multiples of patch_size; used by coverage
  // analysis where per-pixel inclusion must be independent
  bool grid_aligned = false;

  int min_valid_cells() const;
  void validate() const;
};

struct AugmentConfig {
  double p_hflip = 0.5, p_vflip = 0.5, p_rot = 0.5;
  void validate() const;
};

// Min-max statistics fitted on the training split only.
struct NormStats {
  float elev_min = 0, elev_max = 1;
  float q_min = 0, q_max = 1;
  float target_min = 0, target_max = 1;
  bool target_norm_enabled = true;

  std::string to_json() const;
  static NormStats from_json(const std::string& text);
  void save(const std::string& path) const;
  static NormStats load(const std::string& path);
};

// One (terrain, discharge) training image with its simulated target.
struct DomainImage {
  float discharge = 0;
  InputStack input;          // raw units
  std::vector<float> target; // rows*cols, raw units, nodata cells arbitrary
  ValidityMask mask;         // target validity
};

struct PatchPair {
  int size = 0;
  std::vector<float> input;   // 3 * P * P
  std::vector<float> target;  // P * P
  std::vector<uint8_t> mask;  // P * P
  int origin_row = 0, origin_col = 0;
};

// Rejection sampling: uniform top-left corners, resampled until the patch
// holds at least max(1, ceil(threshold * P^2)) valid cells.
PatchPair sample_valid_patch(const DomainImage& image, const SamplerConfig& cfg, Rng& rng);

// Applies one jointly sampled flip/rotation composition to every plane.
// Draws, in order: hflip, vflip, rotate, then the angle if rotating.
void augment(PatchPair& pair, const AugmentConfig& cfg, Rng& rng);

NormStats fit_norm_stats(const Raster& dem, std::span<const DomainImage> train_images,
                         bool target_norm_enabled);

inline float normalize_value(float v, float lo, float hi) {
  return hi > lo ? (v - lo) / (hi - lo) : 0.0f;
}
inline float denormalize_value(float v, float lo, float hi) {
  return hi > lo ? v * (hi - lo) + lo : lo;
}
void normalize_span(std::span<float> values, float lo, float hi);
void denormalize_span(std::span<float> values, float lo, float hi);

// Input channels in place: elevation and discharge by their min-max
// ranges; the mask channel stays 0/1. Target only when enabled.
void normalize_pair(PatchPair& pair, const NormStats& stats);
void normalize_stack(InputStack& stack, const NormStats& stats);

// 1 - (1 - N/M)^P: chance that a fixed valid pixel is covered by at least
// one of P independently placed patches of N pixels.
double inclusion_probability(long patch_pixels, long total_valid_pixels, long patch_count);

}  // namespace floodtile
