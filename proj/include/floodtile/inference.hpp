#pragma once

#include <functional>
#include <string>

#include "floodtile/raster.hpp"
#include "floodtile/tensor.hpp"
#include "floodtile/unet.hpp"

namespace floodtile {

enum class Strategy { no_overlap, overlap, center_crop };

Strategy strategy_from_string(const std::string& name);
std::string strategy_name(Strategy s);

struct InferenceConfig {
  Strategy strategy = Strategy::center_crop;
  int patch_size = 128;  // P, or P_total for center_crop
  int stride = 64;       // overlap only, 0 < stride < patch
  int center_size = 64;  // center_crop only, even, < patch_size

  void validate() const;
};

// Predictor for one 1x3xPxP tile. Tiles are evaluated one at a time so
// stitched outputs equal independent per-tile forward passes bit for bit.
using TileFn = std::function<Tensor4f(const Tensor4f&)>;

TileFn tile_fn(const UNet& model);

// All three stitchers consume an already normalized input stack and
// return a full-resolution plane in the model's output space. Alignment
// padding reflects the image content and is cropped away at the end.
Plane<float> infer_no_overlap(const InputStack& image, int patch, const TileFn& fn);

// Overlapping windows accumulated and divided by the per-pixel cover
// count. The image is padded so every original pixel is covered by at
// least one full window: each padded dimension is the smallest
// P + k*S >= max(dim, P).
Plane<float> infer_overlap(const InputStack& image, int patch, int stride, const TileFn& fn);

Plane<float> infer_center_crop(const InputStack& image, int patch_total, int patch_center,
                               const TileFn& fn);

Plane<float> run_inference(const InputStack& image, const InferenceConfig& cfg, const TileFn& fn);

// Cover-count grid of the overlap strategy, cropped to rows x cols.
Plane<int> overlap_cover_counts(int rows, int cols, int patch, int stride);

struct CenterCropTiling {
  int padded_rows = 0, padded_cols = 0;  // multiples of the center size
  int tiles_y = 0, tiles_x = 0;
  int pad_context = 0;
};
CenterCropTiling center_crop_tiling(int rows, int cols, int patch_total, int patch_center);

}  // namespace floodtile
