#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "floodtile/tensor.hpp"

namespace floodtile {

/// Georeferenced 2D grid. Row 0 is the top (north) row, matching the
/// on-disk ESRI ASCII convention. Cells hold either a finite value or
/// exactly the nodata sentinel.
struct Raster {
  int rows = 0, cols = 0;
  double cell_size = 1.0;
  double origin_x = 0.0, origin_y = 0.0;  // map coords of the lower-left corner
  float nodata = -9999.0f;
  std::vector<float> values;  // row-major, rows*cols

  bool is_nodata(float v) const { return !std::isfinite(v) || v == nodata; }
  float at(int r, int c) const { return values[size_t(r) * cols + c]; }
  float& at(int r, int c) { return values[size_t(r) * cols + c]; }
  void validate() const;  // throws on broken invariants
};

/// True where the source raster holds a usable value.
struct ValidityMask {
  int rows = 0, cols = 0;
  std::vector<uint8_t> bits;  // 1 = valid

  size_t count_true() const;
  uint8_t at(int r, int c) const { return bits[size_t(r) * cols + c]; }
};

/// Model input: channel 0 elevation (nodata filled), channel 1 the
/// discharge broadcast everywhere, channel 2 the validity mask as 0/1.
struct InputStack {
  int rows = 0, cols = 0;
  std::vector<float> data;  // 3 * rows * cols

  float* channel(int c) { return data.data() + size_t(c) * rows * cols; }
  const float* channel(int c) const { return data.data() + size_t(c) * rows * cols; }
};

/// Parse an ESRI ASCII grid (.asc): six header lines (ncols, nrows,
/// xllcorner, yllcorner, cellsize, NODATA_value) then row-major values.
Raster read_ascii_grid(const std::string& path);

/// Inverse of read_ascii_grid. Header fields round-trip exactly, values
/// to 6 significant digits; nodata cells are written as the sentinel token.
void write_ascii_grid(const Raster& raster, const std::string& path);

ValidityMask build_validity_mask(const Raster& raster);

/// Minimum over valid cells; throws if the raster has none.
float min_valid_value(const Raster& raster);

/// Assemble the 3-channel input. Nodata elevation cells are replaced by
/// the domain's minimum valid elevation; the mask channel records where
/// that happened only indirectly (mask reflects the target's validity).
InputStack stack_input_channels(const Raster& dem, float discharge, const ValidityMask& mask);

/// Mirror padding that does not repeat the edge row/column
/// ([1,2,3] padded by 1 each side -> [2,1,2,3,2]). Each pad amount must be
/// smaller than the corresponding dimension.
Plane<float> reflect_pad(const Plane<float>& grid, int top, int bottom, int left, int right);

/// reflect_pad applied repeatedly so pads may exceed the grid size.
Plane<float> reflect_pad_big(const Plane<float>& grid, int top, int bottom, int left, int right);

/// 8-bit binary PGM; v maps to round(255 * clamp((v-lo)/(hi-lo), 0, 1)).
void write_pgm(const Plane<float>& grid, const std::string& path, float lo, float hi);

}  // namespace floodtile
