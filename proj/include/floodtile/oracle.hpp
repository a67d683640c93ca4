#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "floodtile/raster.hpp"

namespace floodtile {

enum class TerrainPreset { primary, alternate };

// Procedural river valley plus a stage-discharge rating. The channel is a
// 4-connected path from the left image border to the right one; terrain
// rises away from it, with smooth pseudo-random structure along the
// valley. Fully determined by (seed, rows, cols, preset).
struct SyntheticDomain {
  uint64_t seed = 0;
  int rows = 0, cols = 0;
  TerrainPreset preset = TerrainPreset::primary;
  Raster dem;
  std::vector<std::pair<int, int>> channel_cells;  // ordered along the thalweg
  double rating_k = 0, rating_e = 0.6;             // stage(q) = k * q^e

  double stage(double q) const;
};

// `q_ref` and `flood_fraction` calibrate the rating so that discharge
// q_ref floods roughly flood_fraction of the cells.
SyntheticDomain gen_terrain(uint64_t seed, int rows, int cols,
                            TerrainPreset preset = TerrainPreset::primary, double q_ref = 400.0,
                            double flood_fraction = 0.25);

// Steady-state water depth above terrain: the water surface over each
// channel column is the thalweg elevation plus stage(q), flat across the
// valley; a cell floods when it is below that surface and 4-connected to
// the channel through flooded cells. Dry cells are NODATA.
Raster simulate_water_level(const SyntheticDomain& domain, double q);

struct Splits {
  std::vector<double> train, val, test;
};

struct SplitSpec {
  std::vector<int> val_indices, test_indices;  // into the sorted grid
};

// Interleaved default: validation and test values strictly interior to
// the training range, with the 18/4/5 shape on a 27-value grid.
SplitSpec default_split_spec(size_t grid_size);

// Deterministic assignment; rejects overlapping indices and any val/test
// value outside the training min/max ("extrapolation split").
Splits make_splits(std::span<const double> discharge_grid, const SplitSpec& spec);

// 27 values, 5 to 395 step 15.
std::vector<double> default_discharge_grid();

}  // namespace floodtile
