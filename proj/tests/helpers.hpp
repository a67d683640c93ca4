#pragma once

#include <filesystem>
#include <string>

#include "floodtile/raster.hpp"
#include "floodtile/rng.hpp"
#include "floodtile/tensor.hpp"
#include "floodtile/training.hpp"

namespace testutil {

using namespace floodtile;

inline std::string temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "floodtile_tests";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

template <typename T>
Tensor4<T> random_tensor(int n, int c, int h, int w, Rng& rng, double lo = -1, double hi = 1) {
  Tensor4<T> t(n, c, h, w);
  for (auto& v : t.data) v = T(rng.uniform(lo, hi));
  return t;
}

inline Raster small_raster(int rows, int cols, std::vector<float> values,
                           float nodata = -9999.0f) {
  Raster r;
  r.rows = rows;
  r.cols = cols;
  r.nodata = nodata;
  r.values = std::move(values);
  return r;
}

// Flat-terrain image where every cell is valid and the target is an
// arbitrary function of position.
inline DomainImage synthetic_image(int rows, int cols, float discharge,
                                   float (*target_fn)(int, int)) {
  Raster dem = small_raster(rows, cols, std::vector<float>(size_t(rows) * cols, 100.0f));
  Raster target = dem;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) target.at(r, c) = target_fn(r, c);
  return make_domain_image(dem, discharge, target);
}

inline double rel_err(double a, double b) {
  double denom = std::max({std::fabs(a), std::fabs(b), 1e-12});
  return std::fabs(a - b) / denom;
}

}  // namespace testutil
