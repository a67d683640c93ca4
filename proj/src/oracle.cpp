#include "floodtile/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

#include "floodtile/rng.hpp"

namespace floodtile {

namespace {

double lattice_value(uint64_t seed, int octave, long gx, long gy) {
  uint64_t h = derive_seed(derive_seed(seed, uint64_t(octave)),
                           uint64_t(gx) * 0x8da6b343ull ^ uint64_t(gy) * 0xd8163841ull);
  return double(h >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// fixed 4-octave value noise, output in [-1, 1]
double value_noise_2d(uint64_t seed, double x, double y, double base_wavelength) {
  double total = 0, norm = 0, amp = 1, wl = base_wavelength;
  for (int o = 0; o < 4; ++o) {
    double fx = x / wl, fy = y / wl;
    long gx = long(std::floor(fx)), gy = long(std::floor(fy));
    double tx = smoothstep(fx - gx), ty = smoothstep(fy - gy);
    double v00 = lattice_value(seed, o, gx, gy), v10 = lattice_value(seed, o, gx + 1, gy);
    double v01 = lattice_value(seed, o, gx, gy + 1), v11 = lattice_value(seed, o, gx + 1, gy + 1);
    total += amp * ((v00 * (1 - tx) + v10 * tx) * (1 - ty) + (v01 * (1 - tx) + v11 * tx) * ty);
    norm += amp;
    amp *= 0.5;
    wl *= 0.5;
  }
  return total / norm;
}

double value_noise_1d(uint64_t seed, double x, double wavelength) {
  return value_noise_2d(seed, x, 0.5, wavelength);
}

struct TerrainParams {
  double curvature;        // m per cell^2 across the valley
  double curvature_mod;    // relative modulation along the channel
  double meander_amp;      // cells
  double meander_wl;       // cells
  double undulation_amp;   // m, along-channel thalweg variation
  double undulation_wl;    // cells
  double drop;             // m, total downstream fall
  double noise_amp;        // m, 2d texture away from the channel
  double base_elevation;   // m
};

TerrainParams params_for(TerrainPreset preset, int rows, int cols) {
  double half_width = 0.15 * rows;  // target half width at ~2 m of stage
  TerrainParams p;
  if (preset == TerrainPreset::primary) {
    p.curvature = 2.0 / (half_width * half_width);
    p.curvature_mod = 0.35;
    p.meander_amp = 0.18 * rows;
    p.meander_wl = cols / 2.5;
    p.undulation_amp = 0.6;
    p.undulation_wl = cols / 6.0;
    p.drop = 2.5;
    p.base_elevation = 190.0;
  } else {
    p.curvature = 3.4 / (half_width * half_width);
    p.curvature_mod = 0.25;
    p.meander_amp = 0.10 * rows;
    p.meander_wl = cols / 3.6;
    p.undulation_amp = 1.0;
    p.undulation_wl = cols / 4.5;
    p.drop = 4.0;
    p.base_elevation = 95.0;
  }
  // keep channel cells strict column minima: texture is suppressed within
  // 1.5 cells of the channel and bounded by the curvature term beyond
  p.noise_amp = std::min(0.05, 20.0 * p.curvature * (1.0 - p.curvature_mod));
  return p;
}

// texture ramp: zero at the channel, ~1 far away
double noise_ramp(double d) { return d <= 1.5 ? 0.0 : (d - 1.5) / (d + 2.0); }

struct ChannelGeometry {
  std::vector<int> run_lo, run_hi;      // channel row interval per column
  std::vector<double> channel_elev;     // thalweg elevation per column
  std::vector<std::pair<int, int>> cells;
};

ChannelGeometry trace_channel(uint64_t seed, int rows, int cols, const TerrainParams& tp) {
  ChannelGeometry g;
  g.run_lo.resize(cols);
  g.run_hi.resize(cols);
  g.channel_elev.resize(cols);

  uint64_t meander_seed = derive_seed(seed, 1);
  uint64_t undulation_seed = derive_seed(seed, 2);
  int margin = std::max(2, rows / 16);

  std::vector<int> thalweg_row(cols);
  for (int c = 0; c < cols; ++c) {
    double t = rows / 2.0 + tp.meander_amp * value_noise_1d(meander_seed, c, tp.meander_wl);
    thalweg_row[c] = std::clamp(int(std::lround(t)), margin, rows - 1 - margin);
    double slope = tp.drop / std::max(1, cols - 1);
    g.channel_elev[c] = tp.base_elevation + slope * (cols - 1 - c) +
                        tp.undulation_amp * value_noise_1d(undulation_seed, c, tp.undulation_wl);
  }

  int prev = thalweg_row[0];
  for (int c = 0; c < cols; ++c) {
    int cur = thalweg_row[c];
    int lo = std::min(prev, cur), hi = std::max(prev, cur);
    g.run_lo[c] = lo;
    g.run_hi[c] = hi;
    // horizontal entry first, then the vertical run toward the new row
    g.cells.emplace_back(prev, c);
    for (int r = prev; r != cur; r += (cur > prev ? 1 : -1)) g.cells.emplace_back(r + (cur > prev ? 1 : -1), c);
    prev = cur;
  }
  return g;
}

std::vector<uint8_t> flood_fill(const Raster& dem, const ChannelGeometry& g,
                                std::span<const double> surface) {
  int rows = dem.rows, cols = dem.cols;
  std::vector<uint8_t> wet(size_t(rows) * cols, 0);
  std::deque<std::pair<int, int>> queue;
  for (auto [r, c] : g.cells) {
    size_t i = size_t(r) * cols + c;
    if (!wet[i] && dem.values[i] < surface[c]) {
      wet[i] = 1;
      queue.emplace_back(r, c);
    }
  }
  constexpr int dr[4] = {-1, 1, 0, 0};
  constexpr int dc[4] = {0, 0, -1, 1};
  while (!queue.empty()) {
    auto [r, c] = queue.front();
    queue.pop_front();
    for (int k = 0; k < 4; ++k) {
      int nr = r + dr[k], nc = c + dc[k];
      if (nr < 0 || nr >= rows || nc < 0 || nc >= cols) continue;
      size_t i = size_t(nr) * cols + nc;
      if (wet[i] || dem.values[i] >= surface[nc]) continue;
      wet[i] = 1;
      queue.emplace_back(nr, nc);
    }
  }
  return wet;
}

double flooded_fraction(const Raster& dem, const ChannelGeometry& g, double stage) {
  std::vector<double> surface(dem.cols);
  for (int c = 0; c < dem.cols; ++c) surface[c] = g.channel_elev[c] + stage;
  auto wet = flood_fill(dem, g, surface);
  size_t n = 0;
  for (uint8_t w : wet) n += w;
  return double(n) / double(wet.size());
}

}  // namespace

double SyntheticDomain::stage(double q) const {
  if (q <= 0) throw std::invalid_argument("stage: discharge must be > 0");
  return rating_k * std::pow(q, rating_e);
}

SyntheticDomain gen_terrain(uint64_t seed, int rows, int cols, TerrainPreset preset,
                            double q_ref, double flood_fraction) {
  if (rows < 64 || cols < 64) throw std::invalid_argument("gen_terrain: dims must be >= 64");
  if (q_ref <= 0 || flood_fraction <= 0 || flood_fraction >= 1)
    throw std::invalid_argument("gen_terrain: bad calibration targets");

  TerrainParams tp = params_for(preset, rows, cols);
  ChannelGeometry g = trace_channel(seed, rows, cols, tp);

  SyntheticDomain dom;
  dom.seed = seed;
  dom.rows = rows;
  dom.cols = cols;
  dom.preset = preset;
  dom.channel_cells = g.cells;

  Raster& dem = dom.dem;
  dem.rows = rows;
  dem.cols = cols;
  dem.cell_size = 1.0;
  dem.nodata = -9999.0f;
  dem.values.resize(size_t(rows) * cols);

  uint64_t texture_seed = derive_seed(seed, 3);
  uint64_t curvature_seed = derive_seed(seed, 4);
  for (int c = 0; c < cols; ++c) {
    double curv =
        tp.curvature * (1.0 + tp.curvature_mod * value_noise_1d(curvature_seed, c, cols / 4.0));
    for (int r = 0; r < rows; ++r) {
      double d = 0;
      if (r < g.run_lo[c]) d = g.run_lo[c] - r;
      else if (r > g.run_hi[c]) d = r - g.run_hi[c];
      double elev = g.channel_elev[c] + curv * d * d +
                    tp.noise_amp * noise_ramp(d) *
                        value_noise_2d(texture_seed, c, r, rows / 3.0);
      dem.values[size_t(r) * cols + c] = float(elev);
    }
  }

  // calibrate the rating: bisect the stage that floods the target share
  double lo = 1e-4, hi = 1.0;
  while (flooded_fraction(dem, g, hi) < flood_fraction && hi < 64.0) hi *= 2.0;
  for (int it = 0; it < 48; ++it) {
    double mid = 0.5 * (lo + hi);
    (flooded_fraction(dem, g, mid) < flood_fraction ? lo : hi) = mid;
  }
  double stage_ref = 0.5 * (lo + hi);
  dom.rating_e = 0.6;
  dom.rating_k = stage_ref / std::pow(q_ref, dom.rating_e);
  return dom;
}

Raster simulate_water_level(const SyntheticDomain& domain, double q) {
  if (q <= 0) throw std::invalid_argument("simulate_water_level: discharge must be > 0");
  const Raster& dem = domain.dem;

  // rebuild per-column geometry from the stored channel path
  ChannelGeometry g;
  g.cells = domain.channel_cells;
  g.run_lo.assign(dem.cols, dem.rows);
  g.run_hi.assign(dem.cols, -1);
  g.channel_elev.assign(dem.cols, 0.0);
  for (auto [r, c] : g.cells) {
    g.run_lo[c] = std::min(g.run_lo[c], r);
    g.run_hi[c] = std::max(g.run_hi[c], r);
    g.channel_elev[c] = dem.values[size_t(r) * dem.cols + c];
  }

  double s = domain.stage(q);
  std::vector<double> surface(dem.cols);
  for (int c = 0; c < dem.cols; ++c) surface[c] = g.channel_elev[c] + s;
  auto wet = flood_fill(dem, g, surface);

  Raster out;
  out.rows = dem.rows;
  out.cols = dem.cols;
  out.cell_size = dem.cell_size;
  out.origin_x = dem.origin_x;
  out.origin_y = dem.origin_y;
  out.nodata = -9999.0f;
  out.values.assign(size_t(dem.rows) * dem.cols, out.nodata);
  for (int r = 0; r < dem.rows; ++r)
    for (int c = 0; c < dem.cols; ++c) {
      size_t i = size_t(r) * dem.cols + c;
      if (wet[i]) out.values[i] = float(surface[c] - dem.values[i]);
    }
  return out;
}

SplitSpec default_split_spec(size_t grid_size) {
  size_t n = grid_size;
  if (n < 5) throw std::invalid_argument("default split needs at least 5 discharges");
  size_t n_val = std::max<size_t>(1, size_t(std::lround(4.0 * n / 27.0)));
  size_t n_test = std::max<size_t>(1, size_t(std::lround(5.0 * n / 27.0)));

  SplitSpec spec;
  std::vector<uint8_t> used(n, 0);
  used[0] = used[n - 1] = 1;  // extremes always train
  auto take = [&](std::vector<int>& out, size_t idx) {
    if (idx <= 0 || idx >= n - 1 || used[idx]) return false;
    used[idx] = 1;
    out.push_back(int(idx));
    return true;
  };

  // alternate val/test from index 2 at step 2, then finish quotas at
  // step 4; linear probe when the pattern runs off the interior
  size_t idx = 2;
  bool want_val = true;
  while (spec.val_indices.size() < n_val && spec.test_indices.size() < n_test && idx < n - 1) {
    take(want_val ? spec.val_indices : spec.test_indices, idx);
    want_val = !want_val;
    idx += 2;
  }
  auto fill_quota = [&](std::vector<int>& out, size_t quota) {
    size_t i = idx;
    while (out.size() < quota && i < n - 1) {
      take(out, i);
      i += 4;
    }
    for (size_t probe = 1; out.size() < quota && probe < n - 1; ++probe) take(out, probe);
    if (out.size() < quota)
      throw std::invalid_argument("discharge grid too small for the default split");
  };
  fill_quota(spec.val_indices, n_val);
  fill_quota(spec.test_indices, n_test);
  return spec;
}

Splits make_splits(std::span<const double> discharge_grid, const SplitSpec& spec) {
  size_t n = discharge_grid.size();
  if (n < 3) throw std::invalid_argument("make_splits: need at least 3 discharges");
  for (size_t i = 1; i < n; ++i)
    if (!(discharge_grid[i] > discharge_grid[i - 1]))
      throw std::invalid_argument("make_splits: grid must be strictly increasing");

  std::vector<int> role(n, 0);  // 0 train, 1 val, 2 test
  auto assign = [&](const std::vector<int>& idxs, int r) {
    for (int i : idxs) {
      if (i < 0 || size_t(i) >= n) throw std::invalid_argument("make_splits: index out of range");
      if (role[i]) throw std::invalid_argument("make_splits: overlapping split lists");
      role[i] = r;
    }
  };
  assign(spec.val_indices, 1);
  assign(spec.test_indices, 2);

  Splits s;
  for (size_t i = 0; i < n; ++i)
    (role[i] == 0 ? s.train : role[i] == 1 ? s.val : s.test).push_back(discharge_grid[i]);
  if (s.train.empty()) throw std::invalid_argument("make_splits: empty training split");

  double lo = s.train.front(), hi = s.train.back();
  for (const auto* part : {&s.val, &s.test})
    for (double q : *part)
      if (q < lo || q > hi)
        throw std::invalid_argument("extrapolation split: held-out discharge " +
                                    std::to_string(q) + " lies outside the training range");
  return s;
}

std::vector<double> default_discharge_grid() {
  std::vector<double> grid;
  for (int q = 5; q <= 395; q += 15) grid.push_back(q);
  return grid;
}

}  // namespace floodtile
