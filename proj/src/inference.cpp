#include "floodtile/inference.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace floodtile {

Strategy strategy_from_string(const std::string& name) {
  if (name == "no_overlap") return Strategy::no_overlap;
  if (name == "overlap") return Strategy::overlap;
  if (name == "center_crop") return Strategy::center_crop;
  throw std::invalid_argument("unknown inference strategy: " + name);
}

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::no_overlap: return "no_overlap";
    case Strategy::overlap: return "overlap";
    case Strategy::center_crop: return "center_crop";
  }
  return "?";
}

void InferenceConfig::validate() const {
  if (patch_size < 2) throw std::invalid_argument("inference: patch size too small");
  if (strategy == Strategy::overlap && (stride <= 0 || stride >= patch_size))
    throw std::invalid_argument("inference: overlap requires 0 < stride < patch size");
  if (strategy == Strategy::center_crop) {
    if (center_size <= 0 || center_size >= patch_size)
      throw std::invalid_argument("inference: center size must lie in (0, patch size)");
    if ((patch_size - center_size) % 2 || patch_size % 2 || center_size % 2)
      throw std::invalid_argument("inference: patch and center sizes must be even");
  }
}

TileFn tile_fn(const UNet& model) {
  return [&model](const Tensor4f& tile) { return model.forward(tile); };
}

namespace {

// Reflection needs an interior row/column; a 1-cell dimension can only be
// extended by replication.
Plane<float> pad_plane(const Plane<float>& p, int top, int bottom, int left, int right) {
  Plane<float> cur = p;
  if (cur.rows == 1 && (top || bottom)) {
    Plane<float> r(cur.rows + top + bottom, cur.cols);
    for (int y = 0; y < r.rows; ++y)
      std::copy_n(cur.row(0), cur.cols, r.row(y));
    cur = std::move(r);
    top = bottom = 0;
  }
  if (cur.cols == 1 && (left || right)) {
    Plane<float> r(cur.rows, cur.cols + left + right);
    for (int y = 0; y < r.rows; ++y)
      std::fill_n(r.row(y), r.cols, cur.at(y, 0));
    cur = std::move(r);
    left = right = 0;
  }
  return reflect_pad_big(cur, top, bottom, left, right);
}

std::array<Plane<float>, 3> pad_stack(const InputStack& img, int top, int bottom, int left,
                                      int right) {
  std::array<Plane<float>, 3> out;
  for (int ch = 0; ch < 3; ++ch) {
    Plane<float> p(img.rows, img.cols);
    std::copy_n(img.channel(ch), p.v.size(), p.v.data());
    out[ch] = pad_plane(p, top, bottom, left, right);
  }
  return out;
}

Tensor4f cut_tile(const std::array<Plane<float>, 3>& padded, int y0, int x0, int p) {
  Tensor4f tile(1, 3, p, p);
  for (int ch = 0; ch < 3; ++ch) {
    float* dst = tile.plane(0, ch);
    for (int y = 0; y < p; ++y)
      std::copy_n(padded[ch].row(y0 + y) + x0, p, dst + size_t(y) * p);
  }
  return tile;
}

Plane<float> crop(const Plane<float>& p, int rows, int cols) {
  Plane<float> out(rows, cols);
  for (int y = 0; y < rows; ++y) std::copy_n(p.row(y), cols, out.row(y));
  return out;
}

int align_up(int v, int m) { return ((v + m - 1) / m) * m; }

// smallest P + k*S covering max(dim, P)
int overlap_padded_dim(int dim, int patch, int stride) {
  if (dim <= patch) return patch;
  int k = (dim - patch + stride - 1) / stride;
  return patch + k * stride;
}

void check_tile_output(const Tensor4f& pred, int p) {
  if (pred.n != 1 || pred.c != 1 || pred.h != p || pred.w != p)
    throw std::runtime_error("inference: tile prediction has the wrong shape");
}

}  // namespace

Plane<float> infer_no_overlap(const InputStack& image, int patch, const TileFn& fn) {
  int hp = align_up(image.rows, patch), wp = align_up(image.cols, patch);
  auto padded = pad_stack(image, 0, hp - image.rows, 0, wp - image.cols);

  Plane<float> out(hp, wp);
  for (int y = 0; y < hp; y += patch) {
    for (int x = 0; x < wp; x += patch) {
      Tensor4f pred = fn(cut_tile(padded, y, x, patch));
      check_tile_output(pred, patch);
      const float* src = pred.plane(0, 0);
      for (int r = 0; r < patch; ++r)
        std::copy_n(src + size_t(r) * patch, patch, out.row(y + r) + x);
    }
  }
  return crop(out, image.rows, image.cols);
}

Plane<float> infer_overlap(const InputStack& image, int patch, int stride, const TileFn& fn) {
  if (stride <= 0 || stride >= patch)
    throw std::invalid_argument("infer_overlap: requires 0 < stride < patch");
  int hp = overlap_padded_dim(image.rows, patch, stride);
  int wp = overlap_padded_dim(image.cols, patch, stride);
  auto padded = pad_stack(image, 0, hp - image.rows, 0, wp - image.cols);

  Plane<float> acc(hp, wp);
  Plane<int> cnt(hp, wp);
  for (int y = 0; y + patch <= hp; y += stride) {
    for (int x = 0; x + patch <= wp; x += stride) {
      Tensor4f pred = fn(cut_tile(padded, y, x, patch));
      check_tile_output(pred, patch);
      const float* src = pred.plane(0, 0);
      for (int r = 0; r < patch; ++r) {
        float* arow = acc.row(y + r) + x;
        int* crow = cnt.row(y + r) + x;
        for (int c = 0; c < patch; ++c) {
          arow[c] += src[size_t(r) * patch + c];
          ++crow[c];
        }
      }
    }
  }
  for (size_t i = 0; i < acc.v.size(); ++i) acc.v[i] /= float(cnt.v[i]);
  return crop(acc, image.rows, image.cols);
}

Plane<float> infer_center_crop(const InputStack& image, int patch_total, int patch_center,
                               const TileFn& fn) {
  auto t = center_crop_tiling(image.rows, image.cols, patch_total, patch_center);
  auto padded = pad_stack(image, t.pad_context, t.padded_rows - image.rows + t.pad_context,
                          t.pad_context, t.padded_cols - image.cols + t.pad_context);

  Plane<float> out(t.padded_rows, t.padded_cols);
  for (int ty = 0; ty < t.tiles_y; ++ty) {
    for (int tx = 0; tx < t.tiles_x; ++tx) {
      int y0 = ty * patch_center, x0 = tx * patch_center;
      Tensor4f pred = fn(cut_tile(padded, y0, x0, patch_total));
      check_tile_output(pred, patch_total);
      const float* src = pred.plane(0, 0);
      for (int r = 0; r < patch_center; ++r)
        std::copy_n(src + size_t(r + t.pad_context) * patch_total + t.pad_context, patch_center,
                    out.row(y0 + r) + x0);
    }
  }
  return crop(out, image.rows, image.cols);
}

Plane<float> run_inference(const InputStack& image, const InferenceConfig& cfg, const TileFn& fn) {
  cfg.validate();
  switch (cfg.strategy) {
    case Strategy::no_overlap: return infer_no_overlap(image, cfg.patch_size, fn);
    case Strategy::overlap: return infer_overlap(image, cfg.patch_size, cfg.stride, fn);
    case Strategy::center_crop:
      return infer_center_crop(image, cfg.patch_size, cfg.center_size, fn);
  }
  throw std::logic_error("run_inference: bad strategy");
}

Plane<int> overlap_cover_counts(int rows, int cols, int patch, int stride) {
  int hp = overlap_padded_dim(rows, patch, stride);
  int wp = overlap_padded_dim(cols, patch, stride);
  Plane<int> cnt(hp, wp);
  for (int y = 0; y + patch <= hp; y += stride)
    for (int x = 0; x + patch <= wp; x += stride)
      for (int r = 0; r < patch; ++r) {
        int* crow = cnt.row(y + r) + x;
        for (int c = 0; c < patch; ++c) ++crow[c];
      }
  Plane<int> out(rows, cols);
  for (int y = 0; y < rows; ++y) std::copy_n(cnt.row(y), cols, out.row(y));
  return out;
}

CenterCropTiling center_crop_tiling(int rows, int cols, int patch_total, int patch_center) {
  if (patch_center <= 0 || patch_center >= patch_total || (patch_total - patch_center) % 2)
    throw std::invalid_argument("center_crop_tiling: misaligned sizes");
  CenterCropTiling t;
  t.pad_context = (patch_total - patch_center) / 2;
  t.padded_rows = align_up(rows, patch_center);
  t.padded_cols = align_up(cols, patch_center);
  t.tiles_y = t.padded_rows / patch_center;
  t.tiles_x = t.padded_cols / patch_center;
  return t;
}

}  // namespace floodtile
