#include "floodtile/patches.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace floodtile {

int SamplerConfig::min_valid_cells() const {
  long p2 = long(patch_size) * patch_size;
  return std::max(1L, long(std::ceil(valid_threshold * double(p2))));
}

void SamplerConfig::validate() const {
  if (patch_size < 1) throw std::invalid_argument("sampler: patch_size must be >= 1");
  if (patches_per_image < 1) throw std::invalid_argument("sampler: patches_per_image must be >= 1");
  if (valid_threshold < 0 || valid_threshold > 1)
    throw std::invalid_argument("sampler: valid_threshold must lie in [0, 1]");
  if (max_attempts < 1) throw std::invalid_argument("sampler: max_attempts must be >= 1");
}

void AugmentConfig::validate() const {
  for (double p : {p_hflip, p_vflip, p_rot})
    if (p < 0 || p > 1) throw std::invalid_argument("augment: probability out of range");
}

PatchPair sample_valid_patch(const DomainImage& image, const SamplerConfig& cfg, Rng& rng) {
  cfg.validate();
  int h = image.input.rows, w = image.input.cols, p = cfg.patch_size;
  if (p > h || p > w) throw std::invalid_argument("sampler: image smaller than patch");
  int need = cfg.min_valid_cells();

  int rows_avail = h - p + 1, cols_avail = w - p + 1;
  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    int r0, c0;
    if (cfg.grid_aligned) {
      r0 = p * int(rng.next_below(uint64_t(rows_avail + p - 1) / p));
      c0 = p * int(rng.next_below(uint64_t(cols_avail + p - 1) / p));
    } else {
      r0 = int(rng.next_below(rows_avail));
      c0 = int(rng.next_below(cols_avail));
    }

    int valid = 0;
    for (int r = r0; r < r0 + p && valid < need; ++r) {
      const uint8_t* row = image.mask.bits.data() + size_t(r) * w + c0;
      for (int c = 0; c < p; ++c) valid += row[c];
    }
    if (valid < need) continue;

    PatchPair pair;
    pair.size = p;
    pair.origin_row = r0;
    pair.origin_col = c0;
    pair.input.resize(size_t(3) * p * p);
    pair.target.resize(size_t(p) * p);
    pair.mask.resize(size_t(p) * p);
    for (int ch = 0; ch < 3; ++ch) {
      const float* src = image.input.channel(ch);
      float* dst = pair.input.data() + size_t(ch) * p * p;
      for (int r = 0; r < p; ++r)
        std::copy_n(src + size_t(r0 + r) * w + c0, p, dst + size_t(r) * p);
    }
    for (int r = 0; r < p; ++r) {
      std::copy_n(image.target.data() + size_t(r0 + r) * w + c0, p,
                  pair.target.data() + size_t(r) * p);
      std::copy_n(image.mask.bits.data() + size_t(r0 + r) * w + c0, p,
                  pair.mask.data() + size_t(r) * p);
    }
    return pair;
  }
  throw std::runtime_error("sampler: no valid patch after " + std::to_string(cfg.max_attempts) +
                           " attempts (image nearly empty?)");
}

namespace {

enum class Transform { hflip, vflip, rot90, rot180, rot270 };

template <typename T>
void apply_plane(std::vector<T>& plane, int p, Transform t) {
  std::vector<T> out(plane.size());
  auto src = [&](int r, int c) { return plane[size_t(r) * p + c]; };
  for (int r = 0; r < p; ++r) {
    for (int c = 0; c < p; ++c) {
      T v;
      switch (t) {
        case Transform::hflip: v = src(r, p - 1 - c); break;
        case Transform::vflip: v = src(p - 1 - r, c); break;
        case Transform::rot90: v = src(c, p - 1 - r); break;   // counter-clockwise
        case Transform::rot180: v = src(p - 1 - r, p - 1 - c); break;
        case Transform::rot270: v = src(p - 1 - c, r); break;
      }
      out[size_t(r) * p + c] = v;
    }
  }
  plane.swap(out);
}

void apply_all(PatchPair& pair, Transform t) {
  int p = pair.size;
  for (int ch = 0; ch < 3; ++ch) {
    std::vector<float> plane(pair.input.begin() + size_t(ch) * p * p,
                             pair.input.begin() + size_t(ch + 1) * p * p);
    apply_plane(plane, p, t);
    std::copy(plane.begin(), plane.end(), pair.input.begin() + size_t(ch) * p * p);
  }
  apply_plane(pair.target, p, t);
  apply_plane(pair.mask, p, t);
}

}  // namespace

void augment(PatchPair& pair, const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  bool do_h = rng.next_double() < cfg.p_hflip;
  bool do_v = rng.next_double() < cfg.p_vflip;
  bool do_r = rng.next_double() < cfg.p_rot;
  if (do_h) apply_all(pair, Transform::hflip);
  if (do_v) apply_all(pair, Transform::vflip);
  if (do_r) {
    if (pair.size <= 0) throw std::invalid_argument("augment: rotation needs a square patch");
    static constexpr Transform angles[3] = {Transform::rot90, Transform::rot180,
                                            Transform::rot270};
    apply_all(pair, angles[rng.next_below(3)]);
  }
}

NormStats fit_norm_stats(const Raster& dem, std::span<const DomainImage> train_images,
                         bool target_norm_enabled) {
  if (train_images.empty()) throw std::invalid_argument("fit_norm_stats: empty training split");

  NormStats s;
  s.target_norm_enabled = target_norm_enabled;

  // elevation over all valid cells of the whole study area
  float lo = std::numeric_limits<float>::infinity(), hi = -lo;
  for (float v : dem.values) {
    if (dem.is_nodata(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!std::isfinite(lo)) throw std::invalid_argument("fit_norm_stats: dem has no valid cells");
  s.elev_min = lo;
  s.elev_max = hi;

  s.q_min = std::numeric_limits<float>::infinity();
  s.q_max = -s.q_min;
  float tlo = std::numeric_limits<float>::infinity(), thi = -tlo;
  long valid = 0;
  for (const auto& img : train_images) {
    s.q_min = std::min(s.q_min, img.discharge);
    s.q_max = std::max(s.q_max, img.discharge);
    for (size_t i = 0; i < img.target.size(); ++i) {
      if (!img.mask.bits[i]) continue;
      tlo = std::min(tlo, img.target[i]);
      thi = std::max(thi, img.target[i]);
      ++valid;
    }
  }
  if (valid == 0) throw std::invalid_argument("fit_norm_stats: no valid target cells");
  s.target_min = tlo;
  s.target_max = thi;
  return s;
}

void normalize_span(std::span<float> values, float lo, float hi) {
  for (float& v : values) v = normalize_value(v, lo, hi);
}

void denormalize_span(std::span<float> values, float lo, float hi) {
  for (float& v : values) v = denormalize_value(v, lo, hi);
}

void normalize_pair(PatchPair& pair, const NormStats& stats) {
  size_t pp = size_t(pair.size) * pair.size;
  normalize_span({pair.input.data(), pp}, stats.elev_min, stats.elev_max);
  normalize_span({pair.input.data() + pp, pp}, stats.q_min, stats.q_max);
  if (stats.target_norm_enabled)
    normalize_span({pair.target.data(), pp}, stats.target_min, stats.target_max);
}

void normalize_stack(InputStack& stack, const NormStats& stats) {
  size_t n = size_t(stack.rows) * stack.cols;
  normalize_span({stack.channel(0), n}, stats.elev_min, stats.elev_max);
  normalize_span({stack.channel(1), n}, stats.q_min, stats.q_max);
}

double inclusion_probability(long patch_pixels, long total_valid_pixels, long patch_count) {
  if (patch_pixels <= 0) throw std::invalid_argument("inclusion_probability: N must be > 0");
  if (patch_pixels > total_valid_pixels)
    throw std::invalid_argument("inclusion_probability: N exceeds M");
  if (patch_count < 0) throw std::invalid_argument("inclusion_probability: P must be >= 0");
  double miss = 1.0 - double(patch_pixels) / double(total_valid_pixels);
  return 1.0 - std::pow(miss, double(patch_count));
}

std::string NormStats::to_json() const {
  nlohmann::json j;
  j["elev_min"] = elev_min;
  j["elev_max"] = elev_max;
  j["q_min"] = q_min;
  j["q_max"] = q_max;
  j["target_min"] = target_min;
  j["target_max"] = target_max;
  j["target_norm_enabled"] = target_norm_enabled;
  return j.dump(2);
}

NormStats NormStats::from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  NormStats s;
  s.elev_min = j.at("elev_min").get<float>();
  s.elev_max = j.at("elev_max").get<float>();
  s.q_min = j.at("q_min").get<float>();
  s.q_max = j.at("q_max").get<float>();
  s.target_min = j.at("target_min").get<float>();
  s.target_max = j.at("target_max").get<float>();
  s.target_norm_enabled = j.at("target_norm_enabled").get<bool>();
  return s;
}

void NormStats::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write norm stats: " + path);
  out << to_json() << '\n';
}

NormStats NormStats::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read norm stats: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json(text);
}

}  // namespace floodtile
