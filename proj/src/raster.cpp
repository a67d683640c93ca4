#include "floodtile/raster.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace floodtile {

void Raster::validate() const {
  if (rows <= 0 || cols <= 0) throw std::invalid_argument("empty raster");
  if (cell_size <= 0) throw std::invalid_argument("raster cell_size must be > 0");
  if (values.size() != size_t(rows) * cols)
    throw std::invalid_argument("raster value count mismatch");
  for (float v : values)
    if (!std::isfinite(v) && !is_nodata(v))
      throw std::invalid_argument("raster holds a non-finite value that is not the sentinel");
}

size_t ValidityMask::count_true() const {
  size_t n = 0;
  for (uint8_t b : bits) n += b;
  return n;
}

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

double parse_header_line(std::istream& in, const char* key, const std::string& path) {
  std::string name;
  double value;
  if (!(in >> name >> value))
    throw std::runtime_error(path + ": malformed header, expected '" + key + "'");
  if (lower(name) != lower(key))
    throw std::runtime_error(path + ": malformed header, expected '" + key + "' but found '" +
                             name + "'");
  return value;
}

}  // namespace

Raster read_ascii_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open grid file: " + path);

  Raster r;
  double ncols = parse_header_line(in, "ncols", path);
  double nrows = parse_header_line(in, "nrows", path);
  r.origin_x = parse_header_line(in, "xllcorner", path);
  r.origin_y = parse_header_line(in, "yllcorner", path);
  r.cell_size = parse_header_line(in, "cellsize", path);
  r.nodata = float(parse_header_line(in, "NODATA_value", path));
  if (ncols <= 0 || nrows <= 0 || ncols != std::floor(ncols) || nrows != std::floor(nrows))
    throw std::runtime_error(path + ": malformed header, ncols/nrows must be positive integers");
  r.cols = int(ncols);
  r.rows = int(nrows);

  size_t expected = size_t(r.rows) * r.cols;
  r.values.reserve(expected);
  std::string tok;
  while (in >> tok) {
    if (r.values.size() == expected)
      throw std::runtime_error(path + ": value count mismatch (more than " +
                               std::to_string(expected) + " values)");
    try {
      size_t pos = 0;
      float v = std::stof(tok, &pos);
      if (pos != tok.size()) throw std::invalid_argument(tok);
      r.values.push_back(v);
    } catch (const std::exception&) {
      throw std::runtime_error(path + ": non-numeric token '" + tok + "'");
    }
  }
  if (r.values.size() != expected)
    throw std::runtime_error(path + ": value count mismatch (got " +
                             std::to_string(r.values.size()) + ", header says " +
                             std::to_string(expected) + ")");
  r.validate();
  return r;
}

void write_ascii_grid(const Raster& raster, const std::string& path) {
  raster.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write grid file: " + path);

  char buf[64];
  auto header = [&](const char* key, double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << key << ' ' << buf << '\n';
  };
  header("ncols", raster.cols);
  header("nrows", raster.rows);
  header("xllcorner", raster.origin_x);
  header("yllcorner", raster.origin_y);
  header("cellsize", raster.cell_size);
  header("NODATA_value", raster.nodata);

  // The sentinel is emitted with full precision so it parses back equal.
  char nodata_tok[64];
  std::snprintf(nodata_tok, sizeof nodata_tok, "%.9g", double(raster.nodata));
  for (int r = 0; r < raster.rows; ++r) {
    for (int c = 0; c < raster.cols; ++c) {
      if (c) out << ' ';
      float v = raster.at(r, c);
      if (raster.is_nodata(v)) {
        out << nodata_tok;
      } else {
        std::snprintf(buf, sizeof buf, "%.6g", double(v));
        out << buf;
      }
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

ValidityMask build_validity_mask(const Raster& raster) {
  raster.validate();
  ValidityMask m;
  m.rows = raster.rows;
  m.cols = raster.cols;
  m.bits.resize(raster.values.size());
  for (size_t i = 0; i < raster.values.size(); ++i)
    m.bits[i] = raster.is_nodata(raster.values[i]) ? 0 : 1;
  return m;
}

float min_valid_value(const Raster& raster) {
  float best = std::numeric_limits<float>::infinity();
  for (float v : raster.values)
    if (!raster.is_nodata(v)) best = std::min(best, v);
  if (!std::isfinite(best)) throw std::runtime_error("raster has no valid cells");
  return best;
}

InputStack stack_input_channels(const Raster& dem, float discharge, const ValidityMask& mask) {
  if (dem.rows != mask.rows || dem.cols != mask.cols)
    throw std::invalid_argument("stack_input_channels: dem/mask dimension mismatch");
  float fill = min_valid_value(dem);

  InputStack s;
  s.rows = dem.rows;
  s.cols = dem.cols;
  s.data.resize(size_t(3) * dem.rows * dem.cols);
  float* elev = s.channel(0);
  float* q = s.channel(1);
  float* m = s.channel(2);
  size_t n = size_t(dem.rows) * dem.cols;
  for (size_t i = 0; i < n; ++i) {
    elev[i] = dem.is_nodata(dem.values[i]) ? fill : dem.values[i];
    q[i] = discharge;
    m[i] = mask.bits[i] ? 1.0f : 0.0f;
  }
  return s;
}

Plane<float> reflect_pad(const Plane<float>& grid, int top, int bottom, int left, int right) {
  if (top < 0 || bottom < 0 || left < 0 || right < 0)
    throw std::invalid_argument("reflect_pad: negative pad");
  if (top >= grid.rows || bottom >= grid.rows || left >= grid.cols || right >= grid.cols)
    throw std::invalid_argument("reflect_pad: pad must be smaller than the grid dimension");

  Plane<float> out(grid.rows + top + bottom, grid.cols + left + right);
  for (int r = 0; r < out.rows; ++r) {
    int sr = r - top;
    if (sr < 0) sr = -sr;
    if (sr >= grid.rows) sr = 2 * (grid.rows - 1) - sr;
    for (int c = 0; c < out.cols; ++c) {
      int sc = c - left;
      if (sc < 0) sc = -sc;
      if (sc >= grid.cols) sc = 2 * (grid.cols - 1) - sc;
      out.at(r, c) = grid.at(sr, sc);
    }
  }
  return out;
}

Plane<float> reflect_pad_big(const Plane<float>& grid, int top, int bottom, int left, int right) {
  Plane<float> cur = grid;
  while (top > 0 || bottom > 0 || left > 0 || right > 0) {
    int t = std::min(top, cur.rows - 1);
    int b = std::min(bottom, cur.rows - 1);
    int l = std::min(left, cur.cols - 1);
    int rr = std::min(right, cur.cols - 1);
    if ((top && !t) || (bottom && !b) || (left && !l) || (right && !rr))
      throw std::invalid_argument("reflect_pad_big: cannot pad a 1-cell dimension");
    cur = reflect_pad(cur, t, b, l, rr);
    top -= t;
    bottom -= b;
    left -= l;
    right -= rr;
  }
  return cur;
}

void write_pgm(const Plane<float>& grid, const std::string& path, float lo, float hi) {
  if (!(hi > lo)) throw std::invalid_argument("write_pgm: hi must be > lo");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write pgm: " + path);
  out << "P5\n" << grid.cols << ' ' << grid.rows << "\n255\n";
  std::vector<unsigned char> row(grid.cols);
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      float t = (grid.at(r, c) - lo) / (hi - lo);
      t = std::clamp(t, 0.0f, 1.0f);
      row[c] = (unsigned char)std::floor(255.0f * t + 0.5f);
    }
    out.write(reinterpret_cast<const char*>(row.data()), row.size());
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace floodtile
