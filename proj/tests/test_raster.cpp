#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "floodtile/raster.hpp"
#include "helpers.hpp"

using namespace floodtile;
using testutil::small_raster;
using testutil::temp_path;

namespace {

std::string write_text(const std::string& name, const std::string& body) {
  std::string path = temp_path(name);
  std::ofstream out(path);
  out << body;
  return path;
}

constexpr const char* kTinyGrid =
    "ncols 2\nnrows 2\nxllcorner 10.5\nyllcorner -3.25\ncellsize 1\nNODATA_value -9999\n"
    "1 2\n3 4\n";

}  // namespace

TEST_CASE("ascii grid: 2x2 round trip") {
  Raster r = read_ascii_grid(write_text("tiny.asc", kTinyGrid));
  CHECK(r.rows == 2);
  CHECK(r.cols == 2);
  CHECK(r.values == std::vector<float>{1, 2, 3, 4});
  CHECK(r.origin_x == doctest::Approx(10.5));
  CHECK(r.origin_y == doctest::Approx(-3.25));

  std::string out = temp_path("tiny_out.asc");
  write_ascii_grid(r, out);
  Raster back = read_ascii_grid(out);
  CHECK(back.rows == r.rows);
  CHECK(back.cols == r.cols);
  CHECK(back.cell_size == r.cell_size);
  CHECK(back.origin_x == r.origin_x);
  CHECK(back.origin_y == r.origin_y);
  CHECK(back.values == r.values);
}

TEST_CASE("ascii grid: value count mismatch") {
  auto path = write_text("short.asc",
                         "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n"
                         "NODATA_value -9999\n1 2 3\n");
  CHECK_THROWS_WITH_AS(read_ascii_grid(path), doctest::Contains("value count mismatch"),
                       std::runtime_error);
}

TEST_CASE("ascii grid: non-numeric token and malformed header") {
  auto bad_tok = write_text("badtok.asc",
                            "ncols 1\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n"
                            "NODATA_value -9999\nfoo\n");
  CHECK_THROWS_WITH_AS(read_ascii_grid(bad_tok), doctest::Contains("non-numeric"),
                       std::runtime_error);
  auto bad_hdr = write_text("badhdr.asc", "rows 2\nncols 2\n");
  CHECK_THROWS_AS(read_ascii_grid(bad_hdr), std::runtime_error);
}

TEST_CASE("ascii grid: nodata survives the trip") {
  Raster r = small_raster(2, 2, {1.0f, -9999.0f, 3.0f, 4.0f});
  std::string path = temp_path("nodata.asc");
  write_ascii_grid(r, path);
  Raster back = read_ascii_grid(path);
  CHECK(back.is_nodata(back.values[1]));
  ValidityMask m = build_validity_mask(back);
  CHECK(m.bits == std::vector<uint8_t>{1, 0, 1, 1});
}

TEST_CASE("ascii grid: all-nodata body and empty raster") {
  Raster r = small_raster(1, 2, {-9999.0f, -9999.0f});
  std::string path = temp_path("allnodata.asc");
  write_ascii_grid(r, path);
  std::ifstream in(path);
  std::string line;
  for (int i = 0; i < 7 && std::getline(in, line); ++i) {}
  CHECK(line == "-9999 -9999");

  Raster empty;
  CHECK_THROWS_WITH_AS(write_ascii_grid(empty, temp_path("empty.asc")),
                       doctest::Contains("empty raster"), std::invalid_argument);
}

TEST_CASE("ascii grid: values keep 6 significant digits") {
  Raster r = small_raster(1, 3, {183.257f, 0.0123456f, -22.000111f});
  std::string path = temp_path("sig.asc");
  write_ascii_grid(r, path);
  Raster back = read_ascii_grid(path);
  for (int i = 0; i < 3; ++i)
    CHECK(testutil::rel_err(back.values[i], r.values[i]) < 1e-5);
}

TEST_CASE("validity mask duality") {
  Raster r = small_raster(2, 3, {1, -9999, 3, -9999, 5, 6});
  ValidityMask m = build_validity_mask(r);
  for (size_t i = 0; i < r.values.size(); ++i)
    CHECK(bool(m.bits[i]) != r.is_nodata(r.values[i]));
  CHECK(m.count_true() == 4);

  Raster all_valid = small_raster(2, 2, {1, 2, 3, 4});
  CHECK(build_validity_mask(all_valid).count_true() == 4);
  Raster none = small_raster(2, 2, {-9999, -9999, -9999, -9999});
  CHECK(build_validity_mask(none).count_true() == 0);
}

TEST_CASE("stack_input_channels: broadcast, mask channel, nodata fill") {
  Raster dem = small_raster(2, 2, {5, -9999, 7, 9});
  ValidityMask mask = build_validity_mask(dem);
  InputStack s = stack_input_channels(dem, 65.0f, mask);

  for (int i = 0; i < 4; ++i) CHECK(s.channel(1)[i] == 65.0f);
  CHECK(s.channel(2)[0] == 1.0f);
  CHECK(s.channel(2)[1] == 0.0f);
  // fill policy: minimum valid elevation
  CHECK(s.channel(0)[1] == 5.0f);

  Raster all = small_raster(2, 2, {1, 2, 3, 4});
  ValidityMask full = build_validity_mask(all);
  InputStack s2 = stack_input_channels(all, 1.0f, full);
  for (int i = 0; i < 4; ++i) CHECK(s2.channel(2)[i] == 1.0f);

  ValidityMask wrong;
  wrong.rows = 1;
  wrong.cols = 2;
  wrong.bits = {1, 1};
  CHECK_THROWS_AS(stack_input_channels(all, 1.0f, wrong), std::invalid_argument);
}

TEST_CASE("reflect_pad: 1d row and identities") {
  Plane<float> row(1, 3);
  row.v = {1, 2, 3};
  Plane<float> padded = reflect_pad(row, 0, 0, 1, 1);
  CHECK(padded.v == std::vector<float>{2, 1, 2, 3, 2});

  Plane<float> same = reflect_pad(row, 0, 0, 0, 0);
  CHECK(same.v == row.v);
  CHECK_THROWS_AS(reflect_pad(row, 1, 0, 0, 0), std::invalid_argument);  // pad >= dim
}

TEST_CASE("reflect_pad: 2x2 mirrored corners") {
  Plane<float> g(2, 2);
  g.v = {1, 2, 3, 4};
  Plane<float> p = reflect_pad(g, 1, 1, 1, 1);
  REQUIRE(p.rows == 4);
  REQUIRE(p.cols == 4);
  // hand-enumerated mirror indices
  CHECK(p.v == std::vector<float>{4, 3, 4, 3, 2, 1, 2, 1, 4, 3, 4, 3, 2, 1, 2, 1});
  CHECK(p.at(0, 0) == 4);
  CHECK(p.at(0, 3) == 3);
  CHECK(p.at(3, 0) == 2);
  CHECK(p.at(3, 3) == 1);
  // interior equals the input
  CHECK(p.at(1, 1) == 1);
  CHECK(p.at(1, 2) == 2);
  CHECK(p.at(2, 1) == 3);
  CHECK(p.at(2, 2) == 4);
}

TEST_CASE("reflect_pad_big exceeds the dimension") {
  Plane<float> g(2, 2);
  g.v = {1, 2, 3, 4};
  Plane<float> p = reflect_pad_big(g, 0, 5, 0, 5);
  CHECK(p.rows == 7);
  CHECK(p.cols == 7);
  for (int r = 0; r < p.rows; ++r)
    for (int c = 0; c < p.cols; ++c) CHECK(p.at(r, c) >= 1);
}

TEST_CASE("pgm map: endpoints and midpoint") {
  Plane<float> g(1, 3);
  g.v = {0.0f, 0.5f, 1.0f};
  std::string path = temp_path("map.pgm");
  write_pgm(g, path, 0.0f, 1.0f);
  std::ifstream in(path, std::ios::binary);
  std::string magic;
  int w, h, maxv;
  in >> magic >> w >> h >> maxv;
  in.get();
  CHECK(magic == "P5");
  CHECK(w == 3);
  CHECK(maxv == 255);
  unsigned char px[3];
  in.read(reinterpret_cast<char*>(px), 3);
  CHECK(px[0] == 0);
  CHECK(px[1] == 128);  // round half up
  CHECK(px[2] == 255);
  CHECK_THROWS_AS(write_pgm(g, path, 1.0f, 1.0f), std::invalid_argument);
}
