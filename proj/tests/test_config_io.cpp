#include "mlat/config.hpp"
#include "mlat/io.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mlat;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "mlat_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void put(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST(Config, DefaultsFromEmptyDocument) {
  const auto c = parse_config(Json::object());
  EXPECT_EQ(c.seed, 1u);
  EXPECT_EQ(c.device.rows, 3);
  EXPECT_EQ(c.device.cols, 4);
  EXPECT_FALSE(c.device.chamber_pitch_um.has_value());
  EXPECT_EQ(c.sensor.tile_width, 256);
  EXPECT_EQ(c.pipeline.grid_cols * c.pipeline.grid_rows, 208);
}

TEST(Config, ParsesValues) {
  const auto c = parse_config(Json::parse(R"({
    "experiment": "sweep-z", "seed": 9,
    "device": {"rows": 2, "chamber_pitch_um": 1500},
    "sweep_z": {"steps": 5},
    "render": {"indenter": {"shape": "glyph", "glyph": "4"}}
  })"));
  EXPECT_EQ(c.experiment, "sweep-z");
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.device.rows, 2);
  EXPECT_EQ(*c.device.chamber_pitch_um, 1500.0);
  EXPECT_EQ(c.sweep_z.steps, 5);
  ASSERT_TRUE(c.render.indenter.has_value());
  EXPECT_EQ(c.render.indenter->glyph, "4");
  const auto a = parse_config(Json::parse(R"({"device": {"chamber_pitch_um": "auto"}})"));
  EXPECT_FALSE(a.device.chamber_pitch_um.has_value());
}

TEST(Config, RejectsBadInput) {
  const char* bad[] = {
      R"({"bogus": 1})",
      R"({"device": {"rowz": 3}})",
      R"({"device": {"rows": "3"}})",
      R"({"device": {"rows": 2.5}})",
      R"({"seed": -1})",
      R"({"experiment": "fly"})",
      R"({"device": {"rows": 0}})",
      R"({"sensor": {"bit_depth": 12}})",
      R"({"device": {"sag_height_um": 400}})",
      R"({"pipeline": {"area_method": "mesh"}})",
      R"({"depth_demo": {"glyphs": "0x"}})",
      R"({"sweep_z": {"dot_offset_um": [1]}})",
      R"([1, 2])",
  };
  for (const char* text : bad) EXPECT_THROW(parse_config(Json::parse(text)), ConfigError) << text;
}

TEST(Config, IncludesMergeLaterWins) {
  put(scratch("base.json"), R"({"seed": 3, "device": {"rows": 2, "cols": 5}})");
  put(scratch("mid.json"), R"({"include": "base.json", "device": {"cols": 6}})");
  put(scratch("top.json"), R"({"include": ["mid.json"], "experiment": "metrology", "device": {"rows": 1}})");
  const auto c = load_config(scratch("top.json"));
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.device.rows, 1);
  EXPECT_EQ(c.device.cols, 6);
  EXPECT_EQ(c.experiment, "metrology");

  put(scratch("loop.json"), R"({"include": "loop.json"})");
  EXPECT_THROW(load_config(scratch("loop.json")), ConfigError);
  put(scratch("broken.json"), "{ not json");
  EXPECT_THROW(load_config(scratch("broken.json")), ConfigError);
  EXPECT_THROW(load_config(scratch("missing.json")), ConfigError);
}

TEST(Config, CanonicalJsonAndHash) {
  const auto c = parse_config(Json::parse(R"({"seed": 4, "device": {"chamber_pitch_um": 1200}})"));
  const auto back = parse_config(c.to_json());
  EXPECT_EQ(back.hash(), c.hash());
  EXPECT_EQ(back.to_json(), c.to_json());
  auto d = c;
  d.seed = 5;
  EXPECT_NE(d.hash(), c.hash());
  EXPECT_EQ(c.hash(), fnv1a64(c.to_json().dump()));
}

TEST(Config, DerivedGeometry) {
  const auto c = parse_config(Json::object());
  const auto g = c.device_geometry(c.layer.nominal_z_mm * 1000);
  EXPECT_NEAR(g.lens.focal_length_f, 1186.99, 0.01);
  EXPECT_NEAR(g.lens_image_distance_um, 2019.2, 0.1);
  // automatic pitch: cropped tile width in layer micrometres at the nominal plane
  const double m = g.magnification_at(ImagingMode::lens, 5000);
  EXPECT_NEAR(g.chamber_pitch_um, (256 - 16) * 3.0 / m, 1e-6);
  const auto a = c.area_params();
  EXPECT_EQ(a.tile_width, 240);
  EXPECT_EQ(a.grid_cols, 16);
}

TEST(Fnv, KnownVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cull);
  EXPECT_EQ(hash_hex(0xabcull), "0000000000000abc");
}

TEST(Ppm, RoundTrip8And16) {
  RgbImage img(5, 7);
  for (int k = 0; k < 3; ++k) img.channel[k] = oracle::texture_image(5, 7, k, 0);
  img.channel[0](0, 0) = 1.5f;  // clamped
  write_ppm(scratch("a8.ppm"), img, 8);
  write_ppm(scratch("a16.ppm"), img, 16);
  const RgbImage b8 = read_ppm(scratch("a8.ppm")), b16 = read_ppm(scratch("a16.ppm"));
  EXPECT_EQ(b8.channel[0](0, 0), 1.0f);
  for (int k = 0; k < 3; ++k)
    for (int r = 0; r < 5; ++r)
      for (int c = (k == 0 && r == 0) ? 1 : 0; c < 7; ++c) {
        EXPECT_NEAR(b8.channel[k](r, c), img.channel[k](r, c), 0.5 / 255 + 1e-6);
        EXPECT_NEAR(b16.channel[k](r, c), img.channel[k](r, c), 0.5 / 65535 + 1e-6);
      }
  EXPECT_EQ(fs::file_size(scratch("a8.ppm")), std::string("P6\n7 5\n255\n").size() + 5 * 7 * 3);
  EXPECT_THROW(write_ppm(scratch("bad.ppm"), img, 12), std::invalid_argument);
  EXPECT_THROW(read_ppm(scratch("nope.ppm")), std::runtime_error);
}

TEST(Pgm16, RoundTripScale) {
  ImageF d(3, 4);
  d << 0, 1.5, 100, 250, 3, 7.25, 0.5, 12, 400, 399.5, 1, 2;
  write_pgm16(scratch("d.pgm"), d, 0.25);
  const ImageF back = read_pgm16(scratch("d.pgm"), 0.25);
  EXPECT_TRUE(back.isApprox(d, 1e-6));
  write_ppm(scratch("c.ppm"), from_gray(d / 400), 8);
  EXPECT_THROW(read_pgm16(scratch("c.ppm"), 1.0), std::runtime_error);
}

TEST(Csv, MetadataHeaderAndRows) {
  {
    CsvWriter csv(scratch("t.csv"), {{"seed", "7"}, {"mode", "lens"}}, {"z_mm", "area_px"});
    csv.row({4.8, 1234.5}).row({std::nan(""), 1.0 / 3.0});
    EXPECT_THROW(csv.row({1.0}), std::invalid_argument);
  }
  EXPECT_EQ(slurp(scratch("t.csv")), "# seed: 7\n# mode: lens\nz_mm,area_px\n4.8,1234.5\nnan,0.3333333333\n");
}
