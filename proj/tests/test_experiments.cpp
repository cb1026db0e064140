#include "mlat/experiments.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mlat;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / "mlat_exp_tests" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

ExperimentConfig small_config(const std::string& experiment) {
  ExperimentConfig c = parse_config(Json::object());
  c.experiment = experiment;
  c.device.rows = 2;
  c.device.cols = 2;
  c.sensor.tile_width = c.sensor.tile_height = 96;
  c.sensor.supersample = 2;
  return c;
}

}  // namespace

TEST(RunReport, ChecksAndJson) {
  RunReport r;
  r.experiment = "x";
  r.config_hash = 0x1f;
  r.check("a", 1.0, "<=", 2.0);
  r.check("b", 3.0, ">", 2.0);
  EXPECT_TRUE(r.passed());
  r.check("c", std::nan(""), ">=", 0.5);
  EXPECT_FALSE(r.passed());
  EXPECT_THROW(r.check("d", 1, "~", 1), std::invalid_argument);
  const Json j = r.to_json();
  EXPECT_EQ(j["config_hash"], "000000000000001f");
  EXPECT_EQ(j["checks"].size(), 3u);
  EXPECT_TRUE(j["checks"][2]["value"].is_null());
  EXPECT_FALSE(j["passed"].get<bool>());
}

TEST(Rig, ScaleMatchesMagnification) {
  const ExperimentConfig c = parse_config(Json::object());
  const Rig rig(c, 5000, ImagingMode::lens);
  const double m = rig.device().magnification_at(ImagingMode::lens, 5000);
  EXPECT_NEAR(rig.px_per_um(), m / 3.0, 1e-12);
  EXPECT_NEAR(rig.layer().width_um, rig.device().width_um(), 1e-9);
  EXPECT_NEAR(rig.layer_center().x(), 0.5 * rig.device().width_um(), 1e-9);
  // at the nominal plane the cropped tiles tile the layer exactly
  EXPECT_NEAR(rig.device().chamber_pitch_um * rig.px_per_um(), 240.0, 1e-9);
}

TEST(MakeIndenter, OffsetsFromCentre) {
  IndenterConfig ic;
  ic.shape = "corner";
  ic.x_um = 100;
  ic.depth_mm = 0.3;
  const Indenter ind = make_indenter(ic, {2000, 1500});
  EXPECT_EQ(ind.shape, IndenterShape::corner);
  EXPECT_EQ(ind.x_um, 2100);
  EXPECT_EQ(ind.y_um, 1500);
  EXPECT_NEAR(ind.depth_um, 300, 1e-9);
  ic.shape = "cube";
  EXPECT_THROW(make_indenter(ic, {0, 0}), ConfigError);
}

TEST(Render, WritesDeterministicFiles) {
  ExperimentConfig c = small_config("render");
  IndenterConfig ic;
  ic.depth_mm = 0.2;
  c.render.indenter = ic;
  const fs::path a = fresh_dir("render_a"), b = fresh_dir("render_b");
  const RunReport ra = run_experiment(c, {a, {ImagingMode::lens}});
  run_experiment(c, {b, {ImagingMode::lens}});
  for (const char* f : {"mosaic_00000.ppm", "stitched_00000.ppm", "unit_1_1.ppm", "summary.json"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  EXPECT_GT(ra.metrics["normal_force_mN"].get<double>(), 0.0);
  EXPECT_EQ(ra.metrics["lens"]["stitched_size"], Json({160, 160}));

  // both modes go to subdirectories
  const fs::path both = fresh_dir("render_both");
  run_experiment(c, {both, {ImagingMode::lens, ImagingMode::pinhole}});
  EXPECT_TRUE(fs::exists(both / "lens" / "stitched_00000.ppm"));
  EXPECT_TRUE(fs::exists(both / "pinhole" / "stitched_00000.ppm"));
}

TEST(Stitch, RoundTripsRenderedMosaic) {
  ExperimentConfig c = small_config("render");
  const fs::path dir = fresh_dir("stitch");
  run_experiment(c, {dir, {ImagingMode::lens}});
  ExperimentConfig s = small_config("stitch");
  s.stitch.input = (dir / "mosaic_00000.ppm").string();
  const fs::path out = fresh_dir("stitch_out");
  run_experiment(s, {out, {ImagingMode::lens}});
  EXPECT_EQ(slurp(out / "stitched_00000.ppm"), slurp(dir / "stitched_00000.ppm"));

  s.stitch.input = (dir / "absent.ppm").string();
  EXPECT_THROW(run_stitch(s, {}), PipelineError);
  s.stitch.input.clear();
  EXPECT_THROW(run_stitch(s, {}), ConfigError);
}

TEST(SweepZ, LensMeetsMagnificationLaw) {
  ExperimentConfig c = parse_config(Json::object());
  c.experiment = "sweep-z";
  const SweepZResult r = run_sweep_z(c);
  ASSERT_EQ(r.series.size(), 2u);
  const auto& lens = r.series[0];
  EXPECT_EQ(lens.mode, ImagingMode::lens);
  EXPECT_LT(lens.area_fit.slope, 0);  // farther plane, smaller image
  EXPECT_GE(lens.area_fit.r_squared, 0.95);
  EXPECT_LT(r.series[1].area_fit.r_squared, lens.area_fit.r_squared);
  for (const auto& ch : r.report.checks) EXPECT_TRUE(ch.passed) << ch.name << " " << ch.value;
}

TEST(RunExperiment, UnknownNameIsConfigError) {
  ExperimentConfig c = parse_config(Json::object());
  c.experiment = "nothing";
  EXPECT_THROW(run_experiment(c, {}), ConfigError);
}
