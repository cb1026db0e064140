#pragma once

#include "mlat/config.hpp"
#include "mlat/metrology.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace mlat {

/// Failure inside an experiment run (lost blob, no MTF crossing, ...).
class PipelineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Check {
  std::string name;
  double value = 0;
  double limit = 0;
  std::string relation;  // "<=", ">=", "<", ">", "=="
  bool passed = false;
};

struct RunOptions {
  std::filesystem::path out_dir;  // empty: no files written
  std::vector<ImagingMode> modes{ImagingMode::lens, ImagingMode::pinhole};
};

struct RunReport {
  std::string experiment;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  Json metrics = Json::object();
  std::vector<Check> checks;

  bool passed() const;
  Json to_json() const;
  void check(const std::string& name, double value, const std::string& relation, double limit);
};

struct SweepZSeries {
  ImagingMode mode = ImagingMode::lens;
  std::vector<double> z_mm;
  std::vector<double> area_px;
  std::vector<double> radial_px;  // centroid distance from the tile centre
  LinearFit area_fit;
  double analytic_slope = 0;      // px^2 per mm from the magnification law
};

struct SweepZResult {
  std::vector<SweepZSeries> series;
  double gradient_ratio = 0;           // lens / pinhole, measured
  double analytic_gradient_ratio = 0;  // lens / pinhole, magnification law
  RunReport report;
};

struct SweepXYLine {
  ImagingMode mode = ImagingMode::lens;
  double height_mm = 0;
  std::vector<double> offset_um;
  std::vector<double> shift_px;  // centroid x relative to the zero offset
  LinearFit fit;                 // shift_px vs offset_um
  double analytic_gradient = 0;  // m / pixel pitch
};

struct SweepXYResult {
  std::vector<SweepXYLine> lines;
  RunReport report;
};

struct IndentFrame {
  int frame = 0;
  int position = -1;  // index into the position list, -1 for held-out or reference frames
  double x_um = 0, y_um = 0;
  double depth_mm = 0;
  double offset_um = 0;
  double af = 0, tf = 0;
  double f_n = 0, f_t = 0;
  double flow_magnitude_sum = 0;  // sum of per-patch flow vector norms
};

struct IndentNormalResult {
  std::vector<IndentFrame> frames;
  LinearFit pooled;
  std::vector<LinearFit> per_position;
  IndentFrame held_out;
  double held_out_prediction = 0;
  CalibrationModel model;
  RunReport report;
};

struct IndentTangentialResult {
  std::vector<IndentFrame> frames;
  LinearFit pooled;
  bool depth_ordered = false;
  RunReport report;
};

struct GlyphDepth {
  char glyph = '0';
  double depth_mm = 0;
  double iou = 0;
  double recovered_um = 0;  // median reconstructed depth inside the footprint
};

struct DepthDemoResult {
  double scale = 1;
  std::vector<GlyphDepth> glyphs;
  double stage_af[2] = {0, 0};
  double stage_depth_um[2] = {0, 0};
  double recovered_step_um = 0;
  double true_step_um = 0;
  double unpressed_rms_um = 0;
  RunReport report;
};

struct MetrologyLevel {
  double z_mm = 0;
  double blur_px = 0;
  MTFCurve curve;
  double resolution_lp_per_mm = 0;
  double bar_contrast = 0;
  double kernel_max_error = 0;  // vs the renderer's kernel transfer function
};

struct MetrologyResult {
  std::vector<MetrologyLevel> levels;
  std::vector<double> foci_uniformity;
  double foci_pass_fraction = 0;
  RunReport report;
};

/// Single-frame imaging rig shared by the experiments.
class Rig {
 public:
  Rig(const ExperimentConfig& config, double z_um, ImagingMode mode);

  const DeviceGeometry& device() const { return device_; }
  const SensorSpec& sensor() const { return sensor_; }
  const TouchLayer& layer() const { return layer_; }
  ImagingMode mode() const { return mode_; }
  double z_um() const { return z_um_; }
  int crop_px() const { return crop_; }
  /// Stitched pixels per layer micrometre.
  double px_per_um() const;
  Vec2 layer_center() const { return {0.5 * layer_.width_um, 0.5 * layer_.height_um}; }

  RawMosaic mosaic(const PatternFn& pattern, const DeformationField* field, int frame) const;
  RgbImage stitched(const PatternFn& pattern, const DeformationField* field, int frame) const;

 private:
  DeviceGeometry device_;
  SensorSpec sensor_;
  TouchLayer layer_;
  ImagingMode mode_;
  double z_um_;
  int crop_;
};

PatternFn texture_pattern(const ExperimentConfig& config, const Rig& rig);

SweepZResult run_sweep_z(const ExperimentConfig& config, const RunOptions& options = {});
SweepXYResult run_sweep_xy(const ExperimentConfig& config, const RunOptions& options = {});
IndentNormalResult run_indent_normal(const ExperimentConfig& config, const RunOptions& options = {});
IndentTangentialResult run_indent_tangential(const ExperimentConfig& config, const RunOptions& options = {});
DepthDemoResult run_depth_demo(const ExperimentConfig& config, const RunOptions& options = {});
MetrologyResult run_metrology(const ExperimentConfig& config, const RunOptions& options = {});
RunReport run_render(const ExperimentConfig& config, const RunOptions& options = {});
RunReport run_stitch(const ExperimentConfig& config, const RunOptions& options = {});

/// Dispatches on config.experiment and writes summary.json when an output
/// directory is set.
RunReport run_experiment(const ExperimentConfig& config, const RunOptions& options);

Indenter make_indenter(const IndenterConfig& c, const Vec2& layer_center);

}  // namespace mlat
