#pragma once

#include "mlat/io.hpp"
#include "mlat/pipeline.hpp"
#include "mlat/renderer.hpp"
#include "mlat/scene.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mlat {

/// Invalid or unreadable experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DeviceConfig {
  int rows = 3;
  int cols = 4;
  std::optional<double> chamber_pitch_um;  // empty: fit the cropped tile FOV
  double sag_height_um = 120;
  double sag_diameter_um = 640;
  double refractive_index = 1.41;
  double lens_aperture_um = 200;
  double object_distance_um = 2880;          // lens-to-marker at focus
  std::optional<double> lens_image_distance_um;  // empty: thin-lens conjugate
  double pinhole_diameter_um = 150;
  double pinhole_image_distance_um = 1570;
  double focal_tolerance = 0;  // per-unit relative focal error, uniform +-
};

struct SensorConfig {
  double pixel_pitch_um = 3;
  int tile_width = 256;
  int tile_height = 256;
  int bit_depth = 8;
  double noise_sigma = 0.004;
  int supersample = 4;
  int crop_px = 8;
};

struct PatternConfig {
  double cell_um = 30;
  std::optional<std::uint64_t> seed;  // defaults to the run seed
};

struct LayerConfig {
  int grid_cols = 256;
  int grid_rows = 208;
  double decay_exponent = 2.0;
  double k_n = 1e-6;
  double k_t = 1e-6;
  double max_depth_mm = 0.8;
  double nominal_z_mm = 5.0;  // undeformed marker plane to sensor
};

struct PipelineConfig {
  int grid_cols = 16;
  int grid_rows = 13;
  int search_radius = 32;
  std::string area_method = "quad";
  double variance_floor = 1e-6;
  double depth_noise_floor = 0.005;
};

struct SweepZConfig {
  double z_start_mm = 4.8;
  double z_stop_mm = 5.0;
  int steps = 11;
  double dot_diameter_um = 500;
  std::vector<double> dot_offset_um{100, 0};
};

struct SweepXYConfig {
  std::vector<double> heights_mm{4.8, 4.9, 5.0};
  std::vector<double> offsets_um{-100, -50, 0, 50, 100};
  double dot_diameter_um = 300;
};

struct IndentNormalConfig {
  double radius_um = 2000;
  std::vector<double> depths_mm{0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<std::vector<double>> positions_um{{-400, 0}, {0, 0}, {400, 0}};  // from the layer centre
  double held_out_depth_mm = 0.25;
};

struct IndentTangentialConfig {
  double radius_um = 2000;
  std::vector<double> depths_mm{0.1, 0.3, 0.5};
  std::vector<double> offsets_um{0, 25, 50, 75, 100};
  double direction_deg = 0;
};

struct DepthDemoConfig {
  std::string glyphs = "0124";
  double glyph_cell_um = 350;
  double depth_mm = 0.4;
  double calibration_depth_mm = 0.3;
  std::vector<double> two_stage_mm{0.4, 0.5};
  int grid_cols = 48;
  int grid_rows = 39;
  double footprint_fraction = 0.5;
};

struct MetrologyConfig {
  std::vector<double> edge_z_mm{5.3, 5.5, 5.7};
  double edge_angle_deg = 5;
  int roi_px = 128;
  double criterion = 0.2;
  int foci_seeds = 20;
  double foci_tolerance = 0.03;
  double foci_noise_sigma = 0.01;
};

struct IndenterConfig {
  std::string shape = "sphere";
  double radius_um = 2000;
  double width_um = 500;
  double gap_um = 600;
  double arc_deg = 60;
  std::string glyph = "1";
  double glyph_cell_um = 300;
  double x_um = 0;  // from the layer centre
  double y_um = 0;
  double depth_mm = 0;
  double tx_um = 0;
  double ty_um = 0;
};

struct RenderConfig {
  double z_mm = 4.9;
  std::optional<IndenterConfig> indenter;
  int bit_depth = 8;  // PPM output depth
};

struct StitchConfig {
  std::string input;  // raw mosaic PPM
};

struct ExperimentConfig {
  std::string experiment;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  DeviceConfig device;
  SensorConfig sensor;
  PatternConfig pattern;
  LayerConfig layer;
  PipelineConfig pipeline;
  SweepZConfig sweep_z;
  SweepXYConfig sweep_xy;
  IndentNormalConfig indent_normal;
  IndentTangentialConfig indent_tangential;
  DepthDemoConfig depth_demo;
  MetrologyConfig metrology;
  RenderConfig render;
  StitchConfig stitch;

  /// Canonical JSON of every field, defaults included.
  Json to_json() const;
  /// FNV-1a of the canonical JSON.
  std::uint64_t hash() const;

  DeviceGeometry device_geometry(double nominal_z_um) const;
  SensorSpec sensor_spec() const;
  TouchLayer touch_layer(const DeviceGeometry& device) const;
  FlowParams flow_params() const;
  AreaSegmentation area_params() const;
};

/// Parses and validates a config document. Throws ConfigError.
ExperimentConfig parse_config(const Json& doc);

/// Reads a config file, resolving `include` entries relative to it.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Merged JSON of a file and its includes (later keys win).
Json resolve_includes(const std::filesystem::path& path);

}  // namespace mlat
