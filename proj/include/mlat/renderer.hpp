#pragma once

#include "mlat/image.hpp"
#include "mlat/optics.hpp"
#include "mlat/scene.hpp"

#include <cstdint>
#include <vector>

namespace mlat {

enum class ImagingMode { lens, pinhole };

struct VisionUnit {
  int row = 0;
  int col = 0;
  Vec2 optical_center_um{0, 0};
  double chamber_pitch_um = 0;
  double focal_perturbation = 0;  // relative focal-length error
};

/// Array geometry shared by the lens and pinhole variants of the device.
/// Distances along the optical axis are measured from the sensor plane.
struct DeviceGeometry {
  int rows = 3;
  int cols = 4;
  double chamber_pitch_um = 0;
  LensSpec<double> lens = LensSpec<double>::from_sag(120.0, 640.0, 1.41);
  double lens_aperture_um = 200;
  double lens_image_distance_um = 0;  // lens-to-sensor
  PinholeSpec<double> pinhole{150.0};
  double pinhole_image_distance_um = 1570;
  double nominal_z_um = 0;  // undeformed marker plane to sensor
  std::vector<double> focal_perturbation;  // row-major, empty means all zero

  double image_distance(ImagingMode mode) const {
    return mode == ImagingMode::lens ? lens_image_distance_um : pinhole_image_distance_um;
  }
  double aperture(ImagingMode mode) const {
    return mode == ImagingMode::lens ? lens_aperture_um : pinhole.aperture_diameter;
  }
  /// Chief-ray magnification for a marker plane at distance z from the sensor.
  double magnification_at(ImagingMode mode, double z_um) const {
    const double v = image_distance(mode);
    return mlat::magnification(z_um - v, v);
  }
  double width_um() const { return cols * chamber_pitch_um; }
  double height_um() const { return rows * chamber_pitch_um; }

  VisionUnit unit(int row, int col) const;
  std::vector<VisionUnit> units() const;

  /// Sensor-side configuration of one unit for defocus evaluation.
  ImagingConfig<double> imaging_config(const VisionUnit& unit, ImagingMode mode, double z_um) const;
};

struct SensorSpec {
  double pixel_pitch_um = 3.0;
  int tile_width = 256;
  int tile_height = 256;
  int bit_depth = 8;
  double noise_sigma = 0.0;
  std::uint64_t noise_seed = 0;
  int supersample = 4;
  int blur_patch = 16;
};

struct RawMosaic {
  int rows = 0;
  int cols = 0;
  std::vector<RgbImage> tiles;  // row-major
  int frame = 0;
  std::uint64_t config_hash = 0;

  const RgbImage& tile(int r, int c) const { return tiles.at(std::size_t(r * cols + c)); }
  /// Raw sensor frame: tiles placed at their positions without rotation.
  RgbImage assemble() const;
  static RawMosaic split(const RgbImage& frame, int rows, int cols);
};

/// What one unit's sensor tile records. Throws std::invalid_argument for a
/// zero-size tile.
RgbImage render_unit(const DeformedScene& scene, const DeviceGeometry& device, const VisionUnit& unit,
                     const SensorSpec& sensor, ImagingMode mode, int frame = 0);

RawMosaic render_array(const DeformedScene& scene, const DeviceGeometry& device,
                       const SensorSpec& sensor, ImagingMode mode, int frame = 0);

/// Orthographic rendering of the undeformed pattern at the stitched-image
/// scale: pixel (r, c) sees layer point ((c + 0.5) / s, (r + 0.5) / s).
RgbImage render_reference(const DeformedScene& scene, int width, int height, double px_per_um,
                          int supersample, int bit_depth);

struct FociSetup {
  double sensor_distance_um = 0;  // 0 selects the nominal focal length
  Vec2 tilt_rad{0, 0};           // collimated beam direction
  double gain = 2.0;             // pixel value per unit spot power
};

struct FociResult {
  RawMosaic mosaic;
  std::vector<double> peaks;  // row-major per-unit peak pixel value
};

/// Focal spots of every unit under collimated illumination. Lens mode only.
FociResult foci_image(const DeviceGeometry& device, const SensorSpec& sensor, ImagingMode mode,
                      const FociSetup& setup = {});

/// Blur diameter on the sensor, in micrometres, for a marker plane at z.
double blur_diameter_um(const DeviceGeometry& device, const VisionUnit& unit, ImagingMode mode,
                        double z_um);

/// Relative irradiance of a mode (aperture area over the lens aperture area).
double irradiance_gain(const DeviceGeometry& device, ImagingMode mode);

}  // namespace mlat
