#include "mlat/renderer.hpp"

#include "mlat/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <stdexcept>

namespace mlat {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t noise_stream(const SensorSpec& sensor, int frame, int row, int col) {
  return mix(sensor.noise_seed ^ mix(std::uint64_t(frame) * 1000003ull + std::uint64_t(row) * 1009ull +
                                     std::uint64_t(col)));
}

void finish_sensor(RgbImage& img, const SensorSpec& sensor, int frame, int row, int col) {
  if (sensor.noise_sigma > 0) {
    std::mt19937_64 rng(noise_stream(sensor, frame, row, col));
    std::normal_distribution<double> noise(0.0, sensor.noise_sigma);
    for (auto& ch : img.channel)
      for (Eigen::Index i = 0; i < ch.size(); ++i) ch.data()[i] += float(noise(rng));
  }
  if (sensor.bit_depth > 0) {
    const float levels = float((1ull << sensor.bit_depth) - 1);
    for (auto& ch : img.channel) ch = (ch.max(0.0f).min(1.0f) * levels).round() / levels;
  }
}

class KernelCache {
 public:
  const DiskKernel& get(double diameter_px) {
    const long long key = std::llround(diameter_px * 1000.0);
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, make_disk_kernel(double(key) / 1000.0)).first;
    return it->second;
  }

 private:
  std::map<long long, DiskKernel> cache_;
};

}  // namespace

VisionUnit DeviceGeometry::unit(int row, int col) const {
  if (row < 0 || col < 0 || row >= rows || col >= cols) throw std::out_of_range("DeviceGeometry::unit");
  VisionUnit u;
  u.row = row;
  u.col = col;
  u.chamber_pitch_um = chamber_pitch_um;
  u.optical_center_um = {(col + 0.5) * chamber_pitch_um, (row + 0.5) * chamber_pitch_um};
  const std::size_t k = std::size_t(row * cols + col);
  u.focal_perturbation = k < focal_perturbation.size() ? focal_perturbation[k] : 0.0;
  return u;
}

std::vector<VisionUnit> DeviceGeometry::units() const {
  std::vector<VisionUnit> out;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) out.push_back(unit(r, c));
  return out;
}

ImagingConfig<double> DeviceGeometry::imaging_config(const VisionUnit& u, ImagingMode mode,
                                                     double z_um) const {
  const double v = image_distance(mode);
  ImagingConfig<double> cfg;
  cfg.object_distance_u = z_um - v;
  cfg.image_distance_v = v;
  cfg.aperture_diameter = aperture(mode);
  if (mode == ImagingMode::lens) {
    LensSpec<double> l = lens;
    l.focal_length_f *= 1.0 + u.focal_perturbation;
    cfg.element = l;
  } else {
    cfg.element = pinhole;
  }
  return cfg;
}

double blur_diameter_um(const DeviceGeometry& device, const VisionUnit& unit, ImagingMode mode,
                        double z_um) {
  const ImagingConfig<double> cfg = device.imaging_config(unit, mode, z_um);
  if (mode == ImagingMode::lens) return defocus_blur_diameter(cfg, cfg.object_distance_u);
  return pinhole_blur_diameter(device.pinhole, cfg.object_distance_u, cfg.image_distance_v);
}

double irradiance_gain(const DeviceGeometry& device, ImagingMode mode) {
  const double ratio = device.aperture(mode) / device.lens_aperture_um;
  return ratio * ratio;
}

RgbImage RawMosaic::assemble() const {
  if (tiles.empty()) throw std::invalid_argument("RawMosaic::assemble: empty mosaic");
  const Eigen::Index h = tiles[0].rows(), w = tiles[0].cols();
  RgbImage out(rows * h, cols * w);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      for (int k = 0; k < 3; ++k) out.channel[k].block(r * h, c * w, h, w) = tile(r, c).channel[k];
  return out;
}

RawMosaic RawMosaic::split(const RgbImage& frame, int rows, int cols) {
  if (rows <= 0 || cols <= 0 || frame.rows() % rows != 0 || frame.cols() % cols != 0)
    throw std::invalid_argument("RawMosaic::split: frame not divisible by layout");
  RawMosaic m;
  m.rows = rows;
  m.cols = cols;
  const Eigen::Index h = frame.rows() / rows, w = frame.cols() / cols;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      RgbImage t(h, w);
      for (int k = 0; k < 3; ++k) t.channel[k] = frame.channel[k].block(r * h, c * w, h, w);
      m.tiles.push_back(std::move(t));
    }
  return m;
}

RgbImage render_unit(const DeformedScene& scene, const DeviceGeometry& device, const VisionUnit& unit,
                     const SensorSpec& sensor, ImagingMode mode, int frame) {
  const int W = sensor.tile_width, H = sensor.tile_height;
  if (W <= 0 || H <= 0) throw std::invalid_argument("render_unit: zero-size tile");
  if (sensor.supersample <= 0 || sensor.blur_patch <= 0)
    throw std::invalid_argument("render_unit: bad sampling parameters");
  const double v = device.image_distance(mode);
  if (!(scene.nominal_z() > v)) throw std::invalid_argument("render_unit: marker plane behind the aperture");
  const double pp = sensor.pixel_pitch_um;
  const int S = sensor.supersample;
  const double half = 0.5 * unit.chamber_pitch_um;
  const Vec2 axis = unit.optical_center_um;

  const int patch = sensor.blur_patch;
  const int prows = (H + patch - 1) / patch, pcols = (W + patch - 1) / patch;
  Eigen::ArrayXXd depth_sum = Eigen::ArrayXXd::Zero(prows, pcols);
  Eigen::ArrayXXi depth_cnt = Eigen::ArrayXXi::Zero(prows, pcols);

  RgbImage sharp(H, W);
  const double inv_samples = 1.0 / double(S * S);
  for (int i = 0; i < H; ++i) {
    for (int j = 0; j < W; ++j) {
      Eigen::Vector3d acc = Eigen::Vector3d::Zero();
      for (int a = 0; a < S; ++a) {
        for (int b = 0; b < S; ++b) {
          const Vec2 s((j + (b + 0.5) / S - 0.5 * W) * pp, (i + (a + 0.5) / S - 0.5 * H) * pp);
          double z = scene.nominal_z();
          Vec2 p = axis - s * ((z - v) / v);
          if (scene.deformed()) {
            for (int it = 0; it < 3; ++it) {
              z = scene.depth(p.x(), p.y());
              p = axis - s * ((z - v) / v);
            }
          }
          if (std::abs(p.x() - axis.x()) > half || std::abs(p.y() - axis.y()) > half) continue;
          acc += scene.color(p.x(), p.y()).cast<double>();
          depth_sum(i / patch, j / patch) += z;
          depth_cnt(i / patch, j / patch) += 1;
        }
      }
      sharp.set(i, j, (acc * inv_samples).cast<float>());
    }
  }

  RgbImage out(H, W);
  std::array<ImageD, 3> prefix;
  for (int k = 0; k < 3; ++k) prefix[k] = row_prefix_sums(sharp.channel[k]);
  KernelCache kernels;
  for (int pr = 0; pr < prows; ++pr) {
    for (int pc = 0; pc < pcols; ++pc) {
      const int r0 = pr * patch, r1 = std::min(H, r0 + patch);
      const int c0 = pc * patch, c1 = std::min(W, c0 + patch);
      if (depth_cnt(pr, pc) == 0) {
        for (int k = 0; k < 3; ++k)
          out.channel[k].block(r0, c0, r1 - r0, c1 - c0) = sharp.channel[k].block(r0, c0, r1 - r0, c1 - c0);
        continue;
      }
      const double z = depth_sum(pr, pc) / depth_cnt(pr, pc);
      const DiskKernel& kernel = kernels.get(blur_diameter_um(device, unit, mode, z) / pp);
      for (int k = 0; k < 3; ++k) apply_disk_kernel(sharp.channel[k], prefix[k], kernel, r0, r1, c0, c1, out.channel[k]);
    }
  }

  const float gain = float(irradiance_gain(device, mode));
  for (auto& ch : out.channel) ch *= gain;
  finish_sensor(out, sensor, frame, unit.row, unit.col);
  return out;
}

RawMosaic render_array(const DeformedScene& scene, const DeviceGeometry& device, const SensorSpec& sensor,
                       ImagingMode mode, int frame) {
  if (device.rows <= 0 || device.cols <= 0) throw std::invalid_argument("render_array: empty layout");
  RawMosaic m;
  m.rows = device.rows;
  m.cols = device.cols;
  m.frame = frame;
  for (const VisionUnit& u : device.units()) m.tiles.push_back(render_unit(scene, device, u, sensor, mode, frame));
  return m;
}

RgbImage render_reference(const DeformedScene& scene, int width, int height, double px_per_um,
                          int supersample, int bit_depth) {
  RgbImage out(height, width);
  const int S = supersample;
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      Eigen::Vector3d acc = Eigen::Vector3d::Zero();
      for (int a = 0; a < S; ++a)
        for (int b = 0; b < S; ++b)
          acc += scene.color((c + (b + 0.5) / S) / px_per_um, (r + (a + 0.5) / S) / px_per_um).cast<double>();
      out.set(r, c, (acc / double(S * S)).cast<float>());
    }
  SensorSpec quant;
  quant.bit_depth = bit_depth;
  finish_sensor(out, quant, 0, 0, 0);
  return out;
}

FociResult foci_image(const DeviceGeometry& device, const SensorSpec& sensor, ImagingMode mode,
                      const FociSetup& setup) {
  if (mode != ImagingMode::lens) throw std::invalid_argument("foci_image: lens mode only");
  const int W = sensor.tile_width, H = sensor.tile_height;
  if (W <= 0 || H <= 0) throw std::invalid_argument("foci_image: zero-size tile");
  const double pp = sensor.pixel_pitch_um;
  const double v = setup.sensor_distance_um > 0 ? setup.sensor_distance_um : device.lens.focal_length_f;
  const Vec2 center(-v * std::tan(setup.tilt_rad.x()), -v * std::tan(setup.tilt_rad.y()));

  FociResult result;
  result.mosaic.rows = device.rows;
  result.mosaic.cols = device.cols;
  for (const VisionUnit& u : device.units()) {
    const double f = device.lens.focal_length_f * (1.0 + u.focal_perturbation);
    const double r = std::max(0.5 * device.lens_aperture_um * std::abs(v - f) / f, 1e-3 * pp);
    const double power_density = setup.gain / (std::numbers::pi * r * r);
    RgbImage tile(H, W);
    const int j0 = std::max(0, int(std::floor((center.x() - r) / pp + 0.5 * W)));
    const int j1 = std::min(W - 1, int(std::floor((center.x() + r) / pp + 0.5 * W)));
    const int i0 = std::max(0, int(std::floor((center.y() - r) / pp + 0.5 * H)));
    const int i1 = std::min(H - 1, int(std::floor((center.y() + r) / pp + 0.5 * H)));
    for (int i = i0; i <= i1; ++i)
      for (int j = j0; j <= j1; ++j) {
        const double x0 = (j - 0.5 * W) * pp - center.x();
        const double y0 = (i - 0.5 * H) * pp - center.y();
        const float val = float(power_density * circle_rect_area(r, x0, x0 + pp, y0, y0 + pp));
        tile.set(i, j, Color::Constant(val));
      }
    finish_sensor(tile, sensor, 0, u.row, u.col);
    result.peaks.push_back(double(tile.channel[0].maxCoeff()));
    result.mosaic.tiles.push_back(std::move(tile));
  }
  return result;
}

}  // namespace mlat
