#pragma once

#include "mlat/image.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace mlat {

struct MTFSample {
  double freq_lp_per_mm = 0;
  double modulation = 0;
};

struct MTFCurve {
  std::vector<MTFSample> samples;
  double pixel_pitch_um = 1.0;

  /// Frequency of sample k in cycles per pixel.
  double cycles_per_pixel(std::size_t k) const { return samples[k].freq_lp_per_mm * pixel_pitch_um / 1000.0; }
};

struct Roi {
  int row = 0;
  int col = 0;
  int height = 0;
  int width = 0;
};

struct SlantedEdgeOptions {
  int oversample = 4;
  double pixel_pitch_um = 1.0;
  double max_fit_rms_px = 0.5;
};

/// Slanted-edge MTF of a single near-vertical edge (near-horizontal when the
/// hint exceeds 45 degrees). Throws std::runtime_error when no edge is found
/// and std::invalid_argument for ROIs smaller than 32x32.
MTFCurve slanted_edge_mtf(const ImageF& image, const Roi& roi, double edge_angle_hint_deg,
                          const SlantedEdgeOptions& options = {});

/// First downward crossing of `criterion`, linearly interpolated (lp/mm).
double resolution_at_criterion(const MTFCurve& curve, double criterion);

enum class BarAxis { x, y };  // direction along which the bars alternate

/// Michelson contrast of a three-bar target of `cycles_per_pixel` centred
/// in the ROI (bright bars on a dark ground).
double bar_contrast(const ImageF& image, const Roi& roi, double cycles_per_pixel, BarAxis axis);

double pearson(const Eigen::Ref<const Eigen::ArrayXd>& x, const Eigen::Ref<const Eigen::ArrayXd>& y);

struct LinearFit {
  double slope = 0;
  double intercept = 0;
  double r_squared = 0;
  int n_points = 0;
  double x_min = 0;
  double x_max = 0;

  double predict(double x) const { return slope * x + intercept; }
};

LinearFit fit_linear(const Eigen::Ref<const Eigen::ArrayXd>& x, const Eigen::Ref<const Eigen::ArrayXd>& y);

struct CalibrationModel {
  LinearFit normal;      // AF -> normal force (mN)
  LinearFit tangential;  // TF -> tangential force (mN)
  std::uint64_t config_hash = 0;

  /// Rejects factors outside 1.5x the calibrated range (centred on it).
  double predict_normal(double af) const;
  double predict_tangential(double tf) const;
};

CalibrationModel calibrate_force(const Eigen::Ref<const Eigen::ArrayXd>& af, const Eigen::Ref<const Eigen::ArrayXd>& tf,
                                 const Eigen::Ref<const Eigen::ArrayXd>& f_n, const Eigen::Ref<const Eigen::ArrayXd>& f_t,
                                 std::uint64_t config_hash = 0);

/// (max - min) / mean of positive values.
double uniformity(const Eigen::Ref<const Eigen::ArrayXd>& values);

}  // namespace mlat
