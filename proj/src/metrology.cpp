#include "mlat/metrology.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace mlat {

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::ArrayXXd extract_roi(const ImageF& image, const Roi& roi) {
  if (roi.row < 0 || roi.col < 0 || roi.row + roi.height > image.rows() || roi.col + roi.width > image.cols())
    throw std::invalid_argument("roi outside image");
  return image.block(roi.row, roi.col, roi.height, roi.width).cast<double>();
}

}  // namespace

MTFCurve slanted_edge_mtf(const ImageF& image, const Roi& roi, double edge_angle_hint_deg,
                          const SlantedEdgeOptions& options) {
  if (roi.width < 32 || roi.height < 32) throw std::invalid_argument("slanted_edge_mtf: ROI smaller than 32x32");
  Eigen::ArrayXXd a = extract_roi(image, roi);
  if (std::abs(edge_angle_hint_deg) > 45.0) a = a.transpose().eval();
  const Eigen::Index rows = a.rows(), cols = a.cols();

  // Edge location per row: centroid of the absolute horizontal derivative
  // near its peak.
  std::vector<double> ys, xs;
  const double contrast = a.maxCoeff() - a.minCoeff();
  if (!(contrast > 0)) throw std::runtime_error("slanted_edge_mtf: no edge found (flat ROI)");
  const Eigen::Index half = std::max<Eigen::Index>(4, cols / 4);
  for (Eigen::Index r = 0; r < rows; ++r) {
    Eigen::ArrayXd d(cols - 1);
    for (Eigen::Index c = 0; c + 1 < cols; ++c) d(c) = std::abs(a(r, c + 1) - a(r, c));
    Eigen::ArrayXd smooth = d;
    for (Eigen::Index c = 1; c + 1 < d.size(); ++c) smooth(c) = (d(c - 1) + d(c) + d(c + 1)) / 3.0;
    Eigen::Index peak = 0;
    smooth.maxCoeff(&peak);
    double w = 0, wx = 0;
    for (Eigen::Index c = std::max<Eigen::Index>(0, peak - half); c <= std::min(d.size() - 1, peak + half); ++c) {
      w += d(c);
      wx += d(c) * (double(c) + 0.5);
    }
    if (w > 0.2 * contrast) {
      ys.push_back(double(r));
      xs.push_back(wx / w);
    }
  }
  if (ys.size() < 8) throw std::runtime_error("slanted_edge_mtf: no edge found");
  Eigen::MatrixXd design(ys.size(), 2);
  Eigen::VectorXd target(ys.size());
  for (std::size_t i = 0; i < ys.size(); ++i) {
    design(Eigen::Index(i), 0) = 1.0;
    design(Eigen::Index(i), 1) = ys[i];
    target(Eigen::Index(i)) = xs[i];
  }
  const Eigen::Vector2d line = design.colPivHouseholderQr().solve(target);
  const double rms = std::sqrt((design * line - target).squaredNorm() / double(ys.size()));
  if (rms > options.max_fit_rms_px) throw std::runtime_error("slanted_edge_mtf: no edge found (fit residual)");
  const double angle = std::atan(line(1));
  if (std::abs(angle) < kPi / 180.0)
    throw std::runtime_error("slanted_edge_mtf: edge too close to the pixel axis");
  const double cos_t = std::cos(angle);

  // Oversampled edge spread function along the edge normal.
  const int os = options.oversample;
  double dmin = 1e300, dmax = -1e300;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) {
      const double d = (double(c) - (line(0) + line(1) * double(r))) * cos_t;
      dmin = std::min(dmin, d);
      dmax = std::max(dmax, d);
    }
  const double reach = std::min(-dmin, dmax);
  const int half_bins = int(std::floor(reach * os));
  if (half_bins < 8) throw std::runtime_error("slanted_edge_mtf: edge too close to the ROI border");
  const int n = 2 * half_bins;
  std::vector<double> sum(static_cast<std::size_t>(n), 0.0), cnt(static_cast<std::size_t>(n), 0.0);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) {
      const double d = (double(c) - (line(0) + line(1) * double(r))) * cos_t;
      const int b = int(std::floor(d * os)) + half_bins;
      if (b < 0 || b >= n) continue;
      sum[std::size_t(b)] += a(r, c);
      cnt[std::size_t(b)] += 1;
    }
  std::vector<double> esf(static_cast<std::size_t>(n));
  std::vector<int> filled;
  for (int b = 0; b < n; ++b)
    if (cnt[std::size_t(b)] > 0) {
      esf[std::size_t(b)] = sum[std::size_t(b)] / cnt[std::size_t(b)];
      filled.push_back(b);
    }
  if (filled.size() < 2) throw std::runtime_error("slanted_edge_mtf: no edge found");
  for (int b = 0; b < n; ++b) {
    if (cnt[std::size_t(b)] > 0) continue;
    const auto hi = std::lower_bound(filled.begin(), filled.end(), b);
    if (hi == filled.begin()) esf[std::size_t(b)] = esf[std::size_t(*hi)];
    else if (hi == filled.end()) esf[std::size_t(b)] = esf[std::size_t(filled.back())];
    else {
      const int l = *(hi - 1), h = *hi;
      const double t = double(b - l) / double(h - l);
      esf[std::size_t(b)] = (1 - t) * esf[std::size_t(l)] + t * esf[std::size_t(h)];
    }
  }

  // Line spread function, Hann window centred on the edge.
  Eigen::ArrayXd lsf = Eigen::ArrayXd::Zero(n);
  for (int b = 1; b + 1 < n; ++b) lsf(b) = 0.5 * (esf[std::size_t(b) + 1] - esf[std::size_t(b) - 1]);
  for (int b = 0; b < n; ++b) lsf(b) *= 0.5 * (1.0 + std::cos(2 * kPi * (b - half_bins) / double(n)));

  MTFCurve curve;
  curve.pixel_pitch_um = options.pixel_pitch_um;
  const int kmax = n / os;
  double dc = 0;
  for (int k = 0; k <= kmax; ++k) {
    std::complex<double> acc = 0;
    for (int b = 0; b < n; ++b) acc += lsf(b) * std::polar(1.0, -2 * kPi * double(k) * b / n);
    double m = std::abs(acc);
    if (k == 0) dc = m;
    const double cyc_px = double(k) * os / n;
    const double arg = 2 * kPi * cyc_px / os;  // central difference over +-1 bin
    if (k > 0 && arg < 0.5 * kPi) m /= std::sin(arg) / arg;
    curve.samples.push_back({cyc_px * 1000.0 / options.pixel_pitch_um, m});
  }
  if (!(dc > 0)) throw std::runtime_error("slanted_edge_mtf: no edge found (zero LSF)");
  for (auto& s : curve.samples) s.modulation /= dc;
  return curve;
}

double resolution_at_criterion(const MTFCurve& curve, double criterion) {
  if (!(criterion > 0) || !(criterion < 1))
    throw std::invalid_argument("resolution_at_criterion: criterion must lie strictly between 0 and 1");
  const auto& s = curve.samples;
  double lowest = 1e300;
  for (std::size_t k = 1; k < s.size(); ++k) {
    lowest = std::min(lowest, s[k].modulation);
    if (s[k - 1].modulation >= criterion && s[k].modulation < criterion) {
      const double t = (s[k - 1].modulation - criterion) / (s[k - 1].modulation - s[k].modulation);
      return s[k - 1].freq_lp_per_mm + t * (s[k].freq_lp_per_mm - s[k - 1].freq_lp_per_mm);
    }
  }
  std::ostringstream os;
  os << "resolution_at_criterion: curve never crosses " << criterion << " (minimum " << lowest << ")";
  throw std::runtime_error(os.str());
}

double bar_contrast(const ImageF& image, const Roi& roi, double cycles_per_pixel, BarAxis axis) {
  if (!(cycles_per_pixel > 0)) throw std::invalid_argument("bar_contrast: frequency must be positive");
  Eigen::ArrayXXd a = extract_roi(image, roi);
  if (axis == BarAxis::y) a = a.transpose().eval();
  const double period = 1.0 / cycles_per_pixel;
  const Eigen::Index len = a.cols();
  if (double(len) < 4 * period) throw std::runtime_error("bar_contrast: bars not localizable (ROI too short)");

  // Average along the bars over the central half of the ROI.
  const Eigen::Index r0 = a.rows() / 4, rn = std::max<Eigen::Index>(1, a.rows() / 2);
  const Eigen::ArrayXd profile = a.middleRows(r0, rn).colwise().mean().transpose();
  auto at = [&](double x) {
    const double xc = std::clamp(x, 0.0, double(len - 1));
    const auto i = std::min<Eigen::Index>(Eigen::Index(xc), len - 2);
    const double t = xc - double(i);
    return (1 - t) * profile(i) + t * profile(i + 1);
  };

  // Locate the group by matching the fundamental over the three-bar extent.
  double best = -1e300, centre = 0.5 * double(len - 1);
  for (double c = 1.25 * period; c <= double(len - 1) - 1.25 * period; c += 0.05) {
    double score = 0;
    for (Eigen::Index x = 0; x < len; ++x) {
      const double d = double(x) - c;
      if (std::abs(d) > 1.25 * period) continue;
      score += profile(x) * std::cos(2 * kPi * d / period);
    }
    if (score > best) {
      best = score;
      centre = c;
    }
  }
  if (!(best > -1e300)) throw std::runtime_error("bar_contrast: bars not localizable");

  double imax = -1e300, imin = 1e300;
  for (int k = -1; k <= 1; ++k) imax = std::max(imax, at(centre + k * period));
  for (double g : {-0.5, 0.5}) imin = std::min(imin, at(centre + g * period));
  if (!(imax + imin > 0)) return 0.0;
  return std::max(0.0, (imax - imin) / (imax + imin));
}

double pearson(const Eigen::Ref<const Eigen::ArrayXd>& x, const Eigen::Ref<const Eigen::ArrayXd>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
  if (x.size() < 2) throw std::invalid_argument("pearson: need at least two points");
  const Eigen::ArrayXd dx = x - x.mean();
  const Eigen::ArrayXd dy = y - y.mean();
  const double sxx = dx.square().sum(), syy = dy.square().sum();
  if (!(sxx > 0) || !(syy > 0)) throw std::domain_error("pearson: zero variance");
  return std::clamp((dx * dy).sum() / std::sqrt(sxx * syy), -1.0, 1.0);
}

LinearFit fit_linear(const Eigen::Ref<const Eigen::ArrayXd>& x, const Eigen::Ref<const Eigen::ArrayXd>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("fit_linear: length mismatch");
  if (x.size() < 2) throw std::invalid_argument("fit_linear: need at least two points");
  if (x.maxCoeff() == x.minCoeff()) throw std::domain_error("fit_linear: degenerate x");

  Eigen::MatrixXd design(x.size(), 2);
  design.col(0) = x.matrix();
  design.col(1).setOnes();
  const Eigen::Vector2d beta = design.colPivHouseholderQr().solve(y.matrix());

  LinearFit fit;
  fit.slope = beta(0);
  fit.intercept = beta(1);
  fit.n_points = int(x.size());
  fit.x_min = x.minCoeff();
  fit.x_max = x.maxCoeff();
  const double ss_res = (y.matrix() - design * beta).squaredNorm();
  const double ss_tot = (y - y.mean()).square().sum();
  if (ss_tot > 0) fit.r_squared = std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0);
  else fit.r_squared = ss_res <= 1e-24 ? 1.0 : 0.0;
  return fit;
}

namespace {

double guarded_predict(const LinearFit& fit, double value) {
  const double centre = 0.5 * (fit.x_min + fit.x_max);
  const double half = 0.75 * (fit.x_max - fit.x_min);
  if (value < centre - half || value > centre + half)
    throw std::out_of_range("CalibrationModel: refusing to extrapolate beyond 1.5x the calibrated range");
  return fit.predict(value);
}

}  // namespace

double CalibrationModel::predict_normal(double af) const { return guarded_predict(normal, af); }
double CalibrationModel::predict_tangential(double tf) const { return guarded_predict(tangential, tf); }

CalibrationModel calibrate_force(const Eigen::Ref<const Eigen::ArrayXd>& af, const Eigen::Ref<const Eigen::ArrayXd>& tf,
                                 const Eigen::Ref<const Eigen::ArrayXd>& f_n, const Eigen::Ref<const Eigen::ArrayXd>& f_t,
                                 std::uint64_t config_hash) {
  if (af.size() < 3 || tf.size() < 3) throw std::invalid_argument("calibrate_force: need at least three points");
  if (af.size() != f_n.size() || tf.size() != f_t.size())
    throw std::invalid_argument("calibrate_force: series not aligned");
  CalibrationModel m;
  m.normal = fit_linear(af, f_n);
  m.tangential = fit_linear(tf, f_t);
  m.config_hash = config_hash;
  return m;
}

double uniformity(const Eigen::Ref<const Eigen::ArrayXd>& values) {
  if (values.size() == 0) throw std::invalid_argument("uniformity: empty input");
  if ((values <= 0).any()) throw std::domain_error("uniformity: values must be positive");
  return (values.maxCoeff() - values.minCoeff()) / values.mean();
}

}  // namespace mlat
