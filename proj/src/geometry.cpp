#include "mlat/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mlat {

namespace {

// Antiderivative of sqrt(r^2 - x^2).
double half_chord_integral(double r, double x) {
  const double xc = std::clamp(x, -r, r);
  return 0.5 * (xc * std::sqrt(std::max(0.0, r * r - xc * xc)) + r * r * std::asin(xc / r));
}

}  // namespace

double circle_rect_area(double r, double x0, double x1, double y0, double y1) {
  if (r <= 0 || x1 <= x0 || y1 <= y0) return 0.0;
  const double a = std::max(x0, -r);
  const double b = std::min(x1, r);
  if (b <= a) return 0.0;

  std::vector<double> cuts{a, b};
  for (double y : {y0, y1}) {
    if (std::abs(y) < r) {
      const double x = std::sqrt(r * r - y * y);
      cuts.push_back(x);
      cuts.push_back(-x);
    }
  }
  std::sort(cuts.begin(), cuts.end());

  double area = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double lo = std::max(cuts[i], a);
    const double hi = std::min(cuts[i + 1], b);
    if (hi <= lo) continue;
    const double mid = 0.5 * (lo + hi);
    const double h = std::sqrt(std::max(0.0, r * r - mid * mid));
    const bool top_is_const = y1 < h;
    const bool bot_is_const = y0 > -h;
    const double top_mid = top_is_const ? y1 : h;
    const double bot_mid = bot_is_const ? y0 : -h;
    if (top_mid <= bot_mid) continue;
    const double chord = half_chord_integral(r, hi) - half_chord_integral(r, lo);
    const double top = top_is_const ? y1 * (hi - lo) : chord;
    const double bot = bot_is_const ? y0 * (hi - lo) : -chord;
    area += top - bot;
  }
  return area;
}

double circular_segment_area(double r, double d) {
  if (r <= 0) return 0.0;
  if (d >= r) return 0.0;
  if (d <= -r) return std::numbers::pi * r * r;
  return r * r * std::acos(d / r) - d * std::sqrt(r * r - d * d);
}

DiskKernel make_disk_kernel(double diameter_px) {
  if (diameter_px < 0) throw std::domain_error("make_disk_kernel: negative diameter");
  DiskKernel k;
  k.diameter = diameter_px;
  if (diameter_px < 1e-6) {
    k.rows.push_back({0, 0, 0, {}});
    k.norm = 1.0;
    return k;
  }
  const double r = diameter_px / 2;
  const int R = int(std::ceil(r + 0.5));
  double total = 0.0;
  for (int dy = -R; dy <= R; ++dy) {
    DiskKernel::Row row;
    row.dy = dy;
    int lo = 1, hi = 0;
    for (int dx = -R; dx <= R; ++dx) {
      const double w = circle_rect_area(r, dx - 0.5, dx + 0.5, dy - 0.5, dy + 0.5);
      if (w <= 0) continue;
      total += w;
      if (w >= 1.0 - 1e-12) {
        if (lo > hi) lo = hi = dx;
        else hi = dx;
      } else {
        row.rim.emplace_back(dx, float(w));
      }
    }
    row.full_lo = lo;
    row.full_hi = hi;
    if (lo <= hi || !row.rim.empty()) k.rows.push_back(std::move(row));
  }
  k.norm = 1.0 / total;
  return k;
}

ImageD DiskKernel::dense() const {
  int R = 0;
  for (const auto& row : rows) {
    R = std::max(R, std::abs(row.dy));
    for (const auto& [dx, w] : row.rim) R = std::max(R, std::abs(dx));
    if (row.full_lo <= row.full_hi) R = std::max({R, std::abs(row.full_lo), std::abs(row.full_hi)});
  }
  ImageD out = ImageD::Zero(2 * R + 1, 2 * R + 1);
  for (const auto& row : rows) {
    for (int dx = row.full_lo; dx <= row.full_hi; ++dx) out(row.dy + R, dx + R) = norm;
    for (const auto& [dx, w] : row.rim) out(row.dy + R, dx + R) = w * norm;
  }
  return out;
}

ImageD row_prefix_sums(const ImageF& src) {
  ImageD prefix = ImageD::Zero(src.rows(), src.cols() + 1);
  for (Eigen::Index r = 0; r < src.rows(); ++r) {
    double acc = 0.0;
    for (Eigen::Index c = 0; c < src.cols(); ++c) {
      acc += src(r, c);
      prefix(r, c + 1) = acc;
    }
  }
  return prefix;
}

void apply_disk_kernel(const ImageF& src, const ImageD& prefix, const DiskKernel& kernel,
                       Eigen::Index row0, Eigen::Index row1, Eigen::Index col0,
                       Eigen::Index col1, ImageF& dst) {
  const Eigen::Index rows = src.rows();
  const Eigen::Index cols = src.cols();
  for (Eigen::Index y = row0; y < row1; ++y) {
    for (Eigen::Index x = col0; x < col1; ++x) {
      double acc = 0.0;
      for (const auto& row : kernel.rows) {
        const Eigen::Index sy = y + row.dy;
        if (sy < 0 || sy >= rows) continue;
        if (row.full_lo <= row.full_hi) {
          const Eigen::Index a = std::max<Eigen::Index>(0, x + row.full_lo);
          const Eigen::Index b = std::min<Eigen::Index>(cols - 1, x + row.full_hi);
          if (a <= b) acc += prefix(sy, b + 1) - prefix(sy, a);
        }
        for (const auto& [dx, w] : row.rim) {
          const Eigen::Index sx = x + dx;
          if (sx >= 0 && sx < cols) acc += double(w) * src(sy, sx);
        }
      }
      dst(y, x) = float(acc * kernel.norm);
    }
  }
}

ImageF disk_blur(const ImageF& src, double diameter_px) {
  const DiskKernel k = make_disk_kernel(diameter_px);
  ImageF out(src.rows(), src.cols());
  apply_disk_kernel(src, row_prefix_sums(src), k, 0, src.rows(), 0, src.cols(), out);
  return out;
}

}  // namespace mlat
