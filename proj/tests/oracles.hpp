#pragma once

// Independent reference computations used by the tests. None of these call
// into the library.

#include "mlat/image.hpp"

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>

namespace oracle {

inline constexpr double kPi = std::numbers::pi;

// Root of a monotone function on [lo, hi] by bisection.
inline double bisect(const std::function<double(double)>& g, double lo, double hi, int iters = 200) {
  double glo = g(lo);
  for (int i = 0; i < iters; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double gm = g(mid);
    if ((gm < 0) == (glo < 0)) {
      lo = mid;
      glo = gm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Height above the chord of the circle of radius R through (+-D/2, 0),
// found by bisecting x^2 + (z + c)^2 = R^2 for z >= 0.
inline double cap_height_by_bisection(double R, double D, double x) {
  const double c = bisect([&](double cc) { return cc * cc + 0.25 * D * D - R * R; }, 0.0, R);
  return bisect([&](double z) { return x * x + (z + c) * (z + c) - R * R; }, 0.0, R);
}

// Thin lens of focal length f, aperture A, sensor at v. An on-axis object
// point at distance u sends a marginal ray through the aperture edge; the
// ray is bent by -y/f and its height at the sensor is half the blur.
inline double traced_blur(double f, double A, double v, double u) {
  const double y = 0.5 * A;
  const double slope_in = y / u;
  const double slope_out = slope_in - y / f;
  return 2.0 * std::abs(y + slope_out * v);
}

// Unit-height edge profile blurred by a Gaussian of width sigma.
inline double gaussian_esf(double d, double sigma) { return 0.5 * std::erfc(-d / (sigma * std::sqrt(2.0))); }

inline double gaussian_mtf(double sigma, double f) { return std::exp(-2.0 * kPi * kPi * sigma * sigma * f * f); }

// Fraction of a disk of diameter dia lying at signed distance < d from its
// centre along the normal, by numeric integration of chord lengths.
inline double disk_esf(double d, double dia) {
  const double r = 0.5 * dia;
  if (d <= -r) return 0.0;
  if (d >= r) return 1.0;
  const int n = 4000;
  double acc = 0;
  const double h = (d + r) / n;
  for (int i = 0; i < n; ++i) {
    const double t = -r + (i + 0.5) * h;
    acc += 2.0 * std::sqrt(std::max(0.0, r * r - t * t)) * h;
  }
  return acc / (kPi * r * r);
}

// Transfer of a uniform disk along one axis: DFT of the disk sampled on a
// fine grid.
inline double disk_mtf(double dia, double f, int grid = 400) {
  const double r = 0.5 * dia;
  const double h = dia / grid;
  std::complex<double> acc = 0;
  double total = 0;
  for (int i = 0; i < grid; ++i)
    for (int j = 0; j < grid; ++j) {
      const double x = -r + (j + 0.5) * h, y = -r + (i + 0.5) * h;
      if (x * x + y * y > r * r) continue;
      acc += std::polar(1.0, -2.0 * kPi * f * x);
      total += 1;
    }
  return std::abs(acc) / total;
}

// Slanted edge image: bright side to +x, edge through the image centre,
// tilted by angle_deg from vertical. profile(d) maps signed distance to value.
inline mlat::ImageF slanted_edge(int rows, int cols, double angle_deg, const std::function<double(double)>& profile,
                                 double lo = 0.1, double hi = 0.9) {
  const double t = angle_deg * kPi / 180.0;
  const double cx = 0.5 * (cols - 1), cy = 0.5 * (rows - 1);
  mlat::ImageF img(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const double d = (c - cx) * std::cos(t) - (r - cy) * std::sin(t);
      img(r, c) = float(lo + (hi - lo) * profile(d));
    }
  return img;
}

// Pseudo-random smooth texture, deterministic in (x, y).
inline double texture(double x, double y) {
  return 0.5 + 0.2 * std::sin(0.31 * x + 0.7 * std::sin(0.13 * y)) + 0.15 * std::cos(0.23 * y - 0.4 * std::cos(0.17 * x)) +
         0.1 * std::sin(0.11 * (x + y));
}

inline mlat::ImageF texture_image(int rows, int cols, double dx = 0, double dy = 0, double scale = 1.0,
                                  double cx = 0, double cy = 0) {
  mlat::ImageF img(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const double x = cx + (c - dx - cx) / scale, y = cy + (r - dy - cy) / scale;
      img(r, c) = float(texture(x, y));
    }
  return img;
}

inline double sample_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= double(n);
  my /= double(n);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace oracle
