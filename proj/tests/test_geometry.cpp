#include "mlat/geometry.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace mlat;

namespace {

// Monte-Carlo-free area estimate on a fine grid.
double grid_area(double r, double x0, double x1, double y0, double y1, int n = 2000) {
  const double hx = (x1 - x0) / n, hy = (y1 - y0) / n;
  int inside = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double x = x0 + (j + 0.5) * hx, y = y0 + (i + 0.5) * hy;
      if (x * x + y * y <= r * r) ++inside;
    }
  return inside * hx * hy;
}

}  // namespace

TEST(CircleRectArea, WholeDiskAndQuadrant) {
  EXPECT_NEAR(circle_rect_area(2.0, -3, 3, -3, 3), oracle::kPi * 4, 1e-9);
  EXPECT_NEAR(circle_rect_area(2.0, 0, 3, 0, 3), oracle::kPi, 1e-9);
  EXPECT_NEAR(circle_rect_area(1.0, 2, 3, 2, 3), 0.0, 1e-12);
}

TEST(CircleRectArea, MatchesGridCount) {
  const double cases[][5] = {{1.5, -0.3, 0.7, 0.2, 1.6}, {3.0, -1.0, 2.5, -2.9, -0.5}, {0.8, -0.5, 0.5, -0.5, 0.5}};
  for (const auto& c : cases)
    EXPECT_NEAR(circle_rect_area(c[0], c[1], c[2], c[3], c[4]), grid_area(c[0], c[1], c[2], c[3], c[4]), 2e-3);
}

TEST(CircularSegment, EndsAndHalf) {
  EXPECT_NEAR(circular_segment_area(2.0, 2.0), 0.0, 1e-12);
  EXPECT_NEAR(circular_segment_area(2.0, -2.0), oracle::kPi * 4, 1e-9);
  EXPECT_NEAR(circular_segment_area(2.0, 0.0), oracle::kPi * 2, 1e-9);
  EXPECT_NEAR(circular_segment_area(1.0, 0.4) / oracle::kPi, 1.0 - oracle::disk_esf(0.4, 2.0), 1e-6);
}

TEST(DiskKernel, NormalisedAndSymmetric) {
  for (double d : {0.0, 1.0, 2.5, 6.0, 9.3}) {
    const ImageD w = make_disk_kernel(d).dense();
    EXPECT_NEAR(w.sum(), 1.0, 1e-6) << d;
    EXPECT_TRUE(w.isApprox(w.reverse(), 1e-12)) << d;
    EXPECT_TRUE(w.isApprox(w.transpose().eval(), 1e-6)) << d;
  }
  EXPECT_EQ(make_disk_kernel(0.0).dense().size(), 1);
}

TEST(DiskBlur, PreservesFlatImagesAndMass) {
  const ImageF flat = ImageF::Constant(40, 50, 0.3f);
  const ImageF b = disk_blur(flat, 5.0);
  EXPECT_NEAR(b(20, 25), 0.3f, 1e-5);

  ImageF spike = ImageF::Zero(41, 41);
  spike(20, 20) = 1.0f;
  const ImageF s = disk_blur(spike, 7.0);
  EXPECT_NEAR(s.sum(), 1.0, 1e-5);
  const ImageD w = make_disk_kernel(7.0).dense();
  const Eigen::Index R = w.rows() / 2;
  EXPECT_NEAR(s(20, 20), w(R, R), 1e-6);
  EXPECT_NEAR(s(20, 20 + R), w(R, 2 * R), 1e-6);
}

TEST(DiskBlur, IdentityBelowThreshold) {
  const ImageF img = oracle::texture_image(30, 30);
  EXPECT_TRUE((disk_blur(img, 0.0) == img).all());
}
