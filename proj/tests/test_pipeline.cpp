#include "mlat/pipeline.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace mlat;

namespace {

AreaPatchGrid grid_of(const std::vector<double>& ratios, int cols) {
  AreaPatchGrid g;
  g.grid_cols = cols;
  g.grid_rows = int(ratios.size()) / cols;
  for (double r : ratios) {
    g.area_init.push_back(100.0);
    g.area.push_back(100.0 * r);
  }
  return g;
}

}  // namespace

TEST(Stitch, RotatesCropsAndPlaces) {
  RawMosaic m;
  m.rows = 2;
  m.cols = 2;
  for (int k = 0; k < 4; ++k) {
    ImageF t(6, 8);
    for (int r = 0; r < 6; ++r)
      for (int c = 0; c < 8; ++c) t(r, c) = float(k * 100 + r * 10 + c);
    m.tiles.push_back(from_gray(t));
  }
  const RgbImage s = stitch(m, 1);
  ASSERT_EQ(s.rows(), 8);
  ASSERT_EQ(s.cols(), 12);
  // stitched (0, 0) is tile 0 pixel (4, 6) after the half turn and the crop
  EXPECT_EQ(s.channel[0](0, 0), 46.0f);
  EXPECT_EQ(s.channel[0](0, 6), 146.0f);
  EXPECT_EQ(s.channel[0](4, 0), 246.0f);
  EXPECT_EQ(s.channel[0](7, 11), 311.0f);
  EXPECT_THROW(stitch(m, 3), std::invalid_argument);
  m.tiles.pop_back();
  EXPECT_THROW(stitch(m, 1), std::invalid_argument);
}

TEST(AreaFactor, SumsRelativeChange) {
  EXPECT_NEAR(area_factor(grid_of({1.1, 1.2}, 2)), 0.3, 1e-12);
  EXPECT_NEAR(area_factor(grid_of({1.0, 1.0, 1.0, 1.0}, 2)), 0.0, 1e-15);
  EXPECT_NEAR(area_factor(grid_of({0.9, 1.1}, 2)), 0.0, 1e-12);
  AreaPatchGrid bad = grid_of({1.0, 1.0}, 2);
  bad.area_init[1] = 0;
  EXPECT_THROW(area_factor(bad), std::domain_error);
}

TEST(TangentialFactor, VectorSum) {
  FlowField f;
  f.grid_cols = 16;
  f.grid_rows = 13;
  f.vectors.assign(208, Vec2(0.6, 0.8));
  EXPECT_NEAR(tangential_factor(f), 208.0, 1e-9);

  // radially symmetric field cancels
  f.vectors.clear();
  double total = 0;
  for (int r = 0; r < 13; ++r)
    for (int c = 0; c < 16; ++c) {
      const Vec2 p(c - 7.5, r - 6.0);
      f.vectors.push_back(0.3 * p);
      total += 0.3 * p.norm();
    }
  EXPECT_LE(tangential_factor(f), 1e-9 * total);
}

TEST(QuadAreas, UniformMagnificationRatio) {
  const double s = 1.1;
  const ImageF a = oracle::texture_image(240, 240, 0, 0, 1.0, 120, 120);
  const ImageF b = oracle::texture_image(240, 240, 0, 0, s, 120, 120);
  AreaSegmentation p;
  p.grid_cols = p.grid_rows = 6;
  p.search_radius = 16;
  const auto g = segment_area_patches(a, b, p);
  ASSERT_EQ(g.count(), 36);
  for (int r = 1; r < 5; ++r)
    for (int c = 1; c < 5; ++c) {
      const int i = r * 6 + c;
      ASSERT_TRUE(g.is_tracked(i));
      EXPECT_NEAR(g.ratio(i), s * s, 0.03) << r << "," << c;
    }
  const auto same = segment_area_patches(a, a, p);
  EXPECT_NEAR(area_factor(same), 0.0, 1e-3);
  EXPECT_THROW(segment_area_patches(a, ImageF::Zero(10, 10), p), std::invalid_argument);
}

TEST(BlobAreas, GrowingDots) {
  auto dots = [](double rad) {
    ImageF img = ImageF::Constant(120, 120, 0.05f);
    for (int r = 0; r < 120; ++r)
      for (int c = 0; c < 120; ++c)
        for (int k = 0; k < 4; ++k) {
          const Vec2 p(15 + 30 * k, 60);
          if ((Vec2(c, r) - p).norm() <= rad) img(r, c) = 0.95f;
        }
    return img;
  };
  AreaSegmentation p;
  p.method = AreaMethod::blob;
  p.grid_cols = 4;
  p.grid_rows = 1;
  const auto g = segment_area_patches(dots(6), dots(7), p);
  int n6 = 0, n7 = 0;
  for (int dy = -7; dy <= 7; ++dy)
    for (int dx = -7; dx <= 7; ++dx) {
      n6 += dx * dx + dy * dy <= 36;
      n7 += dx * dx + dy * dy <= 49;
    }
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(g.ratio(i), double(n7) / n6, 1e-12);
}

TEST(PatchDepths, InverseSquareRootLaw) {
  const double u = 5000 - 2019.21;
  const auto g = grid_of({1.0, 1.21, 1.002, 0.81}, 2);
  const auto d = patch_depths(g, u, 0.005);
  EXPECT_EQ(d[0], 0.0);
  EXPECT_NEAR(d[1], u * (1 - 1 / 1.1), 1e-9);
  EXPECT_EQ(d[2], 0.0);
  EXPECT_NEAR(d[3], u * (1 - 1 / 0.9), 1e-9);
  // the ratio of a plane pressed by delta is (u / (u - delta))^2
  const double delta = 400;
  const auto pressed = patch_depths(grid_of({std::pow(u / (u - delta), 2), 1.0}, 2), u);
  EXPECT_NEAR(pressed[0], delta, 1e-9);
}

TEST(DepthMap, FillsUntrackedAndInterpolates) {
  auto g = grid_of({1.21, 1.21, 1.21, 1.0}, 2);
  g.tracked = {1, 1, 1, 0};
  g.area[3] = 500;  // ignored
  const DepthMap m = depth_map(g, 2.0, 1000.0, 4, 4);
  const double d = 2.0 * 1000.0 * (1 - 1 / 1.1);
  EXPECT_NEAR(m.depth_um(3, 3), d, 1e-3);
  EXPECT_NEAR(m.depth_um(0, 0), d, 1e-3);
  EXPECT_EQ(m.scale, 2.0);
  EXPECT_THROW(depth_map(g, std::nullopt, 1000.0, 4, 4), std::invalid_argument);
  EXPECT_THROW(depth_map(g, 1.0, 1000.0, 0, 4), std::invalid_argument);
}

TEST(DepthMap, BilinearBetweenPatchCentres) {
  const auto g = grid_of({1.0, 1.21}, 2);
  const DepthMap m = depth_map(g, 1.0, 1000.0, 4, 1);
  const double d = 1000.0 * (1 - 1 / 1.1);
  EXPECT_NEAR(m.depth_um(0, 0), 0.0, 1e-4);
  EXPECT_NEAR(m.depth_um(0, 1), 0.25 * d, 1e-3);
  EXPECT_NEAR(m.depth_um(0, 2), 0.75 * d, 1e-3);
  EXPECT_NEAR(m.depth_um(0, 3), d, 1e-3);
}
