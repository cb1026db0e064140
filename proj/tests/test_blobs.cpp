#include "mlat/pipeline.hpp"

#include <gtest/gtest.h>

using namespace mlat;

namespace {

ImageF disks(int rows, int cols, const std::vector<std::pair<Vec2, double>>& spots, float level = 0.9f) {
  ImageF img = ImageF::Constant(rows, cols, 0.1f);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      for (const auto& [p, rad] : spots)
        if ((Vec2(c, r) - p).norm() <= rad) img(r, c) = level;
  return img;
}

}  // namespace

TEST(Otsu, SplitsBimodalImage) {
  const ImageF img = disks(60, 60, {{{20, 20}, 8}});
  const double t = otsu_threshold(img);
  EXPECT_GT(t, 0.1);
  EXPECT_LT(t, 0.9);
}

TEST(DetectBlobs, CountsCentroidsAndArea) {
  const ImageF img = disks(80, 100, {{{20, 30}, 6}, {{70, 50}, 4}, {{10, 70}, 0.5}});
  const auto blobs = detect_blobs(img, 0.5, 3);
  ASSERT_EQ(blobs.size(), 2u);
  // raster order of first pixel
  EXPECT_NEAR(blobs[0].centroid.x(), 20, 1e-9);
  EXPECT_NEAR(blobs[0].centroid.y(), 30, 1e-9);
  EXPECT_NEAR(blobs[1].centroid.x(), 70, 1e-9);
  EXPECT_NEAR(blobs[1].centroid.y(), 50, 1e-9);
  int count = 0;
  for (int dy = -6; dy <= 6; ++dy)
    for (int dx = -6; dx <= 6; ++dx) count += dx * dx + dy * dy <= 36;
  EXPECT_EQ(blobs[0].area, count);
  EXPECT_EQ(blobs[1].label, 1);
}

TEST(DetectBlobs, EightConnectivity) {
  ImageF img = ImageF::Zero(5, 5);
  img(1, 1) = img(2, 2) = img(3, 3) = 1;
  EXPECT_EQ(detect_blobs(img, 0.5, 1).size(), 1u);
  EXPECT_TRUE(detect_blobs(ImageF::Zero(5, 5), 0.5, 1).empty());
}

TEST(DetectBlobs, MeanColour) {
  const ImageF gray = disks(30, 30, {{{15, 15}, 5}});
  RgbImage rgb(30, 30);
  rgb.channel[0].setConstant(0.25f);
  rgb.channel[2].setConstant(0.75f);
  const auto blobs = detect_blobs(gray, 0.5, 1, &rgb);
  ASSERT_EQ(blobs.size(), 1u);
  EXPECT_NEAR(blobs[0].mean_color[0], 0.25f, 1e-6);
  EXPECT_NEAR(blobs[0].mean_color[1], 0.0f, 1e-6);
  EXPECT_NEAR(blobs[0].mean_color[2], 0.75f, 1e-6);
}

TEST(TrackBlob, NearestWithinGate) {
  std::vector<Blob> a(3), b(3);
  a[0].centroid = {10, 10};
  a[1].centroid = {50, 10};
  a[2].centroid = {90, 90};
  b[0].centroid = {52, 11};
  b[1].centroid = {11, 9};
  b[2].centroid = {20, 80};
  for (auto& x : a) x.area = 10;
  for (auto& x : b) x.area = 12;
  const auto t = track_blob(a, b, 5.0);
  ASSERT_EQ(t.matches.size(), 2u);
  EXPECT_EQ(t.matches[0].prev, 0);
  EXPECT_EQ(t.matches[0].cur, 1);
  EXPECT_NEAR(t.matches[0].delta.x(), 1, 1e-12);
  EXPECT_NEAR(t.matches[0].area_ratio, 1.2, 1e-12);
  EXPECT_EQ(t.matches[1].cur, 0);
  EXPECT_EQ(t.unmatched_prev, std::vector<int>{2});
  EXPECT_EQ(t.unmatched_cur, std::vector<int>{2});
}

TEST(TrackBlob, GreedyPrefersClosestPair) {
  std::vector<Blob> a(2), b(1);
  a[0].centroid = {0, 0};
  a[1].centroid = {3, 0};
  b[0].centroid = {2, 0};
  for (auto* v : {&a, &b})
    for (auto& x : *v) x.area = 1;
  const auto t = track_blob(a, b, 10);
  ASSERT_EQ(t.matches.size(), 1u);
  EXPECT_EQ(t.matches[0].prev, 1);
}
