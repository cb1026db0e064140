#include "mlat/pipeline.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace mlat;

TEST(PatchEdges, RegularAndRounded) {
  EXPECT_EQ(patch_edges(960, 16), (std::vector<int>{0, 60, 120, 180, 240, 300, 360, 420, 480, 540, 600, 660, 720, 780,
                                                     840, 900, 960}));
  const auto e = patch_edges(720, 13);
  EXPECT_EQ(e.front(), 0);
  EXPECT_EQ(e.back(), 720);
  EXPECT_EQ(e[1], 55);
  EXPECT_THROW(patch_edges(5, 6), std::invalid_argument);
}

TEST(TileBox, ContainsPoint) {
  const ImageF img = ImageF::Zero(720, 960);
  const Box b = tile_box(img, {250, 10}, 240, 240);
  EXPECT_EQ(b.x0, 240);
  EXPECT_EQ(b.x1, 480);
  EXPECT_EQ(b.y0, 0);
  EXPECT_EQ(b.y1, 240);
  const Box w = tile_box(img, {250, 10}, 0, 0);
  EXPECT_EQ(w.x1, 960);
  EXPECT_EQ(w.y1, 720);
}

TEST(MatchPoints, RecoversSubpixelTranslation) {
  const ImageF a = oracle::texture_image(160, 160);
  for (const Vec2 shift : {Vec2(3.3, -1.6), Vec2(-7.75, 4.2), Vec2(0.0, 0.0)}) {
    const ImageF b = oracle::texture_image(160, 160, shift.x(), shift.y());
    const auto m = match_points(a, b, {{80, 80}, {60, 90}}, 40, 40, 12, 1e-6);
    for (const auto& p : m) {
      EXPECT_NEAR(p.displacement.x(), shift.x(), 0.15);
      EXPECT_NEAR(p.displacement.y(), shift.y(), 0.15);
      EXPECT_GT(p.confidence, 0.95);
    }
  }
}

TEST(MatchPoints, PyramidFindsLargeShift) {
  const ImageF a = oracle::texture_image(200, 200);
  const ImageF b = oracle::texture_image(200, 200, 21.4, -18.2);
  const auto m = match_points(a, b, {{100, 100}}, 48, 48, 32, 1e-6);
  EXPECT_NEAR(m[0].displacement.x(), 21.4, 0.2);
  EXPECT_NEAR(m[0].displacement.y(), -18.2, 0.2);
}

TEST(MatchPoints, MagnifiedTemplate) {
  const double s = 1.15;
  const ImageF a = oracle::texture_image(200, 200, 0, 0, 1.0, 100, 100);
  const ImageF b = oracle::texture_image(200, 200, 0, 0, s, 100, 100);
  const Vec2 p(120, 90);
  const auto m = match_points(a, b, {p}, 40, 40, 12, 1e-6, {nullptr, false, default_match_scales()});
  EXPECT_NEAR(m[0].scale, s, 0.051);
  const Vec2 expect = (s - 1.0) * (p - Vec2(100, 100));
  EXPECT_NEAR(m[0].displacement.x(), expect.x(), 0.3);
  EXPECT_NEAR(m[0].displacement.y(), expect.y(), 0.3);
}

TEST(MatchPoints, FlatTemplateHasZeroConfidence) {
  const ImageF flat = ImageF::Constant(100, 100, 0.5f);
  const auto m = match_points(flat, flat, {{50, 50}}, 30, 30, 5, 1e-6);
  EXPECT_EQ(m[0].confidence, 0.0);
  EXPECT_EQ(m[0].displacement, Vec2::Zero());
}

TEST(MatchPoints, HintRestrictsSearch) {
  const ImageF a = oracle::texture_image(160, 160);
  const ImageF b = oracle::texture_image(160, 160, 6.4, 0);
  const std::vector<Vec2> hint{{6, 0}};
  const std::vector<double> unit{1.0};
  const auto m = match_points(a, b, {{80, 80}}, 40, 40, 12, 1e-6, {nullptr, false, {1.0}, &hint, &unit});
  EXPECT_NEAR(m[0].displacement.x(), 6.4, 0.15);
  const std::vector<Vec2> short_hint;
  EXPECT_THROW(match_points(a, b, {{80, 80}}, 40, 40, 12, 1e-6, {nullptr, false, {1.0}, &short_hint, &unit}),
               std::invalid_argument);
}

TEST(MatchPoints, ConfinedToTileBox) {
  // two tiles whose right half moves by 5 px; the left tile does not
  ImageF a = oracle::texture_image(100, 200);
  ImageF b = a;
  b.rightCols(100) = oracle::texture_image(100, 200, 5, 0).rightCols(100);
  std::vector<Box> boxes{{0, 0, 100, 100}, {100, 0, 200, 100}};
  const auto m = match_points(a, b, {{90, 50}, {110, 50}}, 30, 30, 8, 1e-6, {&boxes, true, {1.0}});
  EXPECT_NEAR(m[0].displacement.norm(), 0.0, 0.15);
  EXPECT_NEAR(m[1].displacement.x(), 5.0, 0.2);
}

TEST(MatchPoints, Errors) {
  const ImageF a = ImageF::Zero(50, 50);
  EXPECT_THROW(match_points(a, ImageF::Zero(40, 50), {{25, 25}}, 10, 10, 3, 1e-6), std::invalid_argument);
  EXPECT_THROW(match_points(a, a, {{25, 25}}, 2, 10, 3, 1e-6), std::invalid_argument);
  EXPECT_THROW(match_points(a, a, {{25, 25}}, 10, 10, 3, 1e-6, {nullptr, false, {}}), std::invalid_argument);
}

TEST(ComputeFlow, UniformShiftOnGrid) {
  const ImageF a = oracle::texture_image(240, 320);
  const ImageF b = oracle::texture_image(240, 320, 2.5, -1.5);
  FlowParams p;
  p.grid_cols = 8;
  p.grid_rows = 6;
  p.search_radius = 8;
  p.scales = {1.0};
  const FlowField f = compute_flow(a, b, p);
  ASSERT_EQ(f.vectors.size(), 48u);
  EXPECT_NEAR(f.anchors[0].x(), 19.5, 1e-12);
  EXPECT_NEAR(f.anchors[0].y(), 19.5, 1e-12);
  // border windows cannot follow content leaving the image
  for (int r = 1; r < 5; ++r)
    for (int c = 1; c < 7; ++c) {
      const Vec2& v = f.vectors[std::size_t(r * 8 + c)];
      EXPECT_NEAR(v.x(), 2.5, 0.2);
      EXPECT_NEAR(v.y(), -1.5, 0.2);
    }
}
