#include "mlat/optics.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace mlat;

namespace {

ImagingConfig<double> focused_at(double u) {
  const auto lens = LensSpec<double>::from_sag(120.0, 640.0, 1.41);
  return ImagingConfig<double>::focused(lens, u, 200.0);
}

}  // namespace

TEST(SphereRadius, MatchesArithmetic) {
  const double r = sphere_radius_from_sag(120.0, 640.0);
  const double expected = 60.0 + 640.0 * 640.0 / 960.0;  // 486.666...
  EXPECT_LE(std::abs(r - expected) / expected, 1e-12);
  EXPECT_NEAR(r, 1460.0 / 3.0, 1e-10);
  EXPECT_NEAR(sphere_radius_from_sag(80.0, 640.0), 680.0, 1e-10);
}

TEST(SphereRadius, HemisphereIdentity) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(1.0, 5000.0);
  for (int i = 0; i < 100; ++i) {
    const double h = dist(rng);
    EXPECT_NEAR(sphere_radius_from_sag(h, 2 * h), h, 1e-12 * h);
  }
}

TEST(SphereRadius, RejectsInvalidCaps) {
  EXPECT_THROW(sphere_radius_from_sag(0.0, 640.0), std::domain_error);
  EXPECT_THROW(sphere_radius_from_sag(-1.0, 640.0), std::domain_error);
  EXPECT_THROW(sphere_radius_from_sag(120.0, 0.0), std::domain_error);
  EXPECT_THROW(sphere_radius_from_sag(400.0, 640.0), std::domain_error);
}

TEST(SagProfile, ApexEdgeAndInterior) {
  EXPECT_NEAR(sag_profile(250.0, 500.0, 0.0), 250.0, 1e-9);
  const double R = sphere_radius_from_sag(120.0, 640.0);
  EXPECT_NEAR(sag_profile(R, 640.0, 320.0), 0.0, 1e-9);
  EXPECT_NEAR(sag_profile(R, 640.0, -320.0), 0.0, 1e-9);
  EXPECT_NEAR(sag_profile(R, 640.0, 160.0), oracle::cap_height_by_bisection(R, 640.0, 160.0), 1e-9);
  EXPECT_THROW(sag_profile(R, 640.0, 321.0), std::domain_error);
}

TEST(SagProfile, RoundTripThroughRadius) {
  for (double h : {40.0, 80.0, 120.0, 140.0, 320.0}) {
    const double R = sphere_radius_from_sag(h, 640.0);
    EXPECT_NEAR(sag_profile(R, 640.0, 0.0), h, 1e-9 * h);
    EXPECT_NEAR(sag_profile(R, 640.0, 320.0), 0.0, 1e-9 * h);
  }
}

TEST(FocalLength, PlanoConvex) {
  const double R = sphere_radius_from_sag(120.0, 640.0);
  EXPECT_NEAR(focal_length_planoconvex(R, 1.41), 1186.99, 0.01);
  EXPECT_NEAR(focal_length_planoconvex(680.0, 1.41), 1658.54, 0.01);
  EXPECT_NEAR(focal_length_planoconvex(1000.0 * 0.5, 1.5), 1000.0, 1e-9);
  EXPECT_THROW(focal_length_planoconvex(R, 1.0), std::domain_error);
}

TEST(ThinLens, Conjugates) {
  const double f = 1187.0;
  EXPECT_NEAR(thin_lens_image_distance(f, 2 * f), 2 * f, 1e-9);
  EXPECT_NEAR(thin_lens_image_distance(f, 1e9 * f) / f, 1.0, 1e-6);
  EXPECT_NEAR(thin_lens_image_distance(f, 3800.0), 1726.0, 1.0);
  const double v = thin_lens_image_distance(f, 4321.0);
  EXPECT_NEAR(thin_lens_image_distance(f, v), 4321.0, 1e-6);
  EXPECT_THROW(thin_lens_image_distance(f, f), std::domain_error);
}

TEST(Magnification, Ratio) {
  EXPECT_DOUBLE_EQ(magnification(2374.0, 2374.0), 1.0);
  EXPECT_NEAR(magnification(3800.0, 1726.0), 0.454, 1e-3);
  EXPECT_DOUBLE_EQ(magnification(5.0 * 300.0, 300.0), 0.2);
  EXPECT_THROW(magnification(0.0, 1.0), std::domain_error);
}

TEST(DefocusBlur, ZeroAtConjugateAndTracedElsewhere) {
  const auto cfg = focused_at(3800.0);
  EXPECT_NEAR(defocus_blur_diameter(cfg, 3800.0), 0.0, 1e-9);
  const double f = cfg.lens().focal_length_f;
  for (double u : {3000.0, 4000.0, 5000.0})
    EXPECT_NEAR(defocus_blur_diameter(cfg, u), oracle::traced_blur(f, 200.0, cfg.image_distance_v, u), 1e-9);
  auto stopped = cfg;
  stopped.aperture_diameter = 0;
  EXPECT_EQ(defocus_blur_diameter(stopped, 4000.0), 0.0);
  EXPECT_THROW(defocus_blur_diameter(cfg, f), std::domain_error);
}

TEST(DefocusBlur, SymmetricInInverseDistance) {
  const auto cfg = focused_at(3800.0);
  for (double e : {1e-5, 3e-5, 6e-5}) {
    const double near = 1.0 / (1.0 / 3800.0 + e), far = 1.0 / (1.0 / 3800.0 - e);
    EXPECT_NEAR(defocus_blur_diameter(cfg, near), defocus_blur_diameter(cfg, far), 1e-6);
  }
  EXPECT_LT(defocus_blur_diameter(cfg, 3900.0), defocus_blur_diameter(cfg, 4100.0));
}

TEST(PinholeBlur, Arithmetic) {
  const PinholeSpec<double> p100(100.0), p150(150.0);
  EXPECT_NEAR(pinhole_blur_diameter(p100, 1e12, 1.0), 100.0, 1e-6);
  EXPECT_DOUBLE_EQ(pinhole_blur_diameter(p100, 2000.0, 2000.0), 200.0);
  EXPECT_NEAR(pinhole_blur_diameter(p150, 3800.0, 1200.0), 197.37, 0.01);
  EXPECT_GT(pinhole_blur_diameter(p150, 5000.0, 10.0), 150.0);
  EXPECT_THROW(PinholeSpec<double>(0.0), std::domain_error);
}

TEST(DepthOfField, EndpointsMatchBisection) {
  const auto cfg = focused_at(3800.0);
  const double c = 4.8;
  const auto dof = depth_of_field(cfg, c);
  const double f = cfg.lens().focal_length_f;
  auto g = [&](double u) { return defocus_blur_diameter(cfg, u) - c; };
  EXPECT_NEAR(dof.u_near, oracle::bisect(g, 1.001 * f, 3800.0), 1e-6 * dof.u_near);
  EXPECT_NEAR(dof.u_far, oracle::bisect(g, 3800.0, 1e6), 1e-6 * dof.u_far);
  EXPECT_NEAR(defocus_blur_diameter(cfg, dof.u_near), c, 1e-6 * c);
  EXPECT_NEAR(defocus_blur_diameter(cfg, dof.u_far), c, 1e-6 * c);
  EXPECT_LE(dof.u_near, dof.u_far);
}

TEST(DepthOfField, DegenerateAndMonotone) {
  const auto cfg = focused_at(3800.0);
  const auto zero = depth_of_field(cfg, 0.0);
  EXPECT_NEAR(zero.u_near, 3800.0, 1e-6);
  EXPECT_NEAR(zero.u_far, 3800.0, 1e-6);
  auto half = cfg;
  half.aperture_diameter /= 2;
  const auto wide = depth_of_field(half, 4.8), narrow = depth_of_field(cfg, 4.8);
  EXPECT_LT(wide.u_near, narrow.u_near);
  EXPECT_GT(wide.u_far, narrow.u_far);
  const auto unbounded = depth_of_field(cfg, 1000.0);
  EXPECT_TRUE(unbounded.far_unbounded());
}
