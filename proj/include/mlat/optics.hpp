#pragma once

// Paraxial model of a single vision unit. All lengths are micrometres.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <variant>

namespace mlat {

template <typename Scalar>
constexpr Scalar mm_to_um(Scalar mm) { return mm * Scalar(1000); }

template <typename Scalar>
constexpr Scalar um_to_mm(Scalar um) { return um / Scalar(1000); }

/// Radius of the sphere whose cap has sag height h over chord diameter D.
template <typename Scalar>
Scalar sphere_radius_from_sag(Scalar h, Scalar D) {
  if (!(h > 0) || !(D > 0))
    throw std::domain_error("sphere_radius_from_sag: h and D must be positive");
  if (h > D / 2)
    throw std::domain_error("sphere_radius_from_sag: sag taller than a hemisphere");
  return h / 2 + D * D / (8 * h);
}

/// Height of a spherical cap of radius R and chord D at lateral offset x.
/// z(0) is the sag height, z(+-D/2) is zero.
template <typename Scalar>
Scalar sag_profile(Scalar R, Scalar D, Scalar x) {
  using std::abs;
  using std::sqrt;
  if (!(D > 0) || R < D / 2)
    throw std::domain_error("sag_profile: need D > 0 and R >= D/2");
  if (abs(x) > D / 2) throw std::domain_error("sag_profile: |x| > D/2");
  const Scalar half = D / 2;
  const Scalar h = R - sqrt(R * R - half * half);
  return sqrt(R * R - x * x) - (R - h);
}

template <typename Scalar>
Scalar focal_length_planoconvex(Scalar R, Scalar n) {
  if (!(R > 0)) throw std::domain_error("focal_length_planoconvex: R must be positive");
  if (!(n > 1)) throw std::domain_error("focal_length_planoconvex: n must exceed 1");
  return R / (n - 1);
}

/// Image distance v with 1/f = 1/u + 1/v. Requires a real image (u > f).
template <typename Scalar>
Scalar thin_lens_image_distance(Scalar f, Scalar u) {
  if (!(f > 0)) throw std::domain_error("thin_lens_image_distance: f must be positive");
  if (!(u > f)) throw std::domain_error("thin_lens_image_distance: no real image for u <= f");
  return f * u / (u - f);
}

template <typename Scalar>
Scalar magnification(Scalar u, Scalar v) {
  if (!(u > 0) || !(v > 0)) throw std::domain_error("magnification: u and v must be positive");
  return v / u;
}

template <typename Scalar>
struct LensSpec {
  Scalar sag_height_h{};
  Scalar diameter_D{};
  Scalar refractive_index_n{};
  Scalar radius_R{};
  Scalar focal_length_f{};

  static LensSpec from_sag(Scalar h, Scalar D, Scalar n) {
    LensSpec lens;
    lens.sag_height_h = h;
    lens.diameter_D = D;
    lens.refractive_index_n = n;
    lens.radius_R = sphere_radius_from_sag(h, D);
    lens.focal_length_f = focal_length_planoconvex(lens.radius_R, n);
    return lens;
  }
};

template <typename Scalar>
struct PinholeSpec {
  Scalar aperture_diameter{};

  explicit PinholeSpec(Scalar d = Scalar(150)) : aperture_diameter(d) {
    if (!(d > 0)) throw std::domain_error("PinholeSpec: aperture must be positive");
  }
};

template <typename Scalar>
struct ImagingConfig {
  Scalar object_distance_u{};
  Scalar image_distance_v{};
  Scalar aperture_diameter{};
  std::variant<LensSpec<Scalar>, PinholeSpec<Scalar>> element;

  bool is_lens() const { return std::holds_alternative<LensSpec<Scalar>>(element); }

  const LensSpec<Scalar>& lens() const {
    if (!is_lens()) throw std::invalid_argument("ImagingConfig: element is not a lens");
    return std::get<LensSpec<Scalar>>(element);
  }

  /// Lens config whose sensor sits at the conjugate of u.
  static ImagingConfig focused(const LensSpec<Scalar>& lens, Scalar u, Scalar aperture) {
    return {u, thin_lens_image_distance(lens.focal_length_f, u), aperture, lens};
  }
};

template <typename Scalar>
struct DepthOfFieldRange {
  Scalar u_near{};
  Scalar u_far{};  // +infinity when unbounded
  Scalar max_blur_c{};

  bool far_unbounded() const { return std::isinf(u_far); }
};

/// Object distance conjugate to the sensor plane of a lens config.
template <typename Scalar>
Scalar in_focus_object_distance(const ImagingConfig<Scalar>& config) {
  const Scalar f = config.lens().focal_length_f;
  if (!(config.image_distance_v > f))
    throw std::domain_error("in_focus_object_distance: sensor inside focal length");
  return f * config.image_distance_v / (config.image_distance_v - f);
}

/// Geometric circle-of-confusion diameter on the sensor for an object at u_obj.
template <typename Scalar>
Scalar defocus_blur_diameter(const ImagingConfig<Scalar>& config, Scalar u_obj) {
  using std::abs;
  const Scalar f = config.lens().focal_length_f;
  const Scalar v_obj = thin_lens_image_distance(f, u_obj);
  return config.aperture_diameter * abs(config.image_distance_v - v_obj) / v_obj;
}

template <typename Scalar>
Scalar pinhole_blur_diameter(const PinholeSpec<Scalar>& p, Scalar u, Scalar v) {
  if (!(u > 0) || !(v > 0)) throw std::domain_error("pinhole_blur_diameter: u and v must be positive");
  return p.aperture_diameter * (1 + v / u);
}

/// Object-distance band over which defocus blur stays within c_max.
///
/// Blur is A*v*|1/u - 1/u_focus|, so the endpoints are closed-form in 1/u.
/// u_near is limited by the focal length (blur tends to A as u -> f).
template <typename Scalar>
DepthOfFieldRange<Scalar> depth_of_field(const ImagingConfig<Scalar>& config, Scalar c_max) {
  if (c_max < 0) throw std::domain_error("depth_of_field: c_max must be non-negative");
  const Scalar f = config.lens().focal_length_f;
  const Scalar u_focus = in_focus_object_distance(config);
  const Scalar A = config.aperture_diameter;
  const Scalar v = config.image_distance_v;
  if (!(A > 0)) {
    return {f, std::numeric_limits<Scalar>::infinity(), c_max};
  }
  const Scalar slack = c_max / (A * v);
  DepthOfFieldRange<Scalar> range{};
  range.max_blur_c = c_max;
  const Scalar inv_near = 1 / u_focus + slack;
  range.u_near = inv_near < 1 / f ? 1 / inv_near : f;
  const Scalar inv_far = 1 / u_focus - slack;
  range.u_far = inv_far > 0 ? 1 / inv_far : std::numeric_limits<Scalar>::infinity();
  return range;
}

}  // namespace mlat
