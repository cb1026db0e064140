#include "mlat/scene.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace mlat {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

float unit_float(std::uint64_t bits) { return float((bits >> 40) & 0xFFFFFF) / float(0xFFFFFF); }

bool inside_glyph(char glyph, double cell, const Vec2& center, double x, double y) {
  const double x0 = center.x() - 0.5 * kGlyphCols * cell;
  const double y0 = center.y() - 0.5 * kGlyphRows * cell;
  const double cx = (x - x0) / cell;
  const double cy = (y - y0) / cell;
  if (cx < 0 || cy < 0) return false;
  return glyph_cell(glyph, int(cy), int(cx));
}

// Sphere-cap core with power-law skirt; returns dz <= 0.
double sphere_dz(double r, double radius, double depth, double decay) {
  if (depth <= 0) return 0.0;
  const double a = std::sqrt(radius * depth);
  if (r <= a) return -(depth - r * r / (2 * radius));
  return -0.5 * depth * std::pow(a / r, decay);
}

// Box mean over a (2*ri+1) x (2*rj+1) neighbourhood, truncated at the borders.
ImageD smooth_box(const ImageD& m, int ri, int rj) {
  ImageD out = ImageD::Zero(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      double acc = 0;
      int n = 0;
      for (int di = -ri; di <= ri; ++di)
        for (int dj = -rj; dj <= rj; ++dj) {
          const Eigen::Index a = i + di, b = j + dj;
          if (a < 0 || b < 0 || a >= m.rows() || b >= m.cols()) continue;
          acc += m(a, b);
          ++n;
        }
      out(i, j) = acc / n;
    }
  }
  return out;
}

}  // namespace

PatternFn uniform_pattern(const Color& c) {
  return [c](double, double) { return c; };
}

PatternFn make_pattern(const MarkerPattern& mp) {
  switch (mp.kind) {
    case PatternKind::dot_grid: {
      if (!(mp.dot_radius_um > 0) || !(mp.dot_pitch_um > 2 * mp.dot_radius_um))
        throw std::invalid_argument("dot_grid: pitch must exceed twice the dot radius");
      return [mp](double x, double y) -> Color {
        const double p = mp.dot_pitch_um;
        const double gx = std::round((x - mp.dot_origin_um.x()) / p);
        const double gy = std::round((y - mp.dot_origin_um.y()) / p);
        const double ddx = x - (mp.dot_origin_um.x() + gx * p);
        const double ddy = y - (mp.dot_origin_um.y() + gy * p);
        return ddx * ddx + ddy * ddy <= mp.dot_radius_um * mp.dot_radius_um ? mp.foreground
                                                                                 : mp.background;
      };
    }
    case PatternKind::random_color: {
      if (!(mp.cell_um > 0)) throw std::invalid_argument("random_color: cell size must be positive");
      const double cell = mp.cell_um;
      const std::uint64_t seed = mp.seed;
      return [cell, seed](double x, double y) -> Color {
        const auto ix = std::int64_t(std::floor(x / cell));
        const auto iy = std::int64_t(std::floor(y / cell));
        std::uint64_t h = splitmix64(seed ^ splitmix64(std::uint64_t(ix) * 0x100000001B3ull ^
                                                       splitmix64(std::uint64_t(iy))));
        const float r = unit_float(h);
        h = splitmix64(h);
        const float g = unit_float(h);
        h = splitmix64(h);
        const float b = unit_float(h);
        return {r, g, b};
      };
    }
    case PatternKind::edge_target: {
      const double t = mp.edge_angle_deg * std::numbers::pi / 180.0;
      const Vec2 normal(std::cos(t), -std::sin(t));
      return [mp, normal](double x, double y) -> Color {
        return normal.dot(Vec2(x, y) - mp.center_um) > 0 ? mp.foreground : mp.background;
      };
    }
    case PatternKind::bar_target: {
      if (!(mp.bar_lp_per_mm > 0)) throw std::invalid_argument("bar_target: frequency must be positive");
      const double period = 1000.0 / mp.bar_lp_per_mm;
      return [mp, period](double x, double y) -> Color {
        Vec2 d = Vec2(x, y) - mp.center_um;
        if (mp.bar_orientation == BarOrientation::horizontal) d = Vec2(d.y(), d.x());
        // bars vary along d.x; length 5 periods along d.y
        if (std::abs(d.y()) > 2.5 * period) return mp.background;
        for (int k = -1; k <= 1; ++k)
          if (std::abs(d.x() - k * period) < 0.25 * period) return mp.foreground;
        return mp.background;
      };
    }
    case PatternKind::shape_stamp: {
      if (!has_glyph(mp.glyph)) throw std::invalid_argument("shape_stamp: unknown glyph");
      if (!(mp.glyph_cell_um > 0)) throw std::invalid_argument("shape_stamp: glyph cell must be positive");
      return [mp](double x, double y) -> Color {
        return inside_glyph(mp.glyph, mp.glyph_cell_um, mp.center_um, x, y) ? mp.foreground
                                                                                 : mp.background;
      };
    }
  }
  throw std::invalid_argument("make_pattern: unknown kind");
}

std::string Indenter::describe() const {
  std::ostringstream os;
  switch (shape) {
    case IndenterShape::sphere: os << "sphere(R=" << radius_um << "um)"; break;
    case IndenterShape::corner: os << "corner(w=" << width_um << "um)"; break;
    case IndenterShape::two_points: os << "two_points(gap=" << gap_um << "um)"; break;
    case IndenterShape::coin_edge: os << "coin_edge(R=" << radius_um << "um,arc=" << arc_deg << "deg)"; break;
    case IndenterShape::glyph: os << "glyph('" << glyph << "',cell=" << glyph_cell_um << "um)"; break;
  }
  os << " at (" << x_um << "," << y_um << ") depth " << depth_um << "um offset (" << tx_um << ","
     << ty_um << ")";
  return os.str();
}

DeformationField DeformationField::zero(const TouchLayer& layer) {
  if (layer.grid_cols < 2 || layer.grid_rows < 2) throw std::invalid_argument("TouchLayer: grid too small");
  if (!(layer.width_um > 0) || !(layer.height_um > 0)) throw std::invalid_argument("TouchLayer: empty extent");
  DeformationField f;
  f.width_um = layer.width_um;
  f.height_um = layer.height_um;
  f.dx = ImageD::Zero(layer.grid_rows, layer.grid_cols);
  f.dy = f.dx;
  f.dz = f.dx;
  f.indenter = "none";
  return f;
}

double DeformationField::sample_dz(double x, double y) const {
  return bilinear(dz, x / spacing_x(), y / spacing_y());
}

Eigen::Vector3d DeformationField::sample(double x, double y) const {
  const double gx = x / spacing_x();
  const double gy = y / spacing_y();
  return {bilinear(dx, gx, gy), bilinear(dy, gx, gy), bilinear(dz, gx, gy)};
}

bool DeformationField::is_zero() const {
  return (dx == 0).all() && (dy == 0).all() && (dz == 0).all();
}

DeformationField indent(const Indenter& ind, const TouchLayer& layer) {
  DeformationField f = DeformationField::zero(layer);
  f.indenter = ind.describe();
  if (ind.depth_um < 0) throw std::invalid_argument("indent: negative depth");
  if (ind.depth_um > layer.max_depth_um) throw std::invalid_argument("indent: depth beyond elastic bound");
  if (ind.x_um < 0 || ind.y_um < 0 || ind.x_um > layer.width_um || ind.y_um > layer.height_um)
    throw std::invalid_argument("indent: indenter outside layer extent");
  if (ind.depth_um == 0) return f;

  const double delta = ind.depth_um;
  // envelope s in [0, 1]; dz = -delta * s for every shape
  ImageD envelope = ImageD::Zero(f.rows(), f.cols());

  auto for_nodes = [&](auto&& fn) {
    for (Eigen::Index i = 0; i < f.rows(); ++i)
      for (Eigen::Index j = 0; j < f.cols(); ++j) envelope(i, j) = fn(f.node_position(i, j));
  };

  switch (ind.shape) {
    case IndenterShape::sphere: {
      if (!(ind.radius_um > 0)) throw std::invalid_argument("indent: sphere radius must be positive");
      const Vec2 c(ind.x_um, ind.y_um);
      for_nodes([&](const Vec2& p) {
        return -sphere_dz((p - c).norm(), ind.radius_um, delta, layer.decay_exponent) / delta;
      });
      break;
    }
    case IndenterShape::two_points: {
      if (!(ind.radius_um > 0) || !(ind.gap_um > 0)) throw std::invalid_argument("indent: bad two_points");
      const Vec2 c1(ind.x_um - ind.gap_um / 2, ind.y_um);
      const Vec2 c2(ind.x_um + ind.gap_um / 2, ind.y_um);
      for_nodes([&](const Vec2& p) {
        const double z1 = sphere_dz((p - c1).norm(), ind.radius_um, delta, layer.decay_exponent);
        const double z2 = sphere_dz((p - c2).norm(), ind.radius_um, delta, layer.decay_exponent);
        return -std::min(z1, z2) / delta;
      });
      break;
    }
    case IndenterShape::corner: {
      if (!(ind.width_um > 0)) throw std::invalid_argument("indent: corner width must be positive");
      for_nodes([&](const Vec2& p) {
        return (std::abs(p.x() - ind.x_um) <= ind.width_um / 2 && std::abs(p.y() - ind.y_um) <= ind.width_um / 2)
                   ? 1.0
                   : 0.0;
      });
      envelope = smooth_box(envelope, 1, 1);
      break;
    }
    case IndenterShape::coin_edge: {
      if (!(ind.radius_um > 0) || !(ind.width_um > 0)) throw std::invalid_argument("indent: bad coin_edge");
      const Vec2 c(ind.x_um, ind.y_um + ind.radius_um);
      const double half_arc = 0.5 * ind.arc_deg * std::numbers::pi / 180.0;
      for_nodes([&](const Vec2& p) {
        const Vec2 d = p - c;
        const double r = d.norm();
        const double ang = std::atan2(d.x(), -d.y());
        return (std::abs(r - ind.radius_um) <= ind.width_um / 2 && std::abs(ang) <= half_arc) ? 1.0 : 0.0;
      });
      envelope = smooth_box(envelope, 1, 1);
      break;
    }
    case IndenterShape::glyph: {
      if (!has_glyph(ind.glyph)) throw std::invalid_argument("indent: unknown glyph");
      const Vec2 c(ind.x_um, ind.y_um);
      for_nodes([&](const Vec2& p) {
        return inside_glyph(ind.glyph, ind.glyph_cell_um, c, p.x(), p.y()) ? 1.0 : 0.0;
      });
      // smooth the boundary by one field cell
      envelope = smooth_box(envelope, 1, 1);
      break;
    }
  }

  f.dz = -delta * envelope;
  f.dx = ind.tx_um * envelope;
  f.dy = ind.ty_um * envelope;
  const double cell = f.cell_area();
  f.normal_force_mN = layer.k_n * f.dz.abs().sum() * cell;
  f.tangential_force_mN = layer.k_t * (f.dx.square() + f.dy.square()).sqrt().sum() * cell;
  return f;
}

ImageF footprint_mask(const DeformationField& field, double depth_um, double fraction) {
  return ((-field.dz) >= fraction * depth_um).cast<float>();
}

DeformedScene::DeformedScene(PatternFn pattern, double nominal_z_um,
                             std::shared_ptr<const DeformationField> field)
    : pattern_(std::move(pattern)), nominal_z_um_(nominal_z_um), field_(std::move(field)) {
  if (!pattern_) throw std::invalid_argument("DeformedScene: empty pattern");
  if (field_ && field_->is_zero()) field_.reset();
}

Color DeformedScene::color(double x, double y) const {
  if (!field_) return pattern_(x, y);
  const Eigen::Vector3d d = field_->sample(x, y);
  return pattern_(x - d.x(), y - d.y());
}

double DeformedScene::depth(double x, double y) const {
  if (!field_) return nominal_z_um_;
  return nominal_z_um_ + field_->sample_dz(x, y);
}

}  // namespace mlat
