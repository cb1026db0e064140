#pragma once

// The virtual touch layer. Coordinates are micrometres in the layer plane,
// origin at the top-left corner, x to the right, y downwards.

#include "mlat/image.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <string>

namespace mlat {

enum class PatternKind { dot_grid, random_color, edge_target, bar_target, shape_stamp };
enum class BarOrientation { vertical, horizontal };

struct MarkerPattern {
  PatternKind kind = PatternKind::random_color;
  double width_um = 0;
  double height_um = 0;
  Color foreground{1.0f, 1.0f, 1.0f};
  Color background{0.0f, 0.0f, 0.0f};

  // dot_grid
  double dot_pitch_um = 1000;
  double dot_radius_um = 200;
  Vec2 dot_origin_um{500, 500};

  // random_color
  double cell_um = 30;
  std::uint64_t seed = 1;

  // edge_target, bar_target, shape_stamp: feature centre
  Vec2 center_um{0, 0};

  // edge_target: tilt of the edge from vertical; bright side is +x
  double edge_angle_deg = 5;

  // bar_target: three bright bars of half-period width
  double bar_lp_per_mm = 10;
  BarOrientation bar_orientation = BarOrientation::vertical;

  // shape_stamp
  char glyph = '1';
  double glyph_cell_um = 100;
};

using PatternFn = std::function<Color(double x_um, double y_um)>;

/// Continuous colour function for a marker pattern. Throws
/// std::invalid_argument for inconsistent parameters.
PatternFn make_pattern(const MarkerPattern& mp);

PatternFn uniform_pattern(const Color& c);

/// 5x7 bitmap glyphs for digits and the letters U, S, T.
/// Returns true when font cell (row, col) of `glyph` is set.
bool glyph_cell(char glyph, int row, int col);
bool has_glyph(char glyph);
constexpr int kGlyphRows = 7;
constexpr int kGlyphCols = 5;

struct TouchLayer {
  double width_um = 0;
  double height_um = 0;
  int grid_cols = 256;
  int grid_rows = 208;
  double decay_exponent = 2.0;
  double k_n = 1e-6;  // mN per um^3 of displaced volume
  double k_t = 1e-6;  // mN per um^3 of lateral displacement-area
  double max_depth_um = 800;
};

enum class IndenterShape { sphere, corner, two_points, coin_edge, glyph };

struct Indenter {
  IndenterShape shape = IndenterShape::sphere;
  double radius_um = 2000;      // sphere radius, coin radius, or tip radius for two_points
  double width_um = 500;        // corner width, coin edge thickness
  double gap_um = 600;          // two_points separation
  double arc_deg = 60;          // coin_edge arc span
  char glyph = '1';
  double glyph_cell_um = 300;   // size of one font cell for glyph indenters
  double x_um = 0;
  double y_um = 0;
  double depth_um = 0;
  double tx_um = 0;
  double ty_um = 0;

  std::string describe() const;
};

/// Per-node surface displacement over the layer. Nodes span the full layer
/// extent: node (i, j) sits at (j * W / (cols - 1), i * H / (rows - 1)).
struct DeformationField {
  double width_um = 0;
  double height_um = 0;
  ImageD dx, dy, dz;
  std::string indenter;
  double normal_force_mN = 0;
  double tangential_force_mN = 0;

  static DeformationField zero(const TouchLayer& layer);

  Eigen::Index rows() const { return dz.rows(); }
  Eigen::Index cols() const { return dz.cols(); }
  double spacing_x() const { return width_um / double(cols() - 1); }
  double spacing_y() const { return height_um / double(rows() - 1); }
  double cell_area() const { return spacing_x() * spacing_y(); }
  Vec2 node_position(Eigen::Index i, Eigen::Index j) const {
    return {double(j) * spacing_x(), double(i) * spacing_y()};
  }

  double sample_dz(double x, double y) const;
  Eigen::Vector3d sample(double x, double y) const;
  bool is_zero() const;
};

/// Deformation produced by pressing an indenter into the layer.
DeformationField indent(const Indenter& indenter, const TouchLayer& layer);

/// Ground-truth footprint mask of an indenter on the field grid (1 where the
/// surface is displaced by more than `fraction` of the press depth).
ImageF footprint_mask(const DeformationField& field, double depth_um, double fraction = 0.5);

/// Pattern observed through a deformed layer. Depth is the distance from
/// the surface point to the sensor plane: nominal_z + dz.
class DeformedScene {
 public:
  DeformedScene(PatternFn pattern, double nominal_z_um,
                std::shared_ptr<const DeformationField> field = nullptr);

  Color color(double x, double y) const;
  double depth(double x, double y) const;
  double nominal_z() const { return nominal_z_um_; }
  bool deformed() const { return field_ != nullptr; }
  const DeformationField* field() const { return field_.get(); }

 private:
  PatternFn pattern_;
  double nominal_z_um_;
  std::shared_ptr<const DeformationField> field_;
};

inline DeformedScene apply_deformation(PatternFn pattern, double nominal_z_um,
                                       std::shared_ptr<const DeformationField> field) {
  return DeformedScene(std::move(pattern), nominal_z_um, std::move(field));
}

}  // namespace mlat
