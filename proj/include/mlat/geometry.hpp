#pragma once

#include "mlat/image.hpp"

#include <utility>
#include <vector>

namespace mlat {

/// Exact area of the disk of radius r centred at the origin intersected with
/// the axis-aligned rectangle [x0, x1] x [y0, y1].
double circle_rect_area(double r, double x0, double x1, double y0, double y1);

/// Area of the part of a disk of radius r lying on the far side of a chord
/// at signed distance d from the centre (d in [-r, r]).
double circular_segment_area(double r, double d);

/// Pixel-coverage disk kernel stored as row spans: interior pixels have
/// weight 1 and are summed from prefix sums, rim pixels carry fractional
/// coverage. Weights are normalised by `norm`.
struct DiskKernel {
  struct Row {
    int dy = 0;
    int full_lo = 0;
    int full_hi = -1;
    std::vector<std::pair<int, float>> rim;
  };
  double diameter = 0.0;
  std::vector<Row> rows;
  double norm = 1.0;

  /// Dense (2R+1)^2 weights, already normalised. Used by the MTF oracles.
  ImageD dense() const;
};

/// Kernel for a uniform disk of the given diameter in pixels. Diameters
/// below 1e-6 px produce the identity kernel.
DiskKernel make_disk_kernel(double diameter_px);

/// Convolves `src` with `kernel` for output pixels in the half-open window
/// [row0, row1) x [col0, col1), writing into `dst`. Outside `src` is zero.
/// `prefix` holds per-row prefix sums of `src` (cols + 1 entries per row).
void apply_disk_kernel(const ImageF& src, const ImageD& prefix, const DiskKernel& kernel,
                       Eigen::Index row0, Eigen::Index row1, Eigen::Index col0,
                       Eigen::Index col1, ImageF& dst);

ImageD row_prefix_sums(const ImageF& src);

/// Whole-image disk blur.
ImageF disk_blur(const ImageF& src, double diameter_px);

}  // namespace mlat
