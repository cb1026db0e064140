#pragma once

#include "mlat/image.hpp"
#include "mlat/renderer.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mlat {

// ---------------------------------------------------------------------------
// Stitching

/// Rotates every tile by 180 degrees, crops `crop_px` from each edge and
/// places the tiles at their grid positions.
RgbImage stitch(const RawMosaic& mosaic, int crop_px);

// ---------------------------------------------------------------------------
// Blobs

struct Blob {
  Vec2 centroid{0, 0};  // pixels, intensity weighted
  double area = 0;      // pixel count
  Color mean_color{0, 0, 0};
  int label = 0;
};

/// Otsu threshold of a [0, 1] image (256 bins).
double otsu_threshold(const ImageF& gray);

/// 8-connected components of gray >= threshold with at least min_area
/// pixels, labelled in raster order of their first pixel.
std::vector<Blob> detect_blobs(const ImageF& gray, double threshold, double min_area,
                               const RgbImage* color = nullptr);

struct BlobMatch {
  int prev = -1;
  int cur = -1;
  Vec2 delta{0, 0};
  double area_ratio = 1.0;
};

struct TrackResult {
  std::vector<BlobMatch> matches;
  std::vector<int> unmatched_prev;
  std::vector<int> unmatched_cur;
};

/// Greedy nearest-centroid matching; pairs further apart than gate_px are
/// never matched.
TrackResult track_blob(const std::vector<Blob>& prev, const std::vector<Blob>& cur, double gate_px);

// ---------------------------------------------------------------------------
// Optical flow

/// Template magnifications tried by default: 0.9 to 1.3 in steps of 0.05.
std::vector<double> default_match_scales();

struct FlowParams {
  int grid_cols = 16;
  int grid_rows = 13;
  int search_radius = 32;
  double variance_floor = 1e-6;
  int tile_width = 0;  // stitched tile size; when set, windows never cross a seam
  int tile_height = 0;
  std::vector<double> scales = default_match_scales();
};

struct FlowField {
  int grid_cols = 0;
  int grid_rows = 0;
  std::vector<Vec2> anchors;       // patch centres, row-major
  std::vector<Vec2> vectors;       // U_s^i in pixels
  std::vector<double> confidence;  // peak NCC, zero when untextured
};

/// Pixel rectangle [x0, x1) x [y0, y1).
struct Box {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

struct PointMatch {
  Vec2 displacement{0, 0};
  double confidence = 0;
  double scale = 1.0;  // template magnification of the best match
};

struct MatchOptions {
  const std::vector<Box>* bounds = nullptr;  // window i is shifted to lie inside bounds[i]
  bool confine = false;                      // displaced windows must stay inside the bounds too
  std::vector<double> scales{1.0};           // template magnifications tried
  // when set, point i is only searched +-2 px around hints[i] at full resolution
  // with the single magnification hint_scales[i]
  const std::vector<Vec2>* hints = nullptr;
  const std::vector<double>* hint_scales = nullptr;
};

/// NCC block matching of windows centred on `centers`, searched
/// coarse-to-fine within +-radius and refined by a parabola fit.
std::vector<PointMatch> match_points(const ImageF& prev, const ImageF& cur, const std::vector<Vec2>& centers,
                                     int window_w, int window_h, int radius, double variance_floor,
                                     const MatchOptions& options = {});

/// Tile rectangle containing p, or the whole image when tile sizes are zero.
Box tile_box(const ImageF& img, const Vec2& p, int tile_width, int tile_height);

FlowField compute_flow(const ImageF& prev, const ImageF& cur, const FlowParams& params);

/// Pixel bounds of a regular patch grid: edges[k] = round(k * extent / n).
std::vector<int> patch_edges(int extent, int n);

// ---------------------------------------------------------------------------
// Area factor / tangential factor

enum class AreaMethod { blob, quad };

struct AreaSegmentation {
  int grid_cols = 16;
  int grid_rows = 13;
  AreaMethod method = AreaMethod::quad;
  int search_radius = 32;
  std::optional<double> blob_threshold;  // Otsu on the initial frame when empty
  double min_blob_area = 8;
  double track_gate_px = 10;
  int min_window_px = 40;  // quad node windows never smaller than this
  double min_confidence = 0.5;  // quad nodes matching below this NCC are untrackable
  double consistency_px = 0;  // > 0: forward-backward mismatch above this marks a node untrackable
  int tile_width = 0;
  int tile_height = 0;
  std::vector<double> scales = default_match_scales();
};

struct AreaPatchGrid {
  int grid_cols = 0;
  int grid_rows = 0;
  std::vector<double> area;       // S_i
  std::vector<double> area_init;  // S_i^init
  std::vector<char> tracked;      // 0 where S_i was set neutral; empty means all tracked

  int count() const { return grid_cols * grid_rows; }
  double ratio(int i) const { return area[std::size_t(i)] / area_init[std::size_t(i)]; }
  bool is_tracked(int i) const { return tracked.empty() || tracked[std::size_t(i)]; }
};

AreaPatchGrid segment_area_patches(const ImageF& init, const ImageF& cur, const AreaSegmentation& params);

/// Sum over patches of (S_i / S_i^init - 1).
double area_factor(const AreaPatchGrid& grid);

/// Norm of the vector sum of the per-patch flow vectors.
double tangential_factor(const FlowField& flow);

// ---------------------------------------------------------------------------
// Depth maps

struct DepthMap {
  ImageF depth_um;  // positive = pressed toward the sensor
  std::string method;
  double scale = 1.0;
};

/// Per-patch depth u * (1 - 1/sqrt(S_i/S_i^init)) times the calibrated scale,
/// bilinearly interpolated to width x height. Patches whose area ratio is
/// within noise_floor of 1 are zero; untracked patches take the mean of
/// their tracked neighbours. Throws when `scale` is empty.
DepthMap depth_map(const AreaPatchGrid& grid, std::optional<double> scale, double u_nominal_um, int width,
                   int height, double noise_floor = 0.0);

/// Per-patch depth values before interpolation (row-major), unscaled.
std::vector<double> patch_depths(const AreaPatchGrid& grid, double u_nominal_um, double noise_floor = 0.0);

}  // namespace mlat
