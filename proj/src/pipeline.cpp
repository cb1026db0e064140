#include "mlat/pipeline.hpp"

#include <array>
#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace mlat {

RgbImage stitch(const RawMosaic& mosaic, int crop_px) {
  if (mosaic.rows <= 0 || mosaic.cols <= 0 || int(mosaic.tiles.size()) != mosaic.rows * mosaic.cols)
    throw std::invalid_argument("stitch: missing tile");
  const Eigen::Index h = mosaic.tiles[0].rows(), w = mosaic.tiles[0].cols();
  for (const auto& t : mosaic.tiles)
    if (t.rows() != h || t.cols() != w) throw std::invalid_argument("stitch: inconsistent tile sizes");
  if (crop_px < 0 || 2 * crop_px >= h || 2 * crop_px >= w) throw std::invalid_argument("stitch: crop too large");
  const Eigen::Index ch = h - 2 * crop_px, cw = w - 2 * crop_px;
  RgbImage out(mosaic.rows * ch, mosaic.cols * cw);
  for (int r = 0; r < mosaic.rows; ++r)
    for (int c = 0; c < mosaic.cols; ++c) {
      const RgbImage& t = mosaic.tile(r, c);
      for (int k = 0; k < 3; ++k)
        out.channel[k].block(r * ch, c * cw, ch, cw) =
            t.channel[k].reverse().block(crop_px, crop_px, ch, cw);
    }
  return out;
}

namespace {

double shoelace(const std::array<Vec2, 4>& q) {
  double a = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    const Vec2& p = q[i];
    const Vec2& n = q[(i + 1) % 4];
    a += p.x() * n.y() - n.x() * p.y();
  }
  return 0.5 * std::abs(a);
}

AreaPatchGrid quad_areas(const ImageF& init, const ImageF& cur, const AreaSegmentation& params) {
  const auto xs = patch_edges(int(init.cols()), params.grid_cols);
  const auto ys = patch_edges(int(init.rows()), params.grid_rows);
  const int ww = std::max(int(init.cols()) / params.grid_cols, params.min_window_px);
  const int wh = std::max(int(init.rows()) / params.grid_rows, params.min_window_px);

  // quad corners per patch, kept inside the tile holding the patch centre
  std::vector<Vec2> points;
  std::vector<Box> boxes;
  std::map<std::array<int, 6>, std::size_t> index;
  auto node = [&](double x, double y, const Box& b) {
    const std::array<int, 6> key{int(std::lround(2 * x)), int(std::lround(2 * y)), b.x0, b.y0, b.x1, b.y1};
    auto [it, fresh] = index.try_emplace(key, points.size());
    if (fresh) {
      points.emplace_back(x, y);
      boxes.push_back(b);
    }
    return it->second;
  };
  // corner coordinates along one axis: inside the range where a w-wide
  // window fits in [b0, b1), spanning at least the patch length
  auto span = [](double p0, double p1, int b0, int b1, int w) {
    const double v0 = b0 + 0.5 * (w - 1), v1 = b1 - 0.5 * (w + 1);
    const double len = std::min(p1 - p0, v1 - v0);
    double lo = std::max(p0 - 0.5, v0), hi = std::min(p1 - 0.5, v1);
    if (hi - lo < len) {
      const double mid = std::clamp(0.5 * (lo + hi), v0 + 0.5 * len, v1 - 0.5 * len);
      lo = mid - 0.5 * len;
      hi = mid + 0.5 * len;
    }
    return std::pair<double, double>{lo, hi};
  };

  std::vector<std::array<std::size_t, 4>> quads;
  for (int r = 0; r < params.grid_rows; ++r)
    for (int c = 0; c < params.grid_cols; ++c) {
      const double x0 = xs[std::size_t(c)], x1 = xs[std::size_t(c) + 1];
      const double y0 = ys[std::size_t(r)], y1 = ys[std::size_t(r) + 1];
      const Box b = tile_box(init, Vec2(0.5 * (x0 + x1) - 0.5, 0.5 * (y0 + y1) - 0.5), params.tile_width,
                             params.tile_height);
      const auto [lx, hx] = span(x0, x1, b.x0, b.x1, ww);
      const auto [ly, hy] = span(y0, y1, b.y0, b.y1, wh);
      quads.push_back({node(lx, ly, b), node(hx, ly, b), node(hx, hy, b), node(lx, hy, b)});
    }
  auto m = match_points(init, cur, points, ww, wh, params.search_radius, 1e-6, {&boxes, true, params.scales});

  if (params.consistency_px > 0) {
    // forward-backward check: matching back from the found position must return
    std::vector<Vec2> back_points, hints;
    std::vector<double> inverse;
    for (std::size_t i = 0; i < points.size(); ++i) {
      back_points.push_back(points[i] + m[i].displacement);
      hints.push_back(-m[i].displacement);
      inverse.push_back(1.0 / m[i].scale);
    }
    const auto back = match_points(cur, init, back_points, ww, wh, params.search_radius, 1e-6,
                                   {&boxes, true, {1.0}, &hints, &inverse});
    for (std::size_t i = 0; i < points.size(); ++i)
      if ((m[i].displacement + back[i].displacement).norm() > params.consistency_px || back[i].confidence <= 0)
        m[i].confidence = 0;
  }

  AreaPatchGrid g;
  g.grid_cols = params.grid_cols;
  g.grid_rows = params.grid_rows;
  for (int r = 0; r < params.grid_rows; ++r)
    for (int c = 0; c < params.grid_cols; ++c) {
      const auto& q = quads[std::size_t(r * params.grid_cols + c)];
      std::array<Vec2, 4> before, after;
      bool trackable = true;
      for (std::size_t i = 0; i < 4; ++i) {
        before[i] = points[q[i]];
        after[i] = points[q[i]] + m[q[i]].displacement;
        if (m[q[i]].confidence <= std::max(0.0, params.min_confidence)) trackable = false;
      }
      const double a0 = double(xs[std::size_t(c) + 1] - xs[std::size_t(c)]) * (ys[std::size_t(r) + 1] - ys[std::size_t(r)]);
      const double q0 = shoelace(before);
      g.area_init.push_back(a0);
      g.area.push_back(trackable && q0 > 0 ? a0 * shoelace(after) / q0 : a0);
      g.tracked.push_back(trackable && q0 > 0);
    }
  return g;
}

AreaPatchGrid blob_areas(const ImageF& init, const ImageF& cur, const AreaSegmentation& params) {
  const double thr = params.blob_threshold ? *params.blob_threshold : otsu_threshold(init);
  const auto b0 = detect_blobs(init, thr, params.min_blob_area);
  const auto b1 = detect_blobs(cur, thr, params.min_blob_area);
  const auto tr = track_blob(b0, b1, params.track_gate_px);

  const auto xs = patch_edges(int(init.cols()), params.grid_cols);
  const auto ys = patch_edges(int(init.rows()), params.grid_rows);
  auto patch_of = [&](const Vec2& p) {
    int c = 0, r = 0;
    while (c + 1 < params.grid_cols && p.x() + 0.5 >= xs[std::size_t(c) + 1]) ++c;
    while (r + 1 < params.grid_rows && p.y() + 0.5 >= ys[std::size_t(r) + 1]) ++r;
    return std::size_t(r * params.grid_cols + c);
  };

  AreaPatchGrid g;
  g.grid_cols = params.grid_cols;
  g.grid_rows = params.grid_rows;
  g.area.assign(std::size_t(g.count()), 0.0);
  g.area_init.assign(std::size_t(g.count()), 0.0);
  std::vector<double> current(b0.size());
  for (std::size_t i = 0; i < b0.size(); ++i) current[i] = b0[i].area;  // unmatched stay neutral
  for (const auto& m : tr.matches) current[std::size_t(m.prev)] = b1[std::size_t(m.cur)].area;
  g.tracked.assign(std::size_t(g.count()), 0);
  for (std::size_t i = 0; i < b0.size(); ++i) {
    const std::size_t k = patch_of(b0[i].centroid);
    g.area_init[k] += b0[i].area;
    g.area[k] += current[i];
    g.tracked[k] = 1;
  }
  for (int r = 0; r < g.grid_rows; ++r)
    for (int c = 0; c < g.grid_cols; ++c) {
      const std::size_t k = std::size_t(r * g.grid_cols + c);
      if (g.area_init[k] > 0) continue;
      const double a = double(xs[std::size_t(c) + 1] - xs[std::size_t(c)]) * (ys[std::size_t(r) + 1] - ys[std::size_t(r)]);
      g.area_init[k] = g.area[k] = a;
    }
  return g;
}

}  // namespace

AreaPatchGrid segment_area_patches(const ImageF& init, const ImageF& cur, const AreaSegmentation& params) {
  if (init.rows() != cur.rows() || init.cols() != cur.cols())
    throw std::invalid_argument("segment_area_patches: frame sizes differ");
  return params.method == AreaMethod::quad ? quad_areas(init, cur, params) : blob_areas(init, cur, params);
}

double area_factor(const AreaPatchGrid& grid) {
  if (grid.area.size() != grid.area_init.size()) throw std::invalid_argument("area_factor: ragged grid");
  double af = 0;
  for (std::size_t i = 0; i < grid.area.size(); ++i) {
    if (!(grid.area_init[i] > 0)) throw std::domain_error("area_factor: non-positive initial area");
    af += grid.area[i] / grid.area_init[i] - 1.0;
  }
  return af;
}

double tangential_factor(const FlowField& flow) {
  Vec2 sum = Vec2::Zero();
  for (const auto& u : flow.vectors) sum += u;
  return sum.norm();
}

std::vector<double> patch_depths(const AreaPatchGrid& grid, double u_nominal_um, double noise_floor) {
  std::vector<double> d(std::size_t(grid.count()), 0.0);
  for (int i = 0; i < grid.count(); ++i) {
    const double r = grid.ratio(i);
    if (!(r > 0)) throw std::domain_error("patch_depths: non-positive area ratio");
    if (std::abs(r - 1.0) <= noise_floor) continue;
    d[std::size_t(i)] = u_nominal_um * (1.0 - 1.0 / std::sqrt(r));
  }
  return d;
}

DepthMap depth_map(const AreaPatchGrid& grid, std::optional<double> scale, double u_nominal_um, int width,
                   int height, double noise_floor) {
  if (!scale || !std::isfinite(*scale)) throw std::invalid_argument("depth_map: uncalibrated scale");
  if (width <= 0 || height <= 0) throw std::invalid_argument("depth_map: empty output");
  const auto d = patch_depths(grid, u_nominal_um, noise_floor);
  ImageD patches(grid.grid_rows, grid.grid_cols);
  for (int r = 0; r < grid.grid_rows; ++r)
    for (int c = 0; c < grid.grid_cols; ++c) patches(r, c) = *scale * d[std::size_t(r * grid.grid_cols + c)];

  // grow tracked values into untracked patches
  std::vector<char> known(std::size_t(grid.count()));
  for (int i = 0; i < grid.count(); ++i) known[std::size_t(i)] = grid.is_tracked(i);
  for (bool grew = true; grew;) {
    grew = false;
    std::vector<char> next = known;
    for (int r = 0; r < grid.grid_rows; ++r)
      for (int c = 0; c < grid.grid_cols; ++c) {
        const int i = r * grid.grid_cols + c;
        if (known[std::size_t(i)]) continue;
        double acc = 0;
        int n = 0;
        for (const auto& [dr, dc] : {std::pair{-1, 0}, {1, 0}, {0, -1}, {0, 1}}) {
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || cc < 0 || rr >= grid.grid_rows || cc >= grid.grid_cols) continue;
          if (!known[std::size_t(rr * grid.grid_cols + cc)]) continue;
          acc += patches(rr, cc);
          ++n;
        }
        if (n == 0) continue;
        patches(r, c) = acc / n;
        next[std::size_t(i)] = 1;
        grew = true;
      }
    known = std::move(next);
  }

  DepthMap out;
  out.method = "bilinear";
  out.scale = *scale;
  out.depth_um.resize(height, width);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      out.depth_um(y, x) = float(bilinear(patches, (x + 0.5) * grid.grid_cols / width - 0.5,
                                          (y + 0.5) * grid.grid_rows / height - 0.5));
  return out;
}

}  // namespace mlat
