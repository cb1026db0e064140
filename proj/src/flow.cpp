#include "mlat/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mlat {

namespace {

ImageF downsample2(const ImageF& img) {
  const Eigen::Index rows = img.rows() / 2, cols = img.cols() / 2;
  ImageF out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      out(r, c) = 0.25f * (img(2 * r, 2 * c) + img(2 * r, 2 * c + 1) + img(2 * r + 1, 2 * c) +
                           img(2 * r + 1, 2 * c + 1));
  return out;
}

struct Window {
  Eigen::Index row = 0, col = 0, h = 0, w = 0;
};

// Window of size (h, w) centred on (x, y), shifted to lie inside the box.
Window place_window(const Box& box, double x, double y, Eigen::Index w, Eigen::Index h) {
  w = std::min<Eigen::Index>(w, box.x1 - box.x0);
  h = std::min<Eigen::Index>(h, box.y1 - box.y0);
  Window win;
  win.w = w;
  win.h = h;
  win.col = std::clamp<Eigen::Index>(Eigen::Index(std::lround(x - 0.5 * double(w - 1))), box.x0, box.x1 - w);
  win.row = std::clamp<Eigen::Index>(Eigen::Index(std::lround(y - 0.5 * double(h - 1))), box.y0, box.y1 - h);
  return win;
}

Box whole(const ImageF& img) { return {0, 0, int(img.cols()), int(img.rows())}; }

Box shrink(const Box& b, int level, const ImageF& img) {
  const int s = 1 << level;
  Box o{(b.x0 + s - 1) / s, (b.y0 + s - 1) / s, b.x1 / s, b.y1 / s};
  o.x1 = std::min(o.x1, int(img.cols()));
  o.y1 = std::min(o.y1, int(img.rows()));
  if (o.x1 - o.x0 < 3 || o.y1 - o.y0 < 3) return whole(img);
  return o;
}

// Smallest fraction of a window that must stay inside its box to be scored.
constexpr double kMinOverlap = 0.6;

class Template {
 public:
  // Window content of `img` magnified by `scale` about the window centre.
  // Samples that fall outside `box` are masked out.
  Template(const ImageF& img, const Window& win, double scale = 1.0, const Box* box = nullptr) : win_(win) {
    raw_.resize(win.h, win.w);
    mask_ = Eigen::ArrayXXd::Ones(win.h, win.w);
    if (scale == 1.0) {
      raw_ = img.block(win.row, win.col, win.h, win.w).cast<double>();
    } else {
      const double cx = double(win.col) + 0.5 * double(win.w - 1);
      const double cy = double(win.row) + 0.5 * double(win.h - 1);
      for (Eigen::Index i = 0; i < win.h; ++i)
        for (Eigen::Index j = 0; j < win.w; ++j) {
          const double x = cx + (double(win.col + j) - cx) / scale;
          const double y = cy + (double(win.row + i) - cy) / scale;
          if (box && (x < box->x0 - 0.5 || x > box->x1 - 0.5 || y < box->y0 - 0.5 || y > box->y1 - 0.5))
            mask_(i, j) = 0;
          raw_(i, j) = bilinear(img, x, y);
        }
    }
    full_ = (mask_ > 0).all();
    count_ = mask_.sum();
    const double mean = (raw_ * mask_).sum() / count_;
    patch_ = (raw_ - mean) * mask_;
    norm_ = std::sqrt(patch_.square().sum());
    variance_ = patch_.square().sum() / count_;
  }

  double variance() const { return variance_; }

  /// NCC against the window displaced by (dx, dy) in `img`, over the part
  /// that lies inside `box`; NaN when too little of it does.
  double score(const ImageF& img, Eigen::Index dx, Eigen::Index dy, const Box* box = nullptr) const {
    const Eigen::Index r = win_.row + dy, c = win_.col + dx;
    Eigen::Index y0 = 0, x0 = 0, y1 = img.rows(), x1 = img.cols();
    if (box) {
      y0 = box->y0;
      x0 = box->x0;
      y1 = std::min<Eigen::Index>(y1, box->y1);
      x1 = std::min<Eigen::Index>(x1, box->x1);
    }
    const Eigen::Index i0 = std::max<Eigen::Index>(0, y0 - r), i1 = std::min<Eigen::Index>(win_.h, y1 - r);
    const Eigen::Index j0 = std::max<Eigen::Index>(0, x0 - c), j1 = std::min<Eigen::Index>(win_.w, x1 - c);
    if (i1 <= i0 || j1 <= j0) return std::numeric_limits<double>::quiet_NaN();
    const bool inside = i0 == 0 && j0 == 0 && i1 == win_.h && j1 == win_.w;
    if (!box && !inside) return std::numeric_limits<double>::quiet_NaN();

    if (inside && full_) {
      const auto cand = img.block(r, c, win_.h, win_.w).cast<double>();
      const double mean = cand.mean();
      double num = 0, den = 0;
      for (Eigen::Index i = 0; i < win_.h; ++i)
        for (Eigen::Index j = 0; j < win_.w; ++j) {
          const double d = cand(i, j) - mean;
          num += patch_(i, j) * d;
          den += d * d;
        }
      if (den <= 0 || norm_ <= 0) return 0.0;
      return num / (norm_ * std::sqrt(den));
    }

    // masked: statistics over the overlap only
    double n = 0, st = 0, sc = 0;
    for (Eigen::Index i = i0; i < i1; ++i)
      for (Eigen::Index j = j0; j < j1; ++j)
        if (mask_(i, j) > 0) {
          n += 1;
          st += raw_(i, j);
          sc += img(r + i, c + j);
        }
    if (n < kMinOverlap * double(win_.h * win_.w)) return std::numeric_limits<double>::quiet_NaN();
    const double mt = st / n, mc = sc / n;
    double num = 0, tt = 0, cc = 0;
    for (Eigen::Index i = i0; i < i1; ++i)
      for (Eigen::Index j = j0; j < j1; ++j)
        if (mask_(i, j) > 0) {
          const double a = raw_(i, j) - mt, b = double(img(r + i, c + j)) - mc;
          num += a * b;
          tt += a * a;
          cc += b * b;
        }
    if (tt <= 0 || cc <= 0) return 0.0;
    return num / std::sqrt(tt * cc);
  }

 private:
  Window win_;
  Eigen::ArrayXXd raw_, mask_, patch_;
  bool full_ = true;
  double count_ = 0;
  double norm_ = 0;
  double variance_ = 0;
};

double parabola_offset(double minus, double center, double plus) {
  if (std::isnan(minus) || std::isnan(plus)) return 0.0;
  const double denom = minus - 2 * center + plus;
  if (denom >= 0) return 0.0;
  return std::clamp(0.5 * (minus - plus) / denom, -0.5, 0.5);
}

}  // namespace

std::vector<double> default_match_scales() {
  std::vector<double> s;
  for (int k = -2; k <= 6; ++k) s.push_back(1.0 + 0.05 * k);
  return s;
}

std::vector<int> patch_edges(int extent, int n) {
  if (n <= 0 || extent < n) throw std::invalid_argument("patch_edges: grid does not fit");
  std::vector<int> e(std::size_t(n) + 1);
  for (int k = 0; k <= n; ++k) e[std::size_t(k)] = int(std::lround(double(k) * extent / n));
  return e;
}

Box tile_box(const ImageF& img, const Vec2& p, int tile_width, int tile_height) {
  Box b = whole(img);
  if (tile_width > 0) {
    const int c = std::clamp(int(std::floor((p.x() + 0.5) / tile_width)), 0, std::max(0, b.x1 / tile_width - 1));
    b.x0 = c * tile_width;
    b.x1 = std::min(b.x1, b.x0 + tile_width);
  }
  if (tile_height > 0) {
    const int r = std::clamp(int(std::floor((p.y() + 0.5) / tile_height)), 0, std::max(0, b.y1 / tile_height - 1));
    b.y0 = r * tile_height;
    b.y1 = std::min(b.y1, b.y0 + tile_height);
  }
  return b;
}

std::vector<PointMatch> match_points(const ImageF& prev, const ImageF& cur, const std::vector<Vec2>& centers,
                                     int window_w, int window_h, int radius, double variance_floor,
                                     const MatchOptions& options) {
  const std::vector<Box>* bounds = options.bounds;
  const std::vector<double>& scales = options.scales;
  if (prev.rows() != cur.rows() || prev.cols() != cur.cols())
    throw std::invalid_argument("match_points: image sizes differ");
  if (bounds && bounds->size() != centers.size()) throw std::invalid_argument("match_points: bounds size");
  if (scales.empty()) throw std::invalid_argument("match_points: no scales");
  if (window_w < 3 || window_h < 3 || radius < 0) throw std::invalid_argument("match_points: bad window");
  if (options.hints && (options.hints->size() != centers.size() || !options.hint_scales ||
                        options.hint_scales->size() != centers.size()))
    throw std::invalid_argument("match_points: hints size");

  std::vector<ImageF> pyr_prev{prev}, pyr_cur{cur};
  while (!options.hints && (radius >> (pyr_prev.size() - 1)) > 3 && std::min(window_w, window_h) >> pyr_prev.size() >= 12 &&
         pyr_prev.size() < 5) {
    pyr_prev.push_back(downsample2(pyr_prev.back()));
    pyr_cur.push_back(downsample2(pyr_cur.back()));
  }
  const int top = int(pyr_prev.size()) - 1;

  std::vector<PointMatch> out(centers.size());
  for (std::size_t n = 0; n < centers.size(); ++n) {
    const Vec2& c = centers[n];
    const Box box = bounds ? (*bounds)[n] : whole(prev);
    const std::vector<double> own = options.hints ? std::vector<double>{(*options.hint_scales)[n]} : scales;
    Template base(prev, place_window(box, c.x(), c.y(), window_w, window_h));
    if (base.variance() < variance_floor) continue;

    Eigen::Index bx = 0, by = 0;
    int bs = int(std::find(own.begin(), own.end(), 1.0) - own.begin());
    if (bs == int(own.size())) bs = 0;
    double best = -2;
    for (int level = top; level >= 0; --level) {
      const double s = double(1 << level);
      const ImageF& p = pyr_prev[std::size_t(level)];
      const ImageF& q = pyr_cur[std::size_t(level)];
      const Box lb = shrink(box, level, p);
      const Window win = place_window(lb, (c.x() + 0.5) / s - 0.5, (c.y() + 0.5) / s - 0.5,
                                      std::max<Eigen::Index>(3, Eigen::Index(window_w / s)),
                                      std::max<Eigen::Index>(3, Eigen::Index(window_h / s)));
      const bool hinted = options.hints != nullptr;
      const int reach = level == top && !hinted ? int(std::ceil(radius / s)) : 2;
      const int limit = int(std::ceil(radius / s));
      const Eigen::Index cx = hinted ? Eigen::Index(std::lround((*options.hints)[n].x()))
                              : level == top ? 0 : 2 * bx;
      const Eigen::Index cy = hinted ? Eigen::Index(std::lround((*options.hints)[n].y()))
                              : level == top ? 0 : 2 * by;
      const int k0 = level == top ? 0 : std::max(0, bs - 1);
      const int k1 = level == top ? int(own.size()) - 1 : std::min(int(own.size()) - 1, bs + 1);
      best = -2;
      Eigen::Index nx = cx, ny = cy;
      int ns = bs;
      for (int k = k0; k <= k1; ++k) {
        const Template tmpl(p, win, own[std::size_t(k)], &lb);
        for (Eigen::Index dy = cy - reach; dy <= cy + reach; ++dy) {
          if (std::abs(dy) > limit) continue;
          for (Eigen::Index dx = cx - reach; dx <= cx + reach; ++dx) {
            if (std::abs(dx) > limit) continue;
            const double v = tmpl.score(q, dx, dy, options.confine ? &lb : nullptr);
            if (!std::isnan(v) && v > best) {
              best = v;
              nx = dx;
              ny = dy;
              ns = k;
            }
          }
        }
      }
      bx = nx;
      by = ny;
      bs = ns;
    }
    if (best <= -2) continue;

    const Window fw = place_window(box, c.x(), c.y(), window_w, window_h);
    const Template fine(prev, fw, own[std::size_t(bs)], &box);
    const Box* cb = options.confine ? &box : nullptr;
    const double sx = parabola_offset(fine.score(cur, bx - 1, by, cb), best, fine.score(cur, bx + 1, by, cb));
    const double sy = parabola_offset(fine.score(cur, bx, by - 1, cb), best, fine.score(cur, bx, by + 1, cb));
    Vec2 d(double(bx) + sx, double(by) + sy);
    d = d.cwiseMax(-double(radius)).cwiseMin(double(radius));
    out[n] = {d, best, own[std::size_t(bs)]};
  }
  return out;
}

FlowField compute_flow(const ImageF& prev, const ImageF& cur, const FlowParams& params) {
  if (prev.rows() != cur.rows() || prev.cols() != cur.cols())
    throw std::invalid_argument("compute_flow: image sizes differ");
  const auto xs = patch_edges(int(prev.cols()), params.grid_cols);
  const auto ys = patch_edges(int(prev.rows()), params.grid_rows);
  FlowField f;
  f.grid_cols = params.grid_cols;
  f.grid_rows = params.grid_rows;
  for (int r = 0; r < params.grid_rows; ++r)
    for (int c = 0; c < params.grid_cols; ++c)
      f.anchors.emplace_back(0.5 * (xs[std::size_t(c)] + xs[std::size_t(c) + 1]) - 0.5,
                             0.5 * (ys[std::size_t(r)] + ys[std::size_t(r) + 1]) - 0.5);
  const int ww = int(prev.cols()) / params.grid_cols;
  const int wh = int(prev.rows()) / params.grid_rows;
  std::vector<Box> boxes;
  for (const auto& a : f.anchors) boxes.push_back(tile_box(prev, a, params.tile_width, params.tile_height));
  const auto matches =
      match_points(prev, cur, f.anchors, ww, wh, params.search_radius, params.variance_floor,
                   {&boxes, false, params.scales});
  for (const auto& m : matches) {
    f.vectors.push_back(m.displacement);
    f.confidence.push_back(m.confidence);
  }
  return f;
}

}  // namespace mlat
