#include "mlat/pipeline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <tuple>

namespace mlat {

double otsu_threshold(const ImageF& gray) {
  constexpr int kBins = 256;
  std::array<double, kBins> hist{};
  for (Eigen::Index i = 0; i < gray.size(); ++i) {
    const int b = std::clamp(int(gray.data()[i] * (kBins - 1) + 0.5f), 0, kBins - 1);
    hist[std::size_t(b)] += 1;
  }
  const double total = double(gray.size());
  double sum_all = 0;
  for (int b = 0; b < kBins; ++b) sum_all += b * hist[std::size_t(b)];

  double w0 = 0, sum0 = 0, best = -1;
  int best_bin = 0;
  for (int b = 0; b < kBins; ++b) {
    w0 += hist[std::size_t(b)];
    if (w0 == 0) continue;
    const double w1 = total - w0;
    if (w1 == 0) break;
    sum0 += b * hist[std::size_t(b)];
    const double m0 = sum0 / w0;
    const double m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      best_bin = b;
    }
  }
  // foreground is strictly above the best split bin
  return (best_bin + 0.5) / (kBins - 1);
}

std::vector<Blob> detect_blobs(const ImageF& gray, double threshold, double min_area, const RgbImage* color) {
  const Eigen::Index rows = gray.rows(), cols = gray.cols();
  Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> label =
      Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Constant(rows, cols, -1);
  std::vector<Blob> blobs;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> stack;
  int next = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (label(r, c) >= 0 || gray(r, c) < threshold) continue;
      const int id = next++;
      double wsum = 0, wx = 0, wy = 0, count = 0;
      Eigen::Vector3d csum = Eigen::Vector3d::Zero();
      stack.clear();
      stack.emplace_back(r, c);
      label(r, c) = id;
      while (!stack.empty()) {
        const auto [y, x] = stack.back();
        stack.pop_back();
        const double w = gray(y, x);
        wsum += w;
        wx += w * double(x);
        wy += w * double(y);
        count += 1;
        if (color) csum += color->at(y, x).cast<double>();
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const Eigen::Index ny = y + dy, nx = x + dx;
            if (ny < 0 || nx < 0 || ny >= rows || nx >= cols) continue;
            if (label(ny, nx) >= 0 || gray(ny, nx) < threshold) continue;
            label(ny, nx) = id;
            stack.emplace_back(ny, nx);
          }
      }
      if (count < min_area) continue;
      Blob b;
      b.area = count;
      b.centroid = wsum > 0 ? Vec2(wx / wsum, wy / wsum) : Vec2(double(c), double(r));
      if (color) b.mean_color = (csum / count).cast<float>();
      b.label = int(blobs.size());
      blobs.push_back(b);
    }
  }
  return blobs;
}

TrackResult track_blob(const std::vector<Blob>& prev, const std::vector<Blob>& cur, double gate_px) {
  std::vector<std::tuple<double, int, int>> pairs;
  for (int i = 0; i < int(prev.size()); ++i)
    for (int j = 0; j < int(cur.size()); ++j) {
      const double d = (cur[std::size_t(j)].centroid - prev[std::size_t(i)].centroid).norm();
      if (d <= gate_px) pairs.emplace_back(d, i, j);
    }
  std::sort(pairs.begin(), pairs.end());
  std::vector<bool> used_prev(prev.size(), false), used_cur(cur.size(), false);
  TrackResult out;
  for (const auto& [d, i, j] : pairs) {
    if (used_prev[std::size_t(i)] || used_cur[std::size_t(j)]) continue;
    used_prev[std::size_t(i)] = used_cur[std::size_t(j)] = true;
    const Blob& a = prev[std::size_t(i)];
    const Blob& b = cur[std::size_t(j)];
    out.matches.push_back({i, j, b.centroid - a.centroid, b.area / a.area});
  }
  std::sort(out.matches.begin(), out.matches.end(),
            [](const BlobMatch& x, const BlobMatch& y) { return x.prev < y.prev; });
  for (int i = 0; i < int(prev.size()); ++i)
    if (!used_prev[std::size_t(i)]) out.unmatched_prev.push_back(i);
  for (int j = 0; j < int(cur.size()); ++j)
    if (!used_cur[std::size_t(j)]) out.unmatched_cur.push_back(j);
  return out;
}

}  // namespace mlat
