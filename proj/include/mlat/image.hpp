#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <array>

namespace mlat {

/// Single-channel image, row-major so that (row, col) indexing matches raster order.
template <typename Scalar>
using ImageT = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using ImageF = ImageT<float>;
using ImageD = ImageT<double>;

using Vec2 = Eigen::Vector2d;
using Color = Eigen::Vector3f;

struct RgbImage {
  std::array<ImageF, 3> channel;

  RgbImage() = default;
  RgbImage(Eigen::Index rows, Eigen::Index cols) {
    for (auto& c : channel) c = ImageF::Zero(rows, cols);
  }

  Eigen::Index rows() const { return channel[0].rows(); }
  Eigen::Index cols() const { return channel[0].cols(); }

  Color at(Eigen::Index r, Eigen::Index c) const {
    return {channel[0](r, c), channel[1](r, c), channel[2](r, c)};
  }
  void set(Eigen::Index r, Eigen::Index c, const Color& v) {
    for (int k = 0; k < 3; ++k) channel[k](r, c) = v[k];
  }

  bool operator==(const RgbImage& o) const {
    for (int k = 0; k < 3; ++k) {
      if (channel[k].rows() != o.channel[k].rows() || channel[k].cols() != o.channel[k].cols())
        return false;
      if ((channel[k] != o.channel[k]).any()) return false;
    }
    return true;
  }
};

/// Rec.601 luma.
ImageF luminance(const RgbImage& img);

RgbImage from_gray(const ImageF& gray);

template <typename Derived>
auto rotate180(const Eigen::ArrayBase<Derived>& img) {
  return img.reverse().eval();
}

RgbImage rotate180(const RgbImage& img);

/// Zero-mean normalized cross-correlation of two equally sized images.
double ncc(const ImageF& a, const ImageF& b);

/// Bilinear sample with edge clamping; (x, y) in pixel-centre coordinates.
template <typename Scalar>
Scalar bilinear(const ImageT<Scalar>& img, double x, double y) {
  const double xc = std::clamp(x, 0.0, double(img.cols() - 1));
  const double yc = std::clamp(y, 0.0, double(img.rows() - 1));
  const Eigen::Index x0 = std::max<Eigen::Index>(0, std::min<Eigen::Index>(Eigen::Index(xc), img.cols() - 2));
  const Eigen::Index y0 = std::max<Eigen::Index>(0, std::min<Eigen::Index>(Eigen::Index(yc), img.rows() - 2));
  const Eigen::Index x1 = std::min<Eigen::Index>(x0 + 1, img.cols() - 1);
  const Eigen::Index y1 = std::min<Eigen::Index>(y0 + 1, img.rows() - 1);
  const double fx = xc - double(x0);
  const double fy = yc - double(y0);
  const double top = (1 - fx) * img(y0, x0) + fx * img(y0, x1);
  const double bot = (1 - fx) * img(y1, x0) + fx * img(y1, x1);
  return Scalar((1 - fy) * top + fy * bot);
}

}  // namespace mlat
