#include "mlat/image.hpp"

#include <cmath>
#include <stdexcept>

namespace mlat {

ImageF luminance(const RgbImage& img) {
  return 0.299f * img.channel[0] + 0.587f * img.channel[1] + 0.114f * img.channel[2];
}

RgbImage from_gray(const ImageF& gray) {
  RgbImage out;
  for (auto& c : out.channel) c = gray;
  return out;
}

RgbImage rotate180(const RgbImage& img) {
  RgbImage out;
  for (int k = 0; k < 3; ++k) out.channel[k] = img.channel[k].reverse().eval();
  return out;
}

double ncc(const ImageF& a, const ImageF& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("ncc: size mismatch");
  const Eigen::ArrayXXd da = a.cast<double>() - a.cast<double>().mean();
  const Eigen::ArrayXXd db = b.cast<double>() - b.cast<double>().mean();
  const double denom = std::sqrt((da * da).sum() * (db * db).sum());
  if (denom <= 0) return 0.0;
  return (da * db).sum() / denom;
}

}  // namespace mlat
