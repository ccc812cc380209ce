#include "panogs/image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace panogs {

size_t Mask::count() const {
  return std::count_if(data.begin(), data.end(), [](uint8_t v) { return v != 0; });
}

Image grayscale(const Image& img) {
  Image g(img.width, img.height, 1);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      double s = 0.0;
      for (int c = 0; c < img.channels; ++c) s += img.at(y, x, c);
      g.at(y, x) = s / img.channels;
    }
  return g;
}

bool bilinear_sample_wrap(const Image& img, double u, double v, const Mask* mask, double* out) {
  const int w = img.width, h = img.height;
  const double fy = v - 0.5;
  const int y0 = int(std::floor(fy));
  const int y1 = y0 + 1;
  if (y0 < 0 || y1 > h - 1) return false;
  double fu = u - 0.5;
  fu -= w * std::floor(fu / w);  // wrap into [0, W)
  const int x0 = int(std::floor(fu)) % w;
  const int x1 = (x0 + 1) % w;
  const double ax = fu - std::floor(fu);
  const double ay = fy - y0;
  if (mask) {
    if (!mask->at(y0, x0) || !mask->at(y0, x1) || !mask->at(y1, x0) || !mask->at(y1, x1))
      return false;
  }
  for (int c = 0; c < img.channels; ++c) {
    const double v00 = img.at(y0, x0, c), v01 = img.at(y0, x1, c);
    const double v10 = img.at(y1, x0, c), v11 = img.at(y1, x1, c);
    out[c] = (1 - ay) * ((1 - ax) * v00 + ax * v01) + ay * ((1 - ax) * v10 + ax * v11);
  }
  return true;
}

Image cyclic_shift_x(const Image& img, int k) {
  Image out(img.width, img.height, img.channels);
  const int w = img.width;
  k = ((k % w) + w) % w;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = img.at(y, (x + k) % w, c);
  return out;
}

}  // namespace panogs
