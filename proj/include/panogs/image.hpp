#pragma once

#include <cstdint>
#include <vector>

namespace panogs {

/// Row-major interleaved image of doubles (C channels).
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, int c, double fill = 0.0)
      : width(w), height(h), channels(c), data(size_t(w) * h * c, fill) {}

  double& at(int y, int x, int c = 0) { return data[(size_t(y) * width + x) * channels + c]; }
  double at(int y, int x, int c = 0) const { return data[(size_t(y) * width + x) * channels + c]; }
  size_t pixel_count() const { return size_t(width) * height; }
  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
};

/// Per-pixel boolean mask.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> data;

  Mask() = default;
  Mask(int w, int h, bool fill = false) : width(w), height(h), data(size_t(w) * h, fill ? 1 : 0) {}

  uint8_t& at(int y, int x) { return data[size_t(y) * width + x]; }
  bool at(int y, int x) const { return data[size_t(y) * width + x] != 0; }
  size_t count() const;
};

/// Channel-mean grayscale.
Image grayscale(const Image& img);

/// Bilinear sample at continuous pixel position (u, v) in pixel-center
/// coordinates (sample point (x+0.5, y+0.5) hits pixel (x, y) exactly).
/// u wraps around the longitude seam; v is clamped to the valid row range.
/// Returns false if any of the four taps is masked out (when mask != nullptr)
/// or v is outside [0, H].
bool bilinear_sample_wrap(const Image& img, double u, double v, const Mask* mask, double* out);

/// Horizontal cyclic shift by k pixels (content moves left by k).
Image cyclic_shift_x(const Image& img, int k);

}  // namespace panogs
