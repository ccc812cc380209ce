#include "panogs/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace panogs {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

}  // namespace

Image read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("read_png: cannot open " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("read_png: init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("read_png: init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("read_png: decode error in " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  const int w = int(png_get_image_width(png, info));
  const int h = int(png_get_image_height(png, info));
  std::vector<uint8_t> rowbuf(size_t(w) * 3);
  Image img(w, h, 3);
  for (int y = 0; y < h; ++y) {
    png_read_row(png, rowbuf.data(), nullptr);
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = rowbuf[size_t(x) * 3 + c] / 255.0;
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void write_png(const std::string& path, const Image& img) {
  if (img.channels != 1 && img.channels != 3)
    throw std::invalid_argument("write_png: expected 1 or 3 channels");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("write_png: cannot open " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("write_png: init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("write_png: init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("write_png: encode error for " + path);
  }
  png_init_io(png, fp.get());
  const int ctype = img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
  png_set_IHDR(png, info, img.width, img.height, 8, ctype, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<uint8_t> rowbuf(size_t(img.width) * img.channels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        const double v = std::max(0.0, std::min(1.0, img.at(y, x, c)));
        rowbuf[size_t(x) * img.channels + c] = uint8_t(std::lround(v * 255.0));
      }
    png_write_row(png, rowbuf.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image read_pfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_pfm: cannot open " + path);
  std::string magic;
  int w = 0, h = 0;
  double scale = 0.0;
  in >> magic >> w >> h >> scale;
  if ((magic != "PF" && magic != "Pf") || w <= 0 || h <= 0)
    throw std::runtime_error("read_pfm: bad header in " + path);
  if (scale >= 0) throw std::runtime_error("read_pfm: big-endian PFM not supported");
  in.get();  // single whitespace after the scale
  const int c = magic == "PF" ? 3 : 1;
  Image img(w, h, c);
  std::vector<float> row(size_t(w) * c);
  for (int y = h - 1; y >= 0; --y) {  // bottom-up storage
    in.read(reinterpret_cast<char*>(row.data()), std::streamsize(row.size() * sizeof(float)));
    if (!in) throw std::runtime_error("read_pfm: truncated data in " + path);
    for (int x = 0; x < w; ++x)
      for (int k = 0; k < c; ++k) img.at(y, x, k) = row[size_t(x) * c + k];
  }
  return img;
}

void write_pfm(const std::string& path, const Image& img) {
  if (img.channels != 1 && img.channels != 3)
    throw std::invalid_argument("write_pfm: expected 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_pfm: cannot open " + path);
  out << (img.channels == 3 ? "PF" : "Pf") << '\n'
      << img.width << ' ' << img.height << '\n'
      << "-1.0" << '\n';
  std::vector<float> row(size_t(img.width) * img.channels);
  for (int y = img.height - 1; y >= 0; --y) {
    for (int x = 0; x < img.width; ++x)
      for (int k = 0; k < img.channels; ++k) row[size_t(x) * img.channels + k] = float(img.at(y, x, k));
    out.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size() * sizeof(float)));
  }
}

Image encode_normal_map(const Image& normals) {
  Image out(normals.width, normals.height, 3);
  for (size_t i = 0; i < normals.data.size(); ++i) out.data[i] = 0.5 * (normals.data[i] + 1.0);
  return out;
}

}  // namespace panogs
