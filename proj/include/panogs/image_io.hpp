#pragma once

#include <string>

#include "panogs/image.hpp"

namespace panogs {

/// 8-bit PNG. Values are clamped to [0, 1] and quantized on write; reads
/// return values in [0, 1] (grayscale expanded, alpha dropped).
Image read_png(const std::string& path);
void write_png(const std::string& path, const Image& img);

/// Portable float map ("PF" color / "Pf" grayscale), little-endian,
/// bottom-up row order, float32 payload.
Image read_pfm(const std::string& path);
void write_pfm(const std::string& path, const Image& img);

/// Normal map encoding for PNG preview: [-1, 1] -> [0, 1].
Image encode_normal_map(const Image& normals);

}  // namespace panogs
