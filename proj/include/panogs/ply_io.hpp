#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "panogs/gaussian.hpp"

namespace panogs {

struct PointCloud {
  std::vector<Eigen::Vector3d> positions;
  std::vector<Eigen::Vector3d> colors;  // [0,1]; empty if the file has none

  bool has_colors() const { return !colors.empty(); }
};

/// ASCII or binary_little_endian PLY; reads x/y/z and, when present,
/// red/green/blue (uchar or float).
PointCloud load_point_cloud(const std::string& path);
void save_point_cloud(const std::string& path, const PointCloud& pc, bool binary = true);

/// Scene checkpoint as a Gaussian-splat style PLY (binary little endian):
/// x y z nx ny nz f_dc_0..2 f_rest_* opacity scale_0..2 rot_0..3
/// filter_radius, all float32. Third-party splat viewers can read
/// position/color; filter_radius is our extra per-vertex property.
void save_scene_ply(const std::string& path, const GaussianScene& scene);
GaussianScene load_scene_ply(const std::string& path);

}  // namespace panogs
