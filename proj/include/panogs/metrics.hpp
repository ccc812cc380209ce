#pragma once

#include <string>
#include <utility>
#include <vector>

#include "panogs/camera.hpp"
#include "panogs/image.hpp"

namespace panogs {

/// Sentinel for identical images (infinite PSNR).
inline constexpr double kPsnrMax = 100.0;

double psnr(const Image& a, const Image& b, const Mask* mask = nullptr);

struct Reprojection {
  Eigen::Vector2d pixel;  // continuous coordinates in view j
  double depth;           // radial distance from camera j
  bool valid = false;     // false when the point coincides with camera j
};

/// Back-project (pixel, depth) from view i, transform, reproject into view j.
/// pixel is continuous (a pixel center is (x + 0.5, y + 0.5)); depth is the
/// radial distance along the ray.
Reprojection reproject(const Eigen::Vector2d& pixel, double depth_i, const ErpCamera& cam_i,
                       const ErpCamera& cam_j);

/// All ordered pairs (i, j) with 1 <= |i - j| <= max_gap.
std::vector<std::pair<int, int>> adjacent_pairs(int n_views, int max_gap);
/// "adjacent:<k>" or "all".
std::vector<std::pair<int, int>> parse_pairs(const std::string& spec, int n_views);

struct ConsistencySettings {
  double eps_dre = 1e-6;   // relative-error denominator floor
  double tau_cyc = 2.0;    // cycle inlier threshold, pixels
  double clamp_e = 1.0;    // per-pixel DRE outlier clamp
};

struct ConsistencyResult {
  double dre = 0.0;   // mean clamped relative reprojection error
  double cir = 0.0;   // cycle inlier percentage [0, 100]
  long valid_px = 0;  // pooled over pairs
  bool defined = false;
};

/// Joint DRE/CIR evaluation over ordered view pairs; pixels pool across
/// pairs. valid masks gate both the source pixel and the bilinear taps in
/// the target view.
ConsistencyResult depth_consistency(const std::vector<Image>& depths,
                                    const std::vector<Mask>& valid,
                                    const std::vector<ErpCamera>& cams,
                                    const std::vector<std::pair<int, int>>& pairs,
                                    const ConsistencySettings& settings = {});

double dre(const std::vector<Image>& depths, const std::vector<Mask>& valid,
           const std::vector<ErpCamera>& cams, const std::vector<std::pair<int, int>>& pairs,
           double eps = 1e-6);
double cir(const std::vector<Image>& depths, const std::vector<Mask>& valid,
           const std::vector<ErpCamera>& cams, const std::vector<std::pair<int, int>>& pairs,
           double tau_cyc = 2.0);

/// Mask where the depth map is usable: optional per-pixel validity
/// intersected with the camera's latitude band.
Mask depth_valid_mask(const Mask* defined, const ErpCamera& cam);

}  // namespace panogs
