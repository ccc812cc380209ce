#pragma once

#include <vector>

#include "panogs/camera.hpp"
#include "panogs/gaussian.hpp"
#include "panogs/image.hpp"

namespace panogs {

/// Contributions below this alpha are skipped, and the tile index may omit
/// them; compositing clamps alpha at kAlphaCap and stops once the
/// transmittance falls under kTransmittanceMin.
inline constexpr double kAlphaMin = 1.0 / 255.0;
inline constexpr double kAlphaCap = 0.999;
inline constexpr double kTransmittanceMin = 1e-4;
/// Accumulated opacity below this leaves the depth output undefined.
inline constexpr double kAlphaBackground = 0.01;
/// Bounding-sphere multiplier on the largest inflated scale. sqrt(2 ln 255)
/// is the Mahalanobis distance where a response drops to 1/255, so the cap
/// bounds cannot clip any contribution the compositor would accept.
inline const double kDefaultCullSigma = std::sqrt(2.0 * std::log(255.0));

struct RenderSettings {
  int tile_size = 16;
  double cull_sigma = kDefaultCullSigma;
  int sh_degree = -1;  // -1: use the scene's degree
  int num_threads = 0;
  bool exact_per_ray_sort = false;  // debug: order contributors by t* per ray
};

struct TileEntry {
  int id;
  double key;  // camera-center to mean distance
};

/// Per-tile candidate lists from conservative spherical-cap bounds,
/// sorted ascending by (key, id).
struct TileIndex {
  int tile_size = 16;
  int tiles_x = 0;
  int tiles_y = 0;
  std::vector<std::vector<TileEntry>> tiles;

  const std::vector<TileEntry>& at_pixel(int x, int y) const {
    return tiles[size_t(y / tile_size) * tiles_x + x / tile_size];
  }
};

TileIndex build_tile_index(const GaussianScene& scene, const ErpCamera& cam,
                           int tile_size = 16, double cull_sigma = kDefaultCullSigma);

/// Per-camera precomputed Gaussian state (world-to-scaled-local transform,
/// camera-frame ray origin in the local frame, compensated opacity,
/// view-dependent color, smallest-axis normal).
struct PreparedGaussian {
  Eigen::Matrix3d w2l;
  Eigen::Vector3d o_loc;
  Eigen::Vector3d mean;
  double c_quad;    // o_loc . o_loc
  double opacity;   // activated * compensation, 0 if below threshold
  double q_cut;     // response exponent above which alpha < kAlphaMin
  Eigen::Vector3d color;
  Eigen::Vector3d normal;
  bool skip;
};

std::vector<PreparedGaussian> prepare_gaussians(const GaussianScene& scene,
                                                const Eigen::Vector3d& origin, int sh_degree);

struct PixelSample {
  Eigen::Vector3d rgb = Eigen::Vector3d::Zero();
  double alpha = 0.0;
  double depth = 0.0;  // median depth (first 0.5 crossing of accumulated opacity)
  bool depth_valid = false;
  double depth_expected = 0.0;
  Eigen::Vector3d normal = Eigen::Vector3d::Zero();
  int contributors = 0;
};

PixelSample composite_prepared(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                               const std::vector<TileEntry>& candidates,
                               const std::vector<PreparedGaussian>& prepared,
                               bool exact_per_ray_sort = false);

/// Convenience form matching the candidate-id contract directly.
PixelSample composite_ray(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                          const std::vector<TileEntry>& candidates, const GaussianScene& scene,
                          int sh_degree = -1);

struct RenderOutput {
  Image rgb;             // H x W x 3
  Image depth;           // H x W, median depth, 0 where invalid
  Mask depth_valid;
  Image depth_expected;  // diagnostics
  Image normal;          // H x W x 3, unit where alpha > 0
  Image alpha;           // H x W
  Image contributors;    // diagnostics

  RenderOutput() = default;
  RenderOutput(int w, int h);
};

RenderOutput render(const GaussianScene& scene, const ErpCamera& cam,
                    const RenderSettings& settings = {});
RenderOutput render(const GaussianScene& scene, const ErpCamera& cam, const TileIndex& index,
                    const RenderSettings& settings = {});

}  // namespace panogs
