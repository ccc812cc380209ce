#pragma once

#include <optional>

#include "panogs/camera.hpp"
#include "panogs/image.hpp"
#include "panogs/renderer.hpp"

namespace panogs {

struct LossWeights {
  double lambda_dn = 0.03;
  double lambda_j1 = 0.45;
  double lambda_j2 = 0.32;
  double tau = 0.5;    // opacity valid-mask threshold
  double tau1 = 0.05;  // first-order log-depth hinge
  double tau2 = 0.02;  // second-order log-depth hinge
  double beta = 10.0;  // edge-aware sharpness
  double ssim_mix = 0.2;
  double lat_eps = 0.1;  // latitude weight floor
};

/// Ramp/enable state supplied by the training schedule.
struct ScheduleState {
  double jump_scale = 1.0;
  bool dn_enabled = true;
};

struct LossBreakdown {
  double total = 0.0;
  double rgb = 0.0;
  double dn = 0.0;
  double jump1 = 0.0;
  double jump2 = 0.0;
  double jump_scale = 1.0;
  bool dn_enabled = true;
  long valid_pixel_count = 0;
};

/// Omega: accumulated opacity above tau, intersected with the camera's
/// latitude band when present.
Mask valid_mask(const Image& alpha_map, double tau, const std::optional<LatBand>& band);

/// (1 - ssim_mix) L1 + ssim_mix (1 - SSIM), both restricted to omega.
/// d_render, when given, receives the gradient w.r.t. the rendered image.
double rgb_loss(const Image& render_rgb, const Image& gt_rgb, const Mask& omega, double ssim_mix,
                long* valid_px = nullptr, Image* d_render = nullptr);

/// Depth-induced normals from forward differences of back-projected points;
/// the x stencil wraps around the longitude seam, normals are flipped to
/// face the camera. Pixels whose stencil leaves omega (or the bottom row)
/// are invalid.
struct DepthNormals {
  Image normal;  // H x W x 3
  Mask valid;
};
DepthNormals depth_to_normal(const Image& depth, const ErpCamera& cam, const Mask& omega);

/// dL/d(depth) for a given dL/d(normal map) over the valid set.
Image depth_to_normal_backward(const Image& depth, const ErpCamera& cam, const Mask& omega,
                               const DepthNormals& fwd, const Image& d_normal);

/// Latitude-weighted mean of 1 - |N . N^d| over omega and the depth-normal
/// validity set.
double dn_loss(const Image& normal, const DepthNormals& depth_normals, const Mask& omega,
               double lat_eps, Image* d_normal = nullptr, Image* d_depth_normal = nullptr);

/// First-order log-depth hinge with horizontal ERP correction and edge-aware
/// weights from the ground-truth grayscale panorama.
double jump1_loss(const Image& depth, const Image& gt_gray, const Mask& omega, double lat_eps,
                  double tau1, double beta, Image* d_depth = nullptr);

/// Second-order (central) log-depth hinge, same ERP correction on x and the
/// same edge-aware weighting as the first-order term.
double jump2_loss(const Image& depth, const Image& gt_gray, const Mask& omega, double lat_eps,
                  double tau2, double beta, Image* d_depth = nullptr);

struct LossGradMaps {
  Image d_rgb;     // H x W x 3
  Image d_depth;   // H x W
  Image d_normal;  // H x W x 3 (w.r.t. the rendered normal map)
};

/// Full training objective. When grads is non-null it receives the
/// gradients w.r.t. the rendered rgb/depth/normal maps with all lambda and
/// schedule factors applied.
LossBreakdown total_loss(const RenderOutput& render, const Image& gt_rgb, const ErpCamera& cam,
                         const LossWeights& weights, const ScheduleState& schedule,
                         LossGradMaps* grads = nullptr);

}  // namespace panogs
