#pragma once

#include "panogs/losses.hpp"
#include "panogs/renderer.hpp"

namespace panogs {

/// Gradients of a scalar loss w.r.t. every raw Gaussian parameter
/// (mean, unnormalized quaternion, log-scales, opacity logit, SH block).
struct SceneGrads {
  std::vector<Eigen::Vector3d> mean;
  std::vector<Eigen::Vector4d> quat;
  std::vector<Eigen::Vector3d> log_scale;
  std::vector<double> opacity_logit;
  std::vector<std::vector<Eigen::Vector3d>> sh;
  std::vector<uint8_t> touched;  // gaussian contributed to this view

  void init(size_t n, int sh_coeffs);
};

/// Analytic adjoint of render(): pulls dL/d(rgb, median depth, normal)
/// maps back to the scene parameters. Deterministic: per-tile partial
/// gradients are reduced in tile order regardless of thread count.
SceneGrads render_backward(const GaussianScene& scene, const ErpCamera& cam,
                           const TileIndex& index, const LossGradMaps& grads,
                           const RenderSettings& settings = {});

}  // namespace panogs
