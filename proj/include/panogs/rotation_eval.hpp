#pragma once

#include "panogs/metrics.hpp"
#include "panogs/renderer.hpp"
#include "panogs/synth.hpp"

namespace panogs {

struct RotationEvalRow {
  double theta_deg = 0.0;
  double psnr = 0.0;  // NaN without an analytic ground-truth source
  double ssim = 0.0;
  double dre = 0.0;
  double cir = 0.0;
  long valid_px = 0;
};

/// Rotation-robustness protocol: for each theta, perturb every pose with a
/// seeded random rotation (axis uniform on the sphere, angle uniform in
/// [0, theta]), render, and measure PSNR/SSIM against the analytic tracer
/// at the rotated pose (when gt_spec is given) plus DRE/CIR across the
/// rendered depths. theta = 0 reproduces the unrotated evaluation.
std::vector<RotationEvalRow> rotation_eval(const GaussianScene& scene,
                                           const std::vector<ErpCamera>& cams,
                                           const std::vector<double>& thetas_deg, uint64_t seed,
                                           const SynthSpec* gt_spec,
                                           const RenderSettings& settings = {},
                                           const std::string& pair_spec = "adjacent:2");

/// CSV per spec: scene, theta, psnr, ssim, dre, cir, valid_px (+ an lpips
/// placeholder column, reported as nan).
void write_metrics_csv(const std::string& path, const std::string& scene_name,
                       const std::vector<RotationEvalRow>& rows);

}  // namespace panogs
