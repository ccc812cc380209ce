#pragma once

#include <string>

#include "panogs/render_backward.hpp"

namespace panogs {

/// Adam moments for every Gaussian parameter, SoA like SceneGrads.
struct OptimizerState {
  std::vector<Eigen::Vector3d> mean_m, mean_v;
  std::vector<Eigen::Vector4d> quat_m, quat_v;
  std::vector<Eigen::Vector3d> logs_m, logs_v;
  std::vector<double> op_m, op_v;
  std::vector<std::vector<Eigen::Vector3d>> sh_m, sh_v;
  long step_count = 0;

  void init(size_t n, int sh_coeffs);
  size_t size() const { return mean_m.size(); }
};

struct LearningRates {
  double mean = 1.6e-4;  // callers scale by scene extent / decay schedule
  double quat = 1e-3;
  double log_scale = 5e-3;
  double opacity = 0.05;
  double sh = 2.5e-3;
};

/// One bias-corrected Adam update on a scalar parameter.
void adam_update(double& value, double grad, double& m, double& v, long t, double lr,
                 double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-15);

/// Moment-based step over all parameters. Quaternions are renormalized
/// afterwards; log-scale storage keeps scales positive by construction.
/// Non-finite gradients skip their parameter (counted in the return value
/// and reported once on stderr).
int apply_step(GaussianScene& scene, const SceneGrads& grads, OptimizerState& state,
               const LearningRates& rates);

void save_optimizer_state(const std::string& path, const OptimizerState& state);
OptimizerState load_optimizer_state(const std::string& path);

}  // namespace panogs
