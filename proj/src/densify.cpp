#include <cmath>

#include "panogs/trainer.hpp"

namespace panogs {

void DensifyStats::init(size_t n) {
  score.assign(n, 0.0);
  count.assign(n, 0);
  mean_grad.assign(n, Eigen::Vector3d::Zero());
}

void accumulate_densify_stats(DensifyStats& stats, const SceneGrads& grads,
                              const GaussianScene& scene, const ErpCamera& cam, double lat_eps) {
  for (size_t i = 0; i < scene.size(); ++i) {
    if (!grads.touched[i]) continue;
    const Eigen::Vector3d x_cam = cam.to_camera(scene.gaussians[i].mean);
    const double r = x_cam.norm();
    if (r <= 0.0) continue;
    const SphericalAngles a = dir_to_angles(x_cam);
    // In-image motion of the mean at fixed radius: d(mean)/du along the
    // longitude/latitude tangents, pulled back through the camera rotation.
    const double sl = std::sin(a.lon), cl = std::cos(a.lon);
    const double sp = std::sin(a.lat), cp = std::cos(a.lat);
    const Eigen::Vector3d d_lon_cam(cl * cp, 0.0, -sl * cp);
    const Eigen::Vector3d d_lat_cam(-sl * sp, -cp, -cl * sp);
    const Eigen::Matrix3d rt = cam.rotation.transpose();
    const double du = r * (2.0 * kPi / cam.width) * (rt * d_lon_cam).dot(grads.mean[i]);
    const double dv = r * (-kPi / cam.height) * (rt * d_lat_cam).dot(grads.mean[i]);
    stats.score[i] += std::hypot(du, dv) * latitude_weight(a.lat, lat_eps);
    stats.count[i] += 1;
    stats.mean_grad[i] += grads.mean[i];
  }
}

namespace {

void refresh_filter_radii(GaussianScene& scene, const std::vector<ErpCamera>& cams, double kappa) {
  for (auto& g : scene.gaussians) g.filter_radius = filter_radius(g, cams, kappa);
}

}  // namespace

DensifyReport densify_and_prune(GaussianScene& scene, DensifyStats& stats, OptimizerState& opt,
                                const std::vector<ErpCamera>& cams, double scene_extent,
                                const TrainConfig& config, std::mt19937_64& rng) {
  DensifyReport report;
  const size_t n = scene.size();
  const double size_threshold = config.densify_size_frac * scene_extent;
  const bool can_grow = int(n) < config.max_gaussians;

  std::vector<uint8_t> keep(n, 1), do_clone(n, 0), do_split(n, 0);
  for (size_t i = 0; i < n; ++i) {
    const auto& g = scene.gaussians[i];
    if (g.opacity() < config.prune_opacity) {
      keep[i] = 0;
      ++report.pruned;
      continue;
    }
    if (!can_grow || stats.count[i] == 0) continue;
    if (stats.score[i] / stats.count[i] < config.densify_grad_threshold) continue;
    if (g.inflated_scale().maxCoeff() < size_threshold) {
      do_clone[i] = 1;
      ++report.cloned;
    } else {
      do_split[i] = 1;
      keep[i] = 0;  // parent replaced by two children
      ++report.split;
    }
  }

  GaussianScene next;
  next.sh_degree = scene.sh_degree;
  OptimizerState next_opt;
  const int n_coeffs = sh_coeff_count(scene.sh_degree);
  std::normal_distribution<double> gauss(0.0, 1.0);

  auto copy_moments = [&](size_t src) {
    next_opt.mean_m.push_back(opt.mean_m[src]);
    next_opt.mean_v.push_back(opt.mean_v[src]);
    next_opt.quat_m.push_back(opt.quat_m[src]);
    next_opt.quat_v.push_back(opt.quat_v[src]);
    next_opt.logs_m.push_back(opt.logs_m[src]);
    next_opt.logs_v.push_back(opt.logs_v[src]);
    next_opt.op_m.push_back(opt.op_m[src]);
    next_opt.op_v.push_back(opt.op_v[src]);
    next_opt.sh_m.push_back(opt.sh_m[src]);
    next_opt.sh_v.push_back(opt.sh_v[src]);
  };
  auto zero_moments = [&] {
    next_opt.mean_m.emplace_back(Eigen::Vector3d::Zero());
    next_opt.mean_v.emplace_back(Eigen::Vector3d::Zero());
    next_opt.quat_m.emplace_back(Eigen::Vector4d::Zero());
    next_opt.quat_v.emplace_back(Eigen::Vector4d::Zero());
    next_opt.logs_m.emplace_back(Eigen::Vector3d::Zero());
    next_opt.logs_v.emplace_back(Eigen::Vector3d::Zero());
    next_opt.op_m.push_back(0.0);
    next_opt.op_v.push_back(0.0);
    next_opt.sh_m.emplace_back(n_coeffs, Eigen::Vector3d::Zero());
    next_opt.sh_v.emplace_back(n_coeffs, Eigen::Vector3d::Zero());
  };

  for (size_t i = 0; i < n; ++i) {
    if (keep[i]) {
      next.gaussians.push_back(scene.gaussians[i]);
      copy_moments(i);
    }
    if (do_clone[i]) {
      Gaussian3D copy = scene.gaussians[i];
      const double gn = stats.mean_grad[i].norm();
      if (gn > 0.0)
        copy.mean -= stats.mean_grad[i] / gn * (0.5 * copy.inflated_scale().maxCoeff());
      next.gaussians.push_back(std::move(copy));
      zero_moments();
    }
    if (do_split[i]) {
      const auto& parent = scene.gaussians[i];
      const Eigen::Matrix3d rot = parent.rotation();
      const Eigen::Vector3d s = parent.scale();
      for (int child = 0; child < 2; ++child) {
        Gaussian3D g = parent;
        const Eigen::Vector3d xi(gauss(rng), gauss(rng), gauss(rng));
        g.mean = parent.mean + rot * s.cwiseProduct(xi);
        g.log_scale = parent.log_scale.array() - std::log(config.split_scale_shrink);
        next.gaussians.push_back(std::move(g));
        zero_moments();
      }
    }
  }

  next_opt.step_count = opt.step_count;
  scene = std::move(next);
  opt = std::move(next_opt);
  refresh_filter_radii(scene, cams, config.kappa);
  stats.init(scene.size());
  return report;
}

}  // namespace panogs
