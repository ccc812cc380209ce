#include "panogs/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "json.hpp"
#include "panogs/parallel.hpp"

namespace panogs {

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_train_config: cannot open " + path);
  nlohmann::json j;
  in >> j;
  TrainConfig c;
  auto take = [&](const char* key, auto& field) {
    if (j.contains(key)) {
      field = j[key].get<std::decay_t<decltype(field)>>();
      j.erase(key);
    }
  };
  take("iterations", c.iterations);
  take("densify_until", c.densify_until);
  take("densify_interval", c.densify_interval);
  take("densify_start", c.densify_start);
  take("densify_grad_threshold", c.densify_grad_threshold);
  take("densify_size_frac", c.densify_size_frac);
  take("split_scale_shrink", c.split_scale_shrink);
  take("prune_opacity", c.prune_opacity);
  take("max_gaussians", c.max_gaussians);
  take("lr_mean", c.lr_mean);
  take("lr_mean_final", c.lr_mean_final);
  take("lr_quat", c.lr_quat);
  take("lr_log_scale", c.lr_log_scale);
  take("lr_opacity", c.lr_opacity);
  take("lr_sh", c.lr_sh);
  take("jump_ramp_start", c.jump_ramp_start);
  take("jump_ramp_end", c.jump_ramp_end);
  take("dn_start", c.dn_start);
  take("kappa", c.kappa);
  take("sh_degree", c.sh_degree);
  take("tile_size", c.tile_size);
  take("cull_sigma", c.cull_sigma);
  take("num_threads", c.num_threads);
  take("seed", c.seed);
  take("init_opacity", c.init_opacity);
  take("init_scale_mult", c.init_scale_mult);
  take("log_interval", c.log_interval);
  take("checkpoint_interval", c.checkpoint_interval);
  if (j.contains("weights")) {
    nlohmann::json wj = j["weights"];
    j.erase("weights");
    auto wtake = [&](const char* key, double& field) {
      if (wj.contains(key)) {
        field = wj[key].get<double>();
        wj.erase(key);
      }
    };
    wtake("lambda_dn", c.weights.lambda_dn);
    wtake("lambda_j1", c.weights.lambda_j1);
    wtake("lambda_j2", c.weights.lambda_j2);
    wtake("tau", c.weights.tau);
    wtake("tau1", c.weights.tau1);
    wtake("tau2", c.weights.tau2);
    wtake("beta", c.weights.beta);
    wtake("ssim_mix", c.weights.ssim_mix);
    wtake("lat_eps", c.weights.lat_eps);
    if (!wj.empty())
      throw std::runtime_error("load_train_config: unknown weights key " + wj.begin().key());
  }
  if (!j.empty())
    throw std::runtime_error("load_train_config: unknown key " + j.begin().key());
  return c;
}

double scene_extent_of(const PointCloud& points) {
  if (points.positions.empty()) throw std::invalid_argument("scene_extent_of: empty point cloud");
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : points.positions) centroid += p;
  centroid /= double(points.positions.size());
  double r = 0.0;
  for (const auto& p : points.positions) r = std::max(r, (p - centroid).norm());
  return std::max(r, 1e-6);
}

namespace {

// Mean distance to the 3 nearest neighbors, brute force in parallel.
std::vector<double> knn3_mean_distance(const std::vector<Eigen::Vector3d>& pts, int num_threads) {
  const int n = int(pts.size());
  std::vector<double> out(n, 0.0);
  parallel_for(n, num_threads, [&](int i) {
    double best[3] = {1e300, 1e300, 1e300};
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d2 = (pts[j] - pts[i]).squaredNorm();
      if (d2 < best[2]) {
        best[2] = d2;
        if (best[2] < best[1]) std::swap(best[1], best[2]);
        if (best[1] < best[0]) std::swap(best[0], best[1]);
      }
    }
    double acc = 0.0;
    int cnt = 0;
    for (double b : best)
      if (b < 1e300) {
        acc += std::sqrt(b);
        ++cnt;
      }
    out[i] = cnt > 0 ? acc / cnt : 1e-3;
  });
  return out;
}

}  // namespace

GaussianScene init_scene_from_points(const PointCloud& points, const std::vector<ErpCamera>& cams,
                                     const TrainConfig& config) {
  if (points.positions.empty())
    throw std::invalid_argument("init_scene_from_points: empty point cloud");
  GaussianScene scene;
  scene.sh_degree = config.sh_degree;
  const int n_coeffs = sh_coeff_count(config.sh_degree);
  const auto nn = knn3_mean_distance(points.positions, config.num_threads);
  const double extent = scene_extent_of(points);
  scene.gaussians.resize(points.positions.size());
  for (size_t i = 0; i < points.positions.size(); ++i) {
    auto& g = scene.gaussians[i];
    g.mean = points.positions[i];
    const double s = std::max(nn[i] * config.init_scale_mult, 1e-7 * extent);
    g.log_scale = Eigen::Vector3d::Constant(std::log(s));
    g.quat = Eigen::Vector4d(1, 0, 0, 0);
    g.opacity_logit = inverse_sigmoid(config.init_opacity);
    g.sh.assign(n_coeffs, Eigen::Vector3d::Zero());
    const Eigen::Vector3d rgb =
        points.has_colors() ? points.colors[i] : Eigen::Vector3d(0.5, 0.5, 0.5);
    g.sh[0] = rgb_to_sh_dc(rgb);
    g.filter_radius = filter_radius(g, cams, config.kappa);
  }
  return scene;
}

TrainResult train(const std::vector<TrainView>& views, const PointCloud& points,
                  const TrainConfig& config, std::ostream* log_csv,
                  const std::string& checkpoint_dir) {
  if (views.empty()) throw std::invalid_argument("train: no training views");
  if (points.positions.empty()) throw std::invalid_argument("train: empty point cloud");

  std::vector<ErpCamera> cams;
  cams.reserve(views.size());
  for (const auto& v : views) cams.push_back(v.camera);

  GaussianScene scene = init_scene_from_points(points, cams, config);
  const double extent = scene_extent_of(points);

  OptimizerState opt;
  opt.init(scene.size(), sh_coeff_count(config.sh_degree));
  DensifyStats stats;
  stats.init(scene.size());

  std::mt19937_64 rng(config.seed);
  std::vector<int> order(views.size());
  std::iota(order.begin(), order.end(), 0);
  size_t order_pos = order.size();  // trigger shuffle on first use

  RenderSettings rs;
  rs.tile_size = config.tile_size;
  rs.cull_sigma = config.cull_sigma;
  rs.sh_degree = config.sh_degree;
  rs.num_threads = config.num_threads;

  if (!checkpoint_dir.empty()) std::filesystem::create_directories(checkpoint_dir);
  if (log_csv)
    (*log_csv) << "iteration,total,rgb,dn,jump1,jump2,jump_scale,dn_enabled,valid_px,gaussians\n";

  const double lr_decay =
      config.iterations > 0 ? std::log(config.lr_mean_final / config.lr_mean) : 0.0;

  TrainResult result;
  double last_total = 0.0;
  for (int it = 1; it <= config.iterations; ++it) {
    if (order_pos >= order.size()) {
      std::shuffle(order.begin(), order.end(), rng);
      order_pos = 0;
    }
    const TrainView& view = views[order[order_pos++]];

    ScheduleState schedule;
    if (config.jump_ramp_end > config.jump_ramp_start) {
      schedule.jump_scale = std::clamp(double(it - config.jump_ramp_start) /
                                           double(config.jump_ramp_end - config.jump_ramp_start),
                                       0.0, 1.0);
    } else {
      schedule.jump_scale = it >= config.jump_ramp_start ? 1.0 : 0.0;
    }
    schedule.dn_enabled = it >= config.dn_start;

    const TileIndex index = build_tile_index(scene, view.camera, rs.tile_size, rs.cull_sigma);
    const RenderOutput render_out = render(scene, view.camera, index, rs);
    LossGradMaps grad_maps;
    const LossBreakdown bd =
        total_loss(render_out, view.image, view.camera, config.weights, schedule, &grad_maps);
    const SceneGrads grads = render_backward(scene, view.camera, index, grad_maps, rs);
    accumulate_densify_stats(stats, grads, scene, view.camera, config.weights.lat_eps);

    LearningRates rates;
    rates.mean = config.lr_mean * extent * std::exp(lr_decay * double(it) / config.iterations);
    rates.quat = config.lr_quat;
    rates.log_scale = config.lr_log_scale;
    rates.opacity = config.lr_opacity;
    rates.sh = config.lr_sh;
    apply_step(scene, grads, opt, rates);

    if (it >= config.densify_start && it <= config.densify_until &&
        it % config.densify_interval == 0) {
      densify_and_prune(scene, stats, opt, cams, extent, config, rng);
    }

    last_total = bd.total;
    if (log_csv && (it % config.log_interval == 0 || it == config.iterations)) {
      (*log_csv) << it << ',' << bd.total << ',' << bd.rgb << ',' << bd.dn << ',' << bd.jump1
                 << ',' << bd.jump2 << ',' << bd.jump_scale << ',' << (bd.dn_enabled ? 1 : 0)
                 << ',' << bd.valid_pixel_count << ',' << scene.size() << '\n';
    }
    if (!checkpoint_dir.empty() && config.checkpoint_interval > 0 &&
        it % config.checkpoint_interval == 0 && it != config.iterations) {
      const std::string stem = checkpoint_dir + "/ckpt_" + std::to_string(it);
      save_scene_ply(stem + ".ply", scene);
      save_optimizer_state(stem + ".opt", opt);
    }
  }

  if (!checkpoint_dir.empty()) {
    save_scene_ply(checkpoint_dir + "/scene.ply", scene);
    save_optimizer_state(checkpoint_dir + "/scene.opt", opt);
  }

  result.scene = std::move(scene);
  result.final_total = last_total;
  result.final_gaussians = int(result.scene.size());
  return result;
}

}  // namespace panogs
