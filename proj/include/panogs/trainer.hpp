#pragma once

#include <ostream>
#include <random>
#include <string>

#include "panogs/optimizer.hpp"
#include "panogs/ply_io.hpp"
#include "panogs/pose_io.hpp"

namespace panogs {

struct TrainConfig {
  int iterations = 8000;
  int densify_until = 4000;
  int densify_interval = 100;
  int densify_start = 500;
  double densify_grad_threshold = 4e-6;  // mean positional-pixel-gradient score (mean-normalized losses)
  double densify_size_frac = 0.01;       // clone/split size cutoff, x scene extent
  double split_scale_shrink = 1.6;
  double prune_opacity = 0.005;
  int max_gaussians = 60000;  // densification stops adding beyond this

  double lr_mean = 1.6e-4;  // x scene extent, exponentially decayed
  double lr_mean_final = 1.6e-6;
  double lr_quat = 1e-3;
  double lr_log_scale = 5e-3;
  double lr_opacity = 0.05;
  double lr_sh = 2.5e-3;

  // Geometry-loss schedule: jump terms ramp linearly over
  // [jump_ramp_start, jump_ramp_end]; the depth-normal term switches on at
  // dn_start.
  int jump_ramp_start = 1000;
  int jump_ramp_end = 4000;
  int dn_start = 5000;

  LossWeights weights;
  double kappa = 0.5;  // pixel-support filter factor
  int sh_degree = 0;
  int tile_size = 16;
  double cull_sigma = kDefaultCullSigma;
  int num_threads = 0;
  uint64_t seed = 0;

  double init_opacity = 0.1;
  double init_scale_mult = 1.0;  // x mean 3-NN distance

  int log_interval = 1;         // CSV cadence
  int checkpoint_interval = 0;  // 0: final checkpoint only
};

/// JSON config file; every field optional, unknown keys rejected.
TrainConfig load_train_config(const std::string& path);

struct TrainView {
  std::string name;
  ErpCamera camera;
  Image image;
};

/// Per-Gaussian densification statistics: latitude-weighted positional
/// pixel-gradient score, observation count, and the accumulated world-space
/// mean gradient used to displace clones.
struct DensifyStats {
  std::vector<double> score;
  std::vector<int> count;
  std::vector<Eigen::Vector3d> mean_grad;

  void init(size_t n);
};

/// score += ||dL/d(projected mean pixel position)|| * w_lat for every
/// Gaussian the backward pass touched in this view.
void accumulate_densify_stats(DensifyStats& stats, const SceneGrads& grads,
                              const GaussianScene& scene, const ErpCamera& cam, double lat_eps);

struct DensifyReport {
  int cloned = 0;
  int split = 0;
  int pruned = 0;
};

/// Clone/split high-score Gaussians, prune near-transparent ones, recompute
/// filter radii, and realign optimizer state and stats.
DensifyReport densify_and_prune(GaussianScene& scene, DensifyStats& stats, OptimizerState& opt,
                                const std::vector<ErpCamera>& cams, double scene_extent,
                                const TrainConfig& config, std::mt19937_64& rng);

/// Scales from mean 3-NN distance, color from point color (gray fallback),
/// identity rotations, fixed initial opacity; filter radii from the cameras.
GaussianScene init_scene_from_points(const PointCloud& points, const std::vector<ErpCamera>& cams,
                                     const TrainConfig& config);

/// Radius of the point set around its centroid; scales position learning
/// rates and densification size thresholds.
double scene_extent_of(const PointCloud& points);

struct TrainResult {
  GaussianScene scene;
  double final_total = 0.0;
  int final_gaussians = 0;
};

/// Full optimization loop. CSV breakdown lines go to log_csv when given;
/// checkpoints (scene PLY + optimizer sidecar) land in checkpoint_dir when
/// non-empty.
TrainResult train(const std::vector<TrainView>& views, const PointCloud& points,
                  const TrainConfig& config, std::ostream* log_csv = nullptr,
                  const std::string& checkpoint_dir = "");

}  // namespace panogs
