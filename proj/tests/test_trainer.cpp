#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "panogs/trainer.hpp"

using namespace panogs;
using Eigen::Vector3d;

namespace {

ErpCamera identity_cam(int w, int h, const Vector3d& c = Vector3d::Zero()) {
  return ErpCamera(Eigen::Matrix3d::Identity(), c, w, h);
}

GaussianScene gradcheck_scene(int count, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GaussianScene scene;
  for (int i = 0; i < count; ++i) {
    Gaussian3D g;
    Vector3d dir(n(rng), n(rng), n(rng));
    if (dir.norm() < 1e-6) dir = Vector3d::UnitZ();
    dir.normalize();
    g.mean = dir * (1.5 + 2.0 * u(rng));
    g.quat = Eigen::Vector4d(1.0 + 0.3 * n(rng), 0.3 * n(rng), 0.3 * n(rng), 0.3 * n(rng));
    g.normalize_quat();
    for (int k = 0; k < 3; ++k) g.log_scale[k] = std::log(0.25 + 0.4 * u(rng));
    g.opacity_logit = inverse_sigmoid(0.25 + 0.5 * u(rng));
    g.sh[0] = rgb_to_sh_dc(Vector3d(0.25 + 0.5 * u(rng), 0.25 + 0.5 * u(rng),
                                    0.25 + 0.5 * u(rng)));
    g.filter_radius = 0.01;
    scene.gaussians.push_back(g);
  }
  return scene;
}

struct FlatParams {
  // raw parameter views: (gaussian, slot); slots: 0-2 mean, 3-6 quat,
  // 7-9 log scale, 10 opacity, 11-13 sh dc
  static constexpr int kPerGaussian = 14;
  static double get(const GaussianScene& s, int g, int slot) {
    const auto& gg = s.gaussians[g];
    if (slot < 3) return gg.mean[slot];
    if (slot < 7) return gg.quat[slot - 3];
    if (slot < 10) return gg.log_scale[slot - 7];
    if (slot == 10) return gg.opacity_logit;
    return gg.sh[0][slot - 11];
  }
  static void set(GaussianScene& s, int g, int slot, double v) {
    auto& gg = s.gaussians[g];
    if (slot < 3)
      gg.mean[slot] = v;
    else if (slot < 7)
      gg.quat[slot - 3] = v;
    else if (slot < 10)
      gg.log_scale[slot - 7] = v;
    else if (slot == 10)
      gg.opacity_logit = v;
    else
      gg.sh[0][slot - 11] = v;
  }
  static double get_grad(const SceneGrads& gr, int g, int slot) {
    if (slot < 3) return gr.mean[g][slot];
    if (slot < 7) return gr.quat[g][slot - 3];
    if (slot < 10) return gr.log_scale[g][slot - 7];
    if (slot == 10) return gr.opacity_logit[g];
    return gr.sh[g][0][slot - 11];
  }
};

struct GradCheckResult {
  double frac_within_1e3 = 0.0;
  double frac_within_1e2 = 0.0;
  double worst = 0.0;
};

GradCheckResult run_gradcheck(const GaussianScene& scene, const ErpCamera& cam, const Image& gt,
                              const LossWeights& weights, double h) {
  const ScheduleState sched;
  RenderSettings rs;
  rs.num_threads = 1;

  auto loss_of = [&](const GaussianScene& s) {
    const TileIndex idx = build_tile_index(s, cam, rs.tile_size, rs.cull_sigma);
    const RenderOutput out = render(s, cam, idx, rs);
    return total_loss(out, gt, cam, weights, sched).total;
  };

  const TileIndex idx = build_tile_index(scene, cam, rs.tile_size, rs.cull_sigma);
  const RenderOutput out = render(scene, cam, idx, rs);
  LossGradMaps maps;
  total_loss(out, gt, cam, weights, sched, &maps);
  const SceneGrads grads = render_backward(scene, cam, idx, maps, rs);

  long total = 0, ok3 = 0, ok2 = 0;
  GradCheckResult res;
  for (int g = 0; g < int(scene.size()); ++g)
    for (int slot = 0; slot < FlatParams::kPerGaussian; ++slot) {
      GaussianScene sp = scene, sm = scene;
      const double v = FlatParams::get(scene, g, slot);
      FlatParams::set(sp, g, slot, v + h);
      FlatParams::set(sm, g, slot, v - h);
      const double fd = (loss_of(sp) - loss_of(sm)) / (2.0 * h);
      const double an = FlatParams::get_grad(grads, g, slot);
      // gradients below 1e-5 are treated as zero scale
      const double err = std::abs(an - fd) / (std::max(std::abs(an), std::abs(fd)) + 1e-5);
      ++total;
      if (err < 1e-3) ++ok3;
      if (err < 1e-2) ++ok2;
      res.worst = std::max(res.worst, err);
    }
  res.frac_within_1e3 = double(ok3) / double(total);
  res.frac_within_1e2 = double(ok2) / double(total);
  return res;
}

}  // namespace

TEST_CASE("zero loss gradients are zero") {
  const GaussianScene scene = gradcheck_scene(5, 1);
  const ErpCamera cam = identity_cam(32, 16);
  const TileIndex idx = build_tile_index(scene, cam);
  const RenderOutput out = render(scene, cam, idx);
  LossGradMaps maps;
  maps.d_rgb = Image(32, 16, 3);
  maps.d_depth = Image(32, 16, 1);
  maps.d_normal = Image(32, 16, 3);
  const SceneGrads grads = render_backward(scene, cam, idx, maps);
  for (size_t i = 0; i < scene.size(); ++i) {
    CHECK(grads.mean[i].isZero());
    CHECK(grads.quat[i].isZero());
    CHECK(grads.opacity_logit[i] == 0.0);
  }
}

TEST_CASE("analytic gradients match finite differences (full loss)") {
  const GaussianScene scene = gradcheck_scene(20, 12345);
  const ErpCamera cam = identity_cam(48, 24);
  // ground truth proportional to the render keeps |render - gt| away from
  // the L1 kink for every covered pixel
  RenderSettings rs;
  rs.num_threads = 1;
  const RenderOutput base = render(scene, cam, rs);
  Image gt = base.rgb;
  for (auto& v : gt.data) v = std::min(1.0, 0.85 * v + 0.02);

  LossWeights w;
  w.tau = 0.2;
  // h = 1e-4 windows can straddle subgradient boundaries (hinges, the
  // 1/255 skip, median-depth reselection) on a random scene; the p95 bound
  // checks the analytic chain while tolerating those. The acceptance suite
  // runs the strict variant on a boundary-free instance.
  const GradCheckResult res = run_gradcheck(scene, cam, gt, w, 1e-4);
  CAPTURE(res.worst);
  CHECK(res.frac_within_1e3 >= 0.95);
  CHECK(res.frac_within_1e2 >= 0.97);

  // away from those boundaries the finite differences converge: tighten h
  const GradCheckResult fine = run_gradcheck(scene, cam, gt, w, 1e-6);
  CHECK(fine.frac_within_1e2 == doctest::Approx(1.0));
}

TEST_CASE("adam: zero gradient leaves parameters, toy quadratic converges") {
  double x = 3.0, m = 0.0, v = 0.0;
  for (long t = 1; t <= 10; ++t) adam_update(x, 0.0, m, v, t, 0.1);
  CHECK(x == 3.0);

  // minimize 0.5 (x - a)^2
  const double a = -1.3;
  x = 4.0;
  m = v = 0.0;
  for (long t = 1; t <= 500; ++t) adam_update(x, x - a, m, v, t, 0.1);
  CHECK(std::abs(x - a) < 1e-4);
}

TEST_CASE("apply_step skips non-finite gradients") {
  GaussianScene scene = gradcheck_scene(2, 3);
  OptimizerState opt;
  opt.init(scene.size(), 1);
  SceneGrads grads;
  grads.init(scene.size(), 1);
  grads.mean[0] = Vector3d(std::nan(""), 0.1, 0.1);
  grads.opacity_logit[1] = 0.2;
  const Vector3d before = scene.gaussians[0].mean;
  const int skipped = apply_step(scene, grads, opt, LearningRates{});
  CHECK(skipped == 1);
  CHECK(scene.gaussians[0].mean[0] == before[0]);  // nan slot untouched
  CHECK(scene.gaussians[0].mean[1] != before[1]);
}

TEST_CASE("densify stats: latitude weighting and visibility") {
  GaussianScene scene;
  Gaussian3D eq;
  eq.mean = Vector3d(0, 0, 2);
  Gaussian3D pole;
  pole.mean = Vector3d(0, -2, 1e-6);
  scene.gaussians = {eq, pole};
  SceneGrads grads;
  grads.init(2, 1);
  grads.touched = {1, 1};
  // world gradients chosen along each gaussian's image tangents with equal
  // raw pixel-gradient norms (both means sit at distance 2, W = 2H)
  grads.mean[0] = Vector3d(1, 0, 0);   // equator: +x is the longitude tangent
  grads.mean[1] = Vector3d(0, 0, -1);  // pole: -z is the latitude tangent
  DensifyStats stats;
  stats.init(2);
  const ErpCamera cam = identity_cam(256, 128);
  accumulate_densify_stats(stats, grads, scene, cam, 0.1);
  CHECK(stats.count[0] == 1);
  CHECK(stats.count[1] == 1);
  // same raw pixel-gradient magnitude, pole weighted down to eps = 0.1
  CHECK(stats.score[1] / stats.score[0] == doctest::Approx(0.1).epsilon(1e-3));

  SceneGrads untouched;
  untouched.init(2, 1);
  DensifyStats stats2;
  stats2.init(2);
  accumulate_densify_stats(stats2, untouched, scene, cam, 0.1);
  CHECK(stats2.count[0] == 0);
  CHECK(stats2.score[0] == 0.0);

  // two views accumulate additively
  accumulate_densify_stats(stats, grads, scene, cam, 0.1);
  CHECK(stats.count[0] == 2);
}

TEST_CASE("densify and prune mechanics") {
  TrainConfig config;
  config.densify_grad_threshold = 1e-3;
  config.densify_size_frac = 0.05;
  config.prune_opacity = 0.005;
  config.kappa = 0.5;
  std::vector<ErpCamera> cams{identity_cam(128, 64)};
  std::mt19937_64 rng(9);

  GaussianScene scene;
  Gaussian3D small;  // high score, small -> clone
  small.mean = Vector3d(0, 0, 2);
  small.log_scale = Vector3d::Constant(std::log(0.02));
  small.opacity_logit = inverse_sigmoid(0.5);
  Gaussian3D large;  // high score, large -> split
  large.mean = Vector3d(2, 0, 0);
  large.log_scale = Vector3d::Constant(std::log(0.5));
  large.opacity_logit = inverse_sigmoid(0.5);
  Gaussian3D faint;  // prune
  faint.mean = Vector3d(0, 0, -2);
  faint.opacity_logit = inverse_sigmoid(1e-4);
  Gaussian3D calm;  // below score threshold, kept
  calm.mean = Vector3d(0, 2, 0);
  calm.log_scale = Vector3d::Constant(std::log(0.05));
  calm.opacity_logit = inverse_sigmoid(0.5);
  scene.gaussians = {small, large, faint, calm};
  const double extent = 2.0;

  OptimizerState opt;
  opt.init(4, 1);
  DensifyStats stats;
  stats.init(4);
  stats.score = {1.0, 1.0, 0.0, 1e-6};
  stats.count = {1, 1, 0, 1};
  stats.mean_grad = {Vector3d(0, 0, 1), Vector3d(1, 0, 0), Vector3d::Zero(), Vector3d::Zero()};

  const DensifyReport report = densify_and_prune(scene, stats, opt, cams, extent, config, rng);
  CHECK(report.cloned == 1);
  CHECK(report.split == 1);
  CHECK(report.pruned == 1);
  // 4 - pruned - split parent + clone + 2 children = 5
  CHECK(scene.size() == 5);
  CHECK(opt.size() == scene.size());
  CHECK(stats.score.size() == scene.size());

  int shrunk = 0;
  for (const auto& g : scene.gaussians) {
    CHECK(g.scale().minCoeff() > 0.0);
    CHECK(std::abs(g.quat.norm() - 1.0) < 1e-9);
    CHECK(g.opacity() >= config.prune_opacity);
    CHECK(g.filter_radius > 0.0);
    if (std::abs(g.scale()[0] - 0.5 / 1.6) < 1e-9) ++shrunk;
  }
  CHECK(shrunk == 2);  // both split children carry scales / 1.6
}

TEST_CASE("all scores below threshold: only prunes change the count") {
  TrainConfig config;
  config.densify_grad_threshold = 1e3;
  std::vector<ErpCamera> cams{identity_cam(64, 32)};
  std::mt19937_64 rng(10);
  GaussianScene scene = gradcheck_scene(6, 77);
  scene.gaussians[2].opacity_logit = inverse_sigmoid(1e-4);
  OptimizerState opt;
  opt.init(6, 1);
  DensifyStats stats;
  stats.init(6);
  for (auto& s : stats.score) s = 1.0;
  for (auto& c : stats.count) c = 1;
  densify_and_prune(scene, stats, opt, cams, 2.0, config, rng);
  CHECK(scene.size() == 5);
}

TEST_CASE("training smoke run: loss decreases and is deterministic") {
  // one fixed camera observing a small random scene rendered as gt
  const ErpCamera cam = identity_cam(48, 24);
  const GaussianScene target = gradcheck_scene(15, 2020);
  RenderSettings rs;
  const RenderOutput gt_render = render(target, cam, rs);

  PointCloud pc;
  std::mt19937_64 rng(2021);
  std::normal_distribution<double> n;
  for (int i = 0; i < 60; ++i) {
    const auto& g = target.gaussians[i % target.size()];
    pc.positions.push_back(g.mean + 0.05 * Vector3d(n(rng), n(rng), n(rng)));
    pc.colors.push_back(Eigen::Vector3d(0.5, 0.5, 0.5));
  }

  std::vector<TrainView> views{{"v0", cam, gt_render.rgb}};

  TrainConfig config;
  config.iterations = 60;
  config.densify_start = 1000;  // no structural events in this smoke run
  config.densify_until = 0;
  config.jump_ramp_start = 10;
  config.jump_ramp_end = 30;
  config.dn_start = 40;
  config.weights.tau = 0.1;
  config.sh_degree = 0;
  config.seed = 4;
  config.num_threads = 2;

  const TrainResult r1 = train(views, pc, config);
  const TrainResult r2 = train(views, pc, config);
  REQUIRE(r1.scene.size() == r2.scene.size());
  for (size_t i = 0; i < r1.scene.size(); ++i) {
    CHECK(r1.scene.gaussians[i].mean == r2.scene.gaussians[i].mean);
    CHECK(r1.scene.gaussians[i].quat == r2.scene.gaussians[i].quat);
    CHECK(r1.scene.gaussians[i].opacity_logit == r2.scene.gaussians[i].opacity_logit);
  }

  // loss at the end beats the first-iteration loss
  std::vector<TrainView> views_again = views;
  TrainConfig one = config;
  one.iterations = 1;
  const TrainResult first = train(views_again, pc, one);
  CHECK(r1.final_total < first.final_total);
}

TEST_CASE("train rejects empty inputs") {
  TrainConfig config;
  PointCloud pc;
  CHECK_THROWS_AS(train({}, pc, config), std::invalid_argument);
  std::vector<TrainView> views{{"v", identity_cam(16, 8), Image(16, 8, 3)}};
  CHECK_THROWS_AS(train(views, pc, config), std::invalid_argument);
}

TEST_CASE("iterations=0 returns the initialization unchanged") {
  const ErpCamera cam = identity_cam(32, 16);
  PointCloud pc;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  for (int i = 0; i < 20; ++i) pc.positions.push_back(Vector3d(n(rng), n(rng), n(rng) + 3.0));
  std::vector<TrainView> views{{"v", cam, Image(32, 16, 3)}};
  TrainConfig config;
  config.iterations = 0;
  const TrainResult r = train(views, pc, config);
  const GaussianScene init = init_scene_from_points(pc, {cam}, config);
  REQUIRE(r.scene.size() == init.size());
  for (size_t i = 0; i < init.size(); ++i)
    CHECK(r.scene.gaussians[i].mean == init.gaussians[i].mean);
}
