#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "panogs/image_io.hpp"
#include "panogs/metrics.hpp"
#include "panogs/ply_io.hpp"
#include "panogs/pose_io.hpp"
#include "panogs/renderer.hpp"
#include "panogs/rotation_eval.hpp"
#include "panogs/ssim.hpp"
#include "panogs/synth.hpp"
#include "panogs/trainer.hpp"

namespace fs = std::filesystem;
using namespace panogs;

namespace {

std::string stem_of(const std::string& name) {
  std::string s = fs::path(name).filename().string();
  const auto dot = s.find('.');
  return dot == std::string::npos ? s : s.substr(0, dot);
}

int cmd_render(const std::string& scene_path, const std::string& poses_path,
               const std::string& out_dir, int tile, int sh_degree, int threads) {
  const GaussianScene scene = load_scene_ply(scene_path);
  const auto views = load_poses(poses_path);
  fs::create_directories(out_dir);
  RenderSettings rs;
  rs.tile_size = tile;
  rs.sh_degree = sh_degree;
  rs.num_threads = threads;
  for (const auto& pv : views) {
    const RenderOutput out = render(scene, pv.camera, rs);
    const std::string stem = out_dir + "/" + stem_of(pv.name);
    write_png(stem + ".rgb.png", out.rgb);
    write_pfm(stem + ".rgb.pfm", out.rgb);
    write_pfm(stem + ".depth.pfm", out.depth);
    write_pfm(stem + ".alpha.pfm", out.alpha);
    write_png(stem + ".normal.png", encode_normal_map(out.normal));
    write_pfm(stem + ".normal.pfm", out.normal);
    std::cout << "rendered " << pv.name << " (" << pv.camera.width << "x" << pv.camera.height
              << ")\n";
  }
  return 0;
}

int cmd_train(const std::string& images_dir, const std::string& poses_path,
              const std::string& points_path, const std::string& config_path,
              const std::string& out_dir) {
  TrainConfig config = config_path.empty() ? TrainConfig{} : load_train_config(config_path);
  const auto poses = load_poses(poses_path);
  std::vector<TrainView> views;
  for (const auto& pv : poses) {
    TrainView v;
    v.name = pv.name;
    v.camera = pv.camera;
    const std::string path = images_dir + "/" + pv.name;
    v.image = read_png(path);
    if (v.image.width != pv.camera.width || v.image.height != pv.camera.height)
      throw std::runtime_error("train: image size mismatch for " + pv.name);
    views.push_back(std::move(v));
  }
  const PointCloud points = load_point_cloud(points_path);
  fs::create_directories(out_dir);
  std::ofstream log_csv(out_dir + "/train_log.csv");
  const TrainResult result = train(views, points, config, &log_csv, out_dir);
  std::cout << "trained " << result.final_gaussians << " gaussians, final loss "
            << result.final_total << "\n"
            << "checkpoint: " << out_dir << "/scene.ply\n";
  return 0;
}

int cmd_eval(const std::string& pred_dir, const std::string& gt_dir,
             const std::string& poses_path, const std::string& pair_spec,
             const std::string& out_csv) {
  const auto poses = load_poses(poses_path);
  std::vector<Image> depths;
  std::vector<Mask> valid;
  std::vector<ErpCamera> cams;
  double psnr_sum = 0.0, ssim_sum = 0.0;
  long views_scored = 0;
  for (const auto& pv : poses) {
    const std::string stem = pred_dir + "/" + stem_of(pv.name);
    const Image depth = read_pfm(stem + ".depth.pfm");
    Mask defined(depth.width, depth.height, true);
    if (fs::exists(stem + ".alpha.pfm")) {
      const Image alpha = read_pfm(stem + ".alpha.pfm");
      for (int y = 0; y < alpha.height; ++y)
        for (int x = 0; x < alpha.width; ++x)
          defined.at(y, x) = alpha.at(y, x) > kAlphaBackground;
    } else {
      for (int y = 0; y < depth.height; ++y)
        for (int x = 0; x < depth.width; ++x) defined.at(y, x) = depth.at(y, x) > 0.0;
    }
    depths.push_back(depth);
    valid.push_back(depth_valid_mask(&defined, pv.camera));
    cams.push_back(pv.camera);

    const std::string gt_path = gt_dir + "/" + pv.name;
    if (fs::exists(gt_path)) {
      const Image gt = read_png(gt_path);
      const Image pred = fs::exists(stem + ".rgb.pfm") ? read_pfm(stem + ".rgb.pfm")
                                                       : read_png(stem + ".rgb.png");
      const Mask band = depth_valid_mask(nullptr, pv.camera);
      psnr_sum += psnr(pred, gt, &band);
      ssim_sum += ssim(pred, gt, &band).value;
      ++views_scored;
    }
  }
  const auto pairs = parse_pairs(pair_spec, int(cams.size()));
  const ConsistencyResult res = depth_consistency(depths, valid, cams, pairs);

  RotationEvalRow row;
  row.theta_deg = 0.0;
  row.psnr = views_scored ? psnr_sum / views_scored : std::nan("");
  row.ssim = views_scored ? ssim_sum / views_scored : std::nan("");
  row.dre = res.dre;
  row.cir = res.cir;
  row.valid_px = res.valid_px;
  write_metrics_csv(out_csv, stem_of(poses_path), {row});
  std::cout << "psnr " << row.psnr << " ssim " << row.ssim << " dre " << row.dre << " cir "
            << row.cir << " valid_px " << row.valid_px << "\n"
            << "wrote " << out_csv << "\n";
  return 0;
}

int cmd_synth(const std::string& spec_path, const std::string& preset,
              const std::string& out_dir) {
  SynthSpec spec =
      spec_path.empty() ? SynthSpec::preset(preset) : SynthSpec::from_json_file(spec_path);
  const SynthDataset data = synth_generate(spec);
  write_dataset(data, out_dir);
  std::cout << "wrote " << data.views.size() << " views and " << data.points.positions.size()
            << " points to " << out_dir << "\n";
  return 0;
}

int cmd_rotate_eval(const std::string& scene_path, const std::string& poses_path,
                    const std::string& thetas, uint64_t seed, const std::string& synth_spec,
                    const std::string& pair_spec, const std::string& out_csv, int threads) {
  const GaussianScene scene = load_scene_ply(scene_path);
  const auto poses = load_poses(poses_path);
  std::vector<ErpCamera> cams;
  for (const auto& pv : poses) cams.push_back(pv.camera);
  std::vector<double> theta_list;
  std::stringstream ss(thetas);
  std::string tok;
  while (std::getline(ss, tok, ',')) theta_list.push_back(std::stod(tok));
  SynthSpec gt;
  const bool has_gt = !synth_spec.empty();
  if (has_gt) gt = SynthSpec::from_json_file(synth_spec);
  RenderSettings rs;
  rs.num_threads = threads;
  const auto rows =
      rotation_eval(scene, cams, theta_list, seed, has_gt ? &gt : nullptr, rs, pair_spec);
  write_metrics_csv(out_csv, stem_of(scene_path), rows);
  for (const auto& r : rows)
    std::cout << "theta " << r.theta_deg << ": psnr " << r.psnr << " ssim " << r.ssim << " dre "
              << r.dre << " cir " << r.cir << "\n";
  std::cout << "wrote " << out_csv << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spherical ray-space gaussian rendering for equirectangular panoramas"};
  app.require_subcommand(1);

  std::string scene_path, poses_path, out_dir = "out", images_dir, points_path, config_path;
  std::string pred_dir, gt_dir, pair_spec = "adjacent:2", out_csv = "metrics.csv";
  std::string spec_path, preset = "box_room", thetas = "0,60,90", synth_spec;
  int tile = 16, sh_degree = -1, threads = 0;
  uint64_t seed = 7;

  auto* render_cmd = app.add_subcommand("render", "render a scene checkpoint for given poses");
  render_cmd->add_option("--scene", scene_path, "gaussian scene .ply")->required();
  render_cmd->add_option("--poses", poses_path, "pose file")->required();
  render_cmd->add_option("--out", out_dir, "output directory")->required();
  render_cmd->add_option("--tile", tile, "tile size in pixels");
  render_cmd->add_option("--sh-degree", sh_degree, "cap the active SH degree");
  render_cmd->add_option("--threads", threads, "worker threads (0 = auto)");

  auto* train_cmd = app.add_subcommand("train", "optimize a scene against posed panoramas");
  train_cmd->add_option("--images", images_dir, "directory with training panoramas")->required();
  train_cmd->add_option("--poses", poses_path, "pose file")->required();
  train_cmd->add_option("--points", points_path, "seed point cloud .ply")->required();
  train_cmd->add_option("--config", config_path, "JSON training config");
  train_cmd->add_option("--out", out_dir, "output directory")->required();

  auto* eval_cmd = app.add_subcommand("eval", "PSNR/SSIM vs ground truth + DRE/CIR consistency");
  eval_cmd->add_option("--pred", pred_dir, "directory with rendered outputs")->required();
  eval_cmd->add_option("--gt", gt_dir, "directory with ground-truth images")->required();
  eval_cmd->add_option("--poses", poses_path, "pose file")->required();
  eval_cmd->add_option("--pairs", pair_spec, "view pairs: adjacent:<k> or all");
  eval_cmd->add_option("--out", out_csv, "metrics CSV path");

  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
  synth_cmd->add_option("--spec", spec_path, "scene spec (JSON)");
  synth_cmd->add_option("--preset", preset, "built-in preset (box_room, sphere_room, plane_wall)");
  synth_cmd->add_option("--out", out_dir, "output directory")->required();

  auto* rot_cmd = app.add_subcommand("rotate-eval", "rotation-robustness metric table");
  rot_cmd->add_option("--scene", scene_path, "gaussian scene .ply")->required();
  rot_cmd->add_option("--poses", poses_path, "pose file")->required();
  rot_cmd->add_option("--thetas", thetas, "comma-separated rotation bounds in degrees");
  rot_cmd->add_option("--seed", seed, "rotation sampling seed");
  rot_cmd->add_option("--synth-spec", synth_spec,
                      "analytic scene spec for PSNR/SSIM ground truth (optional)");
  rot_cmd->add_option("--pairs", pair_spec, "view pairs for DRE/CIR");
  rot_cmd->add_option("--out", out_csv, "metrics CSV path");
  rot_cmd->add_option("--threads", threads, "worker threads (0 = auto)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (render_cmd->parsed())
      return cmd_render(scene_path, poses_path, out_dir, tile, sh_degree, threads);
    if (train_cmd->parsed())
      return cmd_train(images_dir, poses_path, points_path, config_path, out_dir);
    if (eval_cmd->parsed()) return cmd_eval(pred_dir, gt_dir, poses_path, pair_spec, out_csv);
    if (synth_cmd->parsed()) return cmd_synth(spec_path, preset, out_dir);
    if (rot_cmd->parsed())
      return cmd_rotate_eval(scene_path, poses_path, thetas, seed, synth_spec, pair_spec, out_csv,
                             threads);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
