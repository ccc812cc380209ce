#include "panogs/rotation_eval.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "panogs/ssim.hpp"

namespace panogs {

std::vector<RotationEvalRow> rotation_eval(const GaussianScene& scene,
                                           const std::vector<ErpCamera>& cams,
                                           const std::vector<double>& thetas_deg, uint64_t seed,
                                           const SynthSpec* gt_spec,
                                           const RenderSettings& settings,
                                           const std::string& pair_spec) {
  std::vector<RotationEvalRow> rows;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  for (const double theta_deg : thetas_deg) {
    const double theta = theta_deg * kPi / 180.0;
    RotationEvalRow row;
    row.theta_deg = theta_deg;

    std::vector<ErpCamera> rotated;
    rotated.reserve(cams.size());
    for (const auto& cam : cams) {
      Eigen::Vector3d axis(gauss(rng), gauss(rng), gauss(rng));
      if (axis.norm() < 1e-12) axis = Eigen::Vector3d::UnitZ();
      axis.normalize();
      const double angle = uni(rng) * theta;
      const Eigen::Matrix3d q = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
      ErpCamera rc = cam;
      rc.rotation = q * cam.rotation;  // rotate the camera body, center fixed
      rotated.push_back(rc);
    }

    std::vector<Image> depths;
    std::vector<Mask> valids;
    double psnr_sum = 0.0, ssim_sum = 0.0;
    for (const auto& rc : rotated) {
      const RenderOutput out = render(scene, rc, settings);
      if (gt_spec) {
        const TracedView gt = trace_view(*gt_spec, rc);
        const Mask m = depth_valid_mask(&gt.hit, rc);
        psnr_sum += psnr(out.rgb, gt.image, &m);
        ssim_sum += ssim(out.rgb, gt.image, &m).value;
      }
      depths.push_back(out.depth);
      valids.push_back(depth_valid_mask(&out.depth_valid, rc));
    }
    const auto pairs = parse_pairs(pair_spec, int(rotated.size()));
    const ConsistencyResult cons = depth_consistency(depths, valids, rotated, pairs);
    row.dre = cons.dre;
    row.cir = cons.cir;
    row.valid_px = cons.valid_px;
    if (gt_spec && !rotated.empty()) {
      row.psnr = psnr_sum / double(rotated.size());
      row.ssim = ssim_sum / double(rotated.size());
    } else {
      row.psnr = std::nan("");
      row.ssim = std::nan("");
    }
    rows.push_back(row);
  }
  return rows;
}

void write_metrics_csv(const std::string& path, const std::string& scene_name,
                       const std::vector<RotationEvalRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_metrics_csv: cannot open " + path);
  out << "scene,theta,psnr,ssim,dre,cir,valid_px,lpips\n";
  for (const auto& r : rows)
    out << scene_name << ',' << r.theta_deg << ',' << r.psnr << ',' << r.ssim << ',' << r.dre
        << ',' << r.cir << ',' << r.valid_px << ",nan\n";
}

}  // namespace panogs
