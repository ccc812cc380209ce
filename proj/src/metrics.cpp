#include "panogs/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace panogs {

double psnr(const Image& a, const Image& b, const Mask* mask) {
  if (!a.same_shape(b)) throw std::invalid_argument("psnr: shape mismatch");
  double mse = 0.0;
  long n = 0;
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x) {
      if (mask && !mask->at(y, x)) continue;
      for (int c = 0; c < a.channels; ++c) {
        const double d = a.at(y, x, c) - b.at(y, x, c);
        mse += d * d;
        ++n;
      }
    }
  if (n == 0) return kPsnrMax;
  mse /= double(n);
  if (mse <= 0.0) return kPsnrMax;
  return std::min(kPsnrMax, 10.0 * std::log10(1.0 / mse));
}

Reprojection reproject(const Eigen::Vector2d& pixel, double depth_i, const ErpCamera& cam_i,
                       const ErpCamera& cam_j) {
  Reprojection out;
  const Eigen::Vector3d p = cam_i.center + depth_i * ray_at(pixel.x(), pixel.y(), cam_i);
  const Eigen::Vector3d rel = p - cam_j.center;
  out.depth = rel.norm();
  if (out.depth <= 0.0) return out;
  out.pixel = project_point(p, cam_j);
  out.valid = true;
  return out;
}

std::vector<std::pair<int, int>> adjacent_pairs(int n_views, int max_gap) {
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < n_views; ++i)
    for (int j = 0; j < n_views; ++j) {
      if (i == j) continue;
      if (std::abs(i - j) <= max_gap) pairs.emplace_back(i, j);
    }
  return pairs;
}

std::vector<std::pair<int, int>> parse_pairs(const std::string& spec, int n_views) {
  if (spec == "all") {
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < n_views; ++i)
      for (int j = 0; j < n_views; ++j)
        if (i != j) pairs.emplace_back(i, j);
    return pairs;
  }
  const std::string prefix = "adjacent:";
  if (spec.rfind(prefix, 0) == 0) {
    const int gap = std::stoi(spec.substr(prefix.size()));
    if (gap < 1) throw std::invalid_argument("parse_pairs: gap must be >= 1");
    return adjacent_pairs(n_views, gap);
  }
  throw std::invalid_argument("parse_pairs: expected 'adjacent:<k>' or 'all', got " + spec);
}

Mask depth_valid_mask(const Mask* defined, const ErpCamera& cam) {
  Mask m(cam.width, cam.height, true);
  for (int y = 0; y < cam.height; ++y) {
    const bool row_ok = !cam.lat_band || cam.lat_band->contains(row_latitude(y, cam.height));
    for (int x = 0; x < cam.width; ++x)
      m.at(y, x) = row_ok && (!defined || defined->at(y, x));
  }
  return m;
}

ConsistencyResult depth_consistency(const std::vector<Image>& depths,
                                    const std::vector<Mask>& valid,
                                    const std::vector<ErpCamera>& cams,
                                    const std::vector<std::pair<int, int>>& pairs,
                                    const ConsistencySettings& settings) {
  if (depths.size() != cams.size() || valid.size() != cams.size())
    throw std::invalid_argument("depth_consistency: view count mismatch");
  ConsistencyResult res;
  double err_sum = 0.0;
  long inliers = 0;
  for (const auto& [i, j] : pairs) {
    const ErpCamera& ci = cams[i];
    const ErpCamera& cj = cams[j];
    const int W = ci.width, H = ci.height;
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        if (!valid[i].at(y, x)) continue;
        const double di = depths[i].at(y, x);
        if (di <= 0.0) continue;
        const Eigen::Vector2d u(x + 0.5, y + 0.5);
        const Reprojection fwd = reproject(u, di, ci, cj);
        if (!fwd.valid) continue;
        double dj = 0.0;
        if (!bilinear_sample_wrap(depths[j], fwd.pixel.x(), fwd.pixel.y(), &valid[j], &dj))
          continue;
        if (dj <= 0.0) continue;
        const double e = std::abs(fwd.depth - dj) / (dj + settings.eps_dre);
        err_sum += std::min(e, settings.clamp_e);
        ++res.valid_px;
        // forward-backward cycle
        const Reprojection back = reproject(fwd.pixel, dj, cj, ci);
        if (back.valid) {
          double du = std::abs(back.pixel.x() - u.x());
          du = std::min(du, W - du);  // longitude wrap
          const double dv = back.pixel.y() - u.y();
          if (std::hypot(du, dv) < settings.tau_cyc) ++inliers;
        }
      }
  }
  if (res.valid_px == 0) return res;
  res.defined = true;
  res.dre = err_sum / double(res.valid_px);
  res.cir = 100.0 * double(inliers) / double(res.valid_px);
  return res;
}

double dre(const std::vector<Image>& depths, const std::vector<Mask>& valid,
           const std::vector<ErpCamera>& cams, const std::vector<std::pair<int, int>>& pairs,
           double eps) {
  ConsistencySettings s;
  s.eps_dre = eps;
  const auto r = depth_consistency(depths, valid, cams, pairs, s);
  if (!r.defined) throw std::domain_error("dre: no valid pixels");
  return r.dre;
}

double cir(const std::vector<Image>& depths, const std::vector<Mask>& valid,
           const std::vector<ErpCamera>& cams, const std::vector<std::pair<int, int>>& pairs,
           double tau_cyc) {
  ConsistencySettings s;
  s.tau_cyc = tau_cyc;
  const auto r = depth_consistency(depths, valid, cams, pairs, s);
  if (!r.defined) throw std::domain_error("cir: no valid pixels");
  return r.cir;
}

}  // namespace panogs
