#include <algorithm>
#include <cmath>

#include "panogs/parallel.hpp"
#include "panogs/renderer.hpp"

namespace panogs {

std::vector<PreparedGaussian> prepare_gaussians(const GaussianScene& scene,
                                                const Eigen::Vector3d& origin, int sh_degree) {
  if (sh_degree < 0) sh_degree = scene.sh_degree;
  std::vector<PreparedGaussian> prep(scene.size());
  for (size_t i = 0; i < scene.size(); ++i) {
    const auto& g = scene.gaussians[i];
    auto& p = prep[i];
    p.mean = g.mean;
    const double o_act = g.opacity();
    if (o_act < kAlphaMin) {
      p.skip = true;
      p.opacity = 0.0;
      continue;
    }
    p.skip = false;
    const Eigen::Vector3d s = g.scale();
    const Eigen::Vector3d s_infl = inflate_scales(s, g.filter_radius);
    const Eigen::Matrix3d rot = g.rotation();
    p.w2l = s_infl.cwiseInverse().asDiagonal() * rot.transpose();
    p.o_loc = p.w2l * (origin - g.mean);
    p.c_quad = p.o_loc.squaredNorm();
    p.opacity = compensate_opacity(o_act, s, s_infl);
    p.q_cut = 2.0 * std::log(255.0 * p.opacity);  // alpha >= 1/255 iff q <= q_cut
    int axis = 0;
    s_infl.minCoeff(&axis);
    p.normal = rot.col(axis);
    Eigen::Vector3d view = g.mean - origin;
    const double vn = view.norm();
    p.color = eval_sh_color(g, vn > 0 ? Eigen::Vector3d(view / vn) : Eigen::Vector3d(0, 0, 1),
                            sh_degree);
  }
  return prep;
}

namespace {

struct Hit {
  double t_star, alpha;
  const PreparedGaussian* pg;
};

}  // namespace

PixelSample composite_prepared(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                               const std::vector<TileEntry>& candidates,
                               const std::vector<PreparedGaussian>& prepared,
                               bool exact_per_ray_sort) {
  (void)origin;
  PixelSample out;
  double T = 1.0;
  double last_t = 0.0;
  double expected_acc = 0.0;
  Eigen::Vector3d normal_acc = Eigen::Vector3d::Zero();

  auto accumulate = [&](const PreparedGaussian& pg, double t_star, double alpha) {
    const double w = alpha * T;
    out.rgb += pg.color * w;
    out.alpha += w;
    expected_acc += t_star * w;
    normal_acc += (pg.normal.dot(dir) < 0 ? pg.normal : Eigen::Vector3d(-pg.normal)) * w;
    ++out.contributors;
    last_t = t_star;
    if (!out.depth_valid && out.alpha >= 0.5) {
      out.depth = t_star;
      out.depth_valid = true;
    }
    T *= 1.0 - alpha;
  };

  auto evaluate = [&](const PreparedGaussian& pg, double* t_star, double* alpha) {
    const Eigen::Vector3d r_loc = pg.w2l * dir;
    const double a = r_loc.squaredNorm();
    if (a <= 0.0) return false;
    const double b = pg.o_loc.dot(r_loc);
    *t_star = -b / a;
    if (*t_star <= kTNear) return false;
    const double q = pg.c_quad - b * b / a;
    if (q >= pg.q_cut) return false;  // alpha would fall under kAlphaMin
    *alpha = std::min(pg.opacity * std::exp(-0.5 * std::max(q, 0.0)), kAlphaCap);
    return *alpha >= kAlphaMin;
  };

  if (exact_per_ray_sort) {
    std::vector<Hit> hits;
    hits.reserve(candidates.size());
    for (const auto& e : candidates) {
      const auto& pg = prepared[e.id];
      if (pg.skip) continue;
      double t_star, alpha;
      if (evaluate(pg, &t_star, &alpha)) hits.push_back({t_star, alpha, &pg});
    }
    std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.t_star < b.t_star; });
    for (const auto& h : hits) {
      accumulate(*h.pg, h.t_star, h.alpha);
      if (T < kTransmittanceMin) break;
    }
  } else {
    for (const auto& e : candidates) {
      const auto& pg = prepared[e.id];
      if (pg.skip) continue;
      double t_star, alpha;
      if (!evaluate(pg, &t_star, &alpha)) continue;
      accumulate(pg, t_star, alpha);
      if (T < kTransmittanceMin) break;
    }
  }

  if (!out.depth_valid && out.alpha >= kAlphaBackground) {
    out.depth = last_t;  // fallback: last contributor
    out.depth_valid = true;
  }
  if (out.alpha >= kAlphaBackground) out.depth_expected = expected_acc / out.alpha;
  const double nn = normal_acc.norm();
  out.normal = nn > 1e-12 ? Eigen::Vector3d(normal_acc / nn) : Eigen::Vector3d(-dir);
  return out;
}

PixelSample composite_ray(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                          const std::vector<TileEntry>& candidates, const GaussianScene& scene,
                          int sh_degree) {
  return composite_prepared(origin, dir, candidates, prepare_gaussians(scene, origin, sh_degree));
}

RenderOutput::RenderOutput(int w, int h)
    : rgb(w, h, 3),
      depth(w, h, 1),
      depth_valid(w, h),
      depth_expected(w, h, 1),
      normal(w, h, 3),
      alpha(w, h, 1),
      contributors(w, h, 1) {}

RenderOutput render(const GaussianScene& scene, const ErpCamera& cam,
                    const RenderSettings& settings) {
  return render(scene, cam, build_tile_index(scene, cam, settings.tile_size, settings.cull_sigma),
                settings);
}

RenderOutput render(const GaussianScene& scene, const ErpCamera& cam, const TileIndex& index,
                    const RenderSettings& settings) {
  RenderOutput out(cam.width, cam.height);
  const auto prepared = prepare_gaussians(scene, cam.center, settings.sh_degree);
  const int n_tiles = index.tiles_x * index.tiles_y;

  parallel_for(n_tiles, settings.num_threads, [&](int tile) {
    const int tx = tile % index.tiles_x, ty = tile / index.tiles_x;
    const auto& candidates = index.tiles[tile];
    const int x0 = tx * index.tile_size, x1 = std::min(x0 + index.tile_size, cam.width);
    const int y0 = ty * index.tile_size, y1 = std::min(y0 + index.tile_size, cam.height);
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) {
        const Eigen::Vector3d dir = ray_at(x + 0.5, y + 0.5, cam);
        const PixelSample s =
            composite_prepared(cam.center, dir, candidates, prepared, settings.exact_per_ray_sort);
        for (int c = 0; c < 3; ++c) {
          out.rgb.at(y, x, c) = s.rgb[c];
          out.normal.at(y, x, c) = s.normal[c];
        }
        out.alpha.at(y, x) = s.alpha;
        out.depth.at(y, x) = s.depth_valid ? s.depth : 0.0;
        out.depth_valid.at(y, x) = s.depth_valid ? 1 : 0;
        out.depth_expected.at(y, x) = s.depth_expected;
        out.contributors.at(y, x) = s.contributors;
      }
  });
  return out;
}

}  // namespace panogs
