#include "panogs/render_backward.hpp"

#include <array>
#include <cmath>

#include "panogs/parallel.hpp"

namespace panogs {

void SceneGrads::init(size_t n, int sh_coeffs) {
  mean.assign(n, Eigen::Vector3d::Zero());
  quat.assign(n, Eigen::Vector4d::Zero());
  log_scale.assign(n, Eigen::Vector3d::Zero());
  opacity_logit.assign(n, 0.0);
  sh.assign(n, std::vector<Eigen::Vector3d>(sh_coeffs, Eigen::Vector3d::Zero()));
  touched.assign(n, 0);
}

namespace {

// dL/d(unit quaternion) from dL/d(rotation matrix), for Eigen's
// (w, x, y, z) -> R convention.
Eigen::Vector4d rotation_grad_to_quat(const Eigen::Vector4d& q, const Eigen::Matrix3d& g) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Eigen::Vector4d out;
  out[0] = 2.0 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) +
                  x * g(2, 1));
  out[1] = 2.0 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2.0 * x * g(1, 1) - w * g(1, 2) +
                  z * g(2, 0) + w * g(2, 1) - 2.0 * x * g(2, 2));
  out[2] = 2.0 * (-2.0 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2) -
                  w * g(2, 0) + z * g(2, 1) - 2.0 * y * g(2, 2));
  out[3] = 2.0 * (-2.0 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) -
                  2.0 * z * g(1, 1) + y * g(1, 2) + x * g(2, 0) + y * g(2, 1));
  return out;
}

// Per-gaussian constants the adjoint needs beyond PreparedGaussian.
struct BackwardAux {
  Eigen::Vector3d v_o;          // origin - mean
  Eigen::Vector3d s_infl;
  Eigen::Vector3d dop_dlogs;    // d(compensated opacity)/d(log scale)
  double dop_dlogit = 0.0;
  Eigen::Vector4d quat_unit;
  double quat_norm = 1.0;
  int normal_axis = 0;
  Eigen::Matrix3d dcolor_ddir;  // before view-direction normalization
  Eigen::Vector3d view_dir;
  double view_dist = 0.0;
  std::array<double, 16> basis{};
  std::array<bool, 3> clamped{};  // color channel hit the [0,1] clamp
};

struct TileGrad {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Matrix3d dM = Eigen::Matrix3d::Zero();  // w.r.t. w2l
  Eigen::Vector3d dnormal = Eigen::Vector3d::Zero();
  Eigen::Vector3d dlogs = Eigen::Vector3d::Zero();
  Eigen::Vector4d dquat = Eigen::Vector4d::Zero();
  double dop = 0.0;
  std::array<Eigen::Vector3d, 16> sh;  // Eigen members do not zero-init
  bool touched = false;

  TileGrad() {
    for (auto& v : sh) v.setZero();
  }
};

struct Contributor {
  int cand;  // index into the tile candidate list
  double alpha, T, w, t_star, A, B, g, q;
  bool capped;
  double flip;
  Eigen::Vector3d r_loc;
  Eigen::Vector3d n_eff;
};

}  // namespace

SceneGrads render_backward(const GaussianScene& scene, const ErpCamera& cam,
                           const TileIndex& index, const LossGradMaps& grads,
                           const RenderSettings& settings) {
  const int sh_degree = settings.sh_degree < 0 ? scene.sh_degree : settings.sh_degree;
  const int n_coeffs = sh_coeff_count(sh_degree);
  const auto prepared = prepare_gaussians(scene, cam.center, sh_degree);

  // Extended per-gaussian constants.
  std::vector<BackwardAux> aux(scene.size());
  for (size_t i = 0; i < scene.size(); ++i) {
    const auto& g = scene.gaussians[i];
    auto& a = aux[i];
    if (prepared[i].skip) continue;
    a.v_o = cam.center - g.mean;
    const Eigen::Vector3d s = g.scale();
    a.s_infl = inflate_scales(s, g.filter_radius);
    const double o_act = g.opacity();
    const double f2 = g.filter_radius * g.filter_radius;
    a.dop_dlogit = prepared[i].opacity * (1.0 - o_act);
    a.dop_dlogs = prepared[i].opacity * f2 * a.s_infl.array().square().inverse();
    a.quat_norm = g.quat.norm();
    a.quat_unit = g.quat / a.quat_norm;
    a.s_infl.minCoeff(&a.normal_axis);

    Eigen::Vector3d view = g.mean - cam.center;
    a.view_dist = view.norm();
    a.view_dir = a.view_dist > 0 ? Eigen::Vector3d(view / a.view_dist) : Eigen::Vector3d(0, 0, 1);
    sh_basis(a.view_dir, sh_degree, a.basis.data());
    // Unclamped color decides which channels pass gradient through the clamp.
    Eigen::Vector3d raw = Eigen::Vector3d::Constant(0.5);
    for (int k = 0; k < n_coeffs; ++k) raw += a.basis[k] * g.sh[k];
    for (int c = 0; c < 3; ++c) a.clamped[c] = raw[c] <= 0.0 || raw[c] >= 1.0;
    Eigen::Vector3d db[16];
    sh_basis_grad(a.view_dir, sh_degree, db);
    a.dcolor_ddir.setZero();
    for (int k = 0; k < n_coeffs; ++k) a.dcolor_ddir += g.sh[k] * db[k].transpose();
  }

  const int n_tiles = index.tiles_x * index.tiles_y;
  std::vector<std::vector<TileGrad>> tile_grads(n_tiles);

  parallel_for(n_tiles, settings.num_threads, [&](int tile) {
    const auto& candidates = index.tiles[tile];
    if (candidates.empty()) return;
    auto& tg = tile_grads[tile];
    tg.assign(candidates.size(), TileGrad{});

    const int tx = tile % index.tiles_x, ty = tile / index.tiles_x;
    const int x0 = tx * index.tile_size, x1 = std::min(x0 + index.tile_size, cam.width);
    const int y0 = ty * index.tile_size, y1 = std::min(y0 + index.tile_size, cam.height);

    std::vector<Contributor> contribs;
    contribs.reserve(64);

    for (int py = y0; py < y1; ++py)
      for (int px = x0; px < x1; ++px) {
        const Eigen::Vector3d g_rgb(grads.d_rgb.at(py, px, 0), grads.d_rgb.at(py, px, 1),
                                    grads.d_rgb.at(py, px, 2));
        const double g_depth = grads.d_depth.at(py, px);
        const Eigen::Vector3d g_normal(grads.d_normal.at(py, px, 0),
                                       grads.d_normal.at(py, px, 1),
                                       grads.d_normal.at(py, px, 2));
        if (g_rgb.isZero() && g_depth == 0.0 && g_normal.isZero()) continue;

        const Eigen::Vector3d dir = ray_at(px + 0.5, py + 0.5, cam);

        // Forward replay with cached per-contributor state.
        contribs.clear();
        double T = 1.0, alpha_acc = 0.0;
        Eigen::Vector3d normal_raw = Eigen::Vector3d::Zero();
        int median_idx = -1;
        for (int ci = 0; ci < int(candidates.size()); ++ci) {
          const auto& pg = prepared[candidates[ci].id];
          if (pg.skip) continue;
          const Eigen::Vector3d r_loc = pg.w2l * dir;
          const double A = r_loc.squaredNorm();
          if (A <= 0.0) continue;
          const double B = pg.o_loc.dot(r_loc);
          const double t_star = -B / A;
          if (t_star <= kTNear) continue;
          const double q = pg.c_quad - B * B / A;
          if (q >= pg.q_cut) continue;
          const double gval = std::exp(-0.5 * std::max(q, 0.0));
          const double raw_alpha = pg.opacity * gval;
          if (raw_alpha < kAlphaMin) continue;
          Contributor c;
          c.cand = ci;
          c.capped = raw_alpha > kAlphaCap;
          c.alpha = c.capped ? kAlphaCap : raw_alpha;
          c.T = T;
          c.w = c.alpha * T;
          c.t_star = t_star;
          c.A = A;
          c.B = B;
          c.g = gval;
          c.q = q;
          c.r_loc = r_loc;
          c.flip = pg.normal.dot(dir) < 0 ? 1.0 : -1.0;
          c.n_eff = c.flip * pg.normal;
          normal_raw += c.n_eff * c.w;
          alpha_acc += c.w;
          if (median_idx < 0 && alpha_acc >= 0.5) median_idx = int(contribs.size());
          contribs.push_back(c);
          T *= 1.0 - c.alpha;
          if (T < kTransmittanceMin) break;
        }
        if (contribs.empty()) continue;
        if (median_idx < 0 && alpha_acc >= kAlphaBackground)
          median_idx = int(contribs.size()) - 1;  // fallback depth

        // dL/d(raw normal sum) through the normalization.
        Eigen::Vector3d g_nraw = Eigen::Vector3d::Zero();
        const double nn = normal_raw.norm();
        if (nn > 1e-12 && !g_normal.isZero()) {
          const Eigen::Vector3d nrm = normal_raw / nn;
          g_nraw = (g_normal - nrm * nrm.dot(g_normal)) / nn;
        }

        // dL/d(alpha_j) via the suffix trick.
        const int m = int(contribs.size());
        std::vector<double> dldw(m), dlda(m);
        for (int j = 0; j < m; ++j) {
          const auto& pg = prepared[candidates[contribs[j].cand].id];
          dldw[j] = pg.color.dot(g_rgb) + contribs[j].n_eff.dot(g_nraw);
        }
        double suffix = 0.0;
        for (int j = m - 1; j >= 0; --j) {
          dlda[j] = contribs[j].T * dldw[j] - suffix / (1.0 - contribs[j].alpha);
          suffix += dldw[j] * contribs[j].w;
        }

        for (int j = 0; j < m; ++j) {
          const Contributor& c = contribs[j];
          const int id = candidates[c.cand].id;
          const auto& pg = prepared[id];
          const auto& ax = aux[id];
          TileGrad& acc = tg[c.cand];
          acc.touched = true;

          // Color path: dL/dcolor = w * g_rgb, through clamp, SH and the
          // mean-dependent view direction.
          if (!g_rgb.isZero()) {
            Eigen::Vector3d dcol = c.w * g_rgb;
            for (int ch = 0; ch < 3; ++ch)
              if (ax.clamped[ch]) dcol[ch] = 0.0;
            for (int k = 0; k < n_coeffs; ++k) acc.sh[k] += ax.basis[k] * dcol;
            if (sh_degree > 0 && ax.view_dist > 0) {
              const Eigen::Vector3d gdir = ax.dcolor_ddir.transpose() * dcol;
              acc.mean += (gdir - ax.view_dir * ax.view_dir.dot(gdir)) / ax.view_dist;
            }
          }

          // Normal path: n_eff = flip * R.col(axis).
          if (!g_nraw.isZero()) acc.dnormal += (c.flip * c.w) * g_nraw;

          // Opacity / shape path.
          double dl_dA = 0.0, dl_dB = 0.0, dl_dC = 0.0;
          if (!c.capped && dlda[j] != 0.0) {
            const double dl_dop = c.g * dlda[j];
            const double dl_dq = -0.5 * c.alpha * dlda[j];  // d(alpha)/dq = -alpha/2
            acc.dop += dl_dop * ax.dop_dlogit;
            acc.dlogs += dl_dop * ax.dop_dlogs;
            dl_dA += dl_dq * (c.B * c.B) / (c.A * c.A);
            dl_dB += dl_dq * (-2.0 * c.B / c.A);
            dl_dC += dl_dq;
          }
          if (j == median_idx && g_depth != 0.0) {
            dl_dA += g_depth * c.B / (c.A * c.A);
            dl_dB += g_depth * (-1.0 / c.A);
          }
          if (dl_dA != 0.0 || dl_dB != 0.0 || dl_dC != 0.0) {
            const Eigen::Vector3d dl_rloc = 2.0 * dl_dA * c.r_loc + dl_dB * pg.o_loc;
            const Eigen::Vector3d dl_oloc = dl_dB * c.r_loc + 2.0 * dl_dC * pg.o_loc;
            acc.mean -= pg.w2l.transpose() * dl_oloc;
            acc.dM += dl_oloc * ax.v_o.transpose() + dl_rloc * dir.transpose();
          }
        }
      }

    // Finish the per-candidate chains: w2l -> (log scales, rotation) and
    // rotation -> quaternion, so the reduction below only sums.
    for (size_t ci = 0; ci < candidates.size(); ++ci) {
      TileGrad& acc = tg[ci];
      if (!acc.touched) continue;
      const int id = candidates[ci].id;
      const auto& pg = prepared[id];
      const auto& ax = aux[id];
      const Eigen::Vector3d s = scene.gaussians[id].scale();
      Eigen::Matrix3d dR = Eigen::Matrix3d::Zero();
      for (int a = 0; a < 3; ++a) {
        const double ds_infl = -acc.dM.row(a).dot(pg.w2l.row(a)) / ax.s_infl[a];
        acc.dlogs[a] += ds_infl * (s[a] * s[a] / ax.s_infl[a]);
        for (int b = 0; b < 3; ++b) dR(b, a) += acc.dM(a, b) / ax.s_infl[a];
      }
      dR.col(ax.normal_axis) += acc.dnormal;
      const Eigen::Vector4d dq_unit = rotation_grad_to_quat(ax.quat_unit, dR);
      acc.dquat = (dq_unit - ax.quat_unit * ax.quat_unit.dot(dq_unit)) / ax.quat_norm;
    }
  });

  SceneGrads out;
  out.init(scene.size(), n_coeffs);
  for (int tile = 0; tile < n_tiles; ++tile) {
    const auto& candidates = index.tiles[tile];
    const auto& tg = tile_grads[tile];
    for (size_t ci = 0; ci < tg.size(); ++ci) {
      if (!tg[ci].touched) continue;
      const int id = candidates[ci].id;
      out.touched[id] = 1;
      out.mean[id] += tg[ci].mean;
      out.quat[id] += tg[ci].dquat;
      out.log_scale[id] += tg[ci].dlogs;
      out.opacity_logit[id] += tg[ci].dop;
      for (int k = 0; k < n_coeffs; ++k) out.sh[id][k] += tg[ci].sh[k];
    }
  }
  return out;
}

}  // namespace panogs
