#include "panogs/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "panogs/ssim.hpp"

namespace panogs {

namespace {

constexpr double kLogFloor = 1e-6;  // floor inside the log and the cos(lat) divisor

inline double sgn(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }

inline double zlog(double d) { return std::log(std::max(d, kLogFloor)); }
inline double zlog_grad(double d) { return d > kLogFloor ? 1.0 / d : 0.0; }

}  // namespace

Mask valid_mask(const Image& alpha_map, double tau, const std::optional<LatBand>& band) {
  Mask m(alpha_map.width, alpha_map.height);
  for (int y = 0; y < alpha_map.height; ++y) {
    if (band && !band->contains(row_latitude(y, alpha_map.height))) continue;
    for (int x = 0; x < alpha_map.width; ++x)
      if (alpha_map.at(y, x) > tau) m.at(y, x) = 1;
  }
  return m;
}

double rgb_loss(const Image& render_rgb, const Image& gt_rgb, const Mask& omega, double ssim_mix,
                long* valid_px, Image* d_render) {
  if (!render_rgb.same_shape(gt_rgb))
    throw std::invalid_argument("rgb_loss: shape mismatch");
  const size_t n = omega.count();
  if (valid_px) *valid_px = long(n);
  if (d_render) *d_render = Image(render_rgb.width, render_rgb.height, render_rgb.channels);
  if (n == 0) return 0.0;

  double l1 = 0.0;
  for (int y = 0; y < render_rgb.height; ++y)
    for (int x = 0; x < render_rgb.width; ++x) {
      if (!omega.at(y, x)) continue;
      for (int c = 0; c < render_rgb.channels; ++c)
        l1 += std::abs(render_rgb.at(y, x, c) - gt_rgb.at(y, x, c));
    }
  l1 /= double(n) * render_rgb.channels;

  const double ssim_val = ssim_mix > 0.0 ? ssim(render_rgb, gt_rgb, &omega).value : 1.0;
  const double loss = (1.0 - ssim_mix) * l1 + ssim_mix * (1.0 - ssim_val);

  if (d_render) {
    const double w_l1 = (1.0 - ssim_mix) / (double(n) * render_rgb.channels);
    for (int y = 0; y < render_rgb.height; ++y)
      for (int x = 0; x < render_rgb.width; ++x) {
        if (!omega.at(y, x)) continue;
        for (int c = 0; c < render_rgb.channels; ++c)
          d_render->at(y, x, c) = w_l1 * sgn(render_rgb.at(y, x, c) - gt_rgb.at(y, x, c));
      }
    if (ssim_mix > 0.0) {
      const Image dssim = ssim_backward(render_rgb, gt_rgb, &omega);
      for (size_t i = 0; i < d_render->data.size(); ++i)
        d_render->data[i] -= ssim_mix * dssim.data[i];
    }
  }
  return loss;
}

DepthNormals depth_to_normal(const Image& depth, const ErpCamera& cam, const Mask& omega) {
  const int W = depth.width, H = depth.height;
  DepthNormals out;
  out.normal = Image(W, H, 3);
  out.valid = Mask(W, H);
  for (int y = 0; y + 1 < H; ++y)
    for (int x = 0; x < W; ++x) {
      const int xr = (x + 1) % W;
      if (!omega.at(y, x) || !omega.at(y, xr) || !omega.at(y + 1, x)) continue;
      const Eigen::Vector3d r0 = ray_at(x + 0.5, y + 0.5, cam);
      const Eigen::Vector3d rx = ray_at(xr + 0.5, y + 0.5, cam);
      const Eigen::Vector3d ry = ray_at(x + 0.5, y + 1.5, cam);
      const Eigen::Vector3d a = depth.at(y, xr) * rx - depth.at(y, x) * r0;
      const Eigen::Vector3d b = depth.at(y + 1, x) * ry - depth.at(y, x) * r0;
      const Eigen::Vector3d m = a.cross(b);
      const double mn = m.norm();
      if (mn < 1e-15) continue;
      Eigen::Vector3d nrm = m / mn;
      if (nrm.dot(r0) > 0) nrm = -nrm;  // face the camera
      for (int c = 0; c < 3; ++c) out.normal.at(y, x, c) = nrm[c];
      out.valid.at(y, x) = 1;
    }
  return out;
}

Image depth_to_normal_backward(const Image& depth, const ErpCamera& cam, const Mask& /*omega*/,
                               const DepthNormals& fwd, const Image& d_normal) {
  const int W = depth.width, H = depth.height;
  Image d_depth(W, H, 1);
  for (int y = 0; y + 1 < H; ++y)
    for (int x = 0; x < W; ++x) {
      if (!fwd.valid.at(y, x)) continue;
      const int xr = (x + 1) % W;
      const Eigen::Vector3d r0 = ray_at(x + 0.5, y + 0.5, cam);
      const Eigen::Vector3d rx = ray_at(xr + 0.5, y + 0.5, cam);
      const Eigen::Vector3d ry = ray_at(x + 0.5, y + 1.5, cam);
      const Eigen::Vector3d a = depth.at(y, xr) * rx - depth.at(y, x) * r0;
      const Eigen::Vector3d b = depth.at(y + 1, x) * ry - depth.at(y, x) * r0;
      const Eigen::Vector3d m = a.cross(b);
      const double mn = m.norm();
      if (mn < 1e-15) continue;
      Eigen::Vector3d nrm = m / mn;
      const double sign = nrm.dot(r0) > 0 ? -1.0 : 1.0;
      nrm *= sign;
      const Eigen::Vector3d g_n(d_normal.at(y, x, 0), d_normal.at(y, x, 1), d_normal.at(y, x, 2));
      // n = sign * m / |m|
      const Eigen::Vector3d g_m = sign / mn * (g_n - nrm * nrm.dot(g_n));
      const Eigen::Vector3d g_a = b.cross(g_m);
      const Eigen::Vector3d g_b = g_m.cross(a);
      d_depth.at(y, xr) += rx.dot(g_a);
      d_depth.at(y + 1, x) += ry.dot(g_b);
      d_depth.at(y, x) += -r0.dot(g_a) - r0.dot(g_b);
    }
  return d_depth;
}

double dn_loss(const Image& normal, const DepthNormals& depth_normals, const Mask& omega,
               double lat_eps, Image* d_normal, Image* d_depth_normal) {
  const int W = normal.width, H = normal.height;
  if (d_normal) *d_normal = Image(W, H, 3);
  if (d_depth_normal) *d_depth_normal = Image(W, H, 3);
  double acc = 0.0, wsum = 0.0;
  for (int y = 0; y < H; ++y) {
    const double w = latitude_weight(row_latitude(y, H), lat_eps);
    for (int x = 0; x < W; ++x) {
      if (!omega.at(y, x) || !depth_normals.valid.at(y, x)) continue;
      double dot = 0.0;
      for (int c = 0; c < 3; ++c) dot += normal.at(y, x, c) * depth_normals.normal.at(y, x, c);
      acc += w * (1.0 - std::abs(dot));
      wsum += w;
    }
  }
  if (wsum == 0.0) return 0.0;
  const double loss = acc / wsum;
  if (d_normal || d_depth_normal) {
    for (int y = 0; y < H; ++y) {
      const double w = latitude_weight(row_latitude(y, H), lat_eps);
      for (int x = 0; x < W; ++x) {
        if (!omega.at(y, x) || !depth_normals.valid.at(y, x)) continue;
        double dot = 0.0;
        for (int c = 0; c < 3; ++c) dot += normal.at(y, x, c) * depth_normals.normal.at(y, x, c);
        const double f = -w * sgn(dot) / wsum;
        for (int c = 0; c < 3; ++c) {
          if (d_normal) d_normal->at(y, x, c) += f * depth_normals.normal.at(y, x, c);
          if (d_depth_normal) d_depth_normal->at(y, x, c) += f * normal.at(y, x, c);
        }
      }
    }
  }
  return loss;
}

namespace {

// Shared scaffolding for the two hinge losses: edge-aware weights from the
// ground-truth grayscale, latitude row weights, weighted-mean normalization.
struct JumpContext {
  const Image& depth;
  const Image& gray;
  const Mask& omega;
  int W, H;
  double lat_eps, tau, beta;

  double wx(int y, int x) const {
    return std::exp(-beta * std::abs(gray.at(y, (x + 1) % W) - gray.at(y, x)));
  }
  double wy(int y, int x) const {
    return y + 1 < H ? std::exp(-beta * std::abs(gray.at(y + 1, x) - gray.at(y, x))) : 0.0;
  }
  double srow(int y) const { return std::max(std::cos(row_latitude(y, H)), kLogFloor); }
};

}  // namespace

double jump1_loss(const Image& depth, const Image& gt_gray, const Mask& omega, double lat_eps,
                  double tau1, double beta, Image* d_depth) {
  if (gt_gray.channels != 1) throw std::invalid_argument("jump1_loss: gray image expected");
  const JumpContext ctx{depth, gt_gray, omega, depth.width, depth.height, lat_eps, tau1, beta};
  if (d_depth) *d_depth = Image(ctx.W, ctx.H, 1);

  double acc = 0.0, wsum = 0.0;
  for (int y = 0; y + 1 < ctx.H; ++y) {
    const double w_lat = latitude_weight(row_latitude(y, ctx.H), lat_eps);
    const double s = ctx.srow(y);
    for (int x = 0; x < ctx.W; ++x) {
      const int xr = (x + 1) % ctx.W;
      if (!omega.at(y, x) || !omega.at(y, xr) || !omega.at(y + 1, x)) continue;
      const double dzx = (zlog(depth.at(y, xr)) - zlog(depth.at(y, x))) / s;
      const double dzy = zlog(depth.at(y + 1, x)) - zlog(depth.at(y, x));
      const double ex = std::max(std::abs(dzx) - tau1, 0.0);
      const double ey = std::max(std::abs(dzy) - tau1, 0.0);
      acc += w_lat * (ctx.wx(y, x) * ex + ctx.wy(y, x) * ey);
      wsum += w_lat;
    }
  }
  if (wsum == 0.0) return 0.0;
  const double loss = acc / wsum;

  if (d_depth) {
    for (int y = 0; y + 1 < ctx.H; ++y) {
      const double w_lat = latitude_weight(row_latitude(y, ctx.H), lat_eps);
      const double s = ctx.srow(y);
      for (int x = 0; x < ctx.W; ++x) {
        const int xr = (x + 1) % ctx.W;
        if (!omega.at(y, x) || !omega.at(y, xr) || !omega.at(y + 1, x)) continue;
        const double dzx = (zlog(depth.at(y, xr)) - zlog(depth.at(y, x))) / s;
        const double dzy = zlog(depth.at(y + 1, x)) - zlog(depth.at(y, x));
        if (std::abs(dzx) > tau1) {
          const double g = w_lat * ctx.wx(y, x) * sgn(dzx) / (s * wsum);
          d_depth->at(y, xr) += g * zlog_grad(depth.at(y, xr));
          d_depth->at(y, x) -= g * zlog_grad(depth.at(y, x));
        }
        if (std::abs(dzy) > tau1) {
          const double g = w_lat * ctx.wy(y, x) * sgn(dzy) / wsum;
          d_depth->at(y + 1, x) += g * zlog_grad(depth.at(y + 1, x));
          d_depth->at(y, x) -= g * zlog_grad(depth.at(y, x));
        }
      }
    }
  }
  return loss;
}

double jump2_loss(const Image& depth, const Image& gt_gray, const Mask& omega, double lat_eps,
                  double tau2, double beta, Image* d_depth) {
  if (gt_gray.channels != 1) throw std::invalid_argument("jump2_loss: gray image expected");
  const JumpContext ctx{depth, gt_gray, omega, depth.width, depth.height, lat_eps, tau2, beta};
  if (d_depth) *d_depth = Image(ctx.W, ctx.H, 1);

  double acc = 0.0, wsum = 0.0;
  for (int y = 1; y + 1 < ctx.H; ++y) {
    const double w_lat = latitude_weight(row_latitude(y, ctx.H), lat_eps);
    const double s = ctx.srow(y);
    for (int x = 0; x < ctx.W; ++x) {
      const int xr = (x + 1) % ctx.W, xl = (x + ctx.W - 1) % ctx.W;
      if (!omega.at(y, x) || !omega.at(y, xr) || !omega.at(y, xl) || !omega.at(y + 1, x) ||
          !omega.at(y - 1, x))
        continue;
      const double lx =
          (zlog(depth.at(y, xr)) - 2.0 * zlog(depth.at(y, x)) + zlog(depth.at(y, xl))) / s;
      const double ly =
          zlog(depth.at(y + 1, x)) - 2.0 * zlog(depth.at(y, x)) + zlog(depth.at(y - 1, x));
      const double ex = std::max(std::abs(lx) - tau2, 0.0);
      const double ey = std::max(std::abs(ly) - tau2, 0.0);
      acc += w_lat * (ctx.wx(y, x) * ex + ctx.wy(y, x) * ey);
      wsum += w_lat;
    }
  }
  if (wsum == 0.0) return 0.0;
  const double loss = acc / wsum;

  if (d_depth) {
    for (int y = 1; y + 1 < ctx.H; ++y) {
      const double w_lat = latitude_weight(row_latitude(y, ctx.H), lat_eps);
      const double s = ctx.srow(y);
      for (int x = 0; x < ctx.W; ++x) {
        const int xr = (x + 1) % ctx.W, xl = (x + ctx.W - 1) % ctx.W;
        if (!omega.at(y, x) || !omega.at(y, xr) || !omega.at(y, xl) || !omega.at(y + 1, x) ||
            !omega.at(y - 1, x))
          continue;
        const double lx =
            (zlog(depth.at(y, xr)) - 2.0 * zlog(depth.at(y, x)) + zlog(depth.at(y, xl))) / s;
        const double ly =
            zlog(depth.at(y + 1, x)) - 2.0 * zlog(depth.at(y, x)) + zlog(depth.at(y - 1, x));
        if (std::abs(lx) > tau2) {
          const double g = w_lat * ctx.wx(y, x) * sgn(lx) / (s * wsum);
          d_depth->at(y, xr) += g * zlog_grad(depth.at(y, xr));
          d_depth->at(y, xl) += g * zlog_grad(depth.at(y, xl));
          d_depth->at(y, x) -= 2.0 * g * zlog_grad(depth.at(y, x));
        }
        if (std::abs(ly) > tau2) {
          const double g = w_lat * ctx.wy(y, x) * sgn(ly) / wsum;
          d_depth->at(y + 1, x) += g * zlog_grad(depth.at(y + 1, x));
          d_depth->at(y - 1, x) += g * zlog_grad(depth.at(y - 1, x));
          d_depth->at(y, x) -= 2.0 * g * zlog_grad(depth.at(y, x));
        }
      }
    }
  }
  return loss;
}

LossBreakdown total_loss(const RenderOutput& render, const Image& gt_rgb, const ErpCamera& cam,
                         const LossWeights& weights, const ScheduleState& schedule,
                         LossGradMaps* grads) {
  LossBreakdown bd;
  bd.jump_scale = schedule.jump_scale;
  bd.dn_enabled = schedule.dn_enabled;

  const Mask omega = valid_mask(render.alpha, weights.tau, cam.lat_band);
  // Depth-based terms additionally need a defined depth (guards tau below
  // the background threshold).
  Mask omega_geo = omega;
  for (int y = 0; y < omega.height; ++y)
    for (int x = 0; x < omega.width; ++x)
      if (omega_geo.at(y, x) && !render.depth_valid.at(y, x)) omega_geo.at(y, x) = 0;

  Image d_rgb;
  bd.rgb = rgb_loss(render.rgb, gt_rgb, omega, weights.ssim_mix, &bd.valid_pixel_count,
                    grads ? &d_rgb : nullptr);

  const bool need_jump = schedule.jump_scale > 0.0 && (weights.lambda_j1 > 0 || weights.lambda_j2 > 0);
  const bool need_dn = schedule.dn_enabled && weights.lambda_dn > 0;

  Image d_depth_total(render.depth.width, render.depth.height, 1);
  Image d_normal_total(render.normal.width, render.normal.height, 3);

  if (need_dn) {
    const DepthNormals dnorm = depth_to_normal(render.depth, cam, omega_geo);
    Image d_nr, d_nd;
    bd.dn = dn_loss(render.normal, dnorm, omega_geo, weights.lat_eps, grads ? &d_nr : nullptr,
                    grads ? &d_nd : nullptr);
    if (grads) {
      const double f = weights.lambda_dn;
      for (size_t i = 0; i < d_normal_total.data.size(); ++i)
        d_normal_total.data[i] += f * d_nr.data[i];
      for (size_t i = 0; i < d_nd.data.size(); ++i) d_nd.data[i] *= f;
      const Image dd = depth_to_normal_backward(render.depth, cam, omega_geo, dnorm, d_nd);
      for (size_t i = 0; i < d_depth_total.data.size(); ++i) d_depth_total.data[i] += dd.data[i];
    }
  }

  if (need_jump) {
    const Image gray = grayscale(gt_rgb);
    Image d1, d2;
    bd.jump1 = jump1_loss(render.depth, gray, omega_geo, weights.lat_eps, weights.tau1,
                          weights.beta, grads ? &d1 : nullptr);
    bd.jump2 = jump2_loss(render.depth, gray, omega_geo, weights.lat_eps, weights.tau2,
                          weights.beta, grads ? &d2 : nullptr);
    if (grads) {
      const double f1 = schedule.jump_scale * weights.lambda_j1;
      const double f2 = schedule.jump_scale * weights.lambda_j2;
      for (size_t i = 0; i < d_depth_total.data.size(); ++i)
        d_depth_total.data[i] += f1 * d1.data[i] + f2 * d2.data[i];
    }
  }

  bd.total = bd.rgb + (schedule.dn_enabled ? weights.lambda_dn * bd.dn : 0.0) +
             schedule.jump_scale * (weights.lambda_j1 * bd.jump1 + weights.lambda_j2 * bd.jump2);

  if (grads) {
    grads->d_rgb = d_rgb.data.empty() ? Image(gt_rgb.width, gt_rgb.height, 3) : d_rgb;
    grads->d_depth = std::move(d_depth_total);
    grads->d_normal = std::move(d_normal_total);
  }
  return bd;
}

}  // namespace panogs
