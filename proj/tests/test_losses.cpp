#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "panogs/losses.hpp"
#include "panogs/ssim.hpp"

using namespace panogs;
using Eigen::Vector3d;

namespace {

ErpCamera identity_cam(int w, int h) {
  return ErpCamera(Eigen::Matrix3d::Identity(), Vector3d::Zero(), w, h);
}

Image random_image(int w, int h, int c, uint64_t seed, double lo = 0.0, double hi = 1.0) {
  Image img(w, h, c);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : img.data) v = u(rng);
  return img;
}

// Slowly varying positive depth field.
Image smooth_depth(int w, int h, uint64_t seed) {
  Image img(w, h, 1);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double a = u(rng), b = u(rng), c = u(rng);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      img.at(y, x) = 2.0 + 0.25 * std::sin(2.0 * kPi * x / w + a) +
                     0.2 * std::cos(2.0 * kPi * y / h + b) +
                     0.1 * std::sin(4.0 * kPi * x / w + c) + 0.02 * u(rng);
  return img;
}

// Straightforward per-window SSIM, independent of the library's separable
// convolution path.
double ssim_reference(const Image& a, const Image& b) {
  const int win = 11, half = 5;
  double kernel[11];
  double ksum = 0;
  for (int i = 0; i < win; ++i) {
    kernel[i] = std::exp(-(i - half) * (i - half) / (2.0 * 1.5 * 1.5));
    ksum += kernel[i];
  }
  for (auto& k : kernel) k /= ksum;
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0.0;
  long count = 0;
  for (int yc = half; yc < a.height - half; ++yc)
    for (int xc = half; xc < a.width - half; ++xc) {
      double chan_sum = 0.0;
      for (int ch = 0; ch < a.channels; ++ch) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int dy = -half; dy <= half; ++dy)
          for (int dx = -half; dx <= half; ++dx) {
            const double w = kernel[dy + half] * kernel[dx + half];
            const double va = a.at(yc + dy, xc + dx, ch);
            const double vb = b.at(yc + dy, xc + dx, ch);
            ma += w * va;
            mb += w * vb;
            saa += w * va * va;
            sbb += w * vb * vb;
            sab += w * va * vb;
          }
        const double va2 = saa - ma * ma, vb2 = sbb - mb * mb, vab = sab - ma * mb;
        chan_sum += ((2 * ma * mb + c1) * (2 * vab + c2)) /
                    ((ma * ma + mb * mb + c1) * (va2 + vb2 + c2));
      }
      total += chan_sum / a.channels;
      ++count;
    }
  return total / count;
}

}  // namespace

TEST_CASE("valid mask: threshold and latitude band") {
  Image alpha(8, 180, 1, 1.0);
  CHECK(valid_mask(alpha, 0.5, std::nullopt).count() == 8 * 180);
  Image zero(8, 180, 1, 0.0);
  CHECK(valid_mask(zero, 0.5, std::nullopt).count() == 0);
  // 1-degree rows; band [-40, 20] covers exactly 60 row centers
  const LatBand band{-40.0 * kPi / 180.0, 20.0 * kPi / 180.0};
  CHECK(valid_mask(alpha, 0.5, band).count() == 8 * 60);
}

TEST_CASE("ssim: identity, anticorrelation, reference oracle") {
  const Image a = random_image(32, 20, 3, 5);
  CHECK(ssim(a, a).value == doctest::Approx(1.0));
  Image neg = a;
  for (auto& v : neg.data) v = 1.0 - v;
  CHECK(ssim(a, neg).value < 0.3);

  const Image b = random_image(32, 20, 3, 6);
  CHECK(ssim(a, b).value == doctest::Approx(ssim_reference(a, b)).epsilon(1e-4));

  // a nearly-identical pair exercises the stability of the formula
  Image c = a;
  for (auto& v : c.data) v += 1e-4;
  CHECK(ssim(a, c).value == doctest::Approx(ssim_reference(a, c)).epsilon(1e-4));
}

TEST_CASE("ssim backward matches finite differences") {
  const Image a = random_image(16, 14, 1, 11);
  const Image b = random_image(16, 14, 1, 12);
  const Image grad = ssim_backward(a, b);
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> px(0, 15), py(0, 13);
  const double h = 1e-6;
  for (int i = 0; i < 30; ++i) {
    const int x = px(rng), y = py(rng);
    Image ap = a, am = a;
    ap.at(y, x) += h;
    am.at(y, x) -= h;
    const double fd = (ssim(ap, b).value - ssim(am, b).value) / (2 * h);
    CHECK(grad.at(y, x) == doctest::Approx(fd).epsilon(1e-4));
  }
}

TEST_CASE("rgb loss: identities and offsets") {
  const Image gt = random_image(32, 20, 3, 21);
  Mask omega(32, 20, true);
  long n = 0;
  CHECK(rgb_loss(gt, gt, omega, 0.2, &n) == doctest::Approx(0.0));
  CHECK(n == 32 * 20);

  Image off = gt;
  for (auto& v : off.data) v += 0.1;
  CHECK(rgb_loss(off, gt, omega, 0.0, &n) == doctest::Approx(0.1).epsilon(1e-12));
  const double with_mix = rgb_loss(off, gt, omega, 0.2, &n);
  const double ssim_term = 1.0 - ssim(off, gt, &omega).value;
  CHECK(with_mix == doctest::Approx(0.8 * 0.1 + 0.2 * ssim_term).epsilon(1e-12));

  Mask empty(32, 20, false);
  CHECK(rgb_loss(off, gt, empty, 0.2, &n) == 0.0);
  CHECK(n == 0);

  Image wrong(8, 8, 3);
  CHECK_THROWS_AS(rgb_loss(wrong, gt, omega, 0.2), std::invalid_argument);
}

TEST_CASE("rgb loss gradient matches finite differences") {
  const int W = 24, H = 16;
  const Image gt = random_image(W, H, 3, 31);
  Image render = random_image(W, H, 3, 32);
  Mask omega(W, H, true);
  for (int x = 0; x < W; ++x) omega.at(0, x) = 0;  // partial mask
  Image grad;
  rgb_loss(render, gt, omega, 0.2, nullptr, &grad);
  std::mt19937_64 rng(33);
  std::uniform_int_distribution<int> px(0, W - 1), py(0, H - 1), pc(0, 2);
  const double h = 1e-6;
  for (int i = 0; i < 40; ++i) {
    const int x = px(rng), y = py(rng), c = pc(rng);
    Image rp = render, rm = render;
    rp.at(y, x, c) += h;
    rm.at(y, x, c) -= h;
    const double fd =
        (rgb_loss(rp, gt, omega, 0.2) - rgb_loss(rm, gt, omega, 0.2)) / (2 * h);
    CHECK(grad.at(y, x, c) == doctest::Approx(fd).epsilon(2e-4));
  }
}

TEST_CASE("depth normals: analytic plane") {
  const int W = 128, H = 64;
  const ErpCamera cam = identity_cam(W, H);
  // plane z = 2 seen through pixels around the image center
  Image depth(W, H, 1, 0.0);
  Mask omega(W, H, false);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const Vector3d d = ray_at(x + 0.5, y + 0.5, cam);
      if (d.z() < 0.35) continue;  // keep the plane in front and well-conditioned
      depth.at(y, x) = 2.0 / d.z();
      omega.at(y, x) = 1;
    }
  const DepthNormals dn = depth_to_normal(depth, cam, omega);
  int checked = 0;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      if (!dn.valid.at(y, x)) continue;
      const Vector3d n(dn.normal.at(y, x, 0), dn.normal.at(y, x, 1), dn.normal.at(y, x, 2));
      const double angle = std::acos(std::min(1.0, std::abs(n.dot(Vector3d(0, 0, -1)))));
      CHECK(angle < 1.0 * kPi / 180.0);
      ++checked;
    }
  CHECK(checked > 500);
  // facing convention: normals point toward the camera (-z side)
  CHECK(dn.normal.at(H / 2, W / 2, 2) < 0);
}

TEST_CASE("depth normals: constant-radius sphere") {
  const int W = 512, H = 256;  // forward-difference tilt shrinks with pixel size
  const ErpCamera cam = identity_cam(W, H);
  Image depth(W, H, 1, 3.0);
  Mask omega(W, H, true);
  const DepthNormals dn = depth_to_normal(depth, cam, omega);
  for (int y = H / 4; y < 3 * H / 4; ++y)
    for (int x = 0; x < W; ++x) {
      REQUIRE(dn.valid.at(y, x));
      const Vector3d n(dn.normal.at(y, x, 0), dn.normal.at(y, x, 1), dn.normal.at(y, x, 2));
      const Vector3d r = ray_at(x + 0.5, y + 0.5, cam);
      const double angle = std::acos(std::min(1.0, std::abs(n.dot(r))));
      CHECK(angle < 0.5 * kPi / 180.0);
    }
}

TEST_CASE("depth normals: single-pixel omega yields nothing") {
  const ErpCamera cam = identity_cam(16, 8);
  Image depth(16, 8, 1, 2.0);
  Mask omega(16, 8, false);
  omega.at(4, 7) = 1;
  CHECK(depth_to_normal(depth, cam, omega).valid.count() == 0);
}

TEST_CASE("dn loss identities") {
  const int W = 16, H = 8;
  DepthNormals dn;
  dn.normal = Image(W, H, 3);
  dn.valid = Mask(W, H, true);
  Image n(W, H, 3);
  std::mt19937_64 rng(41);
  std::normal_distribution<double> g;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      Vector3d v(g(rng), g(rng), g(rng));
      v.normalize();
      for (int c = 0; c < 3; ++c) {
        dn.normal.at(y, x, c) = v[c];
        n.at(y, x, c) = v[c];
      }
    }
  Mask omega(W, H, true);
  CHECK(dn_loss(n, dn, omega, 0.1) == doctest::Approx(0.0));
  Image flipped = n;
  for (auto& v : flipped.data) v = -v;
  CHECK(dn_loss(flipped, dn, omega, 0.1) == doctest::Approx(0.0));
  // perpendicular field: rotate each normal 90 degrees around any axis
  Image perp(W, H, 3);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const Vector3d v(n.at(y, x, 0), n.at(y, x, 1), n.at(y, x, 2));
      Vector3d t = v.cross(Vector3d::UnitX());
      if (t.norm() < 1e-6) t = v.cross(Vector3d::UnitY());
      t.normalize();
      for (int c = 0; c < 3; ++c) perp.at(y, x, c) = t[c];
    }
  CHECK(dn_loss(perp, dn, omega, 0.1) == doctest::Approx(1.0));
}

TEST_CASE("jump1: dead zone and per-pixel step contribution") {
  const int W = 32, H = 16;
  Image gray(W, H, 1, 0.5);
  Mask omega(W, H, true);
  Image flat(W, H, 1, 2.0);
  CHECK(jump1_loss(flat, gray, omega, 0.1, 0.05, 10.0) == 0.0);

  // sub-threshold wiggle along y stays inside the hinge dead zone
  // (x wiggles would be amplified by the ERP correction near the poles)
  Image wiggle = flat;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) wiggle.at(y, x) = 2.0 * std::exp(0.012 * (y % 2));
  CHECK(jump1_loss(wiggle, gray, omega, 0.1, 0.05, 10.0) == 0.0);

  // one column pair with a log-depth step of tau1 + 0.1 at the equator
  const double tau1 = 0.05;
  Image step = flat;
  for (int y = 0; y < H; ++y)
    for (int x = 16; x < W; ++x) step.at(y, x) = 2.0 * std::exp(tau1 + 0.1);
  // restrict omega to two equator rows so w_lat = 1 and s(phi) ~ cos of the
  // row latitude; pick the rows adjacent to the equator
  Mask band(W, H, false);
  for (int x = 0; x < W; ++x) {
    band.at(H / 2 - 1, x) = 1;
    band.at(H / 2, x) = 1;
  }
  const double loss = jump1_loss(step, gray, band, 0.1, tau1, 10.0);
  // contributing pixels: one row (stencils need the row below in omega);
  // steps活 at x=15 (up) and x=31 (down, wrapped); correction s(phi)
  const double s = std::cos(row_latitude(H / 2 - 1, H));
  const double expect_per_step = std::max((tau1 + 0.1) / s - tau1, 0.0);
  CHECK(loss == doctest::Approx(2.0 * expect_per_step / W).epsilon(1e-9));
}

TEST_CASE("jump2: ramps vanish, ripples match the stencil") {
  const int W = 32, H = 16;
  Image gray(W, H, 1, 0.25);
  Mask omega(W, H, true);
  Image flat(W, H, 1, 1.7);
  CHECK(jump2_loss(flat, gray, omega, 0.1, 0.02, 10.0) == 0.0);

  // log-linear ramp along y (no ERP correction on y): second差 difference 0
  Image ramp(W, H, 1);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) ramp.at(y, x) = std::exp(0.03 * y);
  CHECK(jump2_loss(ramp, gray, omega, 0.1, 0.02, 10.0) == doctest::Approx(0.0).epsilon(1e-12));

  // sinusoidal log-depth ripple of period 4 px along x
  const double amp = 0.06, tau2 = 0.02;
  Image ripple(W, H, 1);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) ripple.at(y, x) = std::exp(amp * std::sin(kPi / 2 * x));
  const double loss = jump2_loss(ripple, gray, omega, 0.1, tau2, 10.0);
  // hand evaluation of the same stencil
  double acc = 0.0, wsum = 0.0;
  for (int y = 1; y + 1 < H; ++y) {
    const double w_lat = latitude_weight(row_latitude(y, H), 0.1);
    const double s = std::max(std::cos(row_latitude(y, H)), 1e-6);
    for (int x = 0; x < W; ++x) {
      const double z0 = amp * std::sin(kPi / 2 * ((x + W - 1) % W));
      const double z1 = amp * std::sin(kPi / 2 * x);
      const double z2 = amp * std::sin(kPi / 2 * ((x + 1) % W));
      const double lx = (z2 - 2 * z1 + z0) / s;
      acc += w_lat * std::max(std::abs(lx) - tau2, 0.0);
      wsum += w_lat;
    }
  }
  CHECK(loss == doctest::Approx(acc / wsum).epsilon(1e-9));
}

TEST_CASE("jump losses: scale and longitude-shift invariance") {
  const int W = 24, H = 12;
  const Image depth = smooth_depth(W, H, 51);
  const Image gray = grayscale(random_image(W, H, 3, 52));
  Mask omega(W, H, true);
  omega.at(3, 5) = 0;
  omega.at(9, 17) = 0;

  const double j1 = jump1_loss(depth, gray, omega, 0.1, 0.02, 10.0);
  const double j2 = jump2_loss(depth, gray, omega, 0.1, 0.008, 10.0);
  CHECK(j1 > 0.0);

  Image scaled = depth;
  for (auto& v : scaled.data) v *= 3.7;
  CHECK(jump1_loss(scaled, gray, omega, 0.1, 0.02, 10.0) == doctest::Approx(j1).epsilon(1e-9));
  CHECK(jump2_loss(scaled, gray, omega, 0.1, 0.008, 10.0) == doctest::Approx(j2).epsilon(1e-9));

  const int k = 7;
  const Image dsh = cyclic_shift_x(depth, k);
  const Image gsh = cyclic_shift_x(gray, k);
  Mask msh(W, H, false);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) msh.at(y, x) = omega.at(y, (x + k) % W);
  CHECK(jump1_loss(dsh, gsh, msh, 0.1, 0.02, 10.0) == doctest::Approx(j1).epsilon(1e-9));
  CHECK(jump2_loss(dsh, gsh, msh, 0.1, 0.008, 10.0) == doctest::Approx(j2).epsilon(1e-9));
}

TEST_CASE("loss gradients w.r.t. depth match finite differences") {
  const int W = 16, H = 8;
  const ErpCamera cam = identity_cam(W, H);
  const Image depth = smooth_depth(W, H, 61);
  const Image gray = grayscale(random_image(W, H, 3, 62));
  Mask omega(W, H, true);

  Image gj1, gj2;
  jump1_loss(depth, gray, omega, 0.1, 0.02, 10.0, &gj1);
  jump2_loss(depth, gray, omega, 0.1, 0.008, 10.0, &gj2);

  // depth -> depth-normal -> dn loss chain
  Image target(W, H, 3);
  std::mt19937_64 rng(63);
  std::normal_distribution<double> g;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      Vector3d v(g(rng), g(rng), 2.0 + g(rng));
      v.normalize();
      for (int c = 0; c < 3; ++c) target.at(y, x, c) = v[c];
    }
  auto dn_of_depth = [&](const Image& d) {
    const DepthNormals dn = depth_to_normal(d, cam, omega);
    return dn_loss(target, dn, omega, 0.1);
  };
  const DepthNormals dn0 = depth_to_normal(depth, cam, omega);
  Image d_nd;
  dn_loss(target, dn0, omega, 0.1, nullptr, &d_nd);
  const Image gdn = depth_to_normal_backward(depth, cam, omega, dn0, d_nd);

  const double h = 1e-6;
  std::uniform_int_distribution<int> px(0, W - 1), py(0, H - 1);
  int hits = 0;
  for (int i = 0; i < 60; ++i) {
    const int x = px(rng), y = py(rng);
    Image dp = depth, dm = depth;
    dp.at(y, x) += h;
    dm.at(y, x) -= h;
    const double fd1 = (jump1_loss(dp, gray, omega, 0.1, 0.02, 10.0) -
                        jump1_loss(dm, gray, omega, 0.1, 0.02, 10.0)) /
                       (2 * h);
    const double fd2 = (jump2_loss(dp, gray, omega, 0.1, 0.008, 10.0) -
                        jump2_loss(dm, gray, omega, 0.1, 0.008, 10.0)) /
                       (2 * h);
    const double fdn = (dn_of_depth(dp) - dn_of_depth(dm)) / (2 * h);
    CHECK(gj1.at(y, x) == doctest::Approx(fd1).epsilon(1e-4));
    CHECK(gj2.at(y, x) == doctest::Approx(fd2).epsilon(1e-4));
    CHECK(gdn.at(y, x) == doctest::Approx(fdn).epsilon(5e-4));
    if (std::abs(fd1) > 1e-9) ++hits;
  }
  CHECK(hits > 5);  // the random field actually activates hinges
}

TEST_CASE("dn loss gradient w.r.t. the rendered normal map") {
  const int W = 12, H = 8;
  DepthNormals dn;
  dn.normal = random_image(W, H, 3, 71, -1.0, 1.0);
  dn.valid = Mask(W, H, true);
  Image n = random_image(W, H, 3, 72, -1.0, 1.0);
  Mask omega(W, H, true);
  Image grad;
  dn_loss(n, dn, omega, 0.1, &grad);
  std::mt19937_64 rng(73);
  std::uniform_int_distribution<int> px(0, W - 1), py(0, H - 1), pc(0, 2);
  const double h = 1e-6;
  for (int i = 0; i < 40; ++i) {
    const int x = px(rng), y = py(rng), c = pc(rng);
    Image npp = n, nm = n;
    npp.at(y, x, c) += h;
    nm.at(y, x, c) -= h;
    const double fd = (dn_loss(npp, dn, omega, 0.1) - dn_loss(nm, dn, omega, 0.1)) / (2 * h);
    CHECK(grad.at(y, x, c) == doctest::Approx(fd).epsilon(1e-4));
  }
}

TEST_CASE("total loss: weights-zero identity and breakdown sum") {
  const int W = 32, H = 16;
  const ErpCamera cam = identity_cam(W, H);
  RenderOutput render(W, H);
  render.rgb = random_image(W, H, 3, 81);
  render.alpha = Image(W, H, 1, 0.9);
  render.depth = smooth_depth(W, H, 82);
  render.depth_valid = Mask(W, H, true);
  render.normal = random_image(W, H, 3, 83, -1.0, 1.0);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      Vector3d v(render.normal.at(y, x, 0), render.normal.at(y, x, 1),
                 render.normal.at(y, x, 2) + 2.0);
      v.normalize();
      for (int c = 0; c < 3; ++c) render.normal.at(y, x, c) = v[c];
    }
  const Image gt = random_image(W, H, 3, 84);

  LossWeights zero;
  zero.lambda_dn = zero.lambda_j1 = zero.lambda_j2 = 0.0;
  ScheduleState sched;
  const LossBreakdown bz = total_loss(render, gt, cam, zero, sched);
  CHECK(bz.total == doctest::Approx(bz.rgb));

  LossWeights w;  // defaults
  ScheduleState half;
  half.jump_scale = 0.37;
  half.dn_enabled = true;
  const LossBreakdown bd = total_loss(render, gt, cam, w, half);
  CHECK(bd.total == doctest::Approx(bd.rgb + w.lambda_dn * bd.dn +
                                    0.37 * (w.lambda_j1 * bd.jump1 + w.lambda_j2 * bd.jump2))
                        .epsilon(1e-12));
  CHECK(bd.valid_pixel_count == W * H);
}

TEST_CASE("total loss vanishes on a perfect planar render") {
  // floor plane y = +1 below a level camera; restrict to a band where the
  // hinge dead zones absorb the smooth depth variation
  const int W = 256, H = 128;
  const ErpCamera cam(Eigen::Matrix3d::Identity(), Vector3d::Zero(), W, H,
                      LatBand{-80.0 * kPi / 180.0, -35.0 * kPi / 180.0});
  RenderOutput render(W, H);
  const Image gt = [&] {
    Image img(W, H, 3);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x)
        for (int c = 0; c < 3; ++c) img.at(y, x, c) = 0.25 + 0.1 * c;
    return img;
  }();
  render.rgb = gt;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const Vector3d d = ray_at(x + 0.5, y + 0.5, cam);
      if (d.y() > 0.05) {
        render.alpha.at(y, x) = 1.0;
        render.depth.at(y, x) = 1.0 / d.y();
        render.depth_valid.at(y, x) = 1;
        render.normal.at(y, x, 1) = -1.0;  // plane normal facing the camera
      }
    }
  LossWeights w;
  ScheduleState sched;
  const LossBreakdown bd = total_loss(render, gt, cam, w, sched);
  CHECK(bd.valid_pixel_count > 1000);
  CHECK(bd.total < 1e-6);
}
