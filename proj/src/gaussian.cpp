#include "panogs/gaussian.hpp"

#include <cmath>
#include <stdexcept>

namespace panogs {

namespace {

constexpr double kC0 = 0.28209479177387814;
constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                           -1.0925484305920792, 0.5462742152960396};
constexpr double kC3[7] = {-0.5900435899266435, 2.890611442640554,  -0.4570457994644658,
                           0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                           -0.5900435899266435};

}  // namespace

Eigen::Matrix3d Gaussian3D::rotation() const {
  Eigen::Quaterniond q(quat[0], quat[1], quat[2], quat[3]);
  q.normalize();
  return q.toRotationMatrix();
}

Eigen::Vector3d Gaussian3D::inflated_scale() const {
  return inflate_scales(scale(), filter_radius);
}

LocalRay to_local_ray(const Eigen::Vector3d& mean, const Eigen::Matrix3d& world_to_local,
                      const Eigen::Vector3d& scales, const Eigen::Vector3d& origin,
                      const Eigen::Vector3d& dir) {
  if (scales.minCoeff() <= 0.0) throw std::domain_error("to_local_ray: degenerate scales");
  LocalRay lr;
  const Eigen::Vector3d inv_s = scales.cwiseInverse();
  lr.o_loc = inv_s.cwiseProduct(world_to_local * (origin - mean));
  lr.r_loc = inv_s.cwiseProduct(world_to_local * dir);
  lr.A = lr.r_loc.squaredNorm();
  lr.B = lr.o_loc.dot(lr.r_loc);
  lr.C = lr.o_loc.squaredNorm();
  return lr;
}

LocalRay to_local_ray(const Gaussian3D& g, const Eigen::Vector3d& origin,
                      const Eigen::Vector3d& dir, bool use_filter) {
  const Eigen::Vector3d s = use_filter ? g.inflated_scale() : g.scale();
  return to_local_ray(g.mean, g.rotation().transpose(), s, origin, dir);
}

PeakResponse peak_response(const LocalRay& lr) {
  if (lr.A <= 0.0) throw std::domain_error("peak_response: A must be positive");
  PeakResponse p;
  p.t_star = -lr.B / lr.A;
  const double q = std::max(0.0, lr.C - lr.B * lr.B / lr.A);
  p.g_max = std::exp(-0.5 * q);
  return p;
}

double response_at(const LocalRay& lr, double t) {
  return std::exp(-0.5 * (lr.A * t * t + 2.0 * lr.B * t + lr.C));
}

double filter_radius(const Gaussian3D& g, const std::vector<ErpCamera>& cams, double kappa) {
  if (cams.empty()) throw std::domain_error("filter_radius: empty camera list");
  double best = -1.0;
  for (const auto& cam : cams) {
    const Eigen::Vector3d x_cam = cam.to_camera(g.mean);
    const double r = x_cam.norm();
    if (r <= 0.0) continue;
    const double lat = std::asin(std::max(-1.0, std::min(1.0, -x_cam.y() / r)));
    const double dt_lat = kPi / cam.height;
    const double dt_lon = 2.0 * kPi / cam.width * std::cos(lat);
    best = std::max(best, r * std::max(dt_lat, dt_lon));
  }
  if (best < 0.0) throw std::domain_error("filter_radius: no camera at positive distance");
  return kappa * best;
}

Eigen::Vector3d inflate_scales(const Eigen::Vector3d& s, double f) {
  return (s.array().square() + f * f).sqrt();
}

double compensate_opacity(double opacity, const Eigen::Vector3d& s,
                          const Eigen::Vector3d& s_inflated) {
  return opacity * (s.array() / s_inflated.array()).prod();
}

void sh_basis(const Eigen::Vector3d& dir, int degree, double* b) {
  const double x = dir.x(), y = dir.y(), z = dir.z();
  b[0] = kC0;
  if (degree < 1) return;
  b[1] = -kC1 * y;
  b[2] = kC1 * z;
  b[3] = -kC1 * x;
  if (degree < 2) return;
  const double xx = x * x, yy = y * y, zz = z * z;
  b[4] = kC2[0] * x * y;
  b[5] = kC2[1] * y * z;
  b[6] = kC2[2] * (2.0 * zz - xx - yy);
  b[7] = kC2[3] * x * z;
  b[8] = kC2[4] * (xx - yy);
  if (degree < 3) return;
  b[9] = kC3[0] * y * (3.0 * xx - yy);
  b[10] = kC3[1] * x * y * z;
  b[11] = kC3[2] * y * (4.0 * zz - xx - yy);
  b[12] = kC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
  b[13] = kC3[4] * x * (4.0 * zz - xx - yy);
  b[14] = kC3[5] * z * (xx - yy);
  b[15] = kC3[6] * x * (xx - 3.0 * yy);
}

void sh_basis_grad(const Eigen::Vector3d& dir, int degree, Eigen::Vector3d* db) {
  const double x = dir.x(), y = dir.y(), z = dir.z();
  db[0].setZero();
  if (degree < 1) return;
  db[1] = {0, -kC1, 0};
  db[2] = {0, 0, kC1};
  db[3] = {-kC1, 0, 0};
  if (degree < 2) return;
  const double xx = x * x, yy = y * y, zz = z * z;
  db[4] = kC2[0] * Eigen::Vector3d(y, x, 0);
  db[5] = kC2[1] * Eigen::Vector3d(0, z, y);
  db[6] = kC2[2] * Eigen::Vector3d(-2.0 * x, -2.0 * y, 4.0 * z);
  db[7] = kC2[3] * Eigen::Vector3d(z, 0, x);
  db[8] = kC2[4] * Eigen::Vector3d(2.0 * x, -2.0 * y, 0);
  if (degree < 3) return;
  db[9] = kC3[0] * Eigen::Vector3d(6.0 * x * y, 3.0 * xx - 3.0 * yy, 0);
  db[10] = kC3[1] * Eigen::Vector3d(y * z, x * z, x * y);
  db[11] = kC3[2] * Eigen::Vector3d(-2.0 * x * y, 4.0 * zz - xx - 3.0 * yy, 8.0 * y * z);
  db[12] = kC3[3] * Eigen::Vector3d(-6.0 * x * z, -6.0 * y * z, 6.0 * zz - 3.0 * xx - 3.0 * yy);
  db[13] = kC3[4] * Eigen::Vector3d(4.0 * zz - 3.0 * xx - yy, -2.0 * x * y, 8.0 * x * z);
  db[14] = kC3[5] * Eigen::Vector3d(2.0 * x * z, -2.0 * y * z, xx - yy);
  db[15] = kC3[6] * Eigen::Vector3d(3.0 * xx - 3.0 * yy, -6.0 * x * y, 0);
}

Eigen::Vector3d eval_sh_color(const Gaussian3D& g, const Eigen::Vector3d& view_dir, int degree) {
  const int n = sh_coeff_count(degree);
  if (n > int(g.sh.size())) throw std::domain_error("eval_sh_color: degree exceeds storage");
  double basis[16];
  sh_basis(view_dir, degree, basis);
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  for (int i = 0; i < n; ++i) c += basis[i] * g.sh[i];
  c.array() += 0.5;
  return c.cwiseMax(0.0).cwiseMin(1.0);
}

Eigen::Vector3d rgb_to_sh_dc(const Eigen::Vector3d& rgb) {
  return (rgb.array() - 0.5) / kC0;
}

}  // namespace panogs
