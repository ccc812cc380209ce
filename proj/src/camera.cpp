#include "panogs/camera.hpp"

#include <cmath>
#include <stdexcept>

namespace panogs {

namespace {

double clamp01_sym(double x) { return std::max(-1.0, std::min(1.0, x)); }

double wrap_lon(double lon) {
  // Wrap to [-pi, pi].
  while (lon > kPi) lon -= 2.0 * kPi;
  while (lon < -kPi) lon += 2.0 * kPi;
  return lon;
}

}  // namespace

ErpCamera::ErpCamera(const Eigen::Matrix3d& rot, const Eigen::Vector3d& c, int w, int h,
                     std::optional<LatBand> band)
    : rotation(rot), center(c), width(w), height(h), lat_band(band) {
  validate();
}

void ErpCamera::validate() const {
  if (width < 2 || height < 1)
    throw std::invalid_argument("ErpCamera: need width >= 2 and height >= 1");
  const Eigen::Matrix3d rr = rotation.transpose() * rotation;
  if ((rr - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-6)
    throw std::invalid_argument("ErpCamera: rotation is not orthonormal");
  if (lat_band) {
    if (!(lat_band->lat_min >= -kPi / 2 - 1e-12 && lat_band->lat_min < lat_band->lat_max &&
          lat_band->lat_max <= kPi / 2 + 1e-12))
      throw std::invalid_argument("ErpCamera: invalid latitude band");
  }
}

SphericalAngles dir_to_angles(const Eigen::Vector3d& d) {
  const double n = d.norm();
  if (n <= 0.0) throw std::domain_error("dir_to_angles: zero direction");
  SphericalAngles a;
  if (d.x() == 0.0 && d.z() == 0.0) {
    // Exact pole: atan2(0, 0) is implementation-defined; pin lon = 0.
    a.lon = 0.0;
  } else {
    a.lon = std::atan2(d.x(), d.z());
  }
  a.lat = std::asin(clamp01_sym(-d.y() / n));
  return a;
}

Eigen::Vector2d angles_to_pixel(const SphericalAngles& a, int width, int height) {
  const double u = width / (2.0 * kPi) * a.lon + width / 2.0;
  const double v = -height / kPi * a.lat + height / 2.0;
  return {u, v};
}

Eigen::Vector2d project_point(const Eigen::Vector3d& x_world, const ErpCamera& cam) {
  const Eigen::Vector3d d = cam.to_camera(x_world);
  if (d.norm() == 0.0) throw std::domain_error("project_point: point at camera center");
  return angles_to_pixel(dir_to_angles(d), cam.width, cam.height);
}

SphericalAngles pixel_pos_to_angles(double u, double v, int width, int height) {
  SphericalAngles a;
  a.lon = (u - width / 2.0) * 2.0 * kPi / width;
  a.lat = -(v - height / 2.0) * kPi / height;
  return a;
}

Eigen::Vector3d angles_to_dir(const SphericalAngles& a) {
  const double cl = std::cos(a.lat);
  return {std::sin(a.lon) * cl, -std::sin(a.lat), std::cos(a.lon) * cl};
}

Eigen::Vector3d ray_at(double u, double v, const ErpCamera& cam) {
  return cam.rotation.transpose() * angles_to_dir(pixel_pos_to_angles(u, v, cam.width, cam.height));
}

Eigen::Vector3d pixel_to_ray(int u, int v, const ErpCamera& cam) {
  if (u < 0 || u >= cam.width || v < 0 || v >= cam.height)
    throw std::domain_error("pixel_to_ray: pixel out of range");
  return ray_at(u + 0.5, v + 0.5, cam);
}

double row_latitude(int v, int height) {
  return -(v + 0.5 - height / 2.0) * kPi / height;
}

bool CapBounds::contains(const SphericalAngles& a) const {
  if (full_sphere) return true;
  if (a.lat < lat_lo || a.lat > lat_hi) return false;
  if (lon_full) return true;
  if (lon_lo <= lon_hi) return a.lon >= lon_lo && a.lon <= lon_hi;
  return a.lon >= lon_lo || a.lon <= lon_hi;  // wraps across +-pi
}

CapBounds cap_bounds(const Eigen::Vector3d& center_dir, double dist, double radius) {
  if (radius <= 0.0) throw std::domain_error("cap_bounds: radius must be positive");
  CapBounds b;
  if (dist <= radius) {
    b.full_sphere = true;
    b.lon_full = true;
    return b;
  }
  const SphericalAngles c = dir_to_angles(center_dir);
  const double beta = std::asin(clamp01_sym(radius / dist));
  b.lat_lo = std::max(c.lat - beta, -kPi / 2);
  b.lat_hi = std::min(c.lat + beta, kPi / 2);
  if (std::abs(c.lat) + beta >= kPi / 2) {
    // Cap contains a pole: every longitude is covered.
    b.lon_full = true;
  } else {
    // Exact half-width of the cap's longitude extent.
    const double hw = std::asin(clamp01_sym(std::sin(beta) / std::cos(c.lat)));
    b.lon_lo = wrap_lon(c.lon - hw);
    b.lon_hi = wrap_lon(c.lon + hw);
  }
  return b;
}

double latitude_weight(double lat, double eps) {
  return std::max(eps, std::min(1.0, std::cos(lat)));
}

}  // namespace panogs
