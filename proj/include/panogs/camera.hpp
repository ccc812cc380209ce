#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <optional>

namespace panogs {

inline constexpr double kPi = 3.14159265358979323846;

/// Longitude/latitude of a direction in the camera frame.
/// lon in [-pi, pi], measured from the forward (+z) axis toward +x.
/// lat in [-pi/2, pi/2], positive above the horizon (-y half space).
struct SphericalAngles {
  double lon = 0.0;
  double lat = 0.0;
};

/// Optional valid-latitude band (radians), e.g. a panorama cropped to
/// [-40 deg, 20 deg] to emulate an annular camera's vertical field of view.
struct LatBand {
  double lat_min = 0.0;
  double lat_max = 0.0;

  bool contains(double lat) const { return lat >= lat_min && lat <= lat_max; }
};

/// Equirectangular (ERP) camera: orientation, position, image size.
/// Camera frame convention: z forward, x right, y down-ish so that
/// lat = asin(-y) is positive upward.
struct ErpCamera {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();  // world -> camera
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  int width = 0;
  int height = 0;
  std::optional<LatBand> lat_band;

  ErpCamera() = default;
  ErpCamera(const Eigen::Matrix3d& rot, const Eigen::Vector3d& c, int w, int h,
            std::optional<LatBand> band = std::nullopt);

  Eigen::Vector3d to_camera(const Eigen::Vector3d& x_world) const {
    return rotation * (x_world - center);
  }

  /// Throws std::invalid_argument if the orthonormality/size invariants fail.
  void validate() const;
};

SphericalAngles dir_to_angles(const Eigen::Vector3d& d);

/// Eq-style ERP projection: u = W/(2 pi) lon + W/2, v = -H/pi lat + H/2.
Eigen::Vector2d angles_to_pixel(const SphericalAngles& a, int width, int height);

/// Continuous pixel coordinates of a world point; throws std::domain_error
/// if the point coincides with the camera center.
Eigen::Vector2d project_point(const Eigen::Vector3d& x_world, const ErpCamera& cam);

/// Angles of a continuous pixel position (no +0.5 offset applied).
SphericalAngles pixel_pos_to_angles(double u, double v, int width, int height);

/// Camera-frame unit direction for given angles.
Eigen::Vector3d angles_to_dir(const SphericalAngles& a);

/// World unit direction through a continuous pixel position.
Eigen::Vector3d ray_at(double u, double v, const ErpCamera& cam);

/// World unit direction through the center of pixel (u, v); rays are sampled
/// at pixel centers (u + 0.5, v + 0.5). Throws on out-of-range pixels.
Eigen::Vector3d pixel_to_ray(int u, int v, const ErpCamera& cam);

/// Latitude of the center of pixel row v.
double row_latitude(int v, int height);

/// Conservative lat/lon bounding box of a spherical cap.
struct CapBounds {
  bool full_sphere = false;            // camera inside the bounding sphere
  double lat_lo = -kPi / 2, lat_hi = kPi / 2;
  bool lon_full = false;               // cap contains a pole
  double lon_lo = -kPi, lon_hi = kPi;  // lon_lo > lon_hi means the interval wraps at +-pi

  bool contains(const SphericalAngles& a) const;
};

/// Bounds of the set of directions within angular radius beta = asin(radius/dist)
/// of center_dir (camera frame). dist <= radius puts the camera inside the
/// sphere -> full_sphere. Throws std::domain_error for radius <= 0.
CapBounds cap_bounds(const Eigen::Vector3d& center_dir, double dist, double radius);

/// clamp(cos(lat), eps, 1): suppresses pole oversampling in densification
/// scores and the geometric losses.
double latitude_weight(double lat, double eps);

}  // namespace panogs
