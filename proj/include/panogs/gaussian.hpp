#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <vector>

#include "panogs/camera.hpp"

namespace panogs {

/// Contributions whose ray-space peak lies at t <= kTNear are treated as
/// behind the camera and skipped.
inline constexpr double kTNear = 0.01;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double inverse_sigmoid(double y) { return std::log(y / (1.0 - y)); }

inline int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

/// One anisotropic Gaussian primitive. Scales are stored in log space and
/// opacity pre-sigmoid so optimizer steps cannot leave the valid domain;
/// the accessors expose the activated values.
struct Gaussian3D {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Vector4d quat = Eigen::Vector4d(1, 0, 0, 0);  // (w, x, y, z), unit
  Eigen::Vector3d log_scale = Eigen::Vector3d::Zero();
  double opacity_logit = 0.0;
  std::vector<Eigen::Vector3d> sh = {Eigen::Vector3d::Zero()};  // sh[0] = DC
  double filter_radius = 0.0;  // isotropic pixel-support floor, scene units

  Eigen::Vector3d scale() const { return log_scale.array().exp(); }
  double opacity() const { return sigmoid(opacity_logit); }
  /// Local -> world rotation from the (normalized) quaternion.
  Eigen::Matrix3d rotation() const;
  /// Scales after isotropic inflation by filter_radius.
  Eigen::Vector3d inflated_scale() const;

  void normalize_quat() { quat.normalize(); }
};

struct GaussianScene {
  std::vector<Gaussian3D> gaussians;
  int sh_degree = 0;

  size_t size() const { return gaussians.size(); }
};

/// A ray expressed in a Gaussian's scaled local frame, with the quadratic
/// coefficients of the 1D log-density along the ray.
struct LocalRay {
  Eigen::Vector3d o_loc;
  Eigen::Vector3d r_loc;
  double A = 0.0;  // r_loc . r_loc
  double B = 0.0;  // o_loc . r_loc
  double C = 0.0;  // o_loc . o_loc
};

LocalRay to_local_ray(const Eigen::Vector3d& mean, const Eigen::Matrix3d& world_to_local,
                      const Eigen::Vector3d& scales, const Eigen::Vector3d& origin,
                      const Eigen::Vector3d& dir);

/// Uses the Gaussian's own frame; inflated scales when use_filter is set.
/// Throws std::domain_error on degenerate scales.
LocalRay to_local_ray(const Gaussian3D& g, const Eigen::Vector3d& origin,
                      const Eigen::Vector3d& dir, bool use_filter = true);

struct PeakResponse {
  double t_star = 0.0;
  double g_max = 0.0;
};

/// Maximum of the 1D Gaussian response along the ray: t* = -B/A,
/// g_max = exp(-0.5 (C - B^2/A)). Throws std::domain_error if A <= 0.
PeakResponse peak_response(const LocalRay& lr);

/// exp(-0.5 (A t^2 + 2 B t + C)).
double response_at(const LocalRay& lr, double t);

/// Pixel-support filter radius: per camera, the angular size of a pixel at
/// the Gaussian's latitude times the camera distance; kappa * max over
/// cameras. Throws std::domain_error on an empty camera list or if every
/// camera is at distance zero.
double filter_radius(const Gaussian3D& g, const std::vector<ErpCamera>& cams, double kappa);

/// s~_k = sqrt(s_k^2 + f^2).
Eigen::Vector3d inflate_scales(const Eigen::Vector3d& s, double f);

/// o * prod(s_k / s~_k): keeps the integrated density constant under
/// scale inflation.
double compensate_opacity(double opacity, const Eigen::Vector3d& s,
                          const Eigen::Vector3d& s_inflated);

/// Real spherical-harmonic basis values (constants folded in), degree <= 3.
void sh_basis(const Eigen::Vector3d& dir, int degree, double* basis);
/// Derivatives of each basis value w.r.t. the (unit) direction components.
void sh_basis_grad(const Eigen::Vector3d& dir, int degree, Eigen::Vector3d* dbasis);

/// View-dependent color: sum of basis * coefficients, +0.5 offset, clamped
/// to [0, 1]. Throws std::domain_error if degree exceeds storage.
Eigen::Vector3d eval_sh_color(const Gaussian3D& g, const Eigen::Vector3d& view_dir, int degree);

/// DC coefficient for a flat color (inverse of the +0.5 offset convention).
Eigen::Vector3d rgb_to_sh_dc(const Eigen::Vector3d& rgb);

}  // namespace panogs
