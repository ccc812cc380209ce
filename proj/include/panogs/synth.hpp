#pragma once

#include <optional>
#include <string>
#include <vector>

#include "panogs/camera.hpp"
#include "panogs/image.hpp"
#include "panogs/ply_io.hpp"
#include "panogs/pose_io.hpp"

namespace panogs {

struct TextureSpec {
  enum class Kind { kUniform, kChecker, kNoise };
  Kind kind = Kind::kUniform;
  Eigen::Vector3d color_a = Eigen::Vector3d(0.5, 0.5, 0.5);
  Eigen::Vector3d color_b = Eigen::Vector3d(0.1, 0.1, 0.1);
  double scale = 1.0;  // cells (checker) or base frequency (noise) per unit
  uint64_t seed = 0;

  Eigen::Vector3d sample(const Eigen::Vector3d& p) const;
};

struct Primitive {
  enum class Kind { kBoxRoom, kSphere, kSphereRoom, kQuad };
  Kind kind = Kind::kBoxRoom;
  Eigen::Vector3d box_min = Eigen::Vector3d(-2, -1.5, -2.5);
  Eigen::Vector3d box_max = Eigen::Vector3d(2, 1.5, 2.5);
  Eigen::Vector3d center = Eigen::Vector3d::Zero();  // spheres
  double radius = 1.0;
  int quad_axis = 2;        // quads: fixed axis
  double quad_value = 0.0;  // quads: coordinate along the fixed axis
  Eigen::Vector2d quad_lo = Eigen::Vector2d(-1, -1);  // extents in the other two axes
  Eigen::Vector2d quad_hi = Eigen::Vector2d(1, 1);
  TextureSpec texture;
};

struct RayHit {
  bool hit = false;
  double t = 0.0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d normal = Eigen::Vector3d::Zero();  // flipped toward the ray origin
  int primitive = -1;
  int face = -1;  // box faces: axis*2 + (positive side)
};

struct SynthSpec {
  std::string name = "scene";
  int width = 256;
  int height = 128;
  uint64_t seed = 1;
  std::vector<Primitive> primitives;
  // camera ring inside the scene
  int camera_count = 30;
  double ring_radius = 0.6;
  double height_jitter = 0.25;
  Eigen::Vector3d ring_center = Eigen::Vector3d::Zero();
  std::optional<LatBand> lat_band;
  int point_count = 4000;
  double point_noise = 0.0;
  bool lambertian = false;
  Eigen::Vector3d light_dir = Eigen::Vector3d(0.3, -1.0, 0.2).normalized();
  double ambient = 0.4;

  static SynthSpec preset(const std::string& name);
  /// JSON file; either a full spec or {"preset": "...", <overrides>}.
  static SynthSpec from_json_file(const std::string& path);
};

RayHit trace(const SynthSpec& spec, const Eigen::Vector3d& origin, const Eigen::Vector3d& dir);

struct TracedView {
  Image image;  // H x W x 3 albedo (optionally shaded)
  Image depth;  // H x W radial distance, 0 on miss
  Mask hit;
};
TracedView trace_view(const SynthSpec& spec, const ErpCamera& cam);

/// Pixels whose closest hit lies on the given primitive (and face, if >= 0).
Mask primitive_mask(const SynthSpec& spec, const ErpCamera& cam, int primitive, int face = -1);

std::vector<PosedView> make_cameras(const SynthSpec& spec);

struct SynthView {
  std::string name;
  ErpCamera camera;
  Image image;
  Image depth;
};

struct SynthDataset {
  std::vector<SynthView> views;
  PointCloud points;
};

/// Ray-traces the full dataset: images, analytic depth, poses, and a point
/// cloud subsampled from surface hits (SfM stand-in). Throws if a camera
/// is outside free space.
SynthDataset synth_generate(const SynthSpec& spec);

/// <name>.rgb.png, <name>.depth.pfm per view + poses.txt + points.ply.
void write_dataset(const SynthDataset& data, const std::string& dir);

}  // namespace panogs
