#include "panogs/synth.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>

#include "json.hpp"
#include "panogs/image_io.hpp"
#include "panogs/parallel.hpp"

namespace panogs {

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

double lattice_value(uint64_t seed, int64_t ix, int64_t iy, int64_t iz) {
  uint64_t h = seed;
  h = splitmix64(h ^ uint64_t(ix) * 0x8da6b343ull);
  h = splitmix64(h ^ uint64_t(iy) * 0xd8163841ull);
  h = splitmix64(h ^ uint64_t(iz) * 0xcb1ab31full);
  return double(h >> 11) * (1.0 / 9007199254740992.0);
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

double value_noise(const Eigen::Vector3d& p, uint64_t seed) {
  const Eigen::Vector3d f = p.array().floor();
  const int64_t ix = int64_t(f.x()), iy = int64_t(f.y()), iz = int64_t(f.z());
  const double tx = smoothstep(p.x() - f.x());
  const double ty = smoothstep(p.y() - f.y());
  const double tz = smoothstep(p.z() - f.z());
  double acc = 0.0;
  for (int dz = 0; dz <= 1; ++dz)
    for (int dy = 0; dy <= 1; ++dy)
      for (int dx = 0; dx <= 1; ++dx) {
        const double w = (dx ? tx : 1 - tx) * (dy ? ty : 1 - ty) * (dz ? tz : 1 - tz);
        acc += w * lattice_value(seed, ix + dx, iy + dy, iz + dz);
      }
  return acc;
}

}  // namespace

Eigen::Vector3d TextureSpec::sample(const Eigen::Vector3d& p) const {
  switch (kind) {
    case Kind::kUniform:
      return color_a;
    case Kind::kChecker: {
      const Eigen::Vector3d q = p / scale;
      const int64_t parity = int64_t(std::floor(q.x())) + int64_t(std::floor(q.y())) +
                             int64_t(std::floor(q.z()));
      return (parity & 1) ? color_b : color_a;
    }
    case Kind::kNoise: {
      // two octaves of value noise
      const double n =
          0.65 * value_noise(p * scale, seed) + 0.35 * value_noise(p * (2.0 * scale), seed + 1);
      return color_a + (color_b - color_a) * n;
    }
  }
  return color_a;
}

namespace {

RayHit hit_box_room(const Primitive& prim, const Eigen::Vector3d& o, const Eigen::Vector3d& d) {
  RayHit h;
  double best_t = 1e300;
  int best_face = -1;
  for (int axis = 0; axis < 3; ++axis) {
    if (d[axis] == 0.0) continue;
    const double bound = d[axis] > 0 ? prim.box_max[axis] : prim.box_min[axis];
    const double t = (bound - o[axis]) / d[axis];
    if (t > 1e-9 && t < best_t) {
      // inside view: the exit face is the nearest positive boundary whose
      // crossing point stays within the box cross-section
      const Eigen::Vector3d p = o + t * d;
      bool inside = true;
      for (int k = 0; k < 3; ++k) {
        if (k == axis) continue;
        if (p[k] < prim.box_min[k] - 1e-9 || p[k] > prim.box_max[k] + 1e-9) inside = false;
      }
      if (inside) {
        best_t = t;
        best_face = axis * 2 + (d[axis] > 0 ? 1 : 0);
      }
    }
  }
  if (best_face < 0) return h;
  h.hit = true;
  h.t = best_t;
  h.position = o + best_t * d;
  h.face = best_face;
  Eigen::Vector3d n = Eigen::Vector3d::Zero();
  n[best_face / 2] = (best_face % 2) ? -1.0 : 1.0;  // inward
  h.normal = n;
  return h;
}

RayHit hit_sphere(const Primitive& prim, const Eigen::Vector3d& o, const Eigen::Vector3d& d,
                  bool room) {
  RayHit h;
  const Eigen::Vector3d oc = o - prim.center;
  const double b = oc.dot(d);
  const double c = oc.squaredNorm() - prim.radius * prim.radius;
  const double disc = b * b - c;
  if (disc < 0) return h;
  const double sq = std::sqrt(disc);
  double t = room ? (-b + sq) : (-b - sq);
  if (t <= 1e-9) {
    if (room) return h;
    t = -b + sq;  // camera inside a solid sphere: take the far surface
    if (t <= 1e-9) return h;
  }
  h.hit = true;
  h.t = t;
  h.position = o + t * d;
  Eigen::Vector3d n = (h.position - prim.center).normalized();
  if (n.dot(d) > 0) n = -n;
  h.normal = n;
  return h;
}

RayHit hit_quad(const Primitive& prim, const Eigen::Vector3d& o, const Eigen::Vector3d& d) {
  RayHit h;
  const int a = prim.quad_axis;
  if (d[a] == 0.0) return h;
  const double t = (prim.quad_value - o[a]) / d[a];
  if (t <= 1e-9) return h;
  const Eigen::Vector3d p = o + t * d;
  const int u = (a + 1) % 3, v = (a + 2) % 3;
  if (p[u] < prim.quad_lo[0] || p[u] > prim.quad_hi[0] || p[v] < prim.quad_lo[1] ||
      p[v] > prim.quad_hi[1])
    return h;
  h.hit = true;
  h.t = t;
  h.position = p;
  Eigen::Vector3d n = Eigen::Vector3d::Zero();
  n[a] = d[a] > 0 ? -1.0 : 1.0;
  h.normal = n;
  return h;
}

}  // namespace

RayHit trace(const SynthSpec& spec, const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) {
  RayHit best;
  best.t = 1e300;
  for (int i = 0; i < int(spec.primitives.size()); ++i) {
    const auto& prim = spec.primitives[i];
    RayHit h;
    switch (prim.kind) {
      case Primitive::Kind::kBoxRoom: h = hit_box_room(prim, origin, dir); break;
      case Primitive::Kind::kSphere: h = hit_sphere(prim, origin, dir, false); break;
      case Primitive::Kind::kSphereRoom: h = hit_sphere(prim, origin, dir, true); break;
      case Primitive::Kind::kQuad: h = hit_quad(prim, origin, dir); break;
    }
    if (h.hit && h.t < best.t) {
      best = h;
      best.primitive = i;
    }
  }
  if (best.primitive < 0) best.hit = false;
  return best;
}

TracedView trace_view(const SynthSpec& spec, const ErpCamera& cam) {
  TracedView out;
  out.image = Image(cam.width, cam.height, 3);
  out.depth = Image(cam.width, cam.height, 1);
  out.hit = Mask(cam.width, cam.height);
  parallel_for(cam.height, 0, [&](int y) {
    for (int x = 0; x < cam.width; ++x) {
      const Eigen::Vector3d dir = ray_at(x + 0.5, y + 0.5, cam);
      const RayHit h = trace(spec, cam.center, dir);
      if (!h.hit) continue;
      Eigen::Vector3d c = spec.primitives[h.primitive].texture.sample(h.position);
      if (spec.lambertian) {
        const double shade =
            spec.ambient + (1.0 - spec.ambient) * std::max(0.0, h.normal.dot(-spec.light_dir));
        c *= shade;
      }
      for (int k = 0; k < 3; ++k) out.image.at(y, x, k) = std::clamp(c[k], 0.0, 1.0);
      out.depth.at(y, x) = h.t;
      out.hit.at(y, x) = 1;
    }
  });
  return out;
}

Mask primitive_mask(const SynthSpec& spec, const ErpCamera& cam, int primitive, int face) {
  Mask m(cam.width, cam.height);
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      const RayHit h = trace(spec, cam.center, ray_at(x + 0.5, y + 0.5, cam));
      if (h.hit && h.primitive == primitive && (face < 0 || h.face == face)) m.at(y, x) = 1;
    }
  return m;
}

std::vector<PosedView> make_cameras(const SynthSpec& spec) {
  std::vector<PosedView> views;
  std::mt19937_64 rng(splitmix64(spec.seed ^ 0xca11ab1eull));
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int i = 0; i < spec.camera_count; ++i) {
    const double ang = 2.0 * kPi * i / spec.camera_count;
    Eigen::Vector3d pos = spec.ring_center;
    pos.x() += spec.ring_radius * std::cos(ang);
    pos.z() += spec.ring_radius * std::sin(ang);
    pos.y() += spec.height_jitter * uni(rng);
    PosedView pv;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "view_%03d", i);
    pv.name = buf;
    pv.camera = ErpCamera(Eigen::Matrix3d::Identity(), pos, spec.width, spec.height, spec.lat_band);
    views.push_back(pv);
  }
  return views;
}

SynthDataset synth_generate(const SynthSpec& spec) {
  if (spec.primitives.empty()) throw std::invalid_argument("synth_generate: no primitives");
  SynthDataset data;
  const auto cams = make_cameras(spec);
  for (const auto& pv : cams) {
    // camera must be in free space: a forward trace must not start inside
    // a solid primitive (its own position hit at t ~ 0) and closed rooms
    // must contain it
    for (const auto& prim : spec.primitives) {
      if (prim.kind == Primitive::Kind::kBoxRoom) {
        if ((pv.camera.center.array() < prim.box_min.array()).any() ||
            (pv.camera.center.array() > prim.box_max.array()).any())
          throw std::invalid_argument("synth_generate: camera outside the room box");
      } else if (prim.kind == Primitive::Kind::kSphereRoom) {
        if ((pv.camera.center - prim.center).norm() >= prim.radius)
          throw std::invalid_argument("synth_generate: camera outside the room sphere");
      } else if (prim.kind == Primitive::Kind::kSphere) {
        if ((pv.camera.center - prim.center).norm() <= prim.radius)
          throw std::invalid_argument("synth_generate: camera inside a solid sphere");
      }
    }
    SynthView v;
    v.name = pv.name;
    v.camera = pv.camera;
    TracedView tv = trace_view(spec, pv.camera);
    v.image = std::move(tv.image);
    v.depth = std::move(tv.depth);
    data.views.push_back(std::move(v));
  }

  std::mt19937_64 rng(splitmix64(spec.seed ^ 0x9017c10dull));
  std::uniform_int_distribution<int> pick_view(0, int(data.views.size()) - 1);
  std::uniform_real_distribution<double> upix(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, 1.0);
  data.points.positions.reserve(spec.point_count);
  data.points.colors.reserve(spec.point_count);
  int guard = 0;
  while (int(data.points.positions.size()) < spec.point_count && guard < spec.point_count * 20) {
    ++guard;
    const auto& v = data.views[pick_view(rng)];
    const double u = upix(rng) * v.camera.width;
    const double w = upix(rng) * v.camera.height;
    const RayHit h = trace(spec, v.camera.center, ray_at(u, w, v.camera));
    if (!h.hit) continue;
    Eigen::Vector3d p = h.position;
    if (spec.point_noise > 0)
      p += spec.point_noise * Eigen::Vector3d(jitter(rng), jitter(rng), jitter(rng));
    data.points.positions.push_back(p);
    data.points.colors.push_back(spec.primitives[h.primitive].texture.sample(h.position));
  }
  return data;
}

void write_dataset(const SynthDataset& data, const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::vector<PosedView> poses;
  for (const auto& v : data.views) {
    write_png(dir + "/" + v.name + ".rgb.png", v.image);
    write_pfm(dir + "/" + v.name + ".depth.pfm", v.depth);
    poses.push_back({v.name + ".rgb.png", v.camera});
  }
  save_poses(dir + "/poses.txt", poses);
  save_point_cloud(dir + "/points.ply", data.points);
}

SynthSpec SynthSpec::preset(const std::string& name) {
  SynthSpec spec;
  spec.name = name;
  if (name == "box_room") {
    Primitive room;
    room.kind = Primitive::Kind::kBoxRoom;
    room.box_min = {-2.0, -1.5, -2.5};
    room.box_max = {2.0, 1.5, 2.5};
    room.texture.kind = TextureSpec::Kind::kChecker;
    room.texture.scale = 0.55;
    room.texture.color_a = {0.85, 0.55, 0.25};
    room.texture.color_b = {0.2, 0.35, 0.6};
    spec.primitives.push_back(room);
    Primitive ball;
    ball.kind = Primitive::Kind::kSphere;
    ball.center = {0.9, 0.5, -1.1};
    ball.radius = 0.45;
    ball.texture.kind = TextureSpec::Kind::kNoise;
    ball.texture.scale = 2.5;
    ball.texture.color_a = {0.85, 0.8, 0.3};
    ball.texture.color_b = {0.35, 0.15, 0.5};
    spec.primitives.push_back(ball);
    spec.ring_radius = 0.6;
    spec.height_jitter = 0.3;
    spec.camera_count = 30;
  } else if (name == "sphere_room") {
    Primitive room;
    room.kind = Primitive::Kind::kSphereRoom;
    room.center = {0, 0, 0};
    room.radius = 4.0;
    room.texture.kind = TextureSpec::Kind::kNoise;
    room.texture.scale = 0.8;
    room.texture.color_a = {0.75, 0.65, 0.4};
    room.texture.color_b = {0.25, 0.3, 0.55};
    spec.primitives.push_back(room);
    spec.ring_radius = 0.8;
    spec.height_jitter = 0.3;
    spec.camera_count = 8;
    spec.point_count = 3000;
  } else if (name == "plane_wall") {
    Primitive room;
    room.kind = Primitive::Kind::kBoxRoom;
    room.box_min = {-2.0, -1.5, -2.5};
    room.box_max = {2.0, 1.5, 2.5};
    room.texture.kind = TextureSpec::Kind::kUniform;
    room.texture.color_a = {0.45, 0.45, 0.5};
    spec.primitives.push_back(room);
    Primitive wall;  // high-frequency textured feature wall just inside +z
    wall.kind = Primitive::Kind::kQuad;
    wall.quad_axis = 2;
    wall.quad_value = 2.45;
    wall.quad_lo = {-2.01, -1.51};  // full (x, y) cross-section of the room
    wall.quad_hi = {2.01, 1.51};
    wall.texture.kind = TextureSpec::Kind::kNoise;
    wall.texture.scale = 4.0;
    wall.texture.color_a = {0.95, 0.9, 0.75};
    wall.texture.color_b = {0.1, 0.15, 0.3};
    spec.primitives.push_back(wall);
    spec.ring_radius = 0.5;
    spec.height_jitter = 0.25;
    spec.camera_count = 12;
  } else {
    throw std::invalid_argument("SynthSpec::preset: unknown preset " + name);
  }
  return spec;
}

namespace {

Eigen::Vector3d vec3_of(const nlohmann::json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

TextureSpec texture_of(const nlohmann::json& j) {
  TextureSpec t;
  const std::string kind = j.value("kind", "uniform");
  if (kind == "uniform")
    t.kind = TextureSpec::Kind::kUniform;
  else if (kind == "checker")
    t.kind = TextureSpec::Kind::kChecker;
  else if (kind == "noise")
    t.kind = TextureSpec::Kind::kNoise;
  else
    throw std::invalid_argument("unknown texture kind " + kind);
  if (j.contains("color_a")) t.color_a = vec3_of(j["color_a"]);
  if (j.contains("color_b")) t.color_b = vec3_of(j["color_b"]);
  t.scale = j.value("scale", t.scale);
  t.seed = j.value("seed", t.seed);
  return t;
}

}  // namespace

SynthSpec SynthSpec::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("SynthSpec: cannot open " + path);
  nlohmann::json j;
  in >> j;
  SynthSpec spec = j.contains("preset") ? preset(j["preset"].get<std::string>()) : SynthSpec{};
  spec.name = j.value("name", spec.name);
  spec.width = j.value("width", spec.width);
  spec.height = j.value("height", spec.height);
  spec.seed = j.value("seed", spec.seed);
  spec.camera_count = j.value("camera_count", spec.camera_count);
  spec.ring_radius = j.value("ring_radius", spec.ring_radius);
  spec.height_jitter = j.value("height_jitter", spec.height_jitter);
  spec.point_count = j.value("point_count", spec.point_count);
  spec.point_noise = j.value("point_noise", spec.point_noise);
  spec.lambertian = j.value("lambertian", spec.lambertian);
  spec.ambient = j.value("ambient", spec.ambient);
  if (j.contains("lat_band_deg")) {
    spec.lat_band = LatBand{j["lat_band_deg"].at(0).get<double>() * kPi / 180.0,
                            j["lat_band_deg"].at(1).get<double>() * kPi / 180.0};
  }
  if (j.contains("primitives")) {
    spec.primitives.clear();
    for (const auto& pj : j["primitives"]) {
      Primitive p;
      const std::string kind = pj.at("type").get<std::string>();
      if (kind == "box_room") {
        p.kind = Primitive::Kind::kBoxRoom;
        if (pj.contains("min")) p.box_min = vec3_of(pj["min"]);
        if (pj.contains("max")) p.box_max = vec3_of(pj["max"]);
      } else if (kind == "sphere" || kind == "sphere_room") {
        p.kind = kind == "sphere" ? Primitive::Kind::kSphere : Primitive::Kind::kSphereRoom;
        if (pj.contains("center")) p.center = vec3_of(pj["center"]);
        p.radius = pj.value("radius", p.radius);
      } else if (kind == "quad") {
        p.kind = Primitive::Kind::kQuad;
        p.quad_axis = pj.value("axis", p.quad_axis);
        p.quad_value = pj.value("value", p.quad_value);
        if (pj.contains("lo")) p.quad_lo = {pj["lo"].at(0).get<double>(), pj["lo"].at(1).get<double>()};
        if (pj.contains("hi")) p.quad_hi = {pj["hi"].at(0).get<double>(), pj["hi"].at(1).get<double>()};
      } else {
        throw std::invalid_argument("unknown primitive type " + kind);
      }
      if (pj.contains("texture")) p.texture = texture_of(pj["texture"]);
      spec.primitives.push_back(p);
    }
  }
  if (spec.primitives.empty()) spec = preset("box_room");
  return spec;
}

}  // namespace panogs
