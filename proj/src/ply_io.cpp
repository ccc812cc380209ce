#include "panogs/ply_io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace panogs {

namespace {

enum class PlyType { kChar, kUChar, kShort, kUShort, kInt, kUInt, kFloat, kDouble };

size_t type_size(PlyType t) {
  switch (t) {
    case PlyType::kChar:
    case PlyType::kUChar:
      return 1;
    case PlyType::kShort:
    case PlyType::kUShort:
      return 2;
    case PlyType::kInt:
    case PlyType::kUInt:
    case PlyType::kFloat:
      return 4;
    case PlyType::kDouble:
      return 8;
  }
  return 0;
}

PlyType parse_type(const std::string& s) {
  if (s == "char" || s == "int8") return PlyType::kChar;
  if (s == "uchar" || s == "uint8") return PlyType::kUChar;
  if (s == "short" || s == "int16") return PlyType::kShort;
  if (s == "ushort" || s == "uint16") return PlyType::kUShort;
  if (s == "int" || s == "int32") return PlyType::kInt;
  if (s == "uint" || s == "uint32") return PlyType::kUInt;
  if (s == "float" || s == "float32") return PlyType::kFloat;
  if (s == "double" || s == "float64") return PlyType::kDouble;
  throw std::runtime_error("ply: unknown type " + s);
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::kFloat;
  bool is_list = false;
  PlyType count_type = PlyType::kUChar;
};

struct PlyElement {
  std::string name;
  size_t count = 0;
  std::vector<PlyProperty> properties;
};

struct PlyHeader {
  bool binary = false;
  std::vector<PlyElement> elements;
};

PlyHeader read_header(std::istream& in, const std::string& path) {
  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw std::runtime_error("ply: missing magic in " + path);
  PlyHeader hdr;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string tok;
    ss >> tok;
    if (tok == "comment" || tok == "obj_info") continue;
    if (tok == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt == "ascii")
        hdr.binary = false;
      else if (fmt == "binary_little_endian")
        hdr.binary = true;
      else
        throw std::runtime_error("ply: unsupported format " + fmt);
    } else if (tok == "element") {
      PlyElement el;
      ss >> el.name >> el.count;
      hdr.elements.push_back(el);
    } else if (tok == "property") {
      if (hdr.elements.empty()) throw std::runtime_error("ply: property before element");
      PlyProperty p;
      std::string t;
      ss >> t;
      if (t == "list") {
        std::string ct, vt;
        ss >> ct >> vt >> p.name;
        p.is_list = true;
        p.count_type = parse_type(ct);
        p.type = parse_type(vt);
      } else {
        ss >> p.name;
        p.type = parse_type(t);
      }
      hdr.elements.back().properties.push_back(p);
    } else if (tok == "end_header") {
      return hdr;
    }
  }
  throw std::runtime_error("ply: truncated header in " + path);
}

double read_binary_scalar(std::istream& in, PlyType t) {
  char buf[8];
  in.read(buf, std::streamsize(type_size(t)));
  switch (t) {
    case PlyType::kChar: return double(*reinterpret_cast<int8_t*>(buf));
    case PlyType::kUChar: return double(*reinterpret_cast<uint8_t*>(buf));
    case PlyType::kShort: return double(*reinterpret_cast<int16_t*>(buf));
    case PlyType::kUShort: return double(*reinterpret_cast<uint16_t*>(buf));
    case PlyType::kInt: return double(*reinterpret_cast<int32_t*>(buf));
    case PlyType::kUInt: return double(*reinterpret_cast<uint32_t*>(buf));
    case PlyType::kFloat: { float f; std::memcpy(&f, buf, 4); return double(f); }
    case PlyType::kDouble: { double d; std::memcpy(&d, buf, 8); return d; }
  }
  return 0.0;
}

/// Reads one element into column vectors keyed by property name.
std::map<std::string, std::vector<double>> read_element(std::istream& in, const PlyHeader& hdr,
                                                        const PlyElement& el) {
  std::map<std::string, std::vector<double>> cols;
  for (const auto& p : el.properties)
    if (!p.is_list) cols[p.name].reserve(el.count);
  for (size_t i = 0; i < el.count; ++i) {
    for (const auto& p : el.properties) {
      if (p.is_list) {
        size_t n;
        if (hdr.binary) {
          n = size_t(read_binary_scalar(in, p.count_type));
          in.ignore(std::streamsize(n * type_size(p.type)));
        } else {
          double cnt;
          in >> cnt;
          n = size_t(cnt);
          double dummy;
          for (size_t k = 0; k < n; ++k) in >> dummy;
        }
      } else {
        double v;
        if (hdr.binary)
          v = read_binary_scalar(in, p.type);
        else
          in >> v;
        cols[p.name].push_back(v);
      }
    }
    if (!in) throw std::runtime_error("ply: truncated element data");
  }
  return cols;
}

void skip_element(std::istream& in, const PlyHeader& hdr, const PlyElement& el) {
  read_element(in, hdr, el);  // generic path; element sizes are small here
}

void write_float(std::ostream& out, float v) { out.write(reinterpret_cast<const char*>(&v), 4); }

}  // namespace

PointCloud load_point_cloud(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_point_cloud: cannot open " + path);
  const PlyHeader hdr = read_header(in, path);
  PointCloud pc;
  for (const auto& el : hdr.elements) {
    if (el.name != "vertex") {
      skip_element(in, hdr, el);
      continue;
    }
    auto cols = read_element(in, hdr, el);
    if (!cols.count("x") || !cols.count("y") || !cols.count("z"))
      throw std::runtime_error("load_point_cloud: vertex element lacks x/y/z");
    const auto& xs = cols["x"];
    pc.positions.resize(xs.size());
    for (size_t i = 0; i < xs.size(); ++i)
      pc.positions[i] = {cols["x"][i], cols["y"][i], cols["z"][i]};
    if (cols.count("red") && cols.count("green") && cols.count("blue")) {
      bool uchar_color = false;
      for (const auto& p : el.properties)
        if (p.name == "red") uchar_color = type_size(p.type) == 1;
      const double s = uchar_color ? 1.0 / 255.0 : 1.0;
      pc.colors.resize(xs.size());
      for (size_t i = 0; i < xs.size(); ++i)
        pc.colors[i] = {cols["red"][i] * s, cols["green"][i] * s, cols["blue"][i] * s};
    }
  }
  if (pc.positions.empty()) throw std::runtime_error("load_point_cloud: no vertices in " + path);
  return pc;
}

void save_point_cloud(const std::string& path, const PointCloud& pc, bool binary) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_point_cloud: cannot open " + path);
  out.precision(9);
  out << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n"
      << "element vertex " << pc.positions.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n";
  if (pc.has_colors())
    out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "end_header\n";
  for (size_t i = 0; i < pc.positions.size(); ++i) {
    if (binary) {
      for (int k = 0; k < 3; ++k) write_float(out, float(pc.positions[i][k]));
      if (pc.has_colors())
        for (int k = 0; k < 3; ++k) {
          const double v = std::max(0.0, std::min(1.0, pc.colors[i][k]));
          const uint8_t b = uint8_t(std::lround(v * 255.0));
          out.write(reinterpret_cast<const char*>(&b), 1);
        }
    } else {
      out << pc.positions[i].x() << ' ' << pc.positions[i].y() << ' ' << pc.positions[i].z();
      if (pc.has_colors())
        for (int k = 0; k < 3; ++k)
          out << ' ' << int(std::lround(std::max(0.0, std::min(1.0, pc.colors[i][k])) * 255.0));
      out << '\n';
    }
  }
}

void save_scene_ply(const std::string& path, const GaussianScene& scene) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_scene_ply: cannot open " + path);
  const int n_coeffs = sh_coeff_count(scene.sh_degree);
  const int n_rest = (n_coeffs - 1) * 3;
  out << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << scene.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "property float nx\nproperty float ny\nproperty float nz\n";
  for (int i = 0; i < 3; ++i) out << "property float f_dc_" << i << "\n";
  for (int i = 0; i < n_rest; ++i) out << "property float f_rest_" << i << "\n";
  out << "property float opacity\n";
  for (int i = 0; i < 3; ++i) out << "property float scale_" << i << "\n";
  for (int i = 0; i < 4; ++i) out << "property float rot_" << i << "\n";
  out << "property float filter_radius\n";
  out << "end_header\n";
  for (const auto& g : scene.gaussians) {
    for (int k = 0; k < 3; ++k) write_float(out, float(g.mean[k]));
    for (int k = 0; k < 3; ++k) write_float(out, 0.0f);  // nx ny nz, conventional padding
    for (int k = 0; k < 3; ++k) write_float(out, float(g.sh[0][k]));
    // f_rest is stored coefficient-major per channel, matching splat tools.
    for (int c = 0; c < 3; ++c)
      for (int i = 1; i < n_coeffs; ++i) write_float(out, float(g.sh[i][c]));
    write_float(out, float(g.opacity_logit));
    for (int k = 0; k < 3; ++k) write_float(out, float(g.log_scale[k]));
    for (int k = 0; k < 4; ++k) write_float(out, float(g.quat[k]));
    write_float(out, float(g.filter_radius));
  }
}

GaussianScene load_scene_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_scene_ply: cannot open " + path);
  const PlyHeader hdr = read_header(in, path);
  GaussianScene scene;
  for (const auto& el : hdr.elements) {
    if (el.name != "vertex") {
      skip_element(in, hdr, el);
      continue;
    }
    auto cols = read_element(in, hdr, el);
    int n_rest = 0;
    while (cols.count("f_rest_" + std::to_string(n_rest))) ++n_rest;
    const int n_coeffs = n_rest / 3 + 1;
    int degree = 0;
    while (sh_coeff_count(degree) < n_coeffs) ++degree;
    if (sh_coeff_count(degree) != n_coeffs)
      throw std::runtime_error("load_scene_ply: f_rest count is not a valid SH block");
    scene.sh_degree = degree;
    const size_t n = cols.at("x").size();
    scene.gaussians.resize(n);
    for (size_t i = 0; i < n; ++i) {
      auto& g = scene.gaussians[i];
      g.mean = {cols.at("x")[i], cols.at("y")[i], cols.at("z")[i]};
      g.sh.assign(n_coeffs, Eigen::Vector3d::Zero());
      for (int k = 0; k < 3; ++k) g.sh[0][k] = cols.at("f_dc_" + std::to_string(k))[i];
      for (int c = 0; c < 3; ++c)
        for (int j = 1; j < n_coeffs; ++j)
          g.sh[j][c] = cols.at("f_rest_" + std::to_string(c * (n_coeffs - 1) + j - 1))[i];
      g.opacity_logit = cols.at("opacity")[i];
      for (int k = 0; k < 3; ++k) g.log_scale[k] = cols.at("scale_" + std::to_string(k))[i];
      for (int k = 0; k < 4; ++k) g.quat[k] = cols.at("rot_" + std::to_string(k))[i];
      g.normalize_quat();
      g.filter_radius = cols.count("filter_radius") ? cols.at("filter_radius")[i] : 0.0;
    }
  }
  if (scene.gaussians.empty()) throw std::runtime_error("load_scene_ply: no vertices in " + path);
  return scene;
}

}  // namespace panogs
