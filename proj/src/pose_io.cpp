#include "panogs/pose_io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace panogs {

std::vector<PosedView> load_poses(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_poses: cannot open " + path);
  std::vector<PosedView> views;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    PosedView pv;
    int w = 0, h = 0;
    double qw, qx, qy, qz, cx, cy, cz;
    if (!(ss >> pv.name)) continue;  // blank line
    if (!(ss >> w >> h >> qw >> qx >> qy >> qz >> cx >> cy >> cz))
      throw std::runtime_error("load_poses: malformed record at line " + std::to_string(lineno));
    Eigen::Quaterniond q(qw, qx, qy, qz);
    if (q.norm() <= 0.0)
      throw std::runtime_error("load_poses: zero quaternion at line " + std::to_string(lineno));
    q.normalize();
    std::optional<LatBand> band;
    double lo_deg, hi_deg;
    if (ss >> lo_deg >> hi_deg)
      band = LatBand{lo_deg * kPi / 180.0, hi_deg * kPi / 180.0};
    pv.camera = ErpCamera(q.toRotationMatrix(), Eigen::Vector3d(cx, cy, cz), w, h, band);
    views.push_back(std::move(pv));
  }
  return views;
}

void save_poses(const std::string& path, const std::vector<PosedView>& views) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_poses: cannot open " + path);
  out << "# name W H qw qx qy qz cx cy cz [lat_min_deg lat_max_deg]\n";
  out << std::setprecision(17);
  for (const auto& pv : views) {
    const Eigen::Quaterniond q(pv.camera.rotation);
    out << pv.name << ' ' << pv.camera.width << ' ' << pv.camera.height << ' ' << q.w() << ' '
        << q.x() << ' ' << q.y() << ' ' << q.z() << ' ' << pv.camera.center.x() << ' '
        << pv.camera.center.y() << ' ' << pv.camera.center.z();
    if (pv.camera.lat_band)
      out << ' ' << pv.camera.lat_band->lat_min * 180.0 / kPi << ' '
          << pv.camera.lat_band->lat_max * 180.0 / kPi;
    out << '\n';
  }
}

}  // namespace panogs
