#pragma once

#include <string>
#include <vector>

#include "panogs/camera.hpp"

namespace panogs {

struct PosedView {
  std::string name;  // image file name this pose belongs to
  ErpCamera camera;
};

/// Pose file: one whitespace-separated record per line, '#' starts a comment.
///   name W H qw qx qy qz cx cy cz [lat_min_deg lat_max_deg]
/// The quaternion is the world->camera rotation, the center is the camera
/// origin in world coordinates, and the optional band is in degrees.
std::vector<PosedView> load_poses(const std::string& path);
void save_poses(const std::string& path, const std::vector<PosedView>& views);

}  // namespace panogs
