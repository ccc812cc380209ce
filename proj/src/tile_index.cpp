#include <algorithm>
#include <cmath>

#include "panogs/renderer.hpp"

namespace panogs {

namespace {

struct PixelSpan {
  int lo, hi;  // inclusive
};

// Integer pixel range whose centers can fall inside [a, b] (continuous pixel
// coordinates), widened by one pixel against rounding.
PixelSpan span_from_continuous(double a, double b, int limit) {
  int lo = int(std::floor(a - 0.5)) - 1;
  int hi = int(std::ceil(b - 0.5)) + 1;
  lo = std::max(lo, 0);
  hi = std::min(hi, limit - 1);
  return {lo, hi};
}

}  // namespace

TileIndex build_tile_index(const GaussianScene& scene, const ErpCamera& cam, int tile_size,
                           double cull_sigma) {
  TileIndex index;
  index.tile_size = tile_size;
  index.tiles_x = (cam.width + tile_size - 1) / tile_size;
  index.tiles_y = (cam.height + tile_size - 1) / tile_size;
  index.tiles.assign(size_t(index.tiles_x) * index.tiles_y, {});

  const int W = cam.width, H = cam.height;
  const double u_scale = W / (2.0 * kPi);

  for (int id = 0; id < int(scene.size()); ++id) {
    const auto& g = scene.gaussians[id];
    if (g.opacity() < kAlphaMin) continue;
    const Eigen::Vector3d x_cam = cam.to_camera(g.mean);
    const double dist = x_cam.norm();
    const double radius = cull_sigma * g.inflated_scale().maxCoeff();
    const CapBounds cb = cap_bounds(x_cam, dist, radius);

    PixelSpan rows{0, H - 1};
    std::vector<PixelSpan> cols;
    if (cb.full_sphere || cb.lon_full) {
      cols.push_back({0, W - 1});
    } else {
      // angles -> continuous pixel coordinates; splits when the interval
      // wraps across the +-pi seam.
      auto u_of = [&](double lon) { return u_scale * lon + W / 2.0; };
      if (cb.lon_lo <= cb.lon_hi) {
        cols.push_back(span_from_continuous(u_of(cb.lon_lo), u_of(cb.lon_hi), W));
      } else {
        cols.push_back(span_from_continuous(u_of(cb.lon_lo), u_of(kPi), W));
        cols.push_back(span_from_continuous(u_of(-kPi), u_of(cb.lon_hi), W));
      }
      if (cols.size() == 2 && (cols[0].lo <= cols[1].hi + 1)) {
        // widened spans touch: merge to keep per-tile lists duplicate-free
        cols = {{0, W - 1}};
      }
    }
    if (!cb.full_sphere) {
      const double va = -double(H) / kPi * cb.lat_hi + H / 2.0;
      const double vb = -double(H) / kPi * cb.lat_lo + H / 2.0;
      rows = span_from_continuous(va, vb, H);
    }
    if (rows.lo > rows.hi) continue;

    const int ty_lo = rows.lo / tile_size, ty_hi = rows.hi / tile_size;
    for (const auto& span : cols) {
      if (span.lo > span.hi) continue;
      const int tx_lo = span.lo / tile_size, tx_hi = span.hi / tile_size;
      for (int ty = ty_lo; ty <= ty_hi; ++ty)
        for (int tx = tx_lo; tx <= tx_hi; ++tx)
          index.tiles[size_t(ty) * index.tiles_x + tx].push_back({id, dist});
    }
  }

  for (auto& tile : index.tiles)
    std::sort(tile.begin(), tile.end(), [](const TileEntry& a, const TileEntry& b) {
      return a.key != b.key ? a.key < b.key : a.id < b.id;
    });
  return index;
}

}  // namespace panogs
