#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <random>

#include "panogs/metrics.hpp"
#include "panogs/rotation_eval.hpp"
#include "panogs/image_io.hpp"
#include "panogs/synth.hpp"

using namespace panogs;
using Eigen::Vector3d;

namespace {

ErpCamera identity_cam(int w, int h, const Vector3d& c = Vector3d::Zero()) {
  return ErpCamera(Eigen::Matrix3d::Identity(), c, w, h);
}

struct DepthSet {
  std::vector<Image> depths;
  std::vector<Mask> valid;
  std::vector<ErpCamera> cams;
};

DepthSet analytic_depths(const SynthSpec& spec) {
  DepthSet ds;
  for (const auto& pv : make_cameras(spec)) {
    const TracedView tv = trace_view(spec, pv.camera);
    ds.depths.push_back(tv.depth);
    ds.valid.push_back(depth_valid_mask(&tv.hit, pv.camera));
    ds.cams.push_back(pv.camera);
  }
  return ds;
}

}  // namespace

TEST_CASE("psnr: sentinel, uniform error, reference agreement") {
  Image a(16, 8, 3, 0.5);
  CHECK(psnr(a, a) == kPsnrMax);

  Image b = a;
  for (auto& v : b.data) v += 0.1;
  CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-9));

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image r1(16, 8, 3), r2(16, 8, 3);
  for (auto& v : r1.data) v = u(rng);
  for (auto& v : r2.data) v = u(rng);
  double mse = 0;
  for (size_t i = 0; i < r1.data.size(); ++i) {
    const double d = r1.data[i] - r2.data[i];
    mse += d * d;
  }
  mse /= double(r1.data.size());
  CHECK(psnr(r1, r2) == doctest::Approx(10.0 * std::log10(1.0 / mse)).epsilon(1e-9));
}

TEST_CASE("reproject: identity pair and plane oracle") {
  const ErpCamera cam_a = identity_cam(256, 128);
  const Eigen::Vector2d px(100.5, 40.5);
  const Reprojection same = reproject(px, 2.7, cam_a, cam_a);
  REQUIRE(same.valid);
  CHECK((same.pixel - px).norm() < 1e-9);
  CHECK(same.depth == doctest::Approx(2.7));

  // plane z = 4, second camera translated along z
  const ErpCamera cam_b = identity_cam(256, 128, Vector3d(0, 0, 1.5));
  for (int x : {140, 150, 170}) {
    for (int y : {50, 64, 70}) {
      const Vector3d dir = pixel_to_ray(x, y, cam_a);
      if (dir.z() < 0.3) continue;
      const double depth = 4.0 / dir.z();
      const Reprojection fwd =
          reproject(Eigen::Vector2d(x + 0.5, y + 0.5), depth, cam_a, cam_b);
      REQUIRE(fwd.valid);
      // independent route: intersect the same plane from camera b
      const Vector3d p = cam_a.center + depth * dir;
      const Vector3d db = (p - cam_b.center).normalized();
      const double tb = (4.0 - cam_b.center.z()) / db.z();
      const auto expect = project_point(cam_b.center + tb * db, cam_b);
      CHECK((fwd.pixel - expect).norm() < 1e-3);
      CHECK(fwd.depth == doctest::Approx(tb).epsilon(1e-9));
    }
  }

  // ERP sees the full sphere: a point behind both cameras still projects
  const Reprojection behind = reproject(Eigen::Vector2d(5.5, 60.5), 3.0, cam_a, cam_b);
  CHECK(behind.valid);
}

TEST_CASE("pair parsing") {
  const auto pairs = adjacent_pairs(4, 2);
  CHECK(pairs.size() == 10);  // ordered both directions
  CHECK(parse_pairs("adjacent:2", 4).size() == 10);
  CHECK(parse_pairs("all", 4).size() == 12);
  CHECK_THROWS_AS(parse_pairs("bogus", 4), std::invalid_argument);
}

TEST_CASE("synth: box room center depth and determinism") {
  SynthSpec spec = SynthSpec::preset("box_room");
  spec.camera_count = 1;
  spec.ring_radius = 0.0;
  spec.height_jitter = 0.0;
  spec.width = 128;
  spec.height = 64;
  const auto cams = make_cameras(spec);
  REQUIRE(cams.size() == 1);
  CHECK(cams[0].camera.center.norm() < 1e-12);
  const TracedView tv = trace_view(spec, cams[0].camera);
  // +z face of the 4 x 3 x 5 room seen straight ahead
  const Vector3d center_dir = ray_at(64.0, 32.0, cams[0].camera);
  const RayHit h = trace(spec, Vector3d::Zero(), center_dir);
  REQUIRE(h.hit);
  CHECK(h.t == doctest::Approx(2.5));
  CHECK(tv.hit.count() == size_t(128) * 64);  // closed room

  const TracedView tv2 = trace_view(spec, cams[0].camera);
  CHECK(tv.image.data == tv2.image.data);  // bit-exact reproducibility
}

TEST_CASE("synth: uniform sphere room depth matches the closed form") {
  SynthSpec spec = SynthSpec::preset("sphere_room");
  spec.camera_count = 1;
  spec.ring_radius = 0.5;
  spec.height_jitter = 0.0;
  spec.width = 64;
  spec.height = 32;
  const auto cams = make_cameras(spec);
  const Vector3d c = cams[0].camera.center;
  const TracedView tv = trace_view(spec, cams[0].camera);
  for (int y = 0; y < 32; y += 5)
    for (int x = 0; x < 64; x += 7) {
      const Vector3d d = ray_at(x + 0.5, y + 0.5, cams[0].camera);
      // |c + t d| = R
      const double b = c.dot(d);
      const double t = -b + std::sqrt(b * b - c.squaredNorm() + 16.0);
      CHECK(tv.depth.at(y, x) == doctest::Approx(t).epsilon(1e-9));
    }
}

TEST_CASE("synth rejects cameras outside the room") {
  SynthSpec spec = SynthSpec::preset("box_room");
  spec.ring_radius = 10.0;
  CHECK_THROWS_AS(synth_generate(spec), std::invalid_argument);
}

TEST_CASE("dre/cir: analytic ground truth is self-consistent") {
  SynthSpec spec = SynthSpec::preset("sphere_room");
  spec.width = 256;
  spec.height = 128;
  const DepthSet ds = analytic_depths(spec);
  const auto pairs = adjacent_pairs(int(ds.cams.size()), 2);
  const ConsistencyResult res = depth_consistency(ds.depths, ds.valid, ds.cams, pairs);
  REQUIRE(res.defined);
  CHECK(res.dre < 1e-4);
  CHECK(res.cir == doctest::Approx(100.0));

  // a view paired with itself is exactly consistent
  const ConsistencyResult self =
      depth_consistency(ds.depths, ds.valid, ds.cams, {{0, 0}});
  CHECK(self.dre == doctest::Approx(0.0));
  CHECK(self.cir == doctest::Approx(100.0));
}

TEST_CASE("dre/cir degrade monotonically under multiplicative noise") {
  SynthSpec spec = SynthSpec::preset("sphere_room");
  spec.width = 128;
  spec.height = 64;
  spec.camera_count = 5;
  const DepthSet clean = analytic_depths(spec);
  const auto pairs = adjacent_pairs(int(clean.cams.size()), 2);

  double prev_dre = -1.0, prev_cir = 101.0;
  for (double amp : {0.01, 0.05, 0.10}) {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<Image> noisy = clean.depths;
    for (auto& img : noisy)
      for (auto& v : img.data) v *= 1.0 + amp * u(rng);
    const ConsistencyResult res = depth_consistency(noisy, clean.valid, clean.cams, pairs);
    REQUIRE(res.defined);
    CHECK(res.dre > prev_dre);
    CHECK(res.cir < prev_cir);
    prev_dre = res.dre;
    prev_cir = res.cir;
  }
  CHECK(prev_dre > 1e-3);
  CHECK(prev_cir < 100.0);
}

TEST_CASE("dataset round trip through the filesystem") {
  SynthSpec spec = SynthSpec::preset("sphere_room");
  spec.width = 64;
  spec.height = 32;
  spec.camera_count = 2;
  spec.point_count = 200;
  const SynthDataset data = synth_generate(spec);
  REQUIRE(data.views.size() == 2);
  REQUIRE(data.points.positions.size() == 200);
  // every sampled point lies on the sphere surface
  for (const auto& p : data.points.positions)
    CHECK(p.norm() == doctest::Approx(4.0).epsilon(1e-9));

  const std::string dir = "/tmp/panogs_dataset_test";
  write_dataset(data, dir);
  const auto poses = load_poses(dir + "/poses.txt");
  CHECK(poses.size() == 2);
  const Image depth = read_pfm(dir + "/" + data.views[0].name + ".depth.pfm");
  CHECK(depth.width == 64);
  CHECK(std::abs(depth.at(16, 32) - data.views[0].depth.at(16, 32)) < 1e-5);
}

TEST_CASE("rotation_eval: theta 0 reproduces the standard numbers, seeded") {
  // tiny gaussian scene standing in for a trained model
  GaussianScene scene;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  for (int i = 0; i < 40; ++i) {
    Gaussian3D g;
    Vector3d dir(n(rng), n(rng), n(rng));
    dir.normalize();
    g.mean = dir * 3.0;
    g.log_scale = Vector3d::Constant(std::log(0.5));
    g.opacity_logit = inverse_sigmoid(0.9);
    g.sh[0] = rgb_to_sh_dc(Vector3d(0.5, 0.4, 0.6));
    scene.gaussians.push_back(g);
  }
  SynthSpec spec = SynthSpec::preset("sphere_room");
  spec.width = 64;
  spec.height = 32;
  spec.camera_count = 3;
  std::vector<ErpCamera> cams;
  for (const auto& pv : make_cameras(spec)) cams.push_back(pv.camera);
  RenderSettings rs;

  const auto rows = rotation_eval(scene, cams, {0.0, 60.0}, 42, &spec, rs);
  REQUIRE(rows.size() == 2);

  // unrotated reference computed directly
  double psnr_ref = 0.0;
  std::vector<Image> depths;
  std::vector<Mask> valids;
  for (const auto& cam : cams) {
    const RenderOutput out = render(scene, cam, rs);
    const TracedView gt = trace_view(spec, cam);
    const Mask m = depth_valid_mask(&gt.hit, cam);
    psnr_ref += psnr(out.rgb, gt.image, &m);
    depths.push_back(out.depth);
    valids.push_back(depth_valid_mask(&out.depth_valid, cam));
  }
  psnr_ref /= double(cams.size());
  CHECK(rows[0].psnr == doctest::Approx(psnr_ref).epsilon(1e-12));

  const auto rows2 = rotation_eval(scene, cams, {0.0, 60.0}, 42, &spec, rs);
  CHECK(rows2[1].psnr == rows[1].psnr);
  CHECK(rows2[1].dre == rows[1].dre);

  const auto rows3 = rotation_eval(scene, cams, {0.0, 60.0}, 43, &spec, rs);
  CHECK(rows3[1].psnr != rows[1].psnr);  // different seed, different rotations

  write_metrics_csv("/tmp/panogs_metrics_test.csv", "toy", rows);
  std::ifstream check("/tmp/panogs_metrics_test.csv");
  std::string header;
  std::getline(check, header);
  CHECK(header == "scene,theta,psnr,ssim,dre,cir,valid_px,lpips");
}
