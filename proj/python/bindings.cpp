#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "panogs/image_io.hpp"
#include "panogs/metrics.hpp"
#include "panogs/ply_io.hpp"
#include "panogs/pose_io.hpp"
#include "panogs/renderer.hpp"
#include "panogs/rotation_eval.hpp"
#include "panogs/ssim.hpp"
#include "panogs/synth.hpp"
#include "panogs/trainer.hpp"

namespace py = pybind11;
using namespace panogs;

namespace {

py::array_t<double> image_to_numpy(const Image& img) {
  if (img.channels == 1) {
    py::array_t<double> out({img.height, img.width});
    std::copy(img.data.begin(), img.data.end(), out.mutable_data());
    return out;
  }
  py::array_t<double> out({img.height, img.width, img.channels});
  std::copy(img.data.begin(), img.data.end(), out.mutable_data());
  return out;
}

Image numpy_to_image(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
  if (arr.ndim() == 2) {
    Image img(int(arr.shape(1)), int(arr.shape(0)), 1);
    std::copy(arr.data(), arr.data() + arr.size(), img.data.begin());
    return img;
  }
  if (arr.ndim() == 3) {
    Image img(int(arr.shape(1)), int(arr.shape(0)), int(arr.shape(2)));
    std::copy(arr.data(), arr.data() + arr.size(), img.data.begin());
    return img;
  }
  throw std::invalid_argument("expected a HxW or HxWxC array");
}

Mask numpy_to_mask(const py::array_t<bool, py::array::c_style | py::array::forcecast>& arr) {
  if (arr.ndim() != 2) throw std::invalid_argument("mask must be HxW");
  Mask m(int(arr.shape(1)), int(arr.shape(0)));
  for (ssize_t i = 0; i < arr.size(); ++i) m.data[size_t(i)] = arr.data()[i] ? 1 : 0;
  return m;
}

ErpCamera make_camera(double qw, double qx, double qy, double qz,
                      const Eigen::Vector3d& center, int width, int height,
                      std::optional<std::pair<double, double>> lat_band_deg) {
  Eigen::Quaterniond q(qw, qx, qy, qz);
  q.normalize();
  std::optional<LatBand> band;
  if (lat_band_deg)
    band = LatBand{lat_band_deg->first * kPi / 180.0, lat_band_deg->second * kPi / 180.0};
  return ErpCamera(q.toRotationMatrix(), center, width, height, band);
}

GaussianScene scene_from_arrays(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& means,
    const py::array_t<double, py::array::c_style | py::array::forcecast>& quats,
    const py::array_t<double, py::array::c_style | py::array::forcecast>& log_scales,
    const py::array_t<double, py::array::c_style | py::array::forcecast>& opacity_logits,
    const py::array_t<double, py::array::c_style | py::array::forcecast>& colors) {
  const ssize_t n = means.shape(0);
  if (quats.shape(0) != n || log_scales.shape(0) != n || opacity_logits.shape(0) != n ||
      colors.shape(0) != n)
    throw std::invalid_argument("scene arrays disagree on the gaussian count");
  GaussianScene scene;
  scene.gaussians.resize(size_t(n));
  auto m = means.unchecked<2>();
  auto q = quats.unchecked<2>();
  auto s = log_scales.unchecked<2>();
  auto o = opacity_logits.unchecked<1>();
  auto c = colors.unchecked<2>();
  for (ssize_t i = 0; i < n; ++i) {
    auto& g = scene.gaussians[size_t(i)];
    g.mean = {m(i, 0), m(i, 1), m(i, 2)};
    g.quat = {q(i, 0), q(i, 1), q(i, 2), q(i, 3)};
    g.normalize_quat();
    g.log_scale = {s(i, 0), s(i, 1), s(i, 2)};
    g.opacity_logit = o(i);
    g.sh[0] = rgb_to_sh_dc({c(i, 0), c(i, 1), c(i, 2)});
  }
  return scene;
}

py::dict render_py(const GaussianScene& scene, const ErpCamera& cam, int tile_size,
                   int sh_degree, int num_threads) {
  RenderSettings rs;
  rs.tile_size = tile_size;
  rs.sh_degree = sh_degree;
  rs.num_threads = num_threads;
  const RenderOutput out = render(scene, cam, rs);
  py::dict d;
  d["rgb"] = image_to_numpy(out.rgb);
  d["depth"] = image_to_numpy(out.depth);
  d["depth_expected"] = image_to_numpy(out.depth_expected);
  d["normal"] = image_to_numpy(out.normal);
  d["alpha"] = image_to_numpy(out.alpha);
  py::array_t<bool> dv({out.alpha.height, out.alpha.width});
  for (size_t i = 0; i < out.depth_valid.data.size(); ++i)
    dv.mutable_data()[i] = out.depth_valid.data[i] != 0;
  d["depth_valid"] = dv;
  return d;
}

py::tuple consistency_py(const std::vector<py::array_t<double>>& depths,
                         const std::vector<py::array_t<bool>>& valids,
                         const std::vector<ErpCamera>& cams, const std::string& pair_spec) {
  std::vector<Image> imgs;
  std::vector<Mask> masks;
  for (const auto& d : depths) imgs.push_back(numpy_to_image(d));
  for (const auto& v : valids) masks.push_back(numpy_to_mask(v));
  const auto pairs = parse_pairs(pair_spec, int(cams.size()));
  const ConsistencyResult res = depth_consistency(imgs, masks, cams, pairs);
  return py::make_tuple(res.dre, res.cir, res.valid_px);
}

}  // namespace

PYBIND11_MODULE(_panogs, m) {
  m.doc() = "spherical ray-space gaussian rendering for equirectangular panoramas";

  py::class_<ErpCamera>(m, "Camera")
      .def(py::init(&make_camera), py::arg("qw"), py::arg("qx"), py::arg("qy"), py::arg("qz"),
           py::arg("center"), py::arg("width"), py::arg("height"),
           py::arg("lat_band_deg") = std::nullopt)
      .def_readonly("width", &ErpCamera::width)
      .def_readonly("height", &ErpCamera::height)
      .def_property_readonly("center", [](const ErpCamera& c) { return c.center; })
      .def_property_readonly("rotation", [](const ErpCamera& c) { return c.rotation; })
      .def("project",
           [](const ErpCamera& c, const Eigen::Vector3d& x) {
             const auto uv = project_point(x, c);
             return py::make_tuple(uv.x(), uv.y());
           },
           py::arg("point"), "continuous pixel coordinates of a world point")
      .def("pixel_ray",
           [](const ErpCamera& c, int u, int v) { return pixel_to_ray(u, v, c); },
           py::arg("u"), py::arg("v"), "world unit direction through the pixel center");

  py::class_<GaussianScene>(m, "Scene")
      .def(py::init(&scene_from_arrays), py::arg("means"), py::arg("quats"),
           py::arg("log_scales"), py::arg("opacity_logits"), py::arg("colors"))
      .def_static("load", &load_scene_ply, py::arg("path"))
      .def("save", [](const GaussianScene& s, const std::string& p) { save_scene_ply(p, s); },
           py::arg("path"))
      .def_property_readonly("size", [](const GaussianScene& s) { return s.size(); })
      .def_readonly("sh_degree", &GaussianScene::sh_degree)
      .def_property_readonly("means", [](const GaussianScene& s) {
        py::array_t<double> out({ssize_t(s.size()), ssize_t(3)});
        auto a = out.mutable_unchecked<2>();
        for (size_t i = 0; i < s.size(); ++i)
          for (int k = 0; k < 3; ++k) a(ssize_t(i), k) = s.gaussians[i].mean[k];
        return out;
      });

  m.def("render", &render_py, py::arg("scene"), py::arg("camera"), py::arg("tile_size") = 16,
        py::arg("sh_degree") = -1, py::arg("num_threads") = 0,
        "forward render; returns a dict of numpy maps");

  m.def("psnr",
        [](const py::array_t<double>& a, const py::array_t<double>& b,
           std::optional<py::array_t<bool>> mask) {
          const Image ia = numpy_to_image(a), ib = numpy_to_image(b);
          if (mask) {
            const Mask mm = numpy_to_mask(*mask);
            return psnr(ia, ib, &mm);
          }
          return psnr(ia, ib);
        },
        py::arg("a"), py::arg("b"), py::arg("mask") = std::nullopt);

  m.def("ssim",
        [](const py::array_t<double>& a, const py::array_t<double>& b) {
          return ssim(numpy_to_image(a), numpy_to_image(b)).value;
        },
        py::arg("a"), py::arg("b"));

  m.def("depth_consistency", &consistency_py, py::arg("depths"), py::arg("valid"),
        py::arg("cameras"), py::arg("pairs") = "adjacent:2",
        "(dre, cir_percent, valid_px) over ordered view pairs");

  m.def("reproject",
        [](double u, double v, double depth, const ErpCamera& ci, const ErpCamera& cj) {
          const Reprojection r = reproject({u, v}, depth, ci, cj);
          if (!r.valid) throw std::domain_error("reprojection hit the target camera center");
          return py::make_tuple(r.pixel.x(), r.pixel.y(), r.depth);
        },
        py::arg("u"), py::arg("v"), py::arg("depth"), py::arg("cam_i"), py::arg("cam_j"));

  m.def("synth_dataset",
        [](const std::string& preset_or_path, const std::string& out_dir) {
          SynthSpec spec = preset_or_path.size() > 5 &&
                                   preset_or_path.substr(preset_or_path.size() - 5) == ".json"
                               ? SynthSpec::from_json_file(preset_or_path)
                               : SynthSpec::preset(preset_or_path);
          write_dataset(synth_generate(spec), out_dir);
        },
        py::arg("preset_or_path"), py::arg("out_dir"),
        "generate a synthetic dataset (images, depths, poses, points)");

  m.def("train_files",
        [](const std::string& images_dir, const std::string& poses_path,
           const std::string& points_path, const std::string& config_path,
           const std::string& out_dir) {
          TrainConfig config =
              config_path.empty() ? TrainConfig{} : load_train_config(config_path);
          std::vector<TrainView> views;
          for (const auto& pv : load_poses(poses_path)) {
            TrainView v{pv.name, pv.camera, read_png(images_dir + "/" + pv.name)};
            views.push_back(std::move(v));
          }
          const PointCloud points = load_point_cloud(points_path);
          const TrainResult r = train(views, points, config, nullptr, out_dir);
          return py::make_tuple(r.final_gaussians, r.final_total);
        },
        py::arg("images_dir"), py::arg("poses"), py::arg("points"), py::arg("config") = "",
        py::arg("out_dir") = "out",
        "run the optimization loop on a dataset from disk");

  m.def("load_poses", [](const std::string& path) {
    std::vector<std::pair<std::string, ErpCamera>> out;
    for (const auto& pv : load_poses(path)) out.emplace_back(pv.name, pv.camera);
    return out;
  });
}
