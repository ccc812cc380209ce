#include "panogs/optimizer.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>

namespace panogs {

void OptimizerState::init(size_t n, int sh_coeffs) {
  mean_m.assign(n, Eigen::Vector3d::Zero());
  mean_v.assign(n, Eigen::Vector3d::Zero());
  quat_m.assign(n, Eigen::Vector4d::Zero());
  quat_v.assign(n, Eigen::Vector4d::Zero());
  logs_m.assign(n, Eigen::Vector3d::Zero());
  logs_v.assign(n, Eigen::Vector3d::Zero());
  op_m.assign(n, 0.0);
  op_v.assign(n, 0.0);
  sh_m.assign(n, std::vector<Eigen::Vector3d>(sh_coeffs, Eigen::Vector3d::Zero()));
  sh_v.assign(n, std::vector<Eigen::Vector3d>(sh_coeffs, Eigen::Vector3d::Zero()));
  step_count = 0;
}

void adam_update(double& value, double grad, double& m, double& v, long t, double lr,
                 double beta1, double beta2, double eps) {
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad * grad;
  const double m_hat = m / (1.0 - std::pow(beta1, double(t)));
  const double v_hat = v / (1.0 - std::pow(beta2, double(t)));
  value -= lr * m_hat / (std::sqrt(v_hat) + eps);
}

int apply_step(GaussianScene& scene, const SceneGrads& grads, OptimizerState& state,
               const LearningRates& rates) {
  const long t = ++state.step_count;
  int skipped = 0;
  auto step = [&](double& value, double grad, double& m, double& v, double lr) {
    if (!std::isfinite(grad)) {
      ++skipped;
      return;
    }
    adam_update(value, grad, m, v, t, lr);
  };
  for (size_t i = 0; i < scene.size(); ++i) {
    auto& g = scene.gaussians[i];
    for (int k = 0; k < 3; ++k) {
      step(g.mean[k], grads.mean[i][k], state.mean_m[i][k], state.mean_v[i][k], rates.mean);
      step(g.log_scale[k], grads.log_scale[i][k], state.logs_m[i][k], state.logs_v[i][k],
           rates.log_scale);
    }
    for (int k = 0; k < 4; ++k)
      step(g.quat[k], grads.quat[i][k], state.quat_m[i][k], state.quat_v[i][k], rates.quat);
    step(g.opacity_logit, grads.opacity_logit[i], state.op_m[i], state.op_v[i], rates.opacity);
    const size_t n_coeffs = std::min(grads.sh[i].size(), g.sh.size());
    for (size_t c = 0; c < n_coeffs; ++c)
      for (int k = 0; k < 3; ++k)
        step(g.sh[c][k], grads.sh[i][c][k], state.sh_m[i][c][k], state.sh_v[i][c][k], rates.sh);
    g.normalize_quat();
  }
  if (skipped > 0)
    std::cerr << "[panogs] warning: skipped " << skipped << " non-finite gradients at step " << t
              << "\n";
  return skipped;
}

namespace {

constexpr char kMagic[] = "PANOGSOPT1";

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

void write_vec3s(std::ostream& out, const std::vector<Eigen::Vector3d>& v) {
  for (const auto& e : v)
    for (int k = 0; k < 3; ++k) write_pod(out, e[k]);
}
void read_vec3s(std::istream& in, std::vector<Eigen::Vector3d>& v) {
  for (auto& e : v)
    for (int k = 0; k < 3; ++k) e[k] = read_pod<double>(in);
}

}  // namespace

void save_optimizer_state(const std::string& path, const OptimizerState& st) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_optimizer_state: cannot open " + path);
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, int64_t(st.size()));
  write_pod(out, int32_t(st.sh_m.empty() ? 0 : st.sh_m[0].size()));
  write_pod(out, int64_t(st.step_count));
  write_vec3s(out, st.mean_m);
  write_vec3s(out, st.mean_v);
  for (const auto& e : st.quat_m)
    for (int k = 0; k < 4; ++k) write_pod(out, e[k]);
  for (const auto& e : st.quat_v)
    for (int k = 0; k < 4; ++k) write_pod(out, e[k]);
  write_vec3s(out, st.logs_m);
  write_vec3s(out, st.logs_v);
  for (double d : st.op_m) write_pod(out, d);
  for (double d : st.op_v) write_pod(out, d);
  for (const auto& per : st.sh_m) write_vec3s(out, per);
  for (const auto& per : st.sh_v) write_vec3s(out, per);
}

OptimizerState load_optimizer_state(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_optimizer_state: cannot open " + path);
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(kMagic));
  if (std::string(magic, sizeof(kMagic) - 1) != kMagic)
    throw std::runtime_error("load_optimizer_state: bad magic in " + path);
  const auto n = size_t(read_pod<int64_t>(in));
  const auto coeffs = int(read_pod<int32_t>(in));
  OptimizerState st;
  st.init(n, coeffs);
  st.step_count = long(read_pod<int64_t>(in));
  read_vec3s(in, st.mean_m);
  read_vec3s(in, st.mean_v);
  for (auto& e : st.quat_m)
    for (int k = 0; k < 4; ++k) e[k] = read_pod<double>(in);
  for (auto& e : st.quat_v)
    for (int k = 0; k < 4; ++k) e[k] = read_pod<double>(in);
  read_vec3s(in, st.logs_m);
  read_vec3s(in, st.logs_v);
  for (auto& d : st.op_m) d = read_pod<double>(in);
  for (auto& d : st.op_v) d = read_pod<double>(in);
  for (auto& per : st.sh_m) read_vec3s(in, per);
  for (auto& per : st.sh_v) read_vec3s(in, per);
  if (!in) throw std::runtime_error("load_optimizer_state: truncated " + path);
  return st;
}

}  // namespace panogs
