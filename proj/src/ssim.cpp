#include "panogs/ssim.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace panogs {

namespace {

constexpr int kWin = 11;
constexpr int kHalf = kWin / 2;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

const std::array<double, kWin>& window() {
  static const std::array<double, kWin> w = [] {
    std::array<double, kWin> k{};
    double sum = 0.0;
    for (int i = 0; i < kWin; ++i) {
      k[i] = std::exp(-double(i - kHalf) * (i - kHalf) / (2.0 * 1.5 * 1.5));
      sum += k[i];
    }
    for (auto& v : k) v /= sum;
    return k;
  }();
  return w;
}

// One channel as a flat plane.
std::vector<double> channel(const Image& img, int c) {
  std::vector<double> out(img.pixel_count());
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) out[size_t(y) * img.width + x] = img.at(y, x, c);
  return out;
}

// Valid cross-correlation along x: (H x W) -> (H x (W - kWin + 1)).
std::vector<double> conv_x(const std::vector<double>& in, int w, int h) {
  const int wo = w - kWin + 1;
  std::vector<double> out(size_t(h) * wo, 0.0);
  const auto& k = window();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < wo; ++x) {
      double s = 0.0;
      for (int i = 0; i < kWin; ++i) s += k[i] * in[size_t(y) * w + x + i];
      out[size_t(y) * wo + x] = s;
    }
  return out;
}

// Valid cross-correlation along y: (H x W) -> ((H - kWin + 1) x W).
std::vector<double> conv_y(const std::vector<double>& in, int w, int h) {
  const int ho = h - kWin + 1;
  std::vector<double> out(size_t(ho) * w, 0.0);
  const auto& k = window();
  for (int y = 0; y < ho; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = 0; i < kWin; ++i) s += k[i] * in[size_t(y + i) * w + x];
      out[size_t(y) * w + x] = s;
    }
  return out;
}

std::vector<double> conv2(const std::vector<double>& in, int w, int h) {
  return conv_y(conv_x(in, w, h), w - kWin + 1, h);
}

// Adjoint of conv2: scatters gradients at window positions back to pixels.
std::vector<double> conv2_adjoint(const std::vector<double>& g, int w, int h) {
  const int wo = w - kWin + 1, ho = h - kWin + 1;
  const auto& k = window();
  std::vector<double> mid(size_t(h) * wo, 0.0);
  for (int y = 0; y < ho; ++y)
    for (int x = 0; x < wo; ++x) {
      const double v = g[size_t(y) * wo + x];
      if (v == 0.0) continue;
      for (int i = 0; i < kWin; ++i) mid[size_t(y + i) * wo + x] += k[i] * v;
    }
  std::vector<double> out(size_t(h) * w, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < wo; ++x) {
      const double v = mid[size_t(y) * wo + x];
      if (v == 0.0) continue;
      for (int i = 0; i < kWin; ++i) out[size_t(y) * w + x + i] += k[i] * v;
    }
  return out;
}

struct ChannelStats {
  int wo = 0, ho = 0;
  std::vector<double> mu_a, mu_b, s_aa, s_bb, s_ab;
};

ChannelStats stats(const std::vector<double>& a, const std::vector<double>& b, int w, int h) {
  ChannelStats st;
  st.wo = w - kWin + 1;
  st.ho = h - kWin + 1;
  st.mu_a = conv2(a, w, h);
  st.mu_b = conv2(b, w, h);
  std::vector<double> aa(a.size()), bb(a.size()), ab(a.size());
  for (size_t i = 0; i < a.size(); ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  st.s_aa = conv2(aa, w, h);
  st.s_bb = conv2(bb, w, h);
  st.s_ab = conv2(ab, w, h);
  return st;
}

inline double ssim_at(const ChannelStats& st, size_t i) {
  const double ma = st.mu_a[i], mb = st.mu_b[i];
  const double n1 = 2.0 * ma * mb + kC1;
  const double n2 = 2.0 * (st.s_ab[i] - ma * mb) + kC2;
  const double d1 = ma * ma + mb * mb + kC1;
  const double d2 = st.s_aa[i] - ma * ma + st.s_bb[i] - mb * mb + kC2;
  return n1 * n2 / (d1 * d2);
}

}  // namespace

SsimResult ssim(const Image& a, const Image& b, const Mask* mask) {
  if (!a.same_shape(b)) throw std::invalid_argument("ssim: shape mismatch");
  SsimResult res;
  if (a.width < kWin || a.height < kWin) return res;
  const int wo = a.width - kWin + 1, ho = a.height - kWin + 1;
  double sum = 0.0;
  size_t count = 0;
  std::vector<ChannelStats> st(a.channels);
  for (int c = 0; c < a.channels; ++c)
    st[c] = stats(channel(a, c), channel(b, c), a.width, a.height);
  for (int y = 0; y < ho; ++y)
    for (int x = 0; x < wo; ++x) {
      if (mask && !mask->at(y + kHalf, x + kHalf)) continue;
      double s = 0.0;
      for (int c = 0; c < a.channels; ++c) s += ssim_at(st[c], size_t(y) * wo + x);
      sum += s / a.channels;
      ++count;
    }
  if (count == 0) return res;
  res.value = sum / count;
  res.count = count;
  return res;
}

Image ssim_backward(const Image& a, const Image& b, const Mask* mask) {
  if (!a.same_shape(b)) throw std::invalid_argument("ssim_backward: shape mismatch");
  Image grad(a.width, a.height, a.channels);
  if (a.width < kWin || a.height < kWin) return grad;
  const int wo = a.width - kWin + 1, ho = a.height - kWin + 1;

  size_t count = 0;
  for (int y = 0; y < ho; ++y)
    for (int x = 0; x < wo; ++x)
      if (!mask || mask->at(y + kHalf, x + kHalf)) ++count;
  if (count == 0) return grad;
  const double norm = 1.0 / (double(count) * a.channels);

  for (int c = 0; c < a.channels; ++c) {
    const auto ac = channel(a, c);
    const auto bc = channel(b, c);
    const ChannelStats st = stats(ac, bc, a.width, a.height);
    std::vector<double> w_mu(size_t(ho) * wo, 0.0), w_saa(w_mu), w_sab(w_mu);
    for (int y = 0; y < ho; ++y)
      for (int x = 0; x < wo; ++x) {
        if (mask && !mask->at(y + kHalf, x + kHalf)) continue;
        const size_t i = size_t(y) * wo + x;
        const double ma = st.mu_a[i], mb = st.mu_b[i];
        const double n1 = 2.0 * ma * mb + kC1;
        const double n2 = 2.0 * (st.s_ab[i] - ma * mb) + kC2;
        const double d1 = ma * ma + mb * mb + kC1;
        const double d2 = st.s_aa[i] - ma * ma + st.s_bb[i] - mb * mb + kC2;
        const double s = n1 * n2 / (d1 * d2);
        // ssim as a function of (mu_a, s_aa, s_ab); sigma terms expand to
        // s_aa - mu_a^2 and s_ab - mu_a mu_b.
        w_mu[i] = norm * s * (2.0 * mb / n1 - 2.0 * mb / n2 - 2.0 * ma / d1 + 2.0 * ma / d2);
        w_saa[i] = norm * (-s / d2);
        w_sab[i] = norm * (2.0 * n1 / (d1 * d2));
      }
    const auto g_mu = conv2_adjoint(w_mu, a.width, a.height);
    const auto g_saa = conv2_adjoint(w_saa, a.width, a.height);
    const auto g_sab = conv2_adjoint(w_sab, a.width, a.height);
    for (int y = 0; y < a.height; ++y)
      for (int x = 0; x < a.width; ++x) {
        const size_t i = size_t(y) * a.width + x;
        grad.at(y, x, c) = g_mu[i] + 2.0 * ac[i] * g_saa[i] + bc[i] * g_sab[i];
      }
  }
  return grad;
}

}  // namespace panogs
