// Copyright Contributors to the spgs Project
// SPDX-License-Identifier: Apache-2.0
//
#include "spgs/losses.hpp"

#include <array>
#include <cmath>
#include <limits>

namespace spgs {

namespace {

constexpr int kWindow = 11;
constexpr int kHalf = kWindow / 2;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

void check_same_shape(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height || a.size() != b.size())
    throw Error("image shape mismatch");
}

const std::array<double, kWindow>& gaussian_window() {
  static const std::array<double, kWindow> w = [] {
    std::array<double, kWindow> k{};
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
      const double d = i - kHalf;
      sum += k[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
    }
    for (auto& v : k) v /= sum;
    return k;
  }();
  return w;
}

// Separable zero-padded 'same' blur of one H×W plane.
std::vector<double> blur(const std::vector<double>& src, int W, int H) {
  const auto& k = gaussian_window();
  std::vector<double> tmp(src.size(), 0.0), dst(src.size(), 0.0);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double acc = 0.0;
      for (int t = -kHalf; t <= kHalf; ++t) {
        const int xx = x + t;
        if (xx >= 0 && xx < W) acc += k[t + kHalf] * src[static_cast<std::size_t>(y) * W + xx];
      }
      tmp[static_cast<std::size_t>(y) * W + x] = acc;
    }
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double acc = 0.0;
      for (int t = -kHalf; t <= kHalf; ++t) {
        const int yy = y + t;
        if (yy >= 0 && yy < H) acc += k[t + kHalf] * tmp[static_cast<std::size_t>(yy) * W + x];
      }
      dst[static_cast<std::size_t>(y) * W + x] = acc;
    }
  return dst;
}

}  // namespace

double l1_loss(const Image& a, const Image& b, Image* grad, double weight) {
  check_same_shape(a, b);
  const double n = static_cast<double>(a.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    sum += std::abs(d);
    if (grad) grad->data[i] += weight * ((d > 0) - (d < 0)) / n;
  }
  return sum / n;
}

double ssim(const Image& a, const Image& b, Image* grad, double weight) {
  check_same_shape(a, b);
  const int W = a.width, H = a.height;
  if (W < kWindow || H < kWindow) throw Error("image too small for ssim (needs 11x11)");
  const std::size_t N = static_cast<std::size_t>(W) * H;
  const double norm = 1.0 / (3.0 * static_cast<double>(N));
  double total = 0.0;
  std::vector<double> x(N), y(N), xx(N), yy(N), xy(N);
  for (int c = 0; c < 3; ++c) {
    for (std::size_t p = 0; p < N; ++p) {
      x[p] = a.data[p * 3 + c];
      y[p] = b.data[p * 3 + c];
      xx[p] = x[p] * x[p];
      yy[p] = y[p] * y[p];
      xy[p] = x[p] * y[p];
    }
    const auto mx = blur(x, W, H), my = blur(y, W, H);
    const auto exx = blur(xx, W, H), eyy = blur(yy, W, H), exy = blur(xy, W, H);
    std::vector<double> gm, g2, gxy;
    if (grad) {
      gm.resize(N);
      g2.resize(N);
      gxy.resize(N);
    }
    for (std::size_t p = 0; p < N; ++p) {
      const double sxx = exx[p] - mx[p] * mx[p];
      const double syy = eyy[p] - my[p] * my[p];
      const double sxy = exy[p] - mx[p] * my[p];
      const double A1 = 2 * mx[p] * my[p] + kC1, A2 = 2 * sxy + kC2;
      const double B1 = mx[p] * mx[p] + my[p] * my[p] + kC1, B2 = sxx + syy + kC2;
      const double S = (A1 * A2) / (B1 * B2);
      total += S;
      if (grad) {
        const double dS_dmx = 2 * my[p] * A2 / (B1 * B2) - S * 2 * mx[p] / B1;
        const double dS_dsxx = -S / B2;
        const double dS_dsxy = 2 * A1 / (B1 * B2);
        gm[p] = dS_dmx - 2 * mx[p] * dS_dsxx - my[p] * dS_dsxy;
        g2[p] = dS_dsxx;
        gxy[p] = dS_dsxy;
      }
    }
    if (grad) {
      const auto bm = blur(gm, W, H), b2 = blur(g2, W, H), bxy = blur(gxy, W, H);
      for (std::size_t p = 0; p < N; ++p)
        grad->data[p * 3 + c] += weight * norm * (bm[p] + 2 * x[p] * b2[p] + y[p] * bxy[p]);
    }
  }
  return total * norm;
}

double dssim_loss(const Image& a, const Image& b, Image* grad, double weight) {
  return 0.5 * (1.0 - ssim(a, b, grad, -0.5 * weight));
}

double image_loss(const Image& render, const Image& target, double lambda_dssim, Image* grad) {
  double loss = (1.0 - lambda_dssim) * l1_loss(render, target, grad, 1.0 - lambda_dssim);
  if (lambda_dssim != 0.0) loss += lambda_dssim * dssim_loss(render, target, grad, lambda_dssim);
  return loss;
}

double mse(const Image& a, const Image& b) {
  check_same_shape(a, b);
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    sum += d * d;
  }
  return sum / static_cast<double>(a.size());
}

double psnr(const Image& a, const Image& b) {
  const double m = mse(a, b);
  if (m <= 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(m);
}

}  // namespace spgs
