// Copyright Contributors to the spgs Project
// SPDX-License-Identifier: Apache-2.0
//
#include "spgs/sh.hpp"

#include <algorithm>

namespace spgs {

namespace {

constexpr double C1 = 0.4886025119029199;
constexpr double C2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                          -1.0925484305920792, 0.5462742152960396};
constexpr double C3[7] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                          0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                          -0.5900435899266435};

}  // namespace

std::array<double, 16> sh_basis(int degree, const Vec3& d) {
  std::array<double, 16> Y{};
  Y[0] = kShC0;
  if (degree < 1) return Y;
  const double x = d[0], y = d[1], z = d[2];
  Y[1] = -C1 * y;
  Y[2] = C1 * z;
  Y[3] = -C1 * x;
  if (degree < 2) return Y;
  const double xx = x * x, yy = y * y, zz = z * z;
  Y[4] = C2[0] * x * y;
  Y[5] = C2[1] * y * z;
  Y[6] = C2[2] * (2 * zz - xx - yy);
  Y[7] = C2[3] * x * z;
  Y[8] = C2[4] * (xx - yy);
  if (degree < 3) return Y;
  Y[9] = C3[0] * y * (3 * xx - yy);
  Y[10] = C3[1] * x * y * z;
  Y[11] = C3[2] * y * (4 * zz - xx - yy);
  Y[12] = C3[3] * z * (2 * zz - 3 * xx - 3 * yy);
  Y[13] = C3[4] * x * (4 * zz - xx - yy);
  Y[14] = C3[5] * z * (xx - yy);
  Y[15] = C3[6] * x * (xx - 3 * yy);
  return Y;
}

std::array<Vec3, 16> sh_basis_gradient(int degree, const Vec3& d) {
  std::array<Vec3, 16> G;
  for (auto& g : G) g.setZero();
  if (degree < 1) return G;
  const double x = d[0], y = d[1], z = d[2];
  G[1] = {0, -C1, 0};
  G[2] = {0, 0, C1};
  G[3] = {-C1, 0, 0};
  if (degree < 2) return G;
  const double xx = x * x, yy = y * y, zz = z * z;
  G[4] = {C2[0] * y, C2[0] * x, 0};
  G[5] = {0, C2[1] * z, C2[1] * y};
  G[6] = {-2 * C2[2] * x, -2 * C2[2] * y, 4 * C2[2] * z};
  G[7] = {C2[3] * z, 0, C2[3] * x};
  G[8] = {2 * C2[4] * x, -2 * C2[4] * y, 0};
  if (degree < 3) return G;
  G[9] = {6 * C3[0] * x * y, C3[0] * (3 * xx - 3 * yy), 0};
  G[10] = {C3[1] * y * z, C3[1] * x * z, C3[1] * x * y};
  G[11] = {-2 * C3[2] * x * y, C3[2] * (4 * zz - xx - 3 * yy), 8 * C3[2] * y * z};
  G[12] = {-6 * C3[3] * x * z, -6 * C3[3] * y * z, C3[3] * (6 * zz - 3 * xx - 3 * yy)};
  G[13] = {C3[4] * (4 * zz - 3 * xx - yy), -2 * C3[4] * x * y, 8 * C3[4] * x * z};
  G[14] = {2 * C3[5] * x * z, -2 * C3[5] * y * z, C3[5] * (xx - yy)};
  G[15] = {C3[6] * (3 * xx - 3 * yy), -6 * C3[6] * x * y, 0};
  return G;
}

Vec3 compute_sh_color(int degree, std::span<const double> coeffs, const Vec3& dir) {
  const auto Y = sh_basis(degree, dir);
  const int B = (degree + 1) * (degree + 1);
  Vec3 c(0.5, 0.5, 0.5);
  for (int k = 0; k < B; ++k)
    for (int ch = 0; ch < 3; ++ch) c[ch] += Y[k] * coeffs[3 * k + ch];
  return c.cwiseMax(0.0);
}

void compute_sh_color_backward(int degree, std::span<const double> coeffs, const Vec3& view,
                               const Vec3& color, const Vec3& grad_color,
                               std::span<double> grad_coeffs, Vec3& grad_view) {
  const double len = view.norm();
  const Vec3 dir = view / len;
  Vec3 g = grad_color;
  for (int ch = 0; ch < 3; ++ch)
    if (color[ch] <= 0.0) g[ch] = 0.0;
  const auto Y = sh_basis(degree, dir);
  const auto dY = sh_basis_gradient(degree, dir);
  const int B = (degree + 1) * (degree + 1);
  Vec3 grad_dir = Vec3::Zero();
  for (int k = 0; k < B; ++k) {
    double hk_dot_g = 0.0;
    for (int ch = 0; ch < 3; ++ch) {
      grad_coeffs[3 * k + ch] += Y[k] * g[ch];
      hk_dot_g += coeffs[3 * k + ch] * g[ch];
    }
    grad_dir += hk_dot_g * dY[k];
  }
  grad_view = (grad_dir - dir * dir.dot(grad_dir)) / len;
}

}  // namespace spgs
