// Copyright Contributors to the spgs Project
// SPDX-License-Identifier: Apache-2.0
//
// Shared fixtures for the unit and acceptance tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "spgs/model.hpp"
#include "spgs/scene.hpp"

namespace spgs::testing {

inline GaussianCloud random_cloud(int P, int degree, std::mt19937_64& rng, double spread = 1.0) {
  std::uniform_real_distribution<double> pos(-spread, spread), sc(0.08, 0.25), op(-0.5, 1.5);
  std::normal_distribution<double> n01(0.0, 1.0), shn(0.0, 0.3);
  GaussianCloud c(P, degree);
  for (int i = 0; i < P; ++i) {
    for (int k = 0; k < 3; ++k) {
      c.positions(i, k) = pos(rng);
      c.log_scales(i, k) = std::log(sc(rng));
    }
    Vec4 q(n01(rng), n01(rng), n01(rng), n01(rng));
    q /= q.norm();
    for (int k = 0; k < 4; ++k) c.rotations(i, k) = q[k];
    c.opacity_logits(i, 0) = op(rng);
    for (int k = 0; k < c.sh.cols(); ++k) c.sh(i, k) = (k < 3 ? 3.0 : 1.0) * shn(rng);
  }
  return c;
}

inline Camera test_camera(int width, int height, const Vec3& eye = Vec3(0.4, -4.0, 0.9)) {
  return look_at_camera(eye, Vec3::Zero(), Vec3::UnitZ(), 50.0 * M_PI / 180.0, width, height);
}

inline Image random_image(int w, int h, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(w, h);
  for (double& v : img.data) v = u(rng);
  return img;
}

inline double max_abs_diff(const Image& a, const Image& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

/// |a − n| within the absolute floor, or relative error below tol.
inline bool grad_close(double analytic, double numeric, double rel = 1e-3, double floor = 1e-8) {
  const double d = std::abs(analytic - numeric);
  if (d <= floor) return true;
  return d / std::max(std::abs(analytic), std::abs(numeric)) < rel;
}

inline void randomize(MlpParams& p, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  for (auto& w : p.weights) w = w.unaryExpr([&](double) { return n(rng); });
  for (auto& b : p.biases) b = b.unaryExpr([&](double) { return n(rng); });
}

/// Fresh directory under the system temp path, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() / ("spgs_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace spgs::testing
