// Copyright Contributors to the spgs Project
// SPDX-License-Identifier: Apache-2.0
//
// Canonical-space data model: Gaussians, cameras, frames and datasets.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spgs/geom.hpp"
#include "spgs/types.hpp"

namespace spgs {

inline int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

/// Per-Gaussian parameters, stored pre-activation. Row i of every array
/// belongs to Gaussian i.
struct GaussianCloud {
  int sh_degree = 3;
  Tensor positions;       // P×3
  Tensor log_scales;      // P×3
  Tensor rotations;       // P×4, (w, x, y, z), unnormalized
  Tensor opacity_logits;  // P×1
  Tensor sh;              // P×(3B), coefficient-major: [c0.rgb, c1.rgb, ...]

  GaussianCloud() = default;
  GaussianCloud(int count, int degree);

  int size() const { return static_cast<int>(positions.rows()); }
  int sh_coeffs() const { return sh_coeff_count(sh_degree); }

  Vec3 position(int i) const { return positions.row(i).transpose(); }
  Quat rotation(int i) const {
    return {rotations(i, 0), rotations(i, 1), rotations(i, 2), rotations(i, 3)};
  }

  /// Throws Error when array shapes disagree.
  void validate() const;
  GaussianCloud select(const std::vector<int>& rows) const;
  void append(const GaussianCloud& other);
};

struct ActivatedGaussian {
  Vec3 mean;
  Vec3 scale;
  Quat rotation;  // normalized
  double opacity;
  Eigen::Map<const Eigen::RowVectorXd> sh;
};

double sigmoid(double x);
double inverse_sigmoid(double y);

ActivatedGaussian activate(const GaussianCloud& cloud, int index);

/// Σ = R S Sᵀ Rᵀ, exactly symmetric.
Mat3 build_covariance(const Vec3& scale, const Quat& q);
/// exp(-½ (x-μ)ᵀ Σ⁻¹ (x-μ)).
double evaluate_gaussian(const Mat3& cov, const Vec3& mean, const Vec3& x);

/// Pinhole camera, OpenCV axes (x right, y down, z forward).
struct Camera {
  Mat4 world_to_camera = Mat4::Identity();
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
  int width = 1, height = 1;
  double znear = 0.01, zfar = 100.0;

  Mat3 rotation() const { return world_to_camera.topLeftCorner<3, 3>(); }
  Vec3 translation() const { return world_to_camera.topRightCorner<3, 1>(); }
  Vec3 center() const { return -(rotation().transpose() * translation()); }
  void validate() const;
};

/// Pinhole focal length for a horizontal field of view.
double focal_from_fov(double fov, int pixels);

/// OpenCV-axis camera at `eye` looking at `target` (x right, y down, z forward).
Camera look_at_camera(const Vec3& eye, const Vec3& target, const Vec3& up, double fov_x, int width,
                      int height);

struct Image {
  int width = 0, height = 0;
  std::vector<double> data;  // row-major H×W×3

  Image() = default;
  Image(int w, int h, double fill = 0.0) : width(w), height(h), data(std::size_t(w) * h * 3, fill) {}
  double& at(int x, int y, int c) { return data[(std::size_t(y) * width + x) * 3 + c]; }
  double at(int x, int y, int c) const { return data[(std::size_t(y) * width + x) * 3 + c]; }
  std::size_t size() const { return data.size(); }
};

struct Frame {
  std::string name;
  Camera camera;
  double time = 0.0;
  std::optional<Image> image;
};

struct Dataset {
  std::vector<Frame> train_frames;
  std::vector<Frame> test_frames;
  std::vector<double> train_times;  // sorted, unique
  Vec3 background = Vec3::Ones();
  std::optional<GaussianCloud> initial_points;

  /// Recomputes train_times from train_frames and checks invariants.
  void finalize();
  /// Radius of the camera rig: 1.1 × max distance of train cameras from their mean.
  double scene_extent() const;
};

}  // namespace spgs
