// Copyright Contributors to the spgs Project
// SPDX-License-Identifier: Apache-2.0
//
#include "spgs/scene.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>

namespace spgs {

GaussianCloud::GaussianCloud(int count, int degree)
    : sh_degree(degree),
      positions(Tensor::Zero(count, 3)),
      log_scales(Tensor::Zero(count, 3)),
      rotations(Tensor::Zero(count, 4)),
      opacity_logits(Tensor::Zero(count, 1)),
      sh(Tensor::Zero(count, 3 * sh_coeff_count(degree))) {
  if (degree < 0 || degree > 3) throw Error("sh degree must be in 0..3");
  rotations.col(0).setOnes();
}

void GaussianCloud::validate() const {
  const auto P = positions.rows();
  if (positions.cols() != 3 || log_scales.rows() != P || log_scales.cols() != 3 ||
      rotations.rows() != P || rotations.cols() != 4 || opacity_logits.rows() != P ||
      opacity_logits.cols() != 1 || sh.rows() != P || sh.cols() != 3 * sh_coeffs())
    throw Error("inconsistent gaussian cloud arrays");
}

namespace {

Tensor select_rows(const Tensor& t, const std::vector<int>& rows) {
  Tensor out(static_cast<Eigen::Index>(rows.size()), t.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = t.row(rows[k]);
  return out;
}

void append_rows(Tensor& t, const Tensor& more) {
  const auto old = t.rows();
  t.conservativeResize(old + more.rows(), Eigen::NoChange);
  t.bottomRows(more.rows()) = more;
}

}  // namespace

GaussianCloud GaussianCloud::select(const std::vector<int>& rows) const {
  GaussianCloud out;
  out.sh_degree = sh_degree;
  out.positions = select_rows(positions, rows);
  out.log_scales = select_rows(log_scales, rows);
  out.rotations = select_rows(rotations, rows);
  out.opacity_logits = select_rows(opacity_logits, rows);
  out.sh = select_rows(sh, rows);
  return out;
}

void GaussianCloud::append(const GaussianCloud& other) {
  if (other.sh_degree != sh_degree) throw Error("sh degree mismatch");
  append_rows(positions, other.positions);
  append_rows(log_scales, other.log_scales);
  append_rows(rotations, other.rotations);
  append_rows(opacity_logits, other.opacity_logits);
  append_rows(sh, other.sh);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double inverse_sigmoid(double y) { return std::log(y / (1.0 - y)); }

ActivatedGaussian activate(const GaussianCloud& cloud, int i) {
  if (i < 0 || i >= cloud.size()) throw Error("gaussian index out of range");
  return {cloud.position(i),
          cloud.log_scales.row(i).transpose().array().exp().matrix(),
          cloud.rotation(i).normalized(),
          sigmoid(cloud.opacity_logits(i, 0)),
          Eigen::Map<const Eigen::RowVectorXd>(cloud.sh.row(i).data(), cloud.sh.cols())};
}

Mat3 build_covariance(const Vec3& scale, const Quat& q) {
  if (!(scale.minCoeff() > 0.0)) throw Error("non-positive scale");
  const Mat3 M = quat_to_rotmat(q) * scale.asDiagonal();
  Mat3 cov = M * M.transpose();
  cov = 0.5 * (cov + cov.transpose()).eval();
  return cov;
}

double evaluate_gaussian(const Mat3& cov, const Vec3& mean, const Vec3& x) {
  Eigen::FullPivLU<Mat3> lu(cov);
  if (!lu.isInvertible()) throw Error("singular covariance");
  const Vec3 d = x - mean;
  return std::exp(-0.5 * d.dot(lu.solve(d)));
}

void Camera::validate() const {
  const Mat3 R = rotation();
  if (!world_to_camera.allFinite()) throw Error("non-finite camera matrix");
  if ((R * R.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-5 || R.determinant() <= 0)
    throw Error("camera rotation is not a rotation");
  if (!(fx > 0 && fy > 0)) throw Error("camera focal length must be positive");
  if (width <= 0 || height <= 0) throw Error("camera image size must be positive");
}

double focal_from_fov(double fov, int pixels) { return pixels / (2.0 * std::tan(0.5 * fov)); }

Camera look_at_camera(const Vec3& eye, const Vec3& target, const Vec3& up, double fov_x, int width,
                      int height) {
  const Vec3 f = (target - eye).normalized();
  const Vec3 right = f.cross(up);
  if (right.norm() < 1e-12) throw Error("look-at direction is parallel to up");
  const Vec3 r = right.normalized();
  const Vec3 d = f.cross(r);
  Camera cam;
  Mat3 R;
  R.row(0) = r.transpose();
  R.row(1) = d.transpose();
  R.row(2) = f.transpose();
  cam.world_to_camera.setIdentity();
  cam.world_to_camera.topLeftCorner<3, 3>() = R;
  cam.world_to_camera.topRightCorner<3, 1>() = -R * eye;
  cam.width = width;
  cam.height = height;
  cam.fx = cam.fy = focal_from_fov(fov_x, width);
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  return cam;
}

void Dataset::finalize() {
  train_times.clear();
  for (const auto& f : train_frames) train_times.push_back(f.time);
  std::sort(train_times.begin(), train_times.end());
  train_times.erase(std::unique(train_times.begin(), train_times.end()), train_times.end());
  if (train_times.size() < 2) throw Error("dataset needs at least 2 distinct train timesteps");
}

double Dataset::scene_extent() const {
  if (train_frames.empty()) return 1.0;
  Vec3 mean = Vec3::Zero();
  for (const auto& f : train_frames) mean += f.camera.center();
  mean /= static_cast<double>(train_frames.size());
  double radius = 0.0;
  for (const auto& f : train_frames) radius = std::max(radius, (f.camera.center() - mean).norm());
  return radius > 0 ? 1.1 * radius : 1.0;
}

}  // namespace spgs
