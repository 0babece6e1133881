// Copyright Contributors to the spgs Project
// SPDX-License-Identifier: Apache-2.0
//
// Rotation representations, so(3) maps, positional encoding and rigid
// transform interpolation.
#pragma once

#include <array>
#include <span>
#include <vector>

#include "spgs/types.hpp"

namespace spgs {

/// Quaternion stored as (w, x, y, z). Not necessarily normalized; every
/// consumer normalizes before use.
struct Quat {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

  static Quat identity() { return {}; }
  double norm() const;
  Quat normalized() const;
  Vec4 as_vec() const { return {w, x, y, z}; }
  static Quat from_vec(const Vec4& v) { return {v[0], v[1], v[2], v[3]}; }
};

/// Rotation part (axis-angle, radians) and translation of a rigid motion.
struct RigidTransform {
  Vec3 omega = Vec3::Zero();
  Vec3 t = Vec3::Zero();

  static RigidTransform identity() { return {}; }
  Mat3 rotation() const;
  Vec3 apply(const Vec3& x) const;
  RigidTransform inverse() const;
  /// this ∘ other (other applied first).
  RigidTransform compose(const RigidTransform& other) const;
};

inline constexpr double kSmallAngle = 1e-8;

Mat3 quat_to_rotmat(const Quat& q);
/// dR/dq for each of the four raw (unnormalized) quaternion components.
std::array<Mat3, 4> quat_to_rotmat_jacobian(const Quat& q);
/// Inverse of quat_to_rotmat with w >= 0.
Quat rotmat_to_quat(const Mat3& R);

Mat3 hat(const Vec3& v);
Vec3 vee(const Mat3& S);

Mat3 so3_exp(const Vec3& omega);
/// dR/dω_k, k = 0..2.
std::array<Mat3, 3> so3_exp_jacobian(const Vec3& omega);
/// Contract an upstream dL/dR with the exp-map Jacobian.
Vec3 so3_exp_backward(const Vec3& omega, const Mat3& grad_R);

/// Angle in [0, π]. Throws Error("not a rotation") when R is not orthonormal
/// with det +1 within 1e-6.
Vec3 so3_log(const Mat3& R);
/// Gradient of a scalar through so3_log, given dL/dω. Valid away from angle π.
Mat3 so3_log_backward(const Mat3& R, const Vec3& grad_omega);

/// Same rotation as omega, with norm in [0, π].
Vec3 canonicalize_axis_angle(const Vec3& omega);

/// γ(x): for every input scalar, (sin 2^0 x, cos 2^0 x, ..., sin 2^{L-1} x,
/// cos 2^{L-1} x).
std::vector<double> positional_encode(std::span<const double> x, int num_freqs);
/// Writes into out (size 2·L·x.size()).
void positional_encode_into(std::span<const double> x, int num_freqs, std::span<double> out);
/// dγ/dx contracted with an upstream gradient of size 2·L·x.size().
void positional_encode_backward(std::span<const double> x, int num_freqs,
                                std::span<const double> grad_out, std::span<double> grad_x);

RigidTransform interpolate_rigid(const RigidTransform& a, const RigidTransform& b, double w);

}  // namespace spgs
