// Copyright Contributors to the spgs Project
// SPDX-License-Identifier: Apache-2.0
//
#include "spgs/geom.hpp"

#include <cmath>
#include <numbers>

namespace spgs {

double Quat::norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

Quat Quat::normalized() const {
  const double n = norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw Error("degenerate quaternion");
  return {w / n, x / n, y / n, z / n};
}

Mat3 RigidTransform::rotation() const { return so3_exp(omega); }

Vec3 RigidTransform::apply(const Vec3& p) const { return so3_exp(omega) * p + t; }

RigidTransform RigidTransform::inverse() const {
  const Mat3 R = so3_exp(omega);
  return {-omega, -(R.transpose() * t)};
}

RigidTransform RigidTransform::compose(const RigidTransform& other) const {
  const Mat3 Ra = so3_exp(omega);
  const Mat3 R = Ra * so3_exp(other.omega);
  return {so3_log(R), Ra * other.t + t};
}

Mat3 quat_to_rotmat(const Quat& q_raw) {
  const Quat q = q_raw.normalized();
  const double w = q.w, x = q.x, y = q.y, z = q.z;
  Mat3 R;
  R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
       2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
       2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return R;
}

std::array<Mat3, 4> quat_to_rotmat_jacobian(const Quat& q_raw) {
  const double n = q_raw.norm();
  const Quat q = q_raw.normalized();
  const double w = q.w, x = q.x, y = q.y, z = q.z;
  // Derivatives with respect to the normalized components.
  std::array<Mat3, 4> dn;
  dn[0] << 0, -z, y, z, 0, -x, -y, x, 0;
  dn[1] << 0, y, z, y, -2 * x, -w, z, w, -2 * x;
  dn[2] << -2 * y, x, w, x, 0, z, -w, z, -2 * y;
  dn[3] << -2 * z, -w, x, w, -2 * z, y, x, y, 0;
  for (auto& m : dn) m *= 2.0;

  // Chain through q̂ = q/|q|: dq̂/dq = (I - q̂ q̂ᵀ)/|q|.
  const Vec4 qh = q.as_vec();
  const Eigen::Matrix4d P = (Eigen::Matrix4d::Identity() - qh * qh.transpose()) / n;
  std::array<Mat3, 4> out;
  for (int c = 0; c < 4; ++c) {
    out[c].setZero();
    for (int m = 0; m < 4; ++m) out[c] += dn[m] * P(m, c);
  }
  return out;
}

Quat rotmat_to_quat(const Mat3& R) {
  const double tr = R.trace();
  Quat q;
  if (tr > R(0, 0) && tr > R(1, 1) && tr > R(2, 2)) {
    const double s = std::sqrt(1.0 + tr) * 2.0;
    q = {0.25 * s, (R(2, 1) - R(1, 2)) / s, (R(0, 2) - R(2, 0)) / s, (R(1, 0) - R(0, 1)) / s};
  } else if (R(0, 0) > R(1, 1) && R(0, 0) > R(2, 2)) {
    const double s = std::sqrt(1.0 + R(0, 0) - R(1, 1) - R(2, 2)) * 2.0;
    q = {(R(2, 1) - R(1, 2)) / s, 0.25 * s, (R(0, 1) + R(1, 0)) / s, (R(0, 2) + R(2, 0)) / s};
  } else if (R(1, 1) > R(2, 2)) {
    const double s = std::sqrt(1.0 + R(1, 1) - R(0, 0) - R(2, 2)) * 2.0;
    q = {(R(0, 2) - R(2, 0)) / s, (R(0, 1) + R(1, 0)) / s, 0.25 * s, (R(1, 2) + R(2, 1)) / s};
  } else {
    const double s = std::sqrt(1.0 + R(2, 2) - R(0, 0) - R(1, 1)) * 2.0;
    q = {(R(1, 0) - R(0, 1)) / s, (R(0, 2) + R(2, 0)) / s, (R(1, 2) + R(2, 1)) / s, 0.25 * s};
  }
  if (q.w < 0) q = {-q.w, -q.x, -q.y, -q.z};
  return q.normalized();
}

Mat3 hat(const Vec3& v) {
  Mat3 K;
  K << 0, -v[2], v[1], v[2], 0, -v[0], -v[1], v[0], 0;
  return K;
}

Vec3 vee(const Mat3& S) { return {S(2, 1), S(0, 2), S(1, 0)}; }

namespace {

// R = I + A K + B K², A = sinθ/θ, B = (1 - cosθ)/θ².
struct ExpCoeffs {
  double A, B, dA_over_theta, dB_over_theta;
};

ExpCoeffs exp_coeffs(double theta) {
  ExpCoeffs c{};
  const double t2 = theta * theta;
  if (theta < 1e-2) {
    c.A = 1.0 - t2 / 6.0 + t2 * t2 / 120.0;
    c.B = 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
    c.dA_over_theta = -1.0 / 3.0 + t2 / 30.0 - t2 * t2 / 840.0;
    c.dB_over_theta = -1.0 / 12.0 + t2 / 180.0 - t2 * t2 / 6720.0;
  } else {
    const double s = std::sin(theta), co = std::cos(theta);
    const double half = std::sin(0.5 * theta);
    c.A = s / theta;
    c.B = 2.0 * half * half / t2;
    c.dA_over_theta = (theta * co - s) / (t2 * theta);
    c.dB_over_theta = (theta * s - 2.0 * (1.0 - co)) / (t2 * t2);
  }
  return c;
}

}  // namespace

Mat3 so3_exp(const Vec3& omega) {
  const double theta = omega.norm();
  const Mat3 K = hat(omega);
  if (theta < kSmallAngle) return Mat3::Identity() + K + 0.5 * K * K;
  const ExpCoeffs c = exp_coeffs(theta);
  return Mat3::Identity() + c.A * K + c.B * (K * K);
}

std::array<Mat3, 3> so3_exp_jacobian(const Vec3& omega) {
  const double theta = omega.norm();
  const ExpCoeffs c = exp_coeffs(theta);
  const Mat3 K = hat(omega);
  const Mat3 K2 = K * K;
  std::array<Mat3, 3> out;
  for (int k = 0; k < 3; ++k) {
    const Mat3 E = hat(Vec3::Unit(k));
    out[k] = c.dA_over_theta * omega[k] * K + c.A * E + c.dB_over_theta * omega[k] * K2 +
             c.B * (E * K + K * E);
  }
  return out;
}

Vec3 so3_exp_backward(const Vec3& omega, const Mat3& grad_R) {
  const auto J = so3_exp_jacobian(omega);
  return {(J[0].cwiseProduct(grad_R)).sum(), (J[1].cwiseProduct(grad_R)).sum(),
          (J[2].cwiseProduct(grad_R)).sum()};
}

Vec3 so3_log(const Mat3& R) {
  const double orth = (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (!(orth <= 1e-6) || !(R.determinant() > 0.0)) throw Error("not a rotation");
  const Quat q = rotmat_to_quat(R);
  const Vec3 v(q.x, q.y, q.z);
  const double n = v.norm();
  if (n < kSmallAngle) return v * (2.0 / q.w);
  const double theta = 2.0 * std::atan2(n, q.w);
  return v * (theta / n);
}

Mat3 so3_log_backward(const Mat3& R, const Vec3& g) {
  // ω = (θ/s) v with v = vee(R - Rᵀ)/2, c = (tr R - 1)/2, s = |v|, θ = atan2(s, c).
  const Vec3 v(0.5 * (R(2, 1) - R(1, 2)), 0.5 * (R(0, 2) - R(2, 0)), 0.5 * (R(1, 0) - R(0, 1)));
  const double c = 0.5 * (R.trace() - 1.0);
  const double s = v.norm();
  const double r2 = s * s + c * c;
  const double theta = std::atan2(s, c);
  double phi, kappa;
  if (s < 1e-4) {
    const double t2 = theta * theta;
    phi = 1.0 + t2 / 6.0;
    kappa = -2.0 / 3.0 - t2 / 5.0;
  } else {
    phi = theta / s;
    kappa = (c * s / r2 - theta) / (s * s * s);
  }
  const double gv = g.dot(v);
  const Vec3 dv = phi * g + gv * kappa * v;
  const double dc = -gv / r2;

  Mat3 dR = Mat3::Zero();
  dR(2, 1) += 0.5 * dv[0];
  dR(1, 2) -= 0.5 * dv[0];
  dR(0, 2) += 0.5 * dv[1];
  dR(2, 0) -= 0.5 * dv[1];
  dR(1, 0) += 0.5 * dv[2];
  dR(0, 1) -= 0.5 * dv[2];
  for (int i = 0; i < 3; ++i) dR(i, i) += 0.5 * dc;
  return dR;
}

Vec3 canonicalize_axis_angle(const Vec3& omega) {
  const double theta = omega.norm();
  if (theta <= std::numbers::pi) return omega;
  const double wrapped = std::remainder(theta, 2.0 * std::numbers::pi);  // in [-π, π]
  return omega * (wrapped / theta);
}

void positional_encode_into(std::span<const double> x, int num_freqs, std::span<double> out) {
  const std::size_t stride = 2 * static_cast<std::size_t>(num_freqs);
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (int k = 0; k < num_freqs; ++k) {
      const double arg = std::ldexp(x[i], k);
      out[i * stride + 2 * k] = std::sin(arg);
      out[i * stride + 2 * k + 1] = std::cos(arg);
    }
  }
}

std::vector<double> positional_encode(std::span<const double> x, int num_freqs) {
  if (num_freqs < 1) throw Error("positional encoding needs at least one frequency");
  std::vector<double> out(2 * static_cast<std::size_t>(num_freqs) * x.size());
  positional_encode_into(x, num_freqs, out);
  return out;
}

void positional_encode_backward(std::span<const double> x, int num_freqs,
                                std::span<const double> grad_out, std::span<double> grad_x) {
  const std::size_t stride = 2 * static_cast<std::size_t>(num_freqs);
  for (std::size_t i = 0; i < x.size(); ++i) {
    double acc = 0.0;
    for (int k = 0; k < num_freqs; ++k) {
      const double scale = std::ldexp(1.0, k);
      const double arg = scale * x[i];
      acc += grad_out[i * stride + 2 * k] * scale * std::cos(arg);
      acc -= grad_out[i * stride + 2 * k + 1] * scale * std::sin(arg);
    }
    grad_x[i] = acc;
  }
}

RigidTransform interpolate_rigid(const RigidTransform& a, const RigidTransform& b, double w) {
  if (w <= 0.0) return a;
  if (w >= 1.0) return b;
  RigidTransform out;
  out.t = a.t + w * (b.t - a.t);

  // Pick the representation of b's rotation closest to a's (shorter branch).
  Vec3 wb = b.omega;
  const double nb = wb.norm();
  if (nb > kSmallAngle) {
    const Vec3 alt = wb - (2.0 * std::numbers::pi / nb) * wb;
    if ((alt - a.omega).squaredNorm() < (wb - a.omega).squaredNorm()) wb = alt;
  }
  out.omega = canonicalize_axis_angle(a.omega + w * (wb - a.omega));
  return out;
}

}  // namespace spgs
