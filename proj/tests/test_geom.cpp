// Copyright Contributors to the spgs Project
// SPDX-License-Identifier: Apache-2.0
//
#include <gtest/gtest.h>

#include <random>

#include "spgs/geom.hpp"

namespace spgs {
namespace {

Mat3 rotation_about(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

TEST(QuatToRotmat, IdentityAndHalfTurn) {
  EXPECT_TRUE(quat_to_rotmat(Quat::identity()).isApprox(Mat3::Identity(), 0.0));
  const Mat3 R = quat_to_rotmat({0.0, 0.0, 0.0, 1.0});
  EXPECT_TRUE(R.isApprox(Vec3(-1.0, -1.0, 1.0).asDiagonal().toDenseMatrix(), 1e-15));
}

TEST(QuatToRotmat, RandomUnitQuaternionsAreRotations) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int r = 0; r < 200; ++r) {
    const Quat q = Quat{n(rng), n(rng), n(rng), n(rng)}.normalized();
    const Mat3 R = quat_to_rotmat(q);
    EXPECT_LT((R * R.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(R.determinant(), 1.0, 1e-12);
  }
}

TEST(QuatToRotmat, NormalizesAndRejectsZero) {
  const Quat q{0.3, -0.2, 0.5, 0.1};
  EXPECT_LT((quat_to_rotmat(q) - quat_to_rotmat(Quat{3.0, -2.0, 5.0, 1.0})).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_THROW(quat_to_rotmat(Quat{0.0, 0.0, 0.0, 0.0}), Error);
}

TEST(QuatToRotmat, MatchesEigenQuaternion) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int r = 0; r < 50; ++r) {
    const Quat q = Quat{n(rng), n(rng), n(rng), n(rng)}.normalized();
    const Mat3 ref = Eigen::Quaterniond(q.w, q.x, q.y, q.z).toRotationMatrix();
    EXPECT_LT((quat_to_rotmat(q) - ref).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(QuatToRotmat, JacobianMatchesFiniteDifferences) {
  const Quat q{0.7, -0.3, 0.4, 1.1};
  const auto J = quat_to_rotmat_jacobian(q);
  const double h = 1e-6;
  for (int k = 0; k < 4; ++k) {
    Vec4 p = q.as_vec(), m = q.as_vec();
    p[k] += h;
    m[k] -= h;
    const Mat3 num = (quat_to_rotmat(Quat::from_vec(p)) - quat_to_rotmat(Quat::from_vec(m))) / (2 * h);
    EXPECT_LT((J[k] - num).cwiseAbs().maxCoeff(), 1e-8) << "component " << k;
  }
}

TEST(RotmatToQuat, RoundTripWithNonNegativeW) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int r = 0; r < 100; ++r) {
    Quat q = Quat{n(rng), n(rng), n(rng), n(rng)}.normalized();
    const Quat back = rotmat_to_quat(quat_to_rotmat(q));
    if (q.w < 0) q = {-q.w, -q.x, -q.y, -q.z};
    EXPECT_GE(back.w, 0.0);
    EXPECT_LT((back.as_vec() - q.as_vec()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(So3Exp, ZeroIsIdentity) { EXPECT_TRUE(so3_exp(Vec3::Zero()).isApprox(Mat3::Identity(), 0.0)); }

TEST(So3Exp, QuarterTurnMatchesQuaternion) {
  const Mat3 R = so3_exp(Vec3(0.0, 0.0, M_PI / 2));
  const Mat3 Q = quat_to_rotmat({std::cos(M_PI / 4), 0.0, 0.0, std::sin(M_PI / 4)});
  EXPECT_LT((R - Q).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(So3Exp, TinyAngleIsFirstOrder) {
  const Vec3 w = Vec3(0.6, -0.8, 0.0) * 1e-10;
  const Mat3 ref = Mat3::Identity() + hat(w);
  EXPECT_LT((so3_exp(w) - ref).cwiseAbs().maxCoeff(), 1e-16);
}

TEST(So3Exp, MatchesAngleAxis) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int r = 0; r < 50; ++r) {
    const Vec3 w(u(rng), u(rng), u(rng));
    EXPECT_LT((so3_exp(w) - rotation_about(w, w.norm())).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(So3Exp, JacobianAndBackwardMatchFiniteDifferences) {
  const Vec3 w(0.4, -1.2, 0.7);
  const auto J = so3_exp_jacobian(w);
  const double h = 1e-6;
  Mat3 G;
  G << 0.3, -1.0, 0.2, 0.5, 0.1, -0.7, 1.1, 0.4, -0.2;
  Vec3 num_back;
  for (int k = 0; k < 3; ++k) {
    Vec3 p = w, m = w;
    p[k] += h;
    m[k] -= h;
    const Mat3 num = (so3_exp(p) - so3_exp(m)) / (2 * h);
    EXPECT_LT((J[k] - num).cwiseAbs().maxCoeff(), 1e-8);
    num_back[k] = (G.cwiseProduct(num)).sum();
  }
  EXPECT_LT((so3_exp_backward(w, G) - num_back).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(So3Log, IdentityAndQuarterTurn) {
  EXPECT_TRUE(so3_log(Mat3::Identity()).isZero(0.0));
  const Vec3 w = so3_log(rotation_about(Vec3::UnitZ(), M_PI / 2));
  EXPECT_LT((w - Vec3(0.0, 0.0, M_PI / 2)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(So3Log, NearHalfTurnRoundTrips) {
  const Mat3 R = rotation_about(Vec3::UnitX(), 179.9 * M_PI / 180.0);
  EXPECT_LT((so3_exp(so3_log(R)) - R).cwiseAbs().maxCoeff(), 1e-6);
  const Mat3 H = rotation_about(Vec3(1.0, 2.0, -0.5), M_PI);
  const Vec3 w = so3_log(H);
  EXPECT_NEAR(w.norm(), M_PI, 1e-9);
  EXPECT_LT((so3_exp(w) - H).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(So3Log, InverseOfExpInsidePi) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> ang(0.0, M_PI - 1e-3);
  for (int r = 0; r < 200; ++r) {
    const Vec3 w = Vec3(n(rng), n(rng), n(rng)).normalized() * ang(rng);
    EXPECT_LT((so3_log(so3_exp(w)) - w).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(So3Log, RejectsNonRotations) {
  EXPECT_THROW(so3_log(Mat3::Identity() * 1.1), Error);
  EXPECT_THROW(so3_log(Vec3(1.0, 1.0, -1.0).asDiagonal().toDenseMatrix()), Error);
}

TEST(So3Log, BackwardMatchesFiniteDifferences) {
  const Vec3 w0(0.3, 0.9, -0.4);
  const Vec3 g(0.7, -0.2, 1.3);
  // Perturb along the manifold: R(ε) = exp(ε e_k) R, compare directional derivatives.
  const Mat3 R = so3_exp(w0);
  const Mat3 GR = so3_log_backward(R, g);
  const double h = 1e-6;
  for (int k = 0; k < 3; ++k) {
    const Mat3 dR = hat(Vec3::Unit(k)) * R;
    const double num = g.dot(so3_log(so3_exp(h * Vec3::Unit(k)) * R) - so3_log(so3_exp(-h * Vec3::Unit(k)) * R)) / (2 * h);
    EXPECT_NEAR(GR.cwiseProduct(dR).sum(), num, 1e-7);
  }
}

TEST(CanonicalizeAxisAngle, WrapsIntoPi) {
  const Vec3 w(0.0, 0.0, 1.5 * M_PI);
  const Vec3 c = canonicalize_axis_angle(w);
  EXPECT_LE(c.norm(), M_PI + 1e-12);
  EXPECT_LT((so3_exp(c) - so3_exp(w)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(PositionalEncode, SmallCases) {
  const std::vector<double> x0{0.0};
  EXPECT_EQ(positional_encode(x0, 2), (std::vector<double>{0.0, 1.0, 0.0, 1.0}));
  const std::vector<double> x1{M_PI / 2};
  const auto e = positional_encode(x1, 1);
  ASSERT_EQ(e.size(), 2u);
  EXPECT_NEAR(e[0], 1.0, 1e-15);
  EXPECT_NEAR(e[1], 0.0, 1e-15);
}

TEST(PositionalEncode, LengthAndLayout) {
  const std::vector<double> x{0.1, -0.7, 2.3};
  const auto e = positional_encode(x, 10);
  ASSERT_EQ(e.size(), 60u);
  for (int d = 0; d < 3; ++d)
    for (int l = 0; l < 10; ++l) {
      const double f = std::ldexp(1.0, l) * x[d];
      EXPECT_DOUBLE_EQ(e[d * 20 + 2 * l], std::sin(f));
      EXPECT_DOUBLE_EQ(e[d * 20 + 2 * l + 1], std::cos(f));
    }
  EXPECT_THROW(positional_encode(x, 0), Error);
}

TEST(PositionalEncode, PeriodicForOneFrequency) {
  for (double v : {0.3, -1.7, 4.0}) {
    const std::vector<double> a{v}, b{v + 2 * M_PI};
    const auto ea = positional_encode(a, 1), eb = positional_encode(b, 1);
    for (int k = 0; k < 2; ++k) EXPECT_NEAR(ea[k], eb[k], 1e-14);
  }
}

TEST(PositionalEncode, BackwardMatchesFiniteDifferences) {
  const std::vector<double> x{0.2, -0.5};
  const int L = 4;
  std::vector<double> g(2 * L * x.size());
  for (std::size_t k = 0; k < g.size(); ++k) g[k] = std::sin(1.0 + k);
  std::vector<double> gx(x.size(), 0.0);
  positional_encode_backward(x, L, g, gx);
  const double h = 1e-6;
  for (std::size_t d = 0; d < x.size(); ++d) {
    auto p = x, m = x;
    p[d] += h;
    m[d] -= h;
    const auto ep = positional_encode(p, L), em = positional_encode(m, L);
    double num = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) num += g[k] * (ep[k] - em[k]) / (2 * h);
    EXPECT_NEAR(gx[d], num, 1e-7);
  }
}

TEST(InterpolateRigid, Endpoints) {
  const RigidTransform a{Vec3(0.1, 0.2, -0.3), Vec3(1.0, 2.0, 3.0)};
  const RigidTransform b{Vec3(-0.4, 0.5, 0.6), Vec3(-1.0, 0.0, 4.0)};
  const RigidTransform r0 = interpolate_rigid(a, b, 0.0), r1 = interpolate_rigid(a, b, 1.0);
  EXPECT_EQ(r0.omega, a.omega);
  EXPECT_EQ(r0.t, a.t);
  EXPECT_EQ(r1.omega, b.omega);
  EXPECT_EQ(r1.t, b.t);
}

TEST(InterpolateRigid, HandMidpoint) {
  const RigidTransform b{Vec3(0.0, 0.0, M_PI / 2), Vec3(2.0, 0.0, 0.0)};
  const RigidTransform m = interpolate_rigid(RigidTransform::identity(), b, 0.5);
  EXPECT_LT((m.omega - Vec3(0.0, 0.0, M_PI / 4)).norm(), 1e-15);
  EXPECT_LT((m.t - Vec3(1.0, 0.0, 0.0)).norm(), 1e-15);
}

TEST(InterpolateRigid, SelfInterpolationIsConstant) {
  const RigidTransform a{Vec3(0.7, -0.1, 0.2), Vec3(0.3, 0.3, -2.0)};
  for (double w : {0.0, 0.25, 0.5, 0.9, 1.0}) {
    const RigidTransform r = interpolate_rigid(a, a, w);
    EXPECT_LT((r.omega - a.omega).norm(), 1e-15);
    EXPECT_LT((r.t - a.t).norm(), 1e-15);
  }
}

TEST(InterpolateRigid, ShortBranchNearPi) {
  const RigidTransform a{Vec3(0.0, 0.0, M_PI - 0.05), Vec3::Zero()};
  const RigidTransform b{Vec3(0.0, 0.0, -(M_PI - 0.05)), Vec3::Zero()};
  const RigidTransform m = interpolate_rigid(a, b, 0.5);
  // The short way between ±(π − 0.05) about z passes through π.
  const Mat3 R = so3_exp(m.omega);
  EXPECT_LT((R - rotation_about(Vec3::UnitZ(), M_PI)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(RigidTransform, ComposeAndInverse) {
  const RigidTransform a{Vec3(0.3, -0.2, 0.9), Vec3(1.0, -2.0, 0.5)};
  const RigidTransform b{Vec3(-0.6, 0.1, 0.4), Vec3(0.0, 0.7, -1.1)};
  const Vec3 x(0.2, 0.4, -0.9);
  EXPECT_LT((a.compose(b).apply(x) - a.apply(b.apply(x))).norm(), 1e-14);
  EXPECT_LT((a.inverse().apply(a.apply(x)) - x).norm(), 1e-14);
}

}  // namespace
}  // namespace spgs
