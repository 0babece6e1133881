// Copyright Contributors to the spgs Project
// SPDX-License-Identifier: Apache-2.0
//
#include "spgs/deform.hpp"

#include <algorithm>

namespace spgs {

RigidTransform transform_row(const Tensor& motions, Eigen::Index row) {
  return {Vec3(motions(row, 0), motions(row, 1), motions(row, 2)),
          Vec3(motions(row, 3), motions(row, 4), motions(row, 5))};
}

void set_transform_row(Tensor& motions, Eigen::Index row, const RigidTransform& T) {
  motions.block<1, 3>(row, 0) = T.omega.transpose();
  motions.block<1, 3>(row, 3) = T.t.transpose();
}

Tensor pack_transforms(const std::vector<RigidTransform>& transforms) {
  Tensor out(static_cast<Eigen::Index>(transforms.size()), 6);
  for (std::size_t i = 0; i < transforms.size(); ++i)
    set_transform_row(out, static_cast<Eigen::Index>(i), transforms[i]);
  return out;
}

std::vector<RigidTransform> unpack_transforms(const Tensor& motions) {
  std::vector<RigidTransform> out;
  out.reserve(static_cast<std::size_t>(motions.rows()));
  for (Eigen::Index i = 0; i < motions.rows(); ++i) out.push_back(transform_row(motions, i));
  return out;
}

MotionNet::MotionNet(const MotionNetConfig& config, std::uint64_t seed) : config_(config) {
  MlpConfig mc;
  mc.input_dim = config.input_dim();
  mc.width = config.width;
  mc.depth = config.depth;
  mc.output_dim = 6;
  mlp_ = Mlp(mc, seed);
}

Tensor MotionNet::encode(const Tensor& positions, double t) const {
  const int pos_dim = 6 * config_.pos_freqs;
  Tensor enc(positions.rows(), config_.input_dim());
  const std::vector<double> time_enc = positional_encode(std::span<const double>(&t, 1), config_.time_freqs);
  for (Eigen::Index i = 0; i < positions.rows(); ++i) {
    double* row = enc.row(i).data();
    const double p[3] = {positions(i, 0), positions(i, 1), positions(i, 2)};
    positional_encode_into(p, config_.pos_freqs, std::span<double>(row, pos_dim));
    std::copy(time_enc.begin(), time_enc.end(), row + pos_dim);
  }
  return enc;
}

Tensor MotionNet::forward(const Tensor& positions, double t, Cache* cache) const {
  if (cache) {
    cache->encoded = encode(positions, t);
    return mlp_.forward(cache->encoded, &cache->mlp);
  }
  return mlp_.forward(encode(positions, t), nullptr);
}

void MotionNet::backward(const Tensor& positions, const Cache& cache, const Tensor& grad_out,
                         MlpParams& grad, Tensor* grad_positions) const {
  if (!grad_positions) {
    mlp_.backward(cache.mlp, grad_out, grad, nullptr);
    return;
  }
  Tensor grad_enc;
  mlp_.backward(cache.mlp, grad_out, grad, &grad_enc);
  const int pos_dim = 6 * config_.pos_freqs;
  grad_positions->resize(positions.rows(), 3);
  for (Eigen::Index i = 0; i < positions.rows(); ++i) {
    const double p[3] = {positions(i, 0), positions(i, 1), positions(i, 2)};
    double g[3];
    positional_encode_backward(p, config_.pos_freqs,
                               std::span<const double>(grad_enc.row(i).data(), pos_dim), g);
    (*grad_positions)(i, 0) = g[0];
    (*grad_positions)(i, 1) = g[1];
    (*grad_positions)(i, 2) = g[2];
  }
}

std::vector<RigidTransform> predict_superpoint_deformation(const DeformNet& net,
                                                           const Tensor& positions, double t) {
  return unpack_transforms(net.forward(positions, t));
}

std::vector<RigidTransform> predict_nonrigid(const NonRigidNet& net, const Tensor& positions, double t) {
  return unpack_transforms(net.forward(positions, t));
}

RigidPose apply_rigid(const Vec3& mean, const Mat3& rotation, const RigidTransform& T) {
  const Mat3 dR = so3_exp(T.omega);
  return {dR * mean + T.t, dR * rotation};
}

RigidPose compose_full(const Vec3& mean, const Mat3& rotation, const RigidTransform& rigid,
                       const RigidTransform& nonrigid) {
  const RigidPose r = apply_rigid(mean, rotation, rigid);
  const Mat3 dRh = so3_exp(nonrigid.omega);
  return {dRh * r.mean + nonrigid.t, dRh * r.rotation};
}

DeformedGaussians deform_cloud(const GaussianCloud& cloud, const Tensor& motions,
                               const std::vector<int>& assignment) {
  const int P = cloud.size();
  if (static_cast<int>(assignment.size()) != P) throw Error("assignment size mismatch");
  std::vector<Mat3> rot(static_cast<std::size_t>(motions.rows()));
  for (Eigen::Index j = 0; j < motions.rows(); ++j)
    rot[j] = so3_exp(Vec3(motions(j, 0), motions(j, 1), motions(j, 2)));
  DeformedGaussians out{Tensor(P, 3), Tensor(P, 4)};
  for (int i = 0; i < P; ++i) {
    const int j = assignment[i];
    if (j < 0 || j >= motions.rows()) throw Error("assignment index out of range");
    const Vec3 mu = rot[j] * cloud.position(i) + Vec3(motions(j, 3), motions(j, 4), motions(j, 5));
    const Quat q = rotmat_to_quat(rot[j] * quat_to_rotmat(cloud.rotation(i)));
    out.positions.row(i) = mu.transpose();
    out.rotations.row(i) << q.w, q.x, q.y, q.z;
  }
  return out;
}

void DeformationCache::validate() const {
  if (times.size() < 2) throw Error("deformation cache needs at least 2 timesteps");
  if (motions.size() != times.size()) throw Error("deformation cache size mismatch");
  for (std::size_t k = 1; k < times.size(); ++k)
    if (!(times[k] > times[k - 1])) throw Error("deformation cache times must increase");
  for (const auto& m : motions)
    if (m.rows() != motions[0].rows() || m.cols() != 6) throw Error("deformation cache shape mismatch");
}

DeformationCache build_deformation_cache(const DeformNet& net, const Tensor& positions,
                                         const std::vector<double>& times) {
  DeformationCache cache;
  cache.times = times;
  for (double t : times) cache.motions.push_back(net.forward(positions, t));
  cache.validate();
  return cache;
}

Tensor deform_at_time(const DeformationCache& cache, double t) {
  const auto& ts = cache.times;
  if (t <= ts.front()) return cache.motions.front();
  if (t >= ts.back()) return cache.motions.back();
  const auto hi = static_cast<std::size_t>(std::upper_bound(ts.begin(), ts.end(), t) - ts.begin());
  const std::size_t lo = hi - 1;
  if (t == ts[lo]) return cache.motions[lo];
  const double w = (t - ts[lo]) / (ts[hi] - ts[lo]);
  const Tensor& a = cache.motions[lo];
  const Tensor& b = cache.motions[hi];
  Tensor out(a.rows(), 6);
  for (Eigen::Index j = 0; j < a.rows(); ++j)
    set_transform_row(out, j, interpolate_rigid(transform_row(a, j), transform_row(b, j), w));
  return out;
}

}  // namespace spgs
