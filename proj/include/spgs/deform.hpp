// Copyright Contributors to the spgs Project
// SPDX-License-Identifier: Apache-2.0
//
// Time-conditioned motion networks, rigid transform application and the
// interpolation cache used for network-free inference.
#pragma once

#include <utility>
#include <vector>

#include "spgs/geom.hpp"
#include "spgs/mlp.hpp"
#include "spgs/scene.hpp"

namespace spgs {

/// Motion rows are packed as N×6 tensors: (ω_x, ω_y, ω_z, t_x, t_y, t_z).
RigidTransform transform_row(const Tensor& motions, Eigen::Index row);
void set_transform_row(Tensor& motions, Eigen::Index row, const RigidTransform& T);
Tensor pack_transforms(const std::vector<RigidTransform>& transforms);
std::vector<RigidTransform> unpack_transforms(const Tensor& motions);

struct MotionNetConfig {
  int width = 256;
  int depth = 8;
  int pos_freqs = 10;
  int time_freqs = 6;

  int input_dim() const { return 3 * 2 * pos_freqs + 2 * time_freqs; }
  static MotionNetConfig superpoint_default() { return {}; }
  static MotionNetConfig nonrigid_default() { return {64, 3, 10, 6}; }
};

/// Maps (γ(position), γ(t)) to a rigid motion per row. The output layer is
/// zero at construction, so a fresh network predicts the identity.
class MotionNet {
 public:
  struct Cache {
    Tensor encoded;
    Mlp::Cache mlp;
  };

  MotionNet() = default;
  MotionNet(const MotionNetConfig& config, std::uint64_t seed);

  const MotionNetConfig& config() const { return config_; }
  Mlp& mlp() { return mlp_; }
  const Mlp& mlp() const { return mlp_; }

  Tensor encode(const Tensor& positions, double t) const;
  Tensor forward(const Tensor& positions, double t, Cache* cache = nullptr) const;
  void backward(const Tensor& positions, const Cache& cache, const Tensor& grad_out,
                MlpParams& grad, Tensor* grad_positions) const;

 private:
  MotionNetConfig config_;
  Mlp mlp_;
};

using DeformNet = MotionNet;
using NonRigidNet = MotionNet;

std::vector<RigidTransform> predict_superpoint_deformation(const DeformNet& net,
                                                           const Tensor& positions, double t);
std::vector<RigidTransform> predict_nonrigid(const NonRigidNet& net, const Tensor& positions, double t);

struct RigidPose {
  Vec3 mean;
  Mat3 rotation;
};

/// μᵗ = ΔR μ^c + Δt, Rᵗ = ΔR R^c.
RigidPose apply_rigid(const Vec3& mean, const Mat3& rotation, const RigidTransform& T);
/// μᵗ = ΔR̂ (ΔR μ^c + Δt) + Δt̂, Rᵗ = ΔR̂ ΔR R^c.
RigidPose compose_full(const Vec3& mean, const Mat3& rotation, const RigidTransform& rigid,
                       const RigidTransform& nonrigid);

struct DeformedGaussians {
  Tensor positions;  // P×3
  Tensor rotations;  // P×4 unit quaternions
};

/// Moves every Gaussian by its assigned superpoint's motion; scales,
/// opacities and colors are untouched.
DeformedGaussians deform_cloud(const GaussianCloud& cloud, const Tensor& motions,
                               const std::vector<int>& assignment);

/// Per-training-timestep superpoint motions.
struct DeformationCache {
  std::vector<double> times;    // strictly increasing
  std::vector<Tensor> motions;  // one M×6 tensor per time

  int superpoint_count() const { return motions.empty() ? 0 : static_cast<int>(motions[0].rows()); }
  void validate() const;
};

DeformationCache build_deformation_cache(const DeformNet& net, const Tensor& positions,
                                         const std::vector<double>& times);
/// Linear interpolation between the two bracketing cached times; t is
/// clamped to the cached range.
Tensor deform_at_time(const DeformationCache& cache, double t);

}  // namespace spgs
