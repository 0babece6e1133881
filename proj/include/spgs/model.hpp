// Copyright Contributors to the spgs Project
// SPDX-License-Identifier: Apache-2.0
//
// A complete dynamic scene (canonical Gaussians, superpoints, motion
// networks, optional deformation cache) and the differentiable pass that
// renders it at time t and back-propagates the training loss into every
// parameter class.
#pragma once

#include <optional>
#include <vector>

#include "spgs/deform.hpp"
#include "spgs/rasterizer.hpp"
#include "spgs/superpoint.hpp"

namespace spgs {

struct SpgsModel {
  GaussianCloud cloud;
  std::optional<SuperpointModel> superpoints;  // absent until warm-up ends
  DeformNet deform;
  std::optional<NonRigidNet> nonrigid;
  std::vector<double> train_times;
  std::optional<DeformationCache> cache;
  /// Set once edits or merges make the network path meaningless.
  bool cache_only = false;

  bool has_superpoints() const { return superpoints.has_value(); }
  /// Gaussian → superpoint hard assignment.
  std::vector<int> assignment() const;
  void build_cache();
  /// Rounds every parameter to the nearest float, matching what a checkpoint stores.
  void quantize_to_float();
};

enum class MotionSource {
  canonical,  // render the undeformed cloud
  network,    // evaluate the superpoint deformation network at t
  cache,      // interpolate the deformation cache
  explicit_motions,
};

struct LossWeights {
  double dssim = 0.2;
  double position = 1e-3;
  double rotation = 1.0;
  double translation = 1.0;
  double distill_position = 1.0;
  double distill_rotation = 1.0;
};

/// Per-Gaussian teacher state at one time for distillation.
struct DistillTarget {
  Tensor positions;  // P×3
  Tensor relative_rotations;  // P×3, log(R_teacher · R_canonicalᵀ)
};

struct PassOptions {
  MotionSource source = MotionSource::network;
  /// Recompute superpoint canonical positions from the association (and
  /// differentiate through it) instead of using the stored ones.
  bool live_canonical = false;
  bool property_loss = true;
  bool use_nonrigid = true;
  int sh_degree = -1;  // -1: the cloud's degree
  const Tensor* motions = nullptr;  // for explicit_motions
  const DistillTarget* distill = nullptr;
  LossWeights weights;
  RasterConfig raster;
  Vec3 background = Vec3::Ones();
};

struct LossTerms {
  double image = 0.0;
  double position = 0.0;
  double rotation = 0.0;
  double translation = 0.0;
  double distill = 0.0;
  double total = 0.0;
};

struct ModelGrads {
  Tensor positions, log_scales, rotations, opacity_logits, sh;
  Tensor logits;
  MlpParams deform;
  MlpParams nonrigid;
  Tensor motions;            // dL/d(superpoint motions), M×6
  std::vector<Vec2> mean2d;  // dL/dμ' per Gaussian (pixels)
};

struct PassResult {
  RenderOutput render;
  std::vector<Projected2D> projected;
  LossTerms loss;
  Tensor motions;  // superpoint motions used (empty for canonical renders)
};

/// Renders `model` from `cam` at time t. With a target image the loss is
/// evaluated, and with grads non-null the full reverse pass runs.
PassResult run_pass(const SpgsModel& model, const Camera& cam, double t, const Image* target,
                    const PassOptions& opt, ModelGrads* grads = nullptr);

/// Render-only convenience.
RenderOutput render(const SpgsModel& model, const Camera& cam, double t, MotionSource source,
                    const Vec3& background, const RasterConfig& raster = {});

/// Superpoint motions at time t from the chosen source.
Tensor superpoint_motions(const SpgsModel& model, double t, MotionSource source);

}  // namespace spgs
