// Copyright Contributors to the spgs Project
// SPDX-License-Identifier: Apache-2.0
//
// Training: the superpoint pipeline with warm-up and adaptive density
// control, the non-rigid refinement stage, distillation from per-Gaussian
// trajectories, and superpoint pose estimation.
#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "spgs/model.hpp"
#include "spgs/optim.hpp"

namespace spgs {

struct GaussianLearningRates {
  double position_init = 1.6e-4;  // multiplied by the scene extent
  double position_final = 1.6e-6;
  double scale = 5e-3;
  double rotation = 1e-3;
  double opacity = 5e-2;
  double sh_dc = 2.5e-3;
  double sh_rest = 2.5e-3 / 20.0;
  double association = 5e-3;
};

struct TrainConfig {
  int total_iters = 40000;
  int warmup_iters = 3000;
  bool warmup = true;
  bool property_loss = true;
  /// Differentiate the superpoint canonical positions through the association.
  bool live_canonical = true;
  LossWeights weights;

  int superpoints = 300;
  int knn = 5;
  int knn_refresh_interval = 100;
  MotionNetConfig deform_net = MotionNetConfig::superpoint_default();
  double deform_lr_init = 1e-3;
  double deform_lr_final = 1e-5;
  GaussianLearningRates lr;
  AdamConfig adam;

  int sh_degree = 3;
  int sh_increase_interval = 1000;

  int densify_from = 600;
  int densify_until = 15000;
  int densify_interval = 100;
  int opacity_reset_interval = 3000;
  double densify_grad_threshold = 2e-4;
  double percent_dense = 0.01;
  double prune_opacity = 0.005;
  double max_screen_radius = 20.0;  // pixels; applied after the first opacity reset

  /// Random initial cloud when the dataset has no points.
  int random_init_points = 10000;
  double random_init_extent = 1.3;

  /// Non-rigid refinement stage (0 disables).
  int nonrigid_iters = 0;
  MotionNetConfig nonrigid_net = MotionNetConfig::nonrigid_default();

  RasterConfig raster;
  std::uint64_t seed = 0;

  /// Densify schedule of the synthetic-scene profile (the defaults).
  static TrainConfig synthetic_profile() { return {}; }
  /// Sparser densify and reset schedule for real captures.
  static TrainConfig real_profile();
  /// Scales every iteration-count field by total / total_iters.
  TrainConfig scaled(int total) const;
  void validate() const;
};

struct IterationLog {
  int iter = 0;
  LossTerms loss;
  int gaussians = 0;
  bool warmup = false;
};

using TrainCallback = std::function<void(const IterationLog&, const SpgsModel&)>;

struct DensifyStats {
  std::vector<double> grad_accum;
  std::vector<int> denom;
  std::vector<double> max_radii;

  void reset(int count);
  void add(const std::vector<Projected2D>& projected, const std::vector<Vec2>& mean2d_grad,
           int width, int height);
};

/// Per-row optimizer state for the Gaussian parameters.
struct GaussianOptimizer {
  AdamState positions, log_scales, rotations, opacity, sh_dc, sh_rest, logits;

  /// Row r of the new layout takes old row src[r] (or fresh zeros when -1).
  void remap_rows(const std::vector<int>& src);
};

/// Clone/split/prune after 3D-GS. New rows copy their parent's association.
/// Returns the source row of every output row (-1 for newly created
/// Gaussians). Throws "empty cloud" and leaves everything untouched when
/// pruning would remove every Gaussian.
std::vector<int> densify_and_prune(GaussianCloud& cloud, SuperpointModel* superpoints,
                                   const DensifyStats& stats, const TrainConfig& cfg,
                                   double extent, bool prune_large, std::mt19937_64& rng);

/// Initial cloud: dataset points, else uniform random points in a cube.
GaussianCloud initial_cloud(const Dataset& data, const TrainConfig& cfg, std::mt19937_64& rng);

struct TrainResult {
  SpgsModel model;
  std::vector<IterationLog> log;
};

TrainResult train_spgs(const Dataset& data, const TrainConfig& cfg, const TrainCallback& cb = {});

/// Adds 𝒢 (zero-initialized) and trains everything on the image loss only.
std::vector<IterationLog> train_nonrigid_stage(SpgsModel& model, const Dataset& data,
                                               const TrainConfig& cfg, int iters,
                                               const TrainCallback& cb = {});

struct FrameMetrics {
  std::string name;
  double time = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct EvalResult {
  std::vector<FrameMetrics> frames;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
};

EvalResult evaluate(const SpgsModel& model, const std::vector<Frame>& frames, MotionSource source,
                    const Vec3& background, const RasterConfig& raster = {});

/// Teacher state: per timestep, per-Gaussian positions and rotations.
struct Trajectories {
  std::vector<double> times;
  std::vector<Tensor> positions;  // T × (P×3)
  std::vector<Tensor> rotations;  // T × (P×4), unit quaternions
  int gaussians() const { return positions.empty() ? 0 : static_cast<int>(positions[0].rows()); }
  void validate() const;
};

/// Per-Gaussian trajectories of a model at the given times.
Trajectories export_trajectories(const SpgsModel& model, const std::vector<double>& times,
                                 MotionSource source);

struct DistillConfig {
  int iters = 3000;
  int superpoints = 300;
  int knn = 5;
  MotionNetConfig deform_net = MotionNetConfig::superpoint_default();
  double deform_lr_init = 1e-3;
  double deform_lr_final = 1e-5;
  double association_lr = 5e-3;
  LossWeights weights;
  bool image_loss = true;
  /// Warm start for the association instead of farthest point sampling.
  const SuperpointModel* initial_superpoints = nullptr;
  RasterConfig raster;
  std::uint64_t seed = 0;
};

struct DistillResult {
  SpgsModel model;
  std::vector<double> err_trace;  // ℒ_err per iteration
  double final_err = 0.0;         // mean ℒ_err over all timesteps at the end
};

/// The student copies the teacher's canonical cloud and learns 𝒜 and ℱ.
DistillResult distill(const GaussianCloud& teacher_cloud, const Trajectories& traj,
                      const Dataset* data, const DistillConfig& cfg);

struct PoseConfig {
  int iters = 1000;
  double lr_init = 1e-2;
  double lr_final = 1e-4;
  double dssim = 0.2;
  RasterConfig raster;
};

struct PoseResult {
  std::string name;
  double time = 0.0;
  Tensor motions;  // M×6
  double psnr = 0.0;
};

/// Optimizes only the M superpoint transforms for each frame in order.
std::vector<PoseResult> estimate_pose(const SpgsModel& model, const std::vector<Frame>& frames,
                                      const Vec3& background, const PoseConfig& cfg = {});

}  // namespace spgs
