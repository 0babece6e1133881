// Copyright Contributors to the spgs Project
// SPDX-License-Identifier: Apache-2.0
//
// Serialization (PLY, dataset JSON, PNG, checkpoints, trajectories), scene
// edit scripts, and the synthetic toy-scene generator.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spgs/model.hpp"
#include "spgs/train.hpp"

namespace spgs {

// ---- PLY ------------------------------------------------------------------

/// Optional per-vertex 8-bit color written as red/green/blue properties.
struct PlyColors {
  std::vector<std::array<std::uint8_t, 3>> rgb;
};

void save_ply(const std::string& path, const GaussianCloud& cloud, const PlyColors* colors = nullptr);
GaussianCloud load_ply(const std::string& path);

// ---- Images ---------------------------------------------------------------

/// 8-bit RGB PNG, values clamped to [0, 1] and rounded to v·255.
void save_image(const std::string& path, const Image& image);
/// Any 8-bit PNG; alpha, when present, is composited over background.
Image load_image(const std::string& path, const Vec3& background = Vec3::Ones());

// ---- Dataset --------------------------------------------------------------

/// transforms_train.json (required) and transforms_test.json (optional).
/// Extra keys: "background" [r, g, b], "camera_convention" ("opengl" or
/// "opencv"), "points" (PLY path for the initial cloud), "w"/"h" for frames
/// without images.
Dataset load_dataset(const std::string& dir);

// ---- Checkpoint -----------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Stores everything as little-endian f32 (indices as i32).
void save_checkpoint(const std::string& path, const SpgsModel& model);
SpgsModel load_checkpoint(const std::string& path);

// ---- Trajectories ---------------------------------------------------------

inline constexpr std::uint32_t kTrajectoryVersion = 1;

void save_trajectories(const std::string& path, const Trajectories& traj);
Trajectories load_trajectories(const std::string& path);

// ---- Edits ----------------------------------------------------------------

struct EditOp {
  enum class Kind { remove, transform, merge };
  Kind kind = Kind::remove;
  std::vector<int> superpoints;
  RigidTransform transform;
  std::string path;  // merge: checkpoint to bring in
};

using EditScript = std::vector<EditOp>;

EditScript parse_edit_script(const std::string& json_text);
EditScript load_edit_script(const std::string& path);

/// Removes the listed superpoints and every Gaussian assigned to them.
void delete_superpoints(SpgsModel& model, const std::vector<int>& ids);
/// Moves the listed superpoints and their Gaussians by T at every time. The
/// model becomes cache-only.
void transform_superpoints(SpgsModel& model, const std::vector<int>& ids, const RigidTransform& T);
/// Appends `other` (moved by T) with superpoint ids offset by the current count.
void merge_models(SpgsModel& model, SpgsModel other, const RigidTransform& T);
/// Applies ops in order; merge paths are resolved against base_dir.
void apply_edit_script(SpgsModel& model, const EditScript& script, const std::string& base_dir = ".");

// ---- Toy scenes -----------------------------------------------------------

enum class ToyMotion { translate, rotate, hinge };

struct ToySpec {
  int clusters = 2;
  int per_cluster = 100;
  std::vector<ToyMotion> motions = {ToyMotion::translate, ToyMotion::rotate};  // cycled over clusters
  int timesteps = 20;
  int train_cameras = 8;
  int test_cameras = 2;
  int width = 64;
  int height = 64;
  double camera_radius = 4.0;
  double fov_x = 0.6981317007977318;  // 40°
  std::uint64_t seed = 0;
};

ToyMotion parse_toy_motion(const std::string& name);
std::string toy_motion_name(ToyMotion m);

struct ToyScene {
  ToySpec spec;
  Dataset data;
  GaussianCloud cloud;      // ground-truth canonical cloud
  std::vector<int> labels;  // cluster per Gaussian
  std::vector<double> times;
  std::vector<Tensor> motions;  // per time, clusters×6
};

ToyScene generate_toy_scene(const ToySpec& spec);
/// transforms_{train,test}.json, PNGs, gt_cloud.ply and gt_motion.json.
void write_toy_scene(const ToyScene& scene, const std::string& dir);
/// Reads gt_cloud.ply and gt_motion.json back (data left empty).
ToyScene load_toy_ground_truth(const std::string& dir);

}  // namespace spgs
