// Copyright Contributors to the spgs Project
// SPDX-License-Identifier: Apache-2.0
//
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <random>

#include "spgs/io.hpp"
#include "spgs/sh.hpp"

namespace spgs {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr double kClusterRing = 0.6;
constexpr double kClusterRadius = 0.35;

Vec3 cluster_center(int c, int clusters) {
  if (clusters == 1) return Vec3::Zero();
  const double a = 2.0 * M_PI * c / clusters;
  return {kClusterRing * std::cos(a), kClusterRing * std::sin(a), 0.0};
}

RigidTransform about_pivot(const Vec3& omega, const Vec3& pivot) {
  RigidTransform T;
  T.omega = omega;
  T.t = pivot - so3_exp(omega) * pivot;
  return T;
}

RigidTransform cluster_motion(ToyMotion m, const Vec3& center, double tau) {
  switch (m) {
    case ToyMotion::translate: {
      RigidTransform T;
      T.t = tau * Vec3(0.0, 0.3, 0.4);
      return T;
    }
    case ToyMotion::rotate:
      return about_pivot(Vec3(0.0, 0.0, 0.5 * M_PI * tau), center);
    case ToyMotion::hinge:
      return about_pivot(Vec3(M_PI / 3.0 * tau, 0.0, 0.0), center - Vec3(0.0, 0.0, kClusterRadius));
  }
  return {};
}

// Camera centers on a golden-angle spiral over most of the sphere.
std::vector<Vec3> camera_eyes(int n, double radius) {
  std::vector<Vec3> eyes;
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 0.8 - 1.3 * (i + 0.5) / n;
    const double r = std::sqrt(1.0 - z * z);
    eyes.emplace_back(radius * r * std::cos(golden * i), radius * r * std::sin(golden * i), radius * z);
  }
  return eyes;
}

json camera_json(const Camera& cam) {
  // Stored camera-to-world in the OpenGL convention of the dataset loader.
  const Mat3 R = cam.rotation();
  Mat4 c2w = Mat4::Identity();
  c2w.topLeftCorner<3, 3>() = R.transpose();
  c2w.topRightCorner<3, 1>() = cam.center();
  c2w.col(1) *= -1.0;
  c2w.col(2) *= -1.0;
  json m = json::array();
  for (int r = 0; r < 4; ++r) m.push_back({c2w(r, 0), c2w(r, 1), c2w(r, 2), c2w(r, 3)});
  return m;
}

}  // namespace

ToyMotion parse_toy_motion(const std::string& name) {
  if (name == "translate") return ToyMotion::translate;
  if (name == "rotate") return ToyMotion::rotate;
  if (name == "hinge") return ToyMotion::hinge;
  throw Error("unknown toy motion " + name);
}

std::string toy_motion_name(ToyMotion m) {
  switch (m) {
    case ToyMotion::translate: return "translate";
    case ToyMotion::rotate: return "rotate";
    case ToyMotion::hinge: return "hinge";
  }
  return "?";
}

ToyScene generate_toy_scene(const ToySpec& spec) {
  if (spec.clusters < 1 || spec.per_cluster < 1 || spec.motions.empty()) throw Error("invalid toy spec");
  if (spec.timesteps < 2) throw Error("toy scene needs at least 2 timesteps");
  if (spec.train_cameras < 1 || spec.test_cameras < 0 || spec.width < 11 || spec.height < 11)
    throw Error("invalid toy camera spec");
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n01(0.0, 1.0);

  ToyScene scene;
  scene.spec = spec;
  const int C = spec.clusters, P = C * spec.per_cluster;
  GaussianCloud& cloud = scene.cloud;
  cloud = GaussianCloud(P, 0);
  for (int c = 0; c < C; ++c) {
    const Vec3 center = cluster_center(c, C);
    for (int k = 0; k < spec.per_cluster; ++k) {
      const int i = c * spec.per_cluster + k;
      Vec3 d(n01(rng), n01(rng), n01(rng));
      d = d.normalized() * kClusterRadius * std::cbrt(u(rng));
      cloud.positions.row(i) = (center + d).transpose();
      for (int a = 0; a < 3; ++a) cloud.log_scales(i, a) = std::log(0.04 + 0.05 * u(rng));
      Vec4 q(n01(rng), n01(rng), n01(rng), n01(rng));
      cloud.rotations.row(i) = q.normalized().transpose();
      cloud.opacity_logits(i, 0) = inverse_sigmoid(0.7 + 0.25 * u(rng));
      for (int ch = 0; ch < 3; ++ch) cloud.sh(i, ch) = rgb_to_sh0(0.1 + 0.8 * u(rng));
      scene.labels.push_back(c);
    }
  }

  // Ground truth as a model with one superpoint per cluster.
  SpgsModel gt;
  gt.cloud = cloud;
  SuperpointModel sp;
  sp.positions.resize(C, 3);
  for (int c = 0; c < C; ++c) sp.positions.row(c) = cluster_center(c, C).transpose();
  sp.neighbors.resize(P, 1);
  sp.logits = Tensor::Zero(P, 1);
  for (int i = 0; i < P; ++i) sp.neighbors(i, 0) = scene.labels[i];
  gt.superpoints = sp;

  for (int k = 0; k < spec.timesteps; ++k) {
    const double tau = static_cast<double>(k) / (spec.timesteps - 1);
    Tensor m(C, 6);
    for (int c = 0; c < C; ++c)
      set_transform_row(m, c, cluster_motion(spec.motions[c % spec.motions.size()], cluster_center(c, C), tau));
    scene.times.push_back(tau);
    scene.motions.push_back(std::move(m));
  }

  const int ncam = spec.train_cameras + spec.test_cameras;
  const auto eyes = camera_eyes(ncam, spec.camera_radius);
  const int stride = spec.test_cameras > 0 ? std::max(1, ncam / spec.test_cameras) : 0;
  int tests = 0;
  Dataset& data = scene.data;
  data.background = Vec3::Ones();
  for (int cam_i = 0; cam_i < ncam; ++cam_i) {
    const bool test = stride > 0 && tests < spec.test_cameras && cam_i % stride == stride / 2;
    tests += test;
    const Camera cam = look_at_camera(eyes[cam_i], Vec3::Zero(), Vec3::UnitZ(), spec.fov_x, spec.width, spec.height);
    for (int k = 0; k < spec.timesteps; ++k) {
      PassOptions opt;
      opt.source = MotionSource::explicit_motions;
      opt.motions = &scene.motions[k];
      opt.background = data.background;
      Frame f;
      char name[64];
      std::snprintf(name, sizeof name, "%s/c%02d_t%03d.png", test ? "test" : "train", cam_i, k);
      f.name = name;
      f.camera = cam;
      f.time = scene.times[k];
      f.image = run_pass(gt, cam, f.time, nullptr, opt).render.image;
      (test ? data.test_frames : data.train_frames).push_back(std::move(f));
    }
  }
  data.finalize();
  return scene;
}

void write_toy_scene(const ToyScene& scene, const std::string& dir) {
  const fs::path root(dir);
  fs::create_directories(root / "train");
  fs::create_directories(root / "test");
  const double fov = scene.spec.fov_x;
  for (const auto& [file, frames] : {std::pair{"transforms_train.json", &scene.data.train_frames},
                                     std::pair{"transforms_test.json", &scene.data.test_frames}}) {
    json j;
    j["camera_angle_x"] = fov;
    j["background"] = {scene.data.background[0], scene.data.background[1], scene.data.background[2]};
    j["frames"] = json::array();
    for (const Frame& f : *frames) {
      save_image((root / f.name).string(), *f.image);
      j["frames"].push_back({{"file_path", "./" + f.name}, {"time", f.time}, {"transform_matrix", camera_json(f.camera)}});
    }
    std::ofstream(root / file) << j.dump(2) << "\n";
  }
  save_ply((root / "gt_cloud.ply").string(), scene.cloud);
  json gt;
  gt["clusters"] = scene.spec.clusters;
  gt["labels"] = scene.labels;
  gt["times"] = scene.times;
  json motions = json::array();
  for (int c = 0; c < scene.spec.clusters; ++c)
    motions.push_back(toy_motion_name(scene.spec.motions[c % scene.spec.motions.size()]));
  gt["motion_types"] = motions;
  json tr = json::array();
  for (const Tensor& m : scene.motions) {
    json per_t = json::array();
    for (Eigen::Index c = 0; c < m.rows(); ++c)
      per_t.push_back({m(c, 0), m(c, 1), m(c, 2), m(c, 3), m(c, 4), m(c, 5)});
    tr.push_back(per_t);
  }
  gt["transforms"] = tr;
  gt["seed"] = scene.spec.seed;
  std::ofstream(root / "gt_motion.json") << gt.dump(2) << "\n";
}

ToyScene load_toy_ground_truth(const std::string& dir) {
  const fs::path root(dir);
  std::ifstream in(root / "gt_motion.json");
  if (!in) throw Error("missing gt_motion.json in " + dir);
  json gt;
  try {
    gt = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(std::string("invalid gt_motion.json: ") + e.what());
  }
  ToyScene s;
  s.cloud = load_ply((root / "gt_cloud.ply").string());
  s.spec.clusters = gt.at("clusters").get<int>();
  s.labels = gt.at("labels").get<std::vector<int>>();
  s.times = gt.at("times").get<std::vector<double>>();
  s.spec.motions.clear();
  for (const auto& m : gt.at("motion_types")) s.spec.motions.push_back(parse_toy_motion(m.get<std::string>()));
  for (const auto& per_t : gt.at("transforms")) {
    Tensor m(static_cast<Eigen::Index>(per_t.size()), 6);
    for (std::size_t c = 0; c < per_t.size(); ++c)
      for (int k = 0; k < 6; ++k) m(c, k) = per_t[c][k].get<double>();
    s.motions.push_back(std::move(m));
  }
  if (static_cast<int>(s.labels.size()) != s.cloud.size() || s.motions.size() != s.times.size())
    throw Error("inconsistent toy ground truth");
  return s;
}

}  // namespace spgs
