// Copyright Contributors to the spgs Project
// SPDX-License-Identifier: Apache-2.0
//
#include <gtest/gtest.h>

#include <chrono>
#include <cstring>
#include <fstream>
#include <random>

#include "spgs/io.hpp"
#include "spgs/sh.hpp"
#include "spgs/train.hpp"
#include "support.hpp"

namespace spgs {
namespace {

using testing::TempDir;

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream(path, std::ios::binary) << bytes;
}

void put_f32(std::string& out, float v) {
  char b[4];
  std::memcpy(b, &v, 4);  // little-endian host
  out.append(b, 4);
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

ToySpec tiny_toy() {
  ToySpec s;
  s.per_cluster = 30;
  s.timesteps = 4;
  s.train_cameras = 3;
  s.test_cameras = 1;
  s.width = 24;
  s.height = 24;
  return s;
}

TrainConfig tiny_config(int iters) {
  TrainConfig c = TrainConfig{}.scaled(iters);
  c.superpoints = 6;
  c.knn = 3;
  c.deform_net = {32, 4, 4, 3};
  c.random_init_points = 300;
  c.sh_degree = 1;
  return c;
}

/// Small trained model with perturbed networks so every motion is nontrivial.
SpgsModel small_model() {
  static const SpgsModel cached = [] {
    const ToyScene toy = generate_toy_scene(tiny_toy());
    SpgsModel m = train_spgs(toy.data, tiny_config(40)).model;
    std::mt19937_64 rng(11);
    testing::randomize(m.deform.mlp().params(), rng, 0.05);
    m.build_cache();
    return m;
  }();
  return cached;
}

// ---- PLY ----------------------------------------------------------------------

TEST(Ply, RoundTripBitExactAfterFloatRounding) {
  TempDir dir("ply");
  std::mt19937_64 rng(1);
  for (int degree : {0, 1, 3}) {
    GaussianCloud c = testing::random_cloud(17, degree, rng);
    save_ply(dir.file("c.ply"), c);
    const GaussianCloud l = load_ply(dir.file("c.ply"));
    EXPECT_EQ(l.sh_degree, degree);
    auto f = [](const Tensor& t) { return Tensor(t.cast<float>().cast<double>()); };
    EXPECT_TRUE(bit_equal(l.positions, f(c.positions)));
    EXPECT_TRUE(bit_equal(l.log_scales, f(c.log_scales)));
    EXPECT_TRUE(bit_equal(l.rotations, f(c.rotations)));
    EXPECT_TRUE(bit_equal(l.opacity_logits, f(c.opacity_logits)));
    EXPECT_TRUE(bit_equal(l.sh, f(c.sh)));
  }
}

TEST(Ply, DegreeZeroHasNoRestCoefficients) {
  TempDir dir("ply0");
  std::mt19937_64 rng(2);
  save_ply(dir.file("c.ply"), testing::random_cloud(3, 0, rng));
  const std::string text = read_bytes(dir.file("c.ply"));
  EXPECT_EQ(text.find("f_rest"), std::string::npos);
  // 3 xyz + 3 normals + 3 dc + opacity + 3 scales + 4 rotation floats.
  const std::size_t body = text.find("end_header\n") + 11;
  EXPECT_EQ(text.size() - body, 3u * 17u * 4u);
}

std::string handmade_header(int count, bool with_rot = true) {
  std::string h = "ply\nformat binary_little_endian 1.0\ncomment hand written\nelement vertex " +
                  std::to_string(count) + "\n";
  for (const char* n : {"x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0", "scale_1", "scale_2"})
    h += std::string("property float ") + n + "\n";
  if (with_rot)
    for (const char* n : {"rot_0", "rot_1", "rot_2", "rot_3"}) h += std::string("property float ") + n + "\n";
  h += "property uchar red\n";
  return h + "end_header\n";
}

TEST(Ply, HandWrittenTwoPointFile) {
  TempDir dir("plyhand");
  std::string bytes = handmade_header(2);
  const float rows[2][14] = {{1.0f, 2.0f, 3.0f, 0.5f, -0.5f, 0.25f, 2.0f, -1.0f, -2.0f, -3.0f, 1.0f, 0.0f, 0.0f, 0.0f},
                             {-1.5f, 0.0f, 4.0f, 0.0f, 0.0f, 0.0f, -1.0f, 0.0f, 0.0f, 0.0f, 0.0f, 0.0f, 0.0f, 2.0f}};
  for (const auto& r : rows) {
    for (float v : r) put_f32(bytes, v);
    bytes.push_back(static_cast<char>(200));
  }
  write_bytes(dir.file("h.ply"), bytes);
  const GaussianCloud c = load_ply(dir.file("h.ply"));
  ASSERT_EQ(c.size(), 2);
  EXPECT_EQ(c.sh_degree, 0);
  EXPECT_EQ(c.position(0), Vec3(1.0, 2.0, 3.0));
  EXPECT_EQ(c.position(1), Vec3(-1.5, 0.0, 4.0));
  EXPECT_EQ(c.sh(0, 0), 0.5);
  EXPECT_EQ(c.sh(0, 1), -0.5);
  EXPECT_EQ(c.sh(0, 2), 0.25);
  EXPECT_EQ(c.opacity_logits(0, 0), 2.0);
  EXPECT_EQ(c.opacity_logits(1, 0), -1.0);
  EXPECT_EQ(c.log_scales(0, 2), -3.0);
  EXPECT_EQ(c.rotations(0, 0), 1.0);
  EXPECT_EQ(c.rotations(1, 3), 2.0);
}

TEST(Ply, Errors) {
  TempDir dir("plyerr");
  std::string no_rot = handmade_header(1, false);
  for (int k = 0; k < 10; ++k) put_f32(no_rot, 0.0f);
  no_rot.push_back(0);
  write_bytes(dir.file("a.ply"), no_rot);
  try {
    load_ply(dir.file("a.ply"));
    FAIL() << "missing property accepted";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("missing property rot_0"), std::string::npos);
  }

  write_bytes(dir.file("b.ply"), "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nend_header\n0\n");
  EXPECT_THROW(load_ply(dir.file("b.ply")), Error);
  write_bytes(dir.file("c.ply"), "not a ply file");
  try {
    load_ply(dir.file("c.ply"));
    FAIL() << "garbage accepted";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("malformed ply header"), std::string::npos);
  }

  // Header promises 3 vertices, body holds 2.
  std::string short_body = handmade_header(3);
  for (int k = 0; k < 2 * 14; ++k) put_f32(short_body, 0.0f);
  short_body.append(2, '\0');
  write_bytes(dir.file("d.ply"), short_body);
  try {
    load_ply(dir.file("d.ply"));
    FAIL() << "short body accepted";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("wrong element count"), std::string::npos);
  }
}

TEST(Ply, ColorsAreAppended) {
  TempDir dir("plycol");
  std::mt19937_64 rng(4);
  const GaussianCloud c = testing::random_cloud(2, 0, rng);
  PlyColors colors;
  colors.rgb = {{255, 0, 10}, {1, 2, 3}};
  save_ply(dir.file("c.ply"), c, &colors);
  const std::string text = read_bytes(dir.file("c.ply"));
  EXPECT_NE(text.find("property uchar red"), std::string::npos);
  EXPECT_EQ(static_cast<unsigned char>(text[text.size() - 3]), 1);
  EXPECT_EQ(static_cast<unsigned char>(text.back()), 3);
  EXPECT_NO_THROW(load_ply(dir.file("c.ply")));
  colors.rgb.pop_back();
  EXPECT_THROW(save_ply(dir.file("x.ply"), c, &colors), Error);
}

// ---- PNG ------------------------------------------------------------------------

TEST(Png, QuantizesToBytes) {
  TempDir dir("png");
  Image img(4, 3, 0.0);
  img.at(1, 0, 0) = 0.5;
  img.at(2, 1, 1) = 1.2;
  img.at(3, 2, 2) = -0.3;
  img.at(0, 2, 1) = 1.0;
  save_image(dir.file("a.png"), img);
  const Image l = load_image(dir.file("a.png"));
  ASSERT_EQ(l.width, 4);
  ASSERT_EQ(l.height, 3);
  EXPECT_EQ(l.at(1, 0, 0), 128.0 / 255.0);
  EXPECT_EQ(l.at(2, 1, 1), 1.0);
  EXPECT_EQ(l.at(3, 2, 2), 0.0);
  EXPECT_EQ(l.at(0, 2, 1), 1.0);
  EXPECT_EQ(l.at(0, 0, 0), 0.0);
}

TEST(Png, BlackRoundTripAndByteStability) {
  TempDir dir("png2");
  save_image(dir.file("b.png"), Image(5, 5, 0.0));
  const Image l = load_image(dir.file("b.png"));
  for (double v : l.data) EXPECT_EQ(v, 0.0);
  std::mt19937_64 rng(5);
  const Image r = testing::random_image(7, 6, rng);
  save_image(dir.file("r.png"), r);
  const Image r1 = load_image(dir.file("r.png"));
  save_image(dir.file("r2.png"), r1);
  EXPECT_EQ(load_image(dir.file("r2.png")).data, r1.data);
  EXPECT_LE(testing::max_abs_diff(r, r1), 0.5 / 255.0 + 1e-12);
  EXPECT_THROW(load_image(dir.file("missing.png")), Error);
}

// ---- Dataset ----------------------------------------------------------------------

void write_two_frame_dataset(const TempDir& dir, const std::string& convention) {
  save_image(dir.file("f0.png"), Image(800, 2, 0.25));
  save_image(dir.file("f1.png"), Image(800, 2, 0.75));
  std::ofstream j(dir.file("transforms_train.json"));
  j << R"({"camera_angle_x": 1.5707963267948966, "background": [0, 0, 0],)";
  if (!convention.empty()) j << R"("camera_convention": ")" << convention << R"(",)";
  j << R"("frames": [
    {"file_path": "./f0.png", "time": 3.0,
     "transform_matrix": [[1,0,0,0],[0,1,0,0],[0,0,1,0],[0,0,0,1]]},
    {"file_path": "./f1", "time": 5.0,
     "transform_matrix": [[1,0,0,1],[0,1,0,2],[0,0,1,3],[0,0,0,1]]}]})";
}

TEST(Dataset, TwoFrameFixture) {
  TempDir dir("ds");
  write_two_frame_dataset(dir, "opencv");
  const Dataset d = load_dataset(dir.path.string());
  ASSERT_EQ(d.train_frames.size(), 2u);
  EXPECT_TRUE(d.test_frames.empty());
  EXPECT_EQ(d.train_frames[0].time, 0.0);
  EXPECT_EQ(d.train_frames[1].time, 1.0);
  const Camera& c0 = d.train_frames[0].camera;
  EXPECT_TRUE(c0.world_to_camera.isApprox(Mat4::Identity(), 1e-15));
  EXPECT_NEAR(c0.fx, 400.0, 1e-9);
  EXPECT_NEAR(c0.fy, 400.0, 1e-9);
  EXPECT_EQ(c0.cx, 400.0);
  EXPECT_EQ(c0.cy, 1.0);
  EXPECT_EQ(c0.width, 800);
  EXPECT_EQ(c0.height, 2);
  // Translated camera: world origin sits at −(1, 2, 3) in camera space.
  const Mat4& w1 = d.train_frames[1].camera.world_to_camera;
  EXPECT_TRUE((w1.topRightCorner<3, 1>().isApprox(Vec3(-1, -2, -3))));
  EXPECT_NEAR(d.train_frames[1].image->at(0, 0, 0), 191.0 / 255.0, 1e-12);
}

TEST(Dataset, OpenGlConventionFlipsCameraAxes) {
  TempDir dir("dsgl");
  write_two_frame_dataset(dir, "");
  const Dataset d = load_dataset(dir.path.string());
  Mat4 expect = Mat4::Identity();
  expect(1, 1) = -1.0;
  expect(2, 2) = -1.0;
  EXPECT_TRUE(d.train_frames[0].camera.world_to_camera.isApprox(expect, 1e-15));
}

TEST(Dataset, Errors) {
  TempDir dir("dserr");
  EXPECT_THROW(load_dataset(dir.file("nope")), Error);
  EXPECT_THROW(load_dataset(dir.path.string()), Error);
  std::ofstream(dir.file("transforms_train.json")) << "{ not json";
  EXPECT_THROW(load_dataset(dir.path.string()), Error);
  std::ofstream(dir.file("transforms_train.json"))
      << R"({"camera_angle_x": 0.7, "frames": [{"file_path": "./gone.png", "transform_matrix": [[1,0,0,0],[0,1,0,0],[0,0,1,0],[0,0,0,1]]}]})";
  EXPECT_THROW(load_dataset(dir.path.string()), Error);
}

// ---- Checkpoint -------------------------------------------------------------------

TEST(Checkpoint, RoundTripBitExact) {
  TempDir dir("ckpt");
  SpgsModel m = small_model();
  ASSERT_TRUE(m.has_superpoints());
  ASSERT_TRUE(m.cache.has_value());
  save_checkpoint(dir.file("m.ckpt"), m);
  SpgsModel l = load_checkpoint(dir.file("m.ckpt"));
  SpgsModel q = m;
  q.quantize_to_float();
  EXPECT_TRUE(bit_equal(l.cloud.positions, q.cloud.positions));
  EXPECT_TRUE(bit_equal(l.cloud.log_scales, q.cloud.log_scales));
  EXPECT_TRUE(bit_equal(l.cloud.rotations, q.cloud.rotations));
  EXPECT_TRUE(bit_equal(l.cloud.opacity_logits, q.cloud.opacity_logits));
  EXPECT_TRUE(bit_equal(l.cloud.sh, q.cloud.sh));
  EXPECT_TRUE(bit_equal(l.superpoints->positions, q.superpoints->positions));
  EXPECT_TRUE(bit_equal(l.superpoints->logits, q.superpoints->logits));
  EXPECT_TRUE((l.superpoints->neighbors.array() == q.superpoints->neighbors.array()).all());
  const MlpParams& lp = l.deform.mlp().params();
  const MlpParams& qp = q.deform.mlp().params();
  ASSERT_EQ(lp.weights.size(), qp.weights.size());
  for (std::size_t k = 0; k < lp.weights.size(); ++k) {
    EXPECT_TRUE(bit_equal(lp.weights[k], qp.weights[k]));
    EXPECT_TRUE(bit_equal(lp.biases[k], qp.biases[k]));
  }
  EXPECT_EQ(l.train_times, q.train_times);
  ASSERT_TRUE(l.cache.has_value());
  ASSERT_EQ(l.cache->motions.size(), q.cache->motions.size());
  for (std::size_t k = 0; k < l.cache->motions.size(); ++k) EXPECT_TRUE(bit_equal(l.cache->motions[k], q.cache->motions[k]));
  EXPECT_EQ(l.cache_only, q.cache_only);
  // Saving the loaded model again reproduces the file byte for byte.
  save_checkpoint(dir.file("m2.ckpt"), l);
  EXPECT_EQ(read_bytes(dir.file("m.ckpt")), read_bytes(dir.file("m2.ckpt")));
  // Renders agree with the quantized model exactly.
  const Camera cam = testing::test_camera(20, 20);
  EXPECT_EQ(render(l, cam, 0.4, MotionSource::network, Vec3::Ones()).image.data,
            render(q, cam, 0.4, MotionSource::network, Vec3::Ones()).image.data);
}

TEST(Checkpoint, RejectsBadMagicVersionAndTruncation) {
  TempDir dir("ckbad");
  save_checkpoint(dir.file("m.ckpt"), small_model());
  std::string bytes = read_bytes(dir.file("m.ckpt"));
  std::string bad = bytes;
  bad[0] = 'X';
  write_bytes(dir.file("a.ckpt"), bad);
  EXPECT_THROW(load_checkpoint(dir.file("a.ckpt")), Error);
  bad = bytes;
  bad[4] = static_cast<char>(kCheckpointVersion + 1);
  write_bytes(dir.file("b.ckpt"), bad);
  EXPECT_THROW(load_checkpoint(dir.file("b.ckpt")), Error);
  write_bytes(dir.file("c.ckpt"), bytes.substr(0, bytes.size() / 2));
  EXPECT_THROW(load_checkpoint(dir.file("c.ckpt")), Error);
  write_bytes(dir.file("d.ckpt"), bytes + "x");
  EXPECT_THROW(load_checkpoint(dir.file("d.ckpt")), Error);
}

// ---- Trajectories -----------------------------------------------------------------

TEST(Trajectories, HandEncodedFile) {
  TempDir dir("traj");
  // Magic, version, P = 1, T = 2, times, then per time xyz + wxyz.
  std::string bytes = "SPTJ";
  put_u32(bytes, 1);
  put_u32(bytes, 1);
  put_u32(bytes, 2);
  put_f32(bytes, 0.0f);
  put_f32(bytes, 1.0f);
  for (float v : {1.0f, 2.0f, 3.0f, 1.0f, 0.0f, 0.0f, 0.0f}) put_f32(bytes, v);
  for (float v : {-1.0f, 0.5f, 0.0f, 0.0f, 0.0f, 0.0f, 2.0f}) put_f32(bytes, v);
  write_bytes(dir.file("t.bin"), bytes);
  const Trajectories tr = load_trajectories(dir.file("t.bin"));
  ASSERT_EQ(tr.times, (std::vector<double>{0.0, 1.0}));
  ASSERT_EQ(tr.gaussians(), 1);
  EXPECT_EQ(tr.positions[0].row(0), Eigen::RowVector3d(1, 2, 3));
  EXPECT_EQ(tr.positions[1].row(0), Eigen::RowVector3d(-1, 0.5, 0));
  EXPECT_EQ(tr.rotations[0].row(0), Eigen::RowVector4d(1, 0, 0, 0));
  // Unnormalized quaternions come back unit length.
  EXPECT_EQ(tr.rotations[1].row(0), Eigen::RowVector4d(0, 0, 0, 1));

  save_trajectories(dir.file("t2.bin"), tr);
  const std::string again = read_bytes(dir.file("t2.bin"));
  EXPECT_EQ(again.size(), bytes.size());
  EXPECT_EQ(again.substr(0, 24), bytes.substr(0, 24));

  write_bytes(dir.file("bad.bin"), bytes.substr(0, bytes.size() - 4));
  EXPECT_THROW(load_trajectories(dir.file("bad.bin")), Error);
  std::string bad_magic = bytes;
  bad_magic[3] = 'X';
  write_bytes(dir.file("bad2.bin"), bad_magic);
  EXPECT_THROW(load_trajectories(dir.file("bad2.bin")), Error);
}

TEST(Trajectories, ModelRoundTrip) {
  TempDir dir("traj2");
  const SpgsModel m = small_model();
  const Trajectories tr = export_trajectories(m, m.train_times, MotionSource::cache);
  save_trajectories(dir.file("t.bin"), tr);
  const Trajectories l = load_trajectories(dir.file("t.bin"));
  ASSERT_EQ(l.times.size(), tr.times.size());
  for (std::size_t k = 0; k < tr.times.size(); ++k) {
    EXPECT_EQ(l.times[k], static_cast<double>(static_cast<float>(tr.times[k])));
    EXPECT_LT((l.positions[k] - tr.positions[k]).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LT((l.rotations[k] - tr.rotations[k]).cwiseAbs().maxCoeff(), 1e-6);
  }
}

// ---- Edits --------------------------------------------------------------------------

TEST(Edits, ParseScript) {
  const EditScript s = parse_edit_script(R"([
    {"op": "delete", "superpoints": [1, 2]},
    {"op": "transform", "superpoints": [0], "omega": [0, 0, 0.5], "t": [1, 2, 3]},
    {"op": "merge", "path": "other.ckpt", "t": [0, 1, 0]}])");
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[0].kind, EditOp::Kind::remove);
  EXPECT_EQ(s[0].superpoints, (std::vector<int>{1, 2}));
  EXPECT_EQ(s[1].kind, EditOp::Kind::transform);
  EXPECT_EQ(s[1].transform.omega, Vec3(0, 0, 0.5));
  EXPECT_EQ(s[1].transform.t, Vec3(1, 2, 3));
  EXPECT_EQ(s[2].kind, EditOp::Kind::merge);
  EXPECT_EQ(s[2].path, "other.ckpt");
  EXPECT_TRUE(parse_edit_script("[]").empty());
  EXPECT_THROW(parse_edit_script("{}"), Error);
  EXPECT_THROW(parse_edit_script(R"([{"op": "explode"}])"), Error);
  EXPECT_THROW(parse_edit_script(R"([{"op": "transform", "t": [1, 2]}])"), Error);
}

TEST(Edits, EmptyScriptChangesNothing) {
  SpgsModel m = small_model();
  const SpgsModel before = m;
  apply_edit_script(m, {});
  EXPECT_TRUE(bit_equal(m.cloud.positions, before.cloud.positions));
  EXPECT_EQ(m.cache_only, before.cache_only);
}

TEST(Edits, DeleteAllIsAnError) {
  SpgsModel m = small_model();
  std::vector<int> all(m.superpoints->count());
  for (int j = 0; j < m.superpoints->count(); ++j) all[j] = j;
  try {
    delete_superpoints(m, all);
    FAIL() << "deleting everything accepted";
  } catch (const Error& e) {
    EXPECT_EQ(std::string(e.what()), "empty scene");
  }
  try {
    delete_superpoints(m, {m.superpoints->count()});
    FAIL() << "out-of-range id accepted";
  } catch (const Error& e) {
    EXPECT_EQ(std::string(e.what()), "unknown superpoint id " + std::to_string(m.superpoints->count()));
  }
}

TEST(Edits, DeleteRemovesExactlyTheMembers) {
  SpgsModel m = small_model();
  const std::vector<int> assign = m.assignment();
  int members = 0;
  for (int a : assign) members += a == 2;
  ASSERT_GT(members, 0);
  const int P = m.cloud.size();
  delete_superpoints(m, {2});
  EXPECT_EQ(m.cloud.size(), P - members);
  EXPECT_EQ(m.superpoints->count(), 5);
  EXPECT_NO_THROW(m.superpoints->validate());
  const Camera cam = testing::test_camera(16, 16);
  EXPECT_NO_THROW(render(m, cam, 0.5, MotionSource::cache, Vec3::Ones()));
}

TEST(Edits, TranslationShiftsMemberCentersAtEveryTime) {
  SpgsModel m = small_model();
  const Trajectories before = export_trajectories(m, m.train_times, MotionSource::cache);
  const std::vector<int> assign = m.assignment();
  const Vec3 d(0.3, -0.2, 0.1);
  RigidTransform T;
  T.t = d;
  transform_superpoints(m, {1}, T);
  EXPECT_TRUE(m.cache_only);
  const Trajectories after = export_trajectories(m, m.train_times, MotionSource::cache);
  for (std::size_t k = 0; k < m.train_times.size(); ++k)
    for (int i = 0; i < m.cloud.size(); ++i) {
      const Vec3 shift = (after.positions[k].row(i) - before.positions[k].row(i)).transpose();
      // Blended members move by the weight of superpoint 1 only; hard members move by d.
      if (assign[i] != 1) continue;
      const auto& nb = m.superpoints->neighbors;
      double w1 = 0.0, wsum = 0.0;
      for (int q = 0; q < m.superpoints->k(); ++q) {
        const double e = std::exp(m.superpoints->logits(i, q));
        wsum += e;
        if (nb(i, q) == 1) w1 += e;
      }
      if (w1 / wsum < 1.0 - 1e-12) continue;
      EXPECT_LT((shift - d).norm(), 1e-9) << "gaussian " << i << " time " << k;
    }
}

TEST(Edits, TransformThenInverseRestoresRenders) {
  SpgsModel m = small_model();
  m.cache_only = true;
  const SpgsModel before = m;
  RigidTransform T;
  T.omega = Vec3(0.2, -0.4, 0.3);
  T.t = Vec3(0.5, 0.1, -0.2);
  EditScript s(2);
  s[0].kind = s[1].kind = EditOp::Kind::transform;
  s[0].superpoints = s[1].superpoints = {0, 3};
  s[0].transform = T;
  s[1].transform = T.inverse();
  apply_edit_script(m, s);
  EXPECT_LT((m.cloud.positions - before.cloud.positions).cwiseAbs().maxCoeff(), 1e-9);
  const Camera cam = testing::test_camera(24, 24);
  for (double t : {0.0, 0.37, 1.0}) {
    const Image a = render(m, cam, t, MotionSource::cache, Vec3::Ones()).image;
    const Image b = render(before, cam, t, MotionSource::cache, Vec3::Ones()).image;
    EXPECT_LT(testing::max_abs_diff(a, b), 1e-6) << t;
  }
}

TEST(Edits, MergeAppendsBothScenes) {
  TempDir dir("merge");
  SpgsModel a = small_model();
  save_checkpoint(dir.file("b.ckpt"), a);
  const int P = a.cloud.size(), M = a.superpoints->count();
  EditScript s(1);
  s[0].kind = EditOp::Kind::merge;
  s[0].path = "b.ckpt";
  s[0].transform.t = Vec3(3.0, 0.0, 0.0);
  apply_edit_script(a, s, dir.path.string());
  EXPECT_EQ(a.cloud.size(), 2 * P);
  EXPECT_EQ(a.superpoints->count(), 2 * M);
  EXPECT_TRUE(a.cache_only);
  EXPECT_NO_THROW(a.superpoints->validate());
  const Trajectories tr = export_trajectories(a, a.train_times, MotionSource::cache);
  for (int i = 0; i < P; ++i)
    EXPECT_LT((tr.positions[1].row(P + i) - tr.positions[1].row(i) - Eigen::RowVector3d(3, 0, 0)).norm(), 1e-5);
}

// ---- Toy scenes ---------------------------------------------------------------------

TEST(Toy, FixedSeedIsByteIdentical) {
  TempDir a("toya"), b("toyb");
  ToySpec s = tiny_toy();
  s.seed = 9;
  write_toy_scene(generate_toy_scene(s), a.path.string());
  write_toy_scene(generate_toy_scene(s), b.path.string());
  for (const auto& e : std::filesystem::recursive_directory_iterator(a.path)) {
    if (!e.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(e.path(), a.path);
    EXPECT_EQ(read_bytes(e.path().string()), read_bytes((b.path / rel).string())) << rel;
  }
  ToySpec other = s;
  other.seed = 10;
  EXPECT_NE(generate_toy_scene(other).cloud.positions, generate_toy_scene(s).cloud.positions);
}

TEST(Toy, TranslateClusterOnlyShifts) {
  ToySpec s = tiny_toy();
  s.motions = {ToyMotion::translate};
  s.clusters = 1;
  const ToyScene toy = generate_toy_scene(s);
  ASSERT_EQ(toy.motions.size(), 4u);
  for (const Tensor& m : toy.motions) EXPECT_EQ(m.block(0, 0, 1, 3).norm(), 0.0);
  EXPECT_EQ(toy.motions[0].norm(), 0.0);
  EXPECT_GT(toy.motions.back().block(0, 3, 1, 3).norm(), 0.1);
}

TEST(Toy, WrittenSceneLoadsBack) {
  TempDir dir("toyrt");
  const ToyScene toy = generate_toy_scene(tiny_toy());
  write_toy_scene(toy, dir.path.string());
  const Dataset d = load_dataset(dir.path.string());
  ASSERT_EQ(d.train_frames.size(), toy.data.train_frames.size());
  ASSERT_EQ(d.test_frames.size(), toy.data.test_frames.size());
  for (std::size_t k = 0; k < d.train_frames.size(); ++k) {
    EXPECT_NEAR(d.train_frames[k].time, toy.data.train_frames[k].time, 1e-12);
    EXPECT_TRUE(d.train_frames[k].camera.world_to_camera.isApprox(toy.data.train_frames[k].camera.world_to_camera, 1e-12));
    EXPECT_LE(testing::max_abs_diff(*d.train_frames[k].image, *toy.data.train_frames[k].image), 0.5 / 255.0 + 1e-12);
  }
  const ToyScene gt = load_toy_ground_truth(dir.path.string());
  EXPECT_EQ(gt.labels, toy.labels);
  ASSERT_EQ(gt.motions.size(), toy.motions.size());
  for (std::size_t k = 0; k < gt.motions.size(); ++k) EXPECT_LT((gt.motions[k] - toy.motions[k]).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Toy, DefaultSceneGeneratesQuickly) {
  const auto t0 = std::chrono::steady_clock::now();
  const ToyScene toy = generate_toy_scene(ToySpec{});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_EQ(toy.cloud.size(), 200);
  EXPECT_EQ(toy.data.train_frames.size() + toy.data.test_frames.size(), 10u * 20u);
  EXPECT_LT(secs, 60.0);
}

}  // namespace
}  // namespace spgs
