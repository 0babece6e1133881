// Copyright Contributors to the spgs Project
// SPDX-License-Identifier: Apache-2.0
//
#include "spgs/cli.hpp"

#include <omp.h>

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <map>
#include <set>
#include <sstream>

#include "spgs/io.hpp"
#include "spgs/losses.hpp"

namespace spgs {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

void write_json(const std::string& path, const json& j) {
  ensure_parent(path);
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << j.dump(2) << "\n";
}

json metrics_json(const EvalResult& ev) {
  json frames = json::array();
  for (const auto& f : ev.frames) frames.push_back({{"name", f.name}, {"psnr", f.psnr}, {"ssim", f.ssim}});
  return {{"frames", frames}, {"mean_psnr", ev.mean_psnr}, {"mean_ssim", ev.mean_ssim}};
}

MotionSource parse_path_mode(const std::string& mode) {
  if (mode == "network") return MotionSource::network;
  if (mode == "interp") return MotionSource::cache;
  throw Error("unknown path mode " + mode);
}

void set_motion_net(const json& j, MotionNetConfig& n) {
  static const std::set<std::string> keys = {"width", "depth", "pos_freqs", "time_freqs"};
  for (const auto& [k, v] : j.items())
    if (!keys.count(k)) throw Error("unknown network config key " + k);
  n.width = j.value("width", n.width);
  n.depth = j.value("depth", n.depth);
  n.pos_freqs = j.value("pos_freqs", n.pos_freqs);
  n.time_freqs = j.value("time_freqs", n.time_freqs);
}

struct GlobalOptions {
  std::uint64_t seed = 0;
  int threads = 0;
  bool deterministic = false;
  std::string config;
};

// ---- train ----------------------------------------------------------------------------

struct TrainArgs {
  std::string data, out, loss_csv, profile = "synthetic";
  int iters = 0, sp = 0, knn = 0, sh = -1, init_points = 0, nonrigid = -1, eval_every = 0;
  bool no_warmup = false, no_prop_loss = false;
};

TrainConfig build_train_config(const TrainArgs& a, const GlobalOptions& g) {
  TrainConfig cfg;
  if (a.profile == "real") cfg = TrainConfig::real_profile();
  else if (a.profile != "synthetic") throw Error("unknown profile " + a.profile);
  if (!g.config.empty()) {
    std::ifstream in(g.config);
    if (!in) throw Error("cannot open config " + g.config);
    apply_train_config_json(std::string(std::istreambuf_iterator<char>(in), {}), cfg);
  }
  if (a.iters > 0) cfg = cfg.scaled(a.iters);
  if (a.sp > 0) cfg.superpoints = a.sp;
  if (a.knn > 0) cfg.knn = a.knn;
  if (a.sh >= 0) cfg.sh_degree = a.sh;
  if (a.init_points > 0) cfg.random_init_points = a.init_points;
  if (a.nonrigid >= 0) cfg.nonrigid_iters = a.nonrigid;
  if (a.no_warmup) cfg.warmup = false;
  if (a.no_prop_loss) cfg.property_loss = false;
  cfg.seed = g.seed;
  cfg.validate();
  return cfg;
}

int cmd_train(const TrainArgs& a, const GlobalOptions& g) {
  const Dataset data = load_dataset(a.data);
  const TrainConfig cfg = build_train_config(a, g);
  const std::string csv_path = a.loss_csv.empty() ? a.out + ".loss.csv" : a.loss_csv;
  ensure_parent(csv_path);
  std::ofstream csv(csv_path);
  if (!csv) throw Error("cannot write " + csv_path);
  csv << "iter,total,image,position,rotation,translation,gaussians,warmup,test_psnr\n";
  const int eval_every = a.eval_every > 0 ? a.eval_every : std::max(1, cfg.total_iters / 10);
  const auto t0 = Clock::now();
  auto cb = [&](const IterationLog& e, const SpgsModel& m) {
    std::string test_psnr;
    const bool eval_now = !data.test_frames.empty() && (e.iter % eval_every == 0 || e.iter == cfg.total_iters);
    if (eval_now) {
      const MotionSource src = m.has_superpoints() ? MotionSource::network : MotionSource::canonical;
      const EvalResult ev = evaluate(m, data.test_frames, src, data.background, cfg.raster);
      std::ostringstream s;
      s.precision(6);
      s << ev.mean_psnr;
      test_psnr = s.str();
      std::cout << "iter " << e.iter << " loss " << e.loss.total << " gaussians " << e.gaussians << " test_psnr "
                << test_psnr << " elapsed " << seconds_since(t0) << "s" << std::endl;
    }
    csv << e.iter << ',' << e.loss.total << ',' << e.loss.image << ',' << e.loss.position << ','
        << e.loss.rotation << ',' << e.loss.translation << ',' << e.gaussians << ',' << (e.warmup ? 1 : 0) << ','
        << test_psnr << '\n';
  };
  TrainResult r = train_spgs(data, cfg, cb);
  if (cfg.nonrigid_iters > 0) {
    const auto log = train_nonrigid_stage(r.model, data, cfg, cfg.nonrigid_iters);
    for (const auto& e : log)
      csv << cfg.total_iters + e.iter << ',' << e.loss.total << ',' << e.loss.image << ",0,0,0," << e.gaussians
          << ",0,\n";
  }
  save_checkpoint(a.out, r.model);
  if (!data.test_frames.empty()) {
    const EvalResult ev = evaluate(r.model, data.test_frames, MotionSource::network, data.background, cfg.raster);
    std::cout << "final test psnr " << ev.mean_psnr << " ssim " << ev.mean_ssim << std::endl;
  }
  std::cout << "wrote " << a.out << " (" << r.model.cloud.size() << " gaussians) and " << csv_path << std::endl;
  return 0;
}

// ---- render ---------------------------------------------------------------------------

struct RenderArgs {
  std::string ckpt, data, split = "test", t = "all", path_mode = "interp", out;
};

int cmd_render(const RenderArgs& a) {
  const SpgsModel model = load_checkpoint(a.ckpt);
  const Dataset data = load_dataset(a.data);
  const MotionSource src = parse_path_mode(a.path_mode);
  std::vector<Frame> frames;
  if (a.split == "test") frames = data.test_frames;
  else if (a.split == "train") frames = data.train_frames;
  else throw Error("unknown split " + a.split);
  if (a.t != "all") {
    double t = 0.0;
    try {
      t = std::stod(a.t);
    } catch (const std::exception&) {
      throw Error("--t must be a number or 'all'");
    }
    std::vector<Frame> at_t;
    for (const Frame& f : frames)
      if (std::abs(f.time - t) < 1e-6) at_t.push_back(f);
    if (at_t.empty()) {
      // Novel time: render each frame's camera without a reference image.
      for (Frame f : frames) {
        f.time = t;
        f.image.reset();
        at_t.push_back(f);
      }
    }
    frames = std::move(at_t);
  }
  fs::create_directories(a.out);
  EvalResult ev;
  std::vector<double> ps, ss;
  for (const Frame& f : frames) {
    const Image img = render(model, f.camera, f.time, src, data.background).image;
    fs::path name = fs::path(f.name).filename();
    if (name.extension() != ".png") name += ".png";
    save_image((fs::path(a.out) / name).string(), img);
    if (f.image) {
      ev.frames.push_back({name.string(), f.time, psnr(img, *f.image), ssim(img, *f.image)});
      ps.push_back(ev.frames.back().psnr);
      ss.push_back(ev.frames.back().ssim);
    }
  }
  for (double v : ps) ev.mean_psnr += v / ps.size();
  for (double v : ss) ev.mean_ssim += v / ss.size();
  write_json((fs::path(a.out) / "metrics.json").string(), metrics_json(ev));
  std::cout << "rendered " << frames.size() << " frames";
  if (!ps.empty()) std::cout << ", mean psnr " << ev.mean_psnr << " ssim " << ev.mean_ssim;
  std::cout << std::endl;
  return 0;
}

// ---- bench ----------------------------------------------------------------------------

struct BenchArgs {
  std::string ckpt, path_mode = "both", out;
  int frames = 50, size = 64, gaussians = 50000, reps = 20;
};

double time_per_call(int reps, const std::function<void()>& fn) {
  fn();  // warm caches
  const auto t0 = Clock::now();
  for (int r = 0; r < reps; ++r) fn();
  return seconds_since(t0) / reps;
}

int cmd_bench(const BenchArgs& a) {
  const SpgsModel model = load_checkpoint(a.ckpt);
  if (a.frames < 1 || a.size < 8 || a.gaussians < 1 || a.reps < 1) throw Error("bench sizes must be positive");
  const bool want_net = a.path_mode == "both" || a.path_mode == "network";
  const bool want_interp = a.path_mode == "both" || a.path_mode == "interp";
  if (!want_net && !want_interp) throw Error("unknown path mode " + a.path_mode);

  // Orbit cameras around the canonical cloud.
  const Vec3 center = model.cloud.positions.colwise().mean().transpose();
  double radius = 0.0;
  for (int i = 0; i < model.cloud.size(); ++i) radius = std::max(radius, (model.cloud.position(i) - center).norm());
  std::vector<Camera> cams;
  for (int k = 0; k < a.frames; ++k) {
    const double phi = 2.0 * M_PI * k / a.frames;
    const Vec3 eye = center + 3.0 * std::max(radius, 1e-3) * Vec3(std::cos(phi), std::sin(phi), 0.3);
    cams.push_back(look_at_camera(eye, center, Vec3::UnitZ(), 0.7, a.size, a.size));
  }
  // Off-grid times so the interpolation path actually blends.
  auto time_of = [&](int k) { return (k + 0.5) / a.frames; };
  auto fps = [&](MotionSource src) {
    const auto t0 = Clock::now();
    for (int k = 0; k < a.frames; ++k) render(model, cams[k], time_of(k), src, Vec3::Ones());
    return a.frames / seconds_since(t0);
  };
  json out;
  out["fps_network"] = nullptr;
  out["fps_interp"] = nullptr;
  if (want_net && !model.cache_only) out["fps_network"] = fps(MotionSource::network);
  if (want_interp) out["fps_interp"] = fps(MotionSource::cache);

  // Same architecture evaluated on M superpoint rows versus P per-Gaussian rows.
  const DeformNet& net = model.deform;
  const int M = model.has_superpoints() ? model.superpoints->count() : 300;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor sp_rows = Tensor::NullaryExpr(M, 3, [&](Eigen::Index, Eigen::Index) { return u(rng); });
  Tensor g_rows = Tensor::NullaryExpr(a.gaussians, 3, [&](Eigen::Index, Eigen::Index) { return u(rng); });
  const double sp_s = time_per_call(a.reps, [&] { net.forward(sp_rows, 0.5); });
  const double g_s = time_per_call(std::max(1, a.reps / 10), [&] { net.forward(g_rows, 0.5); });
  out["deform_us_per_call_sp"] = sp_s * 1e6;
  out["deform_us_per_call_per_gaussian"] = g_s * 1e6;
  out["superpoints"] = M;
  out["gaussians_benchmarked"] = a.gaussians;

  // Rasterizer floor: nothing visible.
  const Camera& cam0 = cams[0];
  const double empty_s = time_per_call(a.reps, [&] { rasterize({}, cam0, Vec3::Ones()); });
  out["fps_empty"] = 1.0 / empty_s;
  out["width"] = a.size;
  out["height"] = a.size;
  if (!a.out.empty()) write_json(a.out, out);
  std::cout << out.dump(2) << std::endl;
  return 0;
}

// ---- edit -----------------------------------------------------------------------------

struct EditArgs {
  std::string ckpt, script, out, render_dir, data;
};

int cmd_edit(const EditArgs& a) {
  SpgsModel model = load_checkpoint(a.ckpt);
  const EditScript script = load_edit_script(a.script);
  apply_edit_script(model, script, fs::path(a.script).parent_path().string());
  save_checkpoint(a.out, model);
  std::cout << "applied " << script.size() << " edits; " << model.cloud.size() << " gaussians" << std::endl;
  if (!a.render_dir.empty()) {
    if (a.data.empty()) throw Error("--render needs --data for cameras");
    RenderArgs r;
    r.ckpt = a.out;
    r.data = a.data;
    r.out = a.render_dir;
    r.path_mode = "interp";
    return cmd_render(r);
  }
  return 0;
}

// ---- pose -----------------------------------------------------------------------------

struct PoseArgs {
  std::string ckpt, data, out, split = "test";
  int iters = 1000;
};

int cmd_pose(const PoseArgs& a) {
  const SpgsModel model = load_checkpoint(a.ckpt);
  const Dataset data = load_dataset(a.data);
  const std::vector<Frame>& frames = a.split == "train" ? data.train_frames : data.test_frames;
  if (a.split != "train" && a.split != "test") throw Error("unknown split " + a.split);
  PoseConfig pc;
  pc.iters = a.iters;
  const auto results = estimate_pose(model, frames, data.background, pc);
  ensure_parent(a.out);
  std::ofstream csv(a.out);
  if (!csv) throw Error("cannot write " + a.out);
  csv.precision(9);
  csv << "frame,time,psnr,superpoint,omega_x,omega_y,omega_z,t_x,t_y,t_z\n";
  double mean = 0.0;
  for (const auto& r : results) {
    for (Eigen::Index j = 0; j < r.motions.rows(); ++j) {
      csv << r.name << ',' << r.time << ',' << r.psnr << ',' << j;
      for (int c = 0; c < 6; ++c) csv << ',' << r.motions(j, c);
      csv << '\n';
    }
    mean += r.psnr / results.size();
  }
  std::cout << "estimated " << results.size() << " frames, mean psnr " << mean << std::endl;
  return 0;
}

// ---- distill --------------------------------------------------------------------------

struct DistillArgs {
  std::string traj, cloud, data, out, log;
  int iters = 3000, sp = 300, knn = 5;
  bool no_image_loss = false;
};

int cmd_distill(const DistillArgs& a, const GlobalOptions& g) {
  const Trajectories traj = load_trajectories(a.traj);
  const GaussianCloud cloud = load_ply(a.cloud);
  std::optional<Dataset> data;
  if (!a.data.empty()) data = load_dataset(a.data);
  DistillConfig cfg;
  cfg.iters = a.iters;
  cfg.superpoints = a.sp;
  cfg.knn = a.knn;
  cfg.image_loss = !a.no_image_loss && data.has_value();
  cfg.seed = g.seed;
  const DistillResult r = distill(cloud, traj, data ? &*data : nullptr, cfg);
  save_checkpoint(a.out, r.model);
  if (!a.log.empty()) {
    ensure_parent(a.log);
    std::ofstream csv(a.log);
    csv << "iter,err\n";
    for (std::size_t k = 0; k < r.err_trace.size(); ++k) csv << k + 1 << ',' << r.err_trace[k] << '\n';
  }
  std::cout << "distilled " << r.model.cloud.size() << " gaussians, final err " << r.final_err << std::endl;
  return 0;
}

// ---- gen-toy --------------------------------------------------------------------------

struct ToyArgs {
  std::string out, motions = "translate,rotate";
  int clusters = 2, per_cluster = 100, timesteps = 20, train_cams = 8, test_cams = 2, size = 64;
};

int cmd_gen_toy(const ToyArgs& a, const GlobalOptions& g) {
  ToySpec s;
  s.clusters = a.clusters;
  s.per_cluster = a.per_cluster;
  s.timesteps = a.timesteps;
  s.train_cameras = a.train_cams;
  s.test_cameras = a.test_cams;
  s.width = s.height = a.size;
  s.seed = g.seed;
  s.motions.clear();
  std::stringstream ms(a.motions);
  for (std::string m; std::getline(ms, m, ',');) s.motions.push_back(parse_toy_motion(m));
  const ToyScene scene = generate_toy_scene(s);
  write_toy_scene(scene, a.out);
  std::cout << "wrote toy scene to " << a.out << " (" << scene.data.train_frames.size() << " train, "
            << scene.data.test_frames.size() << " test frames)" << std::endl;
  return 0;
}

// ---- inspect --------------------------------------------------------------------------

struct InspectArgs {
  std::string ckpt, out;
};

int cmd_inspect(const InspectArgs& a) {
  const SpgsModel model = load_checkpoint(a.ckpt);
  if (!model.has_superpoints()) throw Error("model has no superpoints");
  const std::vector<int> assign = model.assignment();
  PlyColors colors;
  std::set<int> used;
  for (int j : assign) {
    colors.rgb.push_back(superpoint_color(j));
    used.insert(j);
  }
  save_ply(a.out, model.cloud, &colors);
  std::cout << "wrote " << a.out << ": " << model.cloud.size() << " gaussians, " << used.size()
            << " non-empty superpoints of " << model.superpoints->count() << std::endl;
  return 0;
}

}  // namespace

std::array<std::uint8_t, 3> superpoint_color(int id) {
  // Multiplication by an odd constant is a bijection modulo 2^24.
  const std::uint32_t c = (static_cast<std::uint32_t>(id) * 0x9E3779B1u + 0x5A17C3u) & 0xFFFFFFu;
  return {static_cast<std::uint8_t>(c >> 16), static_cast<std::uint8_t>(c >> 8), static_cast<std::uint8_t>(c)};
}

void apply_train_config_json(const std::string& json_text, TrainConfig& cfg) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(std::string("invalid config: ") + e.what());
  }
  if (!j.is_object()) throw Error("config must be a JSON object");
  using Setter = std::function<void(const json&)>;
  auto integer = [](int& f) { return Setter([&f](const json& v) { f = v.get<int>(); }); };
  auto real = [](double& f) { return Setter([&f](const json& v) { f = v.get<double>(); }); };
  auto boolean = [](bool& f) { return Setter([&f](const json& v) { f = v.get<bool>(); }); };
  const std::map<std::string, Setter> setters = {
      {"total_iters", integer(cfg.total_iters)},
      {"warmup_iters", integer(cfg.warmup_iters)},
      {"warmup", boolean(cfg.warmup)},
      {"property_loss", boolean(cfg.property_loss)},
      {"live_canonical", boolean(cfg.live_canonical)},
      {"superpoints", integer(cfg.superpoints)},
      {"knn", integer(cfg.knn)},
      {"knn_refresh_interval", integer(cfg.knn_refresh_interval)},
      {"sh_degree", integer(cfg.sh_degree)},
      {"sh_increase_interval", integer(cfg.sh_increase_interval)},
      {"densify_from", integer(cfg.densify_from)},
      {"densify_until", integer(cfg.densify_until)},
      {"densify_interval", integer(cfg.densify_interval)},
      {"opacity_reset_interval", integer(cfg.opacity_reset_interval)},
      {"densify_grad_threshold", real(cfg.densify_grad_threshold)},
      {"percent_dense", real(cfg.percent_dense)},
      {"prune_opacity", real(cfg.prune_opacity)},
      {"max_screen_radius", real(cfg.max_screen_radius)},
      {"random_init_points", integer(cfg.random_init_points)},
      {"random_init_extent", real(cfg.random_init_extent)},
      {"nonrigid_iters", integer(cfg.nonrigid_iters)},
      {"deform_lr_init", real(cfg.deform_lr_init)},
      {"deform_lr_final", real(cfg.deform_lr_final)},
      {"lambda_dssim", real(cfg.weights.dssim)},
      {"lambda_position", real(cfg.weights.position)},
      {"lambda_rotation", real(cfg.weights.rotation)},
      {"lambda_translation", real(cfg.weights.translation)},
      {"deform_net", [&cfg](const json& v) { set_motion_net(v, cfg.deform_net); }},
      {"nonrigid_net", [&cfg](const json& v) { set_motion_net(v, cfg.nonrigid_net); }},
  };
  for (const auto& [key, value] : j.items()) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw Error("unknown config key " + key);
    try {
      it->second(value);
    } catch (const json::exception& e) {
      throw Error("config key " + key + ": " + e.what());
    }
  }
  cfg.validate();
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Superpoint Gaussian splatting for dynamic scenes"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--seed", g.seed, "random seed");
  app.add_option("--threads", g.threads, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  app.add_flag("--deterministic", g.deterministic, "fixed thread count and static scheduling");
  app.add_option("--config", g.config, "JSON training settings layered over the defaults")->check(CLI::ExistingFile);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "train a model on a dataset");
  train->add_option("--data", ta.data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  train->add_option("--out", ta.out, "output checkpoint")->required();
  train->add_option("--iters", ta.iters, "total iterations; schedules scale with it");
  train->add_option("--sp", ta.sp, "superpoint count");
  train->add_option("--knn", ta.knn, "neighbor superpoints per Gaussian");
  train->add_option("--sh", ta.sh, "spherical harmonics degree");
  train->add_option("--profile", ta.profile, "densify schedule")->check(CLI::IsMember({"synthetic", "real"}));
  train->add_option("--init-points", ta.init_points, "random initial points when the dataset has none");
  train->add_option("--nonrigid", ta.nonrigid, "iterations of the non-rigid refinement stage");
  train->add_option("--eval-every", ta.eval_every, "test-view evaluation interval");
  train->add_option("--loss-csv", ta.loss_csv, "per-iteration loss log (default <out>.loss.csv)");
  train->add_flag("--no-warmup", ta.no_warmup, "skip the warm-up stage");
  train->add_flag("--no-prop-loss", ta.no_prop_loss, "drop the property reconstruction losses");

  RenderArgs ra;
  auto* rend = app.add_subcommand("render", "render dataset views and report metrics");
  rend->add_option("--ckpt", ra.ckpt)->required()->check(CLI::ExistingFile);
  rend->add_option("--data", ra.data)->required()->check(CLI::ExistingDirectory);
  rend->add_option("--split", ra.split)->check(CLI::IsMember({"train", "test"}));
  rend->add_option("--t", ra.t, "time in [0, 1] or 'all'");
  rend->add_option("--path-mode", ra.path_mode)->check(CLI::IsMember({"network", "interp"}));
  rend->add_option("--out", ra.out)->required();

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "time both inference paths and the deformation network");
  bench->add_option("--ckpt", ba.ckpt)->required()->check(CLI::ExistingFile);
  bench->add_option("--frames", ba.frames);
  bench->add_option("--path-mode", ba.path_mode)->check(CLI::IsMember({"network", "interp", "both"}));
  bench->add_option("--size", ba.size, "square image size");
  bench->add_option("--gaussians", ba.gaussians, "rows for the per-Gaussian network comparison");
  bench->add_option("--reps", ba.reps);
  bench->add_option("--out", ba.out, "bench JSON");

  EditArgs ea;
  auto* edit = app.add_subcommand("edit", "apply an edit script");
  edit->add_option("--ckpt", ea.ckpt)->required()->check(CLI::ExistingFile);
  edit->add_option("--script", ea.script)->required()->check(CLI::ExistingFile);
  edit->add_option("--out", ea.out)->required();
  edit->add_option("--render", ea.render_dir, "render the edited test views here");
  edit->add_option("--data", ea.data, "dataset for --render cameras");

  PoseArgs pa;
  auto* pose = app.add_subcommand("pose", "estimate superpoint poses per frame");
  pose->add_option("--ckpt", pa.ckpt)->required()->check(CLI::ExistingFile);
  pose->add_option("--data", pa.data)->required()->check(CLI::ExistingDirectory);
  pose->add_option("--out", pa.out)->required();
  pose->add_option("--split", pa.split)->check(CLI::IsMember({"train", "test"}));
  pose->add_option("--iters", pa.iters);

  DistillArgs da;
  auto* dist = app.add_subcommand("distill", "learn superpoints from per-Gaussian trajectories");
  dist->add_option("--traj", da.traj)->required()->check(CLI::ExistingFile);
  dist->add_option("--cloud", da.cloud)->required()->check(CLI::ExistingFile);
  dist->add_option("--data", da.data)->check(CLI::ExistingDirectory);
  dist->add_option("--out", da.out)->required();
  dist->add_option("--iters", da.iters);
  dist->add_option("--sp", da.sp);
  dist->add_option("--knn", da.knn);
  dist->add_option("--log", da.log, "per-iteration error CSV");
  dist->add_flag("--no-image-loss", da.no_image_loss);

  ToyArgs ya;
  auto* toy = app.add_subcommand("gen-toy", "write a synthetic dynamic scene");
  toy->add_option("--out", ya.out)->required();
  toy->add_option("--clusters", ya.clusters);
  toy->add_option("--per-cluster", ya.per_cluster);
  toy->add_option("--motions", ya.motions, "comma-separated: translate, rotate, hinge");
  toy->add_option("--timesteps", ya.timesteps);
  toy->add_option("--train-cams", ya.train_cams);
  toy->add_option("--test-cams", ya.test_cams);
  toy->add_option("--size", ya.size);

  InspectArgs ia;
  auto* insp = app.add_subcommand("inspect", "export Gaussians colored by superpoint");
  insp->add_option("--ckpt", ia.ckpt)->required()->check(CLI::ExistingFile);
  insp->add_option("--out", ia.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  if (g.threads > 0) omp_set_num_threads(g.threads);
  if (g.deterministic) omp_set_dynamic(0);
  try {
    if (*train) return cmd_train(ta, g);
    if (*rend) return cmd_render(ra);
    if (*bench) return cmd_bench(ba);
    if (*edit) return cmd_edit(ea);
    if (*pose) return cmd_pose(pa);
    if (*dist) return cmd_distill(da, g);
    if (*toy) return cmd_gen_toy(ya, g);
    if (*insp) return cmd_inspect(ia);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 1;
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv = {"spgs"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace spgs
