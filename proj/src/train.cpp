// Copyright Contributors to the spgs Project
// SPDX-License-Identifier: Apache-2.0
//
#include "spgs/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spgs/losses.hpp"
#include "spgs/sh.hpp"

namespace spgs {

namespace {

int scale_count(int v, double f) { return v <= 0 ? v : std::max(1, static_cast<int>(std::lround(v * f))); }

Tensor take_rows(const Tensor& t, const std::vector<int>& rows) {
  Tensor out(static_cast<Eigen::Index>(rows.size()), t.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(r) = t.row(rows[r]);
  return out;
}

IndexMatrix take_rows(const IndexMatrix& t, const std::vector<int>& rows) {
  IndexMatrix out(static_cast<Eigen::Index>(rows.size()), t.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(r) = t.row(rows[r]);
  return out;
}

void remap(AdamState& s, const std::vector<int>& src) {
  if (s.m.size() == 0) return;
  Tensor m = Tensor::Zero(static_cast<Eigen::Index>(src.size()), s.m.cols());
  Tensor v = m;
  for (std::size_t r = 0; r < src.size(); ++r)
    if (src[r] >= 0) {
      m.row(r) = s.m.row(src[r]);
      v.row(r) = s.v.row(src[r]);
    }
  s.m = std::move(m);
  s.v = std::move(v);
}

// Logit Adam state after a neighbor refresh: slot k of row i came from slot source(i, k).
void remap_slots(AdamState& s, const IndexMatrix& source) {
  if (s.m.size() == 0) return;
  Tensor m = Tensor::Zero(source.rows(), source.cols());
  Tensor v = m;
  for (Eigen::Index i = 0; i < source.rows(); ++i)
    for (Eigen::Index k = 0; k < source.cols(); ++k)
      if (source(i, k) >= 0) {
        m(i, k) = s.m(i, source(i, k));
        v(i, k) = s.v(i, source(i, k));
      }
  s.m = std::move(m);
  s.v = std::move(v);
}

// Adam on a column block of a tensor.
void adam_block(Tensor& param, const Tensor& grad, Eigen::Index c0, Eigen::Index cols, AdamState& st,
                double lr, const AdamConfig& cfg) {
  if (cols <= 0) return;
  Tensor p = param.middleCols(c0, cols);
  const Tensor g = grad.middleCols(c0, cols);
  adam_step(p, g, st, lr, cfg);
  param.middleCols(c0, cols) = p;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

class FrameSampler {
 public:
  FrameSampler(std::size_t n, std::uint64_t seed) : order_(n), rng_(seed) {
    std::iota(order_.begin(), order_.end(), 0);
    pos_ = n;
  }
  std::size_t next() {
    if (pos_ >= order_.size()) {
      std::shuffle(order_.begin(), order_.end(), rng_);
      pos_ = 0;
    }
    return order_[pos_++];
  }

 private:
  std::vector<std::size_t> order_;
  std::mt19937_64 rng_;
  std::size_t pos_;
};

struct GaussianStep {
  const TrainConfig& cfg;
  double extent;

  void operator()(GaussianCloud& c, const ModelGrads& g, GaussianOptimizer& opt, int iter,
                  int total) const {
    const double pos_lr = extent * exp_decay_lr(cfg.lr.position_init, cfg.lr.position_final, iter, total);
    adam_step(c.positions, g.positions, opt.positions, pos_lr, cfg.adam);
    adam_step(c.log_scales, g.log_scales, opt.log_scales, cfg.lr.scale, cfg.adam);
    adam_step(c.rotations, g.rotations, opt.rotations, cfg.lr.rotation, cfg.adam);
    adam_step(c.opacity_logits, g.opacity_logits, opt.opacity, cfg.lr.opacity, cfg.adam);
    adam_block(c.sh, g.sh, 0, 3, opt.sh_dc, cfg.lr.sh_dc, cfg.adam);
    adam_block(c.sh, g.sh, 3, c.sh.cols() - 3, opt.sh_rest, cfg.lr.sh_rest, cfg.adam);
  }
};

}  // namespace

TrainConfig TrainConfig::real_profile() {
  TrainConfig c;
  c.densify_from = 1000;
  c.densify_interval = 1000;
  c.opacity_reset_interval = 6000;
  return c;
}

TrainConfig TrainConfig::scaled(int total) const {
  if (total <= 0) throw Error("total iterations must be positive");
  TrainConfig c = *this;
  const double f = static_cast<double>(total) / static_cast<double>(total_iters);
  c.total_iters = total;
  c.warmup_iters = scale_count(warmup_iters, f);
  c.knn_refresh_interval = scale_count(knn_refresh_interval, f);
  c.sh_increase_interval = scale_count(sh_increase_interval, f);
  c.densify_from = scale_count(densify_from, f);
  c.densify_until = scale_count(densify_until, f);
  c.densify_interval = scale_count(densify_interval, f);
  c.opacity_reset_interval = scale_count(opacity_reset_interval, f);
  c.nonrigid_iters = scale_count(nonrigid_iters, f);
  return c;
}

void TrainConfig::validate() const {
  if (total_iters < 1) throw Error("total_iters must be positive");
  if (warmup && warmup_iters >= total_iters) throw Error("warmup_iters must be below total_iters");
  if (superpoints < 1 || knn < 1) throw Error("superpoint and neighbor counts must be positive");
  if (sh_degree < 0 || sh_degree > 3) throw Error("sh degree must be in 0..3");
  for (double l : {weights.dssim, weights.position, weights.rotation, weights.translation})
    if (!(l >= 0.0)) throw Error("loss weights must be non-negative");
  if (weights.dssim > 1.0) throw Error("dssim weight must be at most 1");
}

void DensifyStats::reset(int count) {
  grad_accum.assign(count, 0.0);
  denom.assign(count, 0);
  max_radii.assign(count, 0.0);
}

void DensifyStats::add(const std::vector<Projected2D>& projected, const std::vector<Vec2>& grad,
                       int width, int height) {
  for (std::size_t i = 0; i < projected.size(); ++i) {
    if (!projected[i].visible || projected[i].radius <= 0.0) continue;
    // Gradient with respect to normalized device coordinates.
    const Vec2 ndc(grad[i][0] * 0.5 * width, grad[i][1] * 0.5 * height);
    grad_accum[i] += ndc.norm();
    denom[i] += 1;
    max_radii[i] = std::max(max_radii[i], projected[i].radius);
  }
}

void GaussianOptimizer::remap_rows(const std::vector<int>& src) {
  for (AdamState* s : {&positions, &log_scales, &rotations, &opacity, &sh_dc, &sh_rest, &logits})
    remap(*s, src);
}

std::vector<int> densify_and_prune(GaussianCloud& cloud, SuperpointModel* sp, const DensifyStats& stats,
                                   const TrainConfig& cfg, double extent, bool prune_large,
                                   std::mt19937_64& rng) {
  const int P = cloud.size();
  if (static_cast<int>(stats.denom.size()) != P) throw Error("densify statistics do not match the cloud");
  const double dense = cfg.percent_dense * extent;
  std::vector<int> clone, split;
  for (int i = 0; i < P; ++i) {
    const double g = stats.denom[i] > 0 ? stats.grad_accum[i] / stats.denom[i] : 0.0;
    if (g < cfg.densify_grad_threshold) continue;
    const double smax = std::exp(cloud.log_scales.row(i).maxCoeff());
    (smax <= dense ? clone : split).push_back(i);
  }

  // Rows of the output: survivors, clones, then split children (2 per parent).
  std::vector<char> drop(P, 0);
  for (int i : split) drop[i] = 1;
  for (int i = 0; i < P; ++i) {
    if (drop[i]) continue;
    const bool transparent = sigmoid(cloud.opacity_logits(i, 0)) < cfg.prune_opacity;
    bool large = false;
    if (prune_large) {
      large = stats.max_radii[i] > cfg.max_screen_radius ||
              std::exp(cloud.log_scales.row(i).maxCoeff()) > 0.1 * extent;
    }
    if (transparent || large) drop[i] = 2;
  }
  // Clones and children of pruned-for-transparency parents are pruned too.
  std::vector<int> src_rows;
  for (int i = 0; i < P; ++i)
    if (!drop[i]) src_rows.push_back(i);
  const std::size_t survivors = src_rows.size();
  for (int i : clone)
    if (!drop[i]) src_rows.push_back(i);
  std::vector<int> split_parents;
  for (int i : split)
    if (sigmoid(cloud.opacity_logits(i, 0)) >= cfg.prune_opacity) split_parents.push_back(i);
  const std::size_t children_start = src_rows.size();
  for (int i : split_parents) {
    src_rows.push_back(i);
    src_rows.push_back(i);
  }
  if (src_rows.empty()) throw Error("empty cloud");

  GaussianCloud out = cloud.select(src_rows);
  std::normal_distribution<double> n01(0.0, 1.0);
  for (std::size_t r = children_start; r < src_rows.size(); ++r) {
    const int i = src_rows[r];
    const Vec3 s = cloud.log_scales.row(i).transpose().array().exp();
    const Mat3 R = quat_to_rotmat(cloud.rotation(i));
    const Vec3 offset = R * Vec3(s[0] * n01(rng), s[1] * n01(rng), s[2] * n01(rng));
    for (int k = 0; k < 3; ++k) {
      out.positions(r, k) = cloud.positions(i, k) + offset[k];
      out.log_scales(r, k) = std::log(s[k] / 1.6);
    }
  }
  if (sp) {
    sp->neighbors = take_rows(sp->neighbors, src_rows);
    sp->logits = take_rows(sp->logits, src_rows);
  }
  cloud = std::move(out);
  std::vector<int> source(src_rows.size(), -1);
  for (std::size_t r = 0; r < survivors; ++r) source[r] = src_rows[r];
  return source;
}

GaussianCloud initial_cloud(const Dataset& data, const TrainConfig& cfg, std::mt19937_64& rng) {
  GaussianCloud cloud;
  if (data.initial_points) {
    cloud = *data.initial_points;
    if (cloud.sh_degree != cfg.sh_degree) {
      GaussianCloud resized(cloud.size(), cfg.sh_degree);
      resized.positions = cloud.positions;
      resized.log_scales = cloud.log_scales;
      resized.rotations = cloud.rotations;
      resized.opacity_logits = cloud.opacity_logits;
      const auto cols = std::min(resized.sh.cols(), cloud.sh.cols());
      resized.sh.leftCols(cols) = cloud.sh.leftCols(cols);
      cloud = std::move(resized);
    }
    return cloud;
  }
  const int P = cfg.random_init_points;
  if (P < 1) throw Error("random_init_points must be positive");
  cloud = GaussianCloud(P, cfg.sh_degree);
  std::uniform_real_distribution<double> pos(-cfg.random_init_extent, cfg.random_init_extent), col(0.0, 1.0);
  for (int i = 0; i < P; ++i) {
    for (int k = 0; k < 3; ++k) cloud.positions(i, k) = pos(rng);
    for (int k = 0; k < 3; ++k) cloud.sh(i, k) = rgb_to_sh0(col(rng));
    cloud.opacity_logits(i, 0) = inverse_sigmoid(0.1);
  }
  // Scale from the mean squared distance to the three nearest neighbors.
  const int k = std::min(4, P);
  const IndexMatrix nn = knn_superpoints(cloud.positions, cloud.positions, k);
  for (int i = 0; i < P; ++i) {
    double d2 = 0.0;
    int n = 0;
    for (int j = 0; j < k; ++j) {
      if (nn(i, j) == i) continue;
      d2 += (cloud.positions.row(i) - cloud.positions.row(nn(i, j))).squaredNorm();
      if (++n == 3) break;
    }
    d2 = n > 0 ? std::max(d2 / n, 1e-7) : 1e-2;
    cloud.log_scales.row(i).setConstant(0.5 * std::log(d2));
  }
  return cloud;
}

TrainResult train_spgs(const Dataset& data, const TrainConfig& cfg, const TrainCallback& cb) {
  cfg.validate();
  if (data.train_frames.empty()) throw Error("dataset has no training frames");
  if (data.train_times.size() < 2) throw Error("dataset needs at least 2 distinct train timesteps");
  for (const auto& f : data.train_frames)
    if (!f.image) throw Error("training frame without image: " + f.name);

  std::mt19937_64 rng(cfg.seed);
  TrainResult result;
  SpgsModel& model = result.model;
  model.train_times = data.train_times;
  model.cloud = initial_cloud(data, cfg, rng);
  const double extent = data.scene_extent();

  GaussianOptimizer gopt;
  MlpAdam fopt;
  DensifyStats stats;
  stats.reset(model.cloud.size());
  FrameSampler sampler(data.train_frames.size(), cfg.seed + 1);
  const GaussianStep gaussian_step{cfg, extent};
  const int warm_end = cfg.warmup ? cfg.warmup_iters : 0;

  auto start_superpoints = [&] {
    const int M = std::min(cfg.superpoints, model.cloud.size());
    model.superpoints = init_superpoint_model(model.cloud.positions, M, std::min(cfg.knn, M));
    model.deform = DeformNet(cfg.deform_net, cfg.seed + 2);
    fopt.reset(model.deform.mlp().params());
    gopt.logits = {};
  };

  for (int iter = 1; iter <= cfg.total_iters; ++iter) {
    const bool warm = iter <= warm_end;
    if (!warm && !model.superpoints) start_superpoints();
    const Frame& frame = data.train_frames[sampler.next()];

    PassOptions opt;
    opt.source = warm ? MotionSource::canonical : MotionSource::network;
    opt.live_canonical = cfg.live_canonical;
    opt.property_loss = cfg.property_loss;
    opt.weights = cfg.weights;
    opt.raster = cfg.raster;
    opt.background = data.background;
    opt.sh_degree = std::min(model.cloud.sh_degree, (iter - 1) / std::max(1, cfg.sh_increase_interval));

    ModelGrads g;
    const PassResult pass = run_pass(model, frame.camera, frame.time, &*frame.image, opt, &g);

    gaussian_step(model.cloud, g, gopt, iter, cfg.total_iters);
    if (!warm) {
      const double flr = exp_decay_lr(cfg.deform_lr_init, cfg.deform_lr_final, iter - warm_end,
                                      cfg.total_iters - warm_end);
      fopt.step(model.deform.mlp().params(), g.deform, flr, cfg.adam);
      adam_step(model.superpoints->logits, g.logits, gopt.logits, cfg.lr.association, cfg.adam);
    }

    IterationLog entry{iter, pass.loss, model.cloud.size(), warm};
    result.log.push_back(entry);

    // Adaptive density control.
    if (iter < cfg.densify_until) {
      stats.add(pass.projected, g.mean2d, frame.camera.width, frame.camera.height);
      bool changed = false;
      if (iter > cfg.densify_from && iter % cfg.densify_interval == 0) {
        try {
          const bool prune_large = iter > cfg.opacity_reset_interval;
          SuperpointModel* sp = model.superpoints ? &*model.superpoints : nullptr;
          const auto source = densify_and_prune(model.cloud, sp, stats, cfg, extent, prune_large, rng);
          gopt.remap_rows(source);
          changed = true;
        } catch (const Error&) {
          // Keep the cloud as is when pruning would empty it.
        }
        stats.reset(model.cloud.size());
      }
      if (iter % cfg.opacity_reset_interval == 0) {
        const double cap = inverse_sigmoid(0.01);
        model.cloud.opacity_logits = model.cloud.opacity_logits.cwiseMin(cap);
        gopt.opacity = {};
      }
      if (changed && model.superpoints) {
        model.superpoints->positions = update_canonical_positions(*model.superpoints, model.cloud.positions);
        remap_slots(gopt.logits, refresh_neighbors(*model.superpoints, model.cloud.positions));
      }
    }
    if (model.superpoints) {
      SuperpointModel& sp = *model.superpoints;
      sp.positions = update_canonical_positions(sp, model.cloud.positions);
      if (!warm && iter % cfg.knn_refresh_interval == 0)
        remap_slots(gopt.logits, refresh_neighbors(sp, model.cloud.positions));
    }
    if (cb) cb(entry, model);
  }
  if (!model.superpoints) start_superpoints();
  model.superpoints->positions = update_canonical_positions(*model.superpoints, model.cloud.positions);

  if (cfg.nonrigid_iters > 0) {
    auto more = train_nonrigid_stage(model, data, cfg, cfg.nonrigid_iters, cb);
    for (auto& e : more) e.iter += cfg.total_iters;
    result.log.insert(result.log.end(), more.begin(), more.end());
  }
  model.build_cache();
  return result;
}

std::vector<IterationLog> train_nonrigid_stage(SpgsModel& model, const Dataset& data,
                                               const TrainConfig& cfg, int iters,
                                               const TrainCallback& cb) {
  if (!model.superpoints) throw Error("non-rigid stage needs a trained superpoint model");
  if (model.cache_only) throw Error("model is cache-only");
  if (iters < 1) throw Error("iteration count must be positive");
  std::mt19937_64 rng(cfg.seed + 3);
  if (!model.nonrigid) model.nonrigid = NonRigidNet(cfg.nonrigid_net, cfg.seed + 4);
  const double extent = data.scene_extent();
  GaussianOptimizer gopt;
  MlpAdam fopt, gnet;
  FrameSampler sampler(data.train_frames.size(), cfg.seed + 5);
  const GaussianStep gaussian_step{cfg, extent};
  std::vector<IterationLog> log;
  for (int iter = 1; iter <= iters; ++iter) {
    const Frame& frame = data.train_frames[sampler.next()];
    if (!frame.image) throw Error("training frame without image: " + frame.name);
    PassOptions opt;
    opt.source = MotionSource::network;
    opt.live_canonical = cfg.live_canonical;
    opt.property_loss = false;
    opt.weights = cfg.weights;
    opt.raster = cfg.raster;
    opt.background = data.background;
    ModelGrads g;
    const PassResult pass = run_pass(model, frame.camera, frame.time, &*frame.image, opt, &g);
    // Gaussian rates continue from the end of the main schedule.
    gaussian_step(model.cloud, g, gopt, cfg.total_iters, cfg.total_iters);
    const double lr = exp_decay_lr(cfg.deform_lr_init, cfg.deform_lr_final, iter, iters);
    fopt.step(model.deform.mlp().params(), g.deform, lr, cfg.adam);
    gnet.step(model.nonrigid->mlp().params(), g.nonrigid, lr, cfg.adam);
    adam_step(model.superpoints->logits, g.logits, gopt.logits, cfg.lr.association, cfg.adam);
    model.superpoints->positions = update_canonical_positions(*model.superpoints, model.cloud.positions);
    IterationLog entry{iter, pass.loss, model.cloud.size(), false};
    log.push_back(entry);
    if (cb) cb(entry, model);
  }
  model.cache.reset();
  return log;
}

EvalResult evaluate(const SpgsModel& model, const std::vector<Frame>& frames, MotionSource source,
                    const Vec3& background, const RasterConfig& raster) {
  EvalResult out;
  std::vector<double> ps, ss;
  for (const Frame& f : frames) {
    if (!f.image) continue;
    const RenderOutput r = render(model, f.camera, f.time, source, background, raster);
    FrameMetrics m{f.name, f.time, psnr(r.image, *f.image), ssim(r.image, *f.image)};
    ps.push_back(m.psnr);
    ss.push_back(m.ssim);
    out.frames.push_back(m);
  }
  out.mean_psnr = mean_of(ps);
  out.mean_ssim = mean_of(ss);
  return out;
}

void Trajectories::validate() const {
  if (times.size() != positions.size() || times.size() != rotations.size())
    throw Error("trajectory timestep count mismatch");
  for (std::size_t k = 1; k < times.size(); ++k)
    if (!(times[k] > times[k - 1])) throw Error("trajectory times must be strictly increasing");
  const int P = gaussians();
  for (std::size_t k = 0; k < times.size(); ++k)
    if (positions[k].rows() != P || positions[k].cols() != 3 || rotations[k].rows() != P ||
        rotations[k].cols() != 4)
      throw Error("trajectory count mismatch");
}

Trajectories export_trajectories(const SpgsModel& model, const std::vector<double>& times,
                                 MotionSource source) {
  Trajectories tr;
  const int P = model.cloud.size();
  const std::vector<int> assign = model.assignment();
  for (double t : times) {
    const Tensor motions = superpoint_motions(model, t, source);
    Tensor mu_r(P, 3);
    std::vector<Mat3> R(P);
    for (int i = 0; i < P; ++i) {
      const RigidTransform T = transform_row(motions, assign[i]);
      const RigidPose p = apply_rigid(model.cloud.position(i), quat_to_rotmat(model.cloud.rotation(i)), T);
      mu_r.row(i) = p.mean.transpose();
      R[i] = p.rotation;
    }
    Tensor pos = mu_r;
    if (model.nonrigid) {
      const Tensor g = model.nonrigid->forward(mu_r, t);
      for (int i = 0; i < P; ++i) {
        const RigidTransform T = transform_row(g, i);
        const RigidPose p = apply_rigid(mu_r.row(i).transpose(), R[i], T);
        pos.row(i) = p.mean.transpose();
        R[i] = p.rotation;
      }
    }
    Tensor rot(P, 4);
    for (int i = 0; i < P; ++i) rot.row(i) = rotmat_to_quat(R[i]).as_vec().transpose();
    tr.times.push_back(t);
    tr.positions.push_back(std::move(pos));
    tr.rotations.push_back(std::move(rot));
  }
  return tr;
}

DistillResult distill(const GaussianCloud& teacher_cloud, const Trajectories& traj, const Dataset* data,
                      const DistillConfig& cfg) {
  traj.validate();
  if (traj.times.size() < 2) throw Error("need >= 2 timesteps");
  const int P = teacher_cloud.size();
  if (traj.gaussians() != P) throw Error("trajectory count does not match the cloud");
  if (cfg.iters < 1) throw Error("iteration count must be positive");

  DistillResult result;
  SpgsModel& model = result.model;
  model.cloud = teacher_cloud;
  model.train_times = traj.times;
  if (cfg.initial_superpoints) {
    model.superpoints = *cfg.initial_superpoints;
    model.superpoints->validate();
    if (model.superpoints->gaussians() != P) throw Error("initial association does not match the cloud");
  } else {
    const int M = std::min(cfg.superpoints, P);
    model.superpoints = init_superpoint_model(model.cloud.positions, M, std::min(cfg.knn, M));
  }
  model.deform = DeformNet(cfg.deform_net, cfg.seed + 2);

  // Targets: positions and rotations relative to the canonical orientation.
  std::vector<DistillTarget> targets(traj.times.size());
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    targets[k].positions = traj.positions[k];
    targets[k].relative_rotations.resize(P, 3);
    for (int i = 0; i < P; ++i) {
      const Quat q = Quat::from_vec(traj.rotations[k].row(i).transpose());
      const Mat3 Rrel = quat_to_rotmat(q) * quat_to_rotmat(model.cloud.rotation(i)).transpose();
      targets[k].relative_rotations.row(i) = so3_log(Rrel).transpose();
    }
  }

  // Frames usable for the image term, grouped by trajectory timestep.
  std::vector<std::vector<const Frame*>> frames_at(traj.times.size());
  if (data && cfg.image_loss)
    for (const Frame& f : data->train_frames) {
      if (!f.image) continue;
      for (std::size_t k = 0; k < traj.times.size(); ++k)
        if (std::abs(traj.times[k] - f.time) < 1e-6) frames_at[k].push_back(&f);
    }

  std::mt19937_64 rng(cfg.seed);
  MlpAdam fopt;
  AdamState lopt;
  // Rendering is only needed when an image term exists; otherwise a 1×1 dummy view.
  Camera dummy;
  dummy.world_to_camera(2, 3) = -1000.0;  // everything behind the camera
  const Image dummy_target(1, 1, 1.0);
  FrameSampler sampler(traj.times.size(), cfg.seed + 1);
  for (int iter = 1; iter <= cfg.iters; ++iter) {
    const std::size_t k = sampler.next();
    const Frame* frame = nullptr;
    if (!frames_at[k].empty()) {
      std::uniform_int_distribution<std::size_t> pick(0, frames_at[k].size() - 1);
      frame = frames_at[k][pick(rng)];
    }
    PassOptions opt;
    opt.source = MotionSource::network;
    opt.live_canonical = true;
    opt.weights = cfg.weights;
    opt.property_loss = true;
    opt.raster = cfg.raster;
    opt.distill = &targets[k];
    if (frame) opt.background = data->background;
    ModelGrads g;
    PassResult pass;
    if (frame) {
      pass = run_pass(model, frame->camera, traj.times[k], &*frame->image, opt, &g);
    } else {
      opt.weights.dssim = 0.0;
      pass = run_pass(model, dummy, traj.times[k], &dummy_target, opt, &g);
    }
    result.err_trace.push_back(pass.loss.distill);
    const double lr = exp_decay_lr(cfg.deform_lr_init, cfg.deform_lr_final, iter, cfg.iters);
    fopt.step(model.deform.mlp().params(), g.deform, lr);
    adam_step(model.superpoints->logits, g.logits, lopt, cfg.association_lr);
    model.superpoints->positions = update_canonical_positions(*model.superpoints, model.cloud.positions);
  }

  // Final error averaged over timesteps.
  double total = 0.0;
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    PassOptions opt;
    opt.source = MotionSource::network;
    opt.property_loss = false;
    opt.distill = &targets[k];
    opt.weights = cfg.weights;
    opt.weights.dssim = 0.0;
    total += run_pass(model, dummy, traj.times[k], &dummy_target, opt).loss.distill;
  }
  result.final_err = total / static_cast<double>(traj.times.size());
  model.build_cache();
  return result;
}

std::vector<PoseResult> estimate_pose(const SpgsModel& model, const std::vector<Frame>& frames,
                                      const Vec3& background, const PoseConfig& cfg) {
  if (!model.superpoints) throw Error("model has no superpoints");
  if (model.train_times.empty()) throw Error("model has no training timesteps");
  const MotionSource src = model.cache ? MotionSource::cache : MotionSource::network;
  Tensor motions = superpoint_motions(model, model.train_times.back(), src);
  std::vector<PoseResult> out;
  for (const Frame& f : frames) {
    if (!f.image) throw Error("pose frame without image: " + f.name);
    AdamState st;
    PassOptions opt;
    opt.source = MotionSource::explicit_motions;
    opt.property_loss = false;
    opt.use_nonrigid = true;
    opt.weights.dssim = cfg.dssim;
    opt.raster = cfg.raster;
    opt.background = background;
    for (int iter = 0; iter < cfg.iters; ++iter) {
      opt.motions = &motions;
      ModelGrads g;
      run_pass(model, f.camera, f.time, &*f.image, opt, &g);
      adam_step(motions, g.motions, st, exp_decay_lr(cfg.lr_init, cfg.lr_final, iter, cfg.iters));
    }
    opt.motions = &motions;
    const PassResult r = run_pass(model, f.camera, f.time, nullptr, opt);
    out.push_back({f.name, f.time, motions, psnr(r.render.image, *f.image)});
  }
  return out;
}

}  // namespace spgs
