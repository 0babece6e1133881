// Copyright Contributors to the spgs Project
// SPDX-License-Identifier: Apache-2.0
//
#include "spgs/model.hpp"

#include "spgs/losses.hpp"

namespace spgs {

namespace {

Vec3 row3(const Tensor& m, Eigen::Index i, Eigen::Index c0 = 0) {
  return {m(i, c0), m(i, c0 + 1), m(i, c0 + 2)};
}

void set_row3(Tensor& m, Eigen::Index i, const Vec3& v, Eigen::Index c0 = 0) {
  m(i, c0) = v[0];
  m(i, c0 + 1) = v[1];
  m(i, c0 + 2) = v[2];
}

void add_row3(Tensor& m, Eigen::Index i, const Vec3& v, Eigen::Index c0 = 0) {
  m(i, c0) += v[0];
  m(i, c0 + 1) += v[1];
  m(i, c0 + 2) += v[2];
}

float to_float(double v) { return static_cast<float>(v); }

void quantize(Tensor& t) { t = t.unaryExpr([](double v) { return double(to_float(v)); }); }

void quantize(MlpParams& p) {
  for (auto& w : p.weights) quantize(w);
  for (auto& b : p.biases) quantize(b);
}

}  // namespace

std::vector<int> SpgsModel::assignment() const {
  if (!superpoints) throw Error("model has no superpoints");
  return hard_assignment(association_probabilities(superpoints->logits), superpoints->neighbors);
}

void SpgsModel::build_cache() {
  if (!superpoints) throw Error("model has no superpoints");
  if (cache_only) throw Error("model is cache-only");
  cache = build_deformation_cache(deform, superpoints->positions, train_times);
}

void SpgsModel::quantize_to_float() {
  quantize(cloud.positions);
  quantize(cloud.log_scales);
  quantize(cloud.rotations);
  quantize(cloud.opacity_logits);
  quantize(cloud.sh);
  if (superpoints) {
    quantize(superpoints->positions);
    quantize(superpoints->logits);
  }
  quantize(deform.mlp().params());
  if (nonrigid) quantize(nonrigid->mlp().params());
  // Times and cached motions are stored in double; a network-backed cache is
  // recomputed so both inference paths still agree after rounding.
  if (cache && !cache_only) build_cache();
}

Tensor superpoint_motions(const SpgsModel& model, double t, MotionSource source) {
  if (!model.superpoints) throw Error("model has no superpoints");
  switch (source) {
    case MotionSource::network:
      if (model.cache_only) throw Error("model is cache-only");
      return model.deform.forward(model.superpoints->positions, t);
    case MotionSource::cache:
      if (!model.cache) throw Error("model has no deformation cache");
      return deform_at_time(*model.cache, t);
    default:
      throw Error("no motions for this source");
  }
}

PassResult run_pass(const SpgsModel& model, const Camera& cam, double t, const Image* target,
                    const PassOptions& opt, ModelGrads* grads) {
  const GaussianCloud& cloud = model.cloud;
  const int P = cloud.size();
  if (P == 0) throw Error("empty cloud");
  if (grads && !target) throw Error("gradients need a target image");
  const int degree = opt.sh_degree < 0 ? cloud.sh_degree : std::min(opt.sh_degree, cloud.sh_degree);
  const bool deformed = opt.source != MotionSource::canonical;
  if (deformed && !model.superpoints) throw Error("model has no superpoints");
  if (opt.source == MotionSource::network && model.cache_only) throw Error("model is cache-only");

  // Activations.
  const Tensor scales = cloud.log_scales.array().exp().matrix();
  std::vector<double> opacity(P);
  std::vector<Mat3> Rc(P);
  for (int i = 0; i < P; ++i) {
    opacity[i] = sigmoid(cloud.opacity_logits(i, 0));
    Rc[i] = quat_to_rotmat(cloud.rotation(i));
  }

  PassResult result;
  Tensor mu_t = cloud.positions;
  std::vector<Mat3> R_t = Rc;

  // Superpoint motion, then the optional per-Gaussian residual.
  Tensor probs;
  std::vector<int> assign;
  GatherResult live;
  Tensor pc;
  MotionNet::Cache fcache, gcache;
  std::vector<Mat3> dR;
  Tensor mu_r;
  std::vector<Mat3> R_r;
  Tensor gout;
  std::vector<Mat3> Rhat;
  const bool use_g = deformed && model.nonrigid && opt.use_nonrigid;
  int M = 0;
  if (deformed) {
    const SuperpointModel& sp = *model.superpoints;
    M = sp.count();
    probs = association_probabilities(sp.logits);
    assign = hard_assignment(probs, sp.neighbors);
    switch (opt.source) {
      case MotionSource::network:
        if (opt.live_canonical) {
          live = gather_superpoint_properties(probs, sp.neighbors, cloud.positions, M, &sp.positions);
          pc = live.values;
        } else {
          pc = sp.positions;
        }
        result.motions = model.deform.forward(pc, t, grads ? &fcache : nullptr);
        break;
      case MotionSource::cache:
        if (!model.cache) throw Error("model has no deformation cache");
        result.motions = deform_at_time(*model.cache, t);
        break;
      case MotionSource::explicit_motions:
        if (!opt.motions || opt.motions->rows() != M || opt.motions->cols() != 6)
          throw Error("explicit motions must be M x 6");
        result.motions = *opt.motions;
        break;
      case MotionSource::canonical:
        break;
    }
    if (result.motions.rows() != M) throw Error("motion count does not match superpoints");
    dR.resize(M);
    for (int j = 0; j < M; ++j) dR[j] = so3_exp(row3(result.motions, j));
    mu_r.resize(P, 3);
    R_r.resize(P);
    for (int i = 0; i < P; ++i) {
      const int j = assign[i];
      set_row3(mu_r, i, dR[j] * row3(cloud.positions, i) + row3(result.motions, j, 3));
      R_r[i] = dR[j] * Rc[i];
    }
    if (use_g) {
      gout = model.nonrigid->forward(mu_r, t, grads ? &gcache : nullptr);
      Rhat.resize(P);
      for (int i = 0; i < P; ++i) {
        Rhat[i] = so3_exp(row3(gout, i));
        set_row3(mu_t, i, Rhat[i] * row3(mu_r, i) + row3(gout, i, 3));
        R_t[i] = Rhat[i] * R_r[i];
      }
    } else {
      mu_t = mu_r;
      R_t = R_r;
    }
  }

  SplatInputs in;
  in.positions = mu_t;
  in.rotations = R_t;
  in.scales = scales;
  in.opacities = opacity;
  in.sh = &cloud.sh;
  in.sh_degree = degree;
  result.projected = preprocess(in, cam, opt.raster);
  RasterState state;
  result.render = rasterize(result.projected, cam, opt.background, opt.raster, &state);
  if (!target) return result;

  // Losses.
  const LossWeights& w = opt.weights;
  LossTerms& L = result.loss;
  Image g_img;
  if (grads) g_img = Image(cam.width, cam.height, 0.0);
  L.image = image_loss(result.render.image, *target, w.dssim, grads ? &g_img : nullptr);
  L.total = L.image;

  Tensor g_mu_t, g_probs, g_motions;
  std::vector<Mat3> g_R_t, g_Rc;
  if (grads) {
    g_mu_t = Tensor::Zero(P, 3);
    g_R_t.assign(P, Mat3::Zero());
    g_Rc.assign(P, Mat3::Zero());
    if (deformed) {
      g_probs = Tensor::Zero(P, model.superpoints->k());
      g_motions = Tensor::Zero(M, 6);
    }
  }

  if (deformed && opt.property_loss) {
    const SuperpointModel& sp = *model.superpoints;
    if (w.position > 0.0) {
      L.position = property_reconstruction_loss(mu_t, probs, sp.neighbors, M,
                                                grads ? &g_mu_t : nullptr,
                                                grads ? &g_probs : nullptr, w.position);
      L.total += w.position * L.position;
    }
    for (int part = 0; part < 2; ++part) {
      const double lambda = part == 0 ? w.rotation : w.translation;
      if (!(lambda > 0.0)) continue;
      Tensor v(P, 3);
      for (int i = 0; i < P; ++i) set_row3(v, i, row3(result.motions, assign[i], 3 * part));
      Tensor gv;
      if (grads) gv = Tensor::Zero(P, 3);
      const double term = property_reconstruction_loss(v, probs, sp.neighbors, M,
                                                       grads ? &gv : nullptr,
                                                       grads ? &g_probs : nullptr, lambda);
      (part == 0 ? L.rotation : L.translation) = term;
      L.total += lambda * term;
      if (grads)
        for (int i = 0; i < P; ++i) add_row3(g_motions, assign[i], row3(gv, i), 3 * part);
    }
  }

  if (opt.distill) {
    const DistillTarget& d = *opt.distill;
    if (d.positions.rows() != P || d.relative_rotations.rows() != P)
      throw Error("distillation target does not match the cloud");
    // Mean over Gaussians and components.
    const double norm = 1.0 / (3.0 * P);
    double lp = 0.0, lr = 0.0;
    for (int i = 0; i < P; ++i) {
      const Vec3 dp = row3(mu_t, i) - row3(d.positions, i);
      lp += dp.squaredNorm() * norm;
      const Mat3 Rrel = R_t[i] * Rc[i].transpose();
      const Vec3 dw = so3_log(Rrel) - row3(d.relative_rotations, i);
      lr += dw.squaredNorm() * norm;
      if (grads) {
        add_row3(g_mu_t, i, (2.0 * w.distill_position * norm) * dp);
        const Mat3 G = so3_log_backward(Rrel, (2.0 * w.distill_rotation * norm) * dw);
        g_R_t[i] += G * Rc[i];
        g_Rc[i] += G.transpose() * R_t[i];
      }
    }
    L.distill = w.distill_position * lp + w.distill_rotation * lr;
    L.total += L.distill;
  }

  if (!grads) return result;

  // Reverse pass.
  const auto g2d = rasterize_backward(result.projected, cam, opt.background, opt.raster, state, g_img);
  SplatGrads sg = preprocess_backward(in, cam, opt.raster, result.projected, g2d);
  g_mu_t += sg.positions;
  for (int i = 0; i < P; ++i) g_R_t[i] += sg.rotations[i];

  ModelGrads& G = *grads;
  G.mean2d = std::move(sg.mean2d);
  G.sh = std::move(sg.sh);
  G.log_scales = sg.scales.cwiseProduct(scales);
  G.opacity_logits.resize(P, 1);
  for (int i = 0; i < P; ++i) G.opacity_logits(i, 0) = sg.opacities[i] * opacity[i] * (1.0 - opacity[i]);

  Tensor g_mu_c;
  if (deformed) {
    const SuperpointModel& sp = *model.superpoints;
    Tensor g_mu_r = g_mu_t;
    std::vector<Mat3> g_R_r = g_R_t;
    if (use_g) {
      Tensor g_gout(P, 6);
      for (int i = 0; i < P; ++i) {
        const Vec3 gm = row3(g_mu_t, i);
        const Mat3 dRhat = gm * row3(mu_r, i).transpose() + g_R_t[i] * R_r[i].transpose();
        set_row3(g_gout, i, so3_exp_backward(row3(gout, i), dRhat));
        set_row3(g_gout, i, gm, 3);
        set_row3(g_mu_r, i, Rhat[i].transpose() * gm);
        g_R_r[i] = Rhat[i].transpose() * g_R_t[i];
      }
      G.nonrigid = model.nonrigid->mlp().params().zeros_like();
      Tensor g_in;
      model.nonrigid->backward(mu_r, gcache, g_gout, G.nonrigid, &g_in);
      g_mu_r += g_in;
    }
    g_mu_c = Tensor::Zero(P, 3);
    std::vector<Mat3> g_dR(M, Mat3::Zero());
    for (int i = 0; i < P; ++i) {
      const int j = assign[i];
      const Vec3 gm = row3(g_mu_r, i);
      g_dR[j] += gm * row3(cloud.positions, i).transpose() + g_R_r[i] * Rc[i].transpose();
      add_row3(g_motions, j, gm, 3);
      set_row3(g_mu_c, i, dR[j].transpose() * gm);
      g_Rc[i] += dR[j].transpose() * g_R_r[i];
    }
    for (int j = 0; j < M; ++j)
      add_row3(g_motions, j, so3_exp_backward(row3(result.motions, j), g_dR[j]));
    if (opt.source == MotionSource::network) {
      G.deform = model.deform.mlp().params().zeros_like();
      Tensor g_pc;
      model.deform.backward(pc, fcache, g_motions, G.deform, opt.live_canonical ? &g_pc : nullptr);
      if (opt.live_canonical)
        gather_superpoint_properties_backward(probs, sp.neighbors, cloud.positions, live, g_pc,
                                              g_mu_c, g_probs);
    }
    G.motions = std::move(g_motions);
    G.logits = association_probabilities_backward(probs, g_probs);
  } else {
    g_mu_c = g_mu_t;
    for (int i = 0; i < P; ++i) g_Rc[i] += g_R_t[i];
  }
  G.positions = std::move(g_mu_c);

  G.rotations.resize(P, 4);
  for (int i = 0; i < P; ++i) {
    const auto J = quat_to_rotmat_jacobian(cloud.rotation(i));
    for (int k = 0; k < 4; ++k) G.rotations(i, k) = g_Rc[i].cwiseProduct(J[k]).sum();
  }
  return result;
}

RenderOutput render(const SpgsModel& model, const Camera& cam, double t, MotionSource source,
                    const Vec3& background, const RasterConfig& raster) {
  PassOptions opt;
  opt.source = source;
  opt.background = background;
  opt.raster = raster;
  return run_pass(model, cam, t, nullptr, opt).render;
}

}  // namespace spgs
