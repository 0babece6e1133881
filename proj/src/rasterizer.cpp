// Copyright Contributors to the spgs Project
// SPDX-License-Identifier: Apache-2.0
//
#include "spgs/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

#include "spgs/sh.hpp"

namespace spgs {

namespace {

Eigen::Matrix<double, 2, 3> projection_jacobian(const Camera& cam, const Vec3& p) {
  const double iz = 1.0 / p[2];
  Eigen::Matrix<double, 2, 3> J;
  J << cam.fx * iz, 0.0, -cam.fx * p[0] * iz * iz, 0.0, cam.fy * iz, -cam.fy * p[1] * iz * iz;
  return J;
}

struct ProjectionCore {
  Vec3 p_cam;
  Eigen::Matrix<double, 2, 3> T;  // J·W
  Mat2 cov2d;
};

std::optional<Projected2D> project_core(const Mat3& cov, const Vec3& mean, const Camera& cam,
                                        const RasterConfig& cfg, ProjectionCore* core) {
  const Mat3 W = cam.rotation();
  const Vec3 p = W * mean + cam.translation();
  if (!(p[2] > cam.znear)) return std::nullopt;
  const Eigen::Matrix<double, 2, 3> T = projection_jacobian(cam, p) * W;
  Mat2 c2 = T * cov * T.transpose();
  c2(0, 1) = c2(1, 0) = 0.5 * (c2(0, 1) + c2(1, 0));
  c2(0, 0) += cfg.dilation;
  c2(1, 1) += cfg.dilation;
  const double det = c2(0, 0) * c2(1, 1) - c2(0, 1) * c2(0, 1);
  if (!(det > 0.0)) return std::nullopt;
  Projected2D out;
  out.mean = {cam.fx * p[0] / p[2] + cam.cx, cam.fy * p[1] / p[2] + cam.cy};
  out.conic = {c2(1, 1) / det, -c2(0, 1) / det, c2(0, 0) / det};
  out.depth = p[2];
  const double mid = 0.5 * (c2(0, 0) + c2(1, 1));
  const double lambda_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
  out.radius = cfg.radius_sigma * std::sqrt(lambda_max);
  out.visible = true;
  if (core) *core = {p, T, c2};
  return out;
}

// Inclusive tile rectangle touched by a Gaussian; empty when off-screen.
struct TileRect {
  int x0, y0, x1, y1;
  bool empty() const { return x1 < x0 || y1 < y0; }
};

TileRect tile_rect(const Projected2D& g, const Camera& cam, const RasterConfig& cfg, int tiles_x,
                   int tiles_y) {
  if (!cfg.cull_by_radius) return {0, 0, tiles_x - 1, tiles_y - 1};
  const double ts = cfg.tile_size;
  const double xmin = g.mean[0] - g.radius, xmax = g.mean[0] + g.radius;
  const double ymin = g.mean[1] - g.radius, ymax = g.mean[1] + g.radius;
  if (xmax < 0 || ymax < 0 || xmin > cam.width || ymin > cam.height) return {0, 0, -1, -1};
  const int x0 = std::clamp(static_cast<int>(std::floor(xmin / ts)), 0, tiles_x - 1);
  const int x1 = std::clamp(static_cast<int>(std::floor(xmax / ts)), 0, tiles_x - 1);
  const int y0 = std::clamp(static_cast<int>(std::floor(ymin / ts)), 0, tiles_y - 1);
  const int y1 = std::clamp(static_cast<int>(std::floor(ymax / ts)), 0, tiles_y - 1);
  return {x0, y0, x1, y1};
}

inline double gaussian_power(const Projected2D& g, double px, double py, double& dx, double& dy) {
  dx = g.mean[0] - px;
  dy = g.mean[1] - py;
  return -0.5 * (g.conic[0] * dx * dx + g.conic[2] * dy * dy) - g.conic[1] * dx * dy;
}

// Contiguous copy of what the per-pixel loop reads. `skip_below` is a power
// under which α is certainly below alpha_min, so exp can be skipped; the
// exact α test still runs for everything above it.
struct PackedSplat {
  double mx, my, a, b, c, opacity, skip_below;
  double r, g, bl;
};

std::vector<PackedSplat> pack_tile(const std::vector<Projected2D>& projected, const std::vector<int>& entries,
                                   int begin, int end, const RasterConfig& cfg) {
  std::vector<PackedSplat> out(static_cast<std::size_t>(end - begin));
  for (int e = begin; e < end; ++e) {
    const Projected2D& g = projected[entries[e]];
    double skip = -std::numeric_limits<double>::infinity();
    if (cfg.alpha_min > 0.0 && g.opacity > 0.0) skip = std::log(cfg.alpha_min / g.opacity) - 1e-6;
    if (cfg.alpha_min > 0.0 && !(g.opacity > 0.0)) skip = std::numeric_limits<double>::infinity();
    out[e - begin] = {g.mean[0], g.mean[1], g.conic[0], g.conic[1], g.conic[2], g.opacity, skip,
                      g.color[0], g.color[1], g.color[2]};
  }
  return out;
}

}  // namespace

std::optional<Projected2D> project_gaussian(const Mat3& cov, const Vec3& mean, const Camera& cam,
                                            const RasterConfig& cfg) {
  return project_core(cov, mean, cam, cfg, nullptr);
}

std::vector<Projected2D> preprocess(const SplatInputs& in, const Camera& cam, const RasterConfig& cfg) {
  const int P = in.size();
  std::vector<Projected2D> out(static_cast<std::size_t>(P));
  const Vec3 center = cam.center();
  const int coeffs = in.sh ? static_cast<int>(in.sh->cols()) : 0;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < P; ++i) {
    const Vec3 mu = in.positions.row(i).transpose();
    const Mat3 M = in.rotations[i] * in.scales.row(i).transpose().asDiagonal();
    const Mat3 cov = M * M.transpose();
    auto proj = project_core(cov, mu, cam, cfg, nullptr);
    if (!proj) continue;
    Projected2D g = *proj;
    const Vec3 view = mu - center;
    g.color = compute_sh_color(in.sh_degree,
                               std::span<const double>(in.sh->row(i).data(), coeffs), view.normalized());
    g.opacity = in.opacities[i];
    out[i] = g;
  }
  return out;
}

SplatGrads preprocess_backward(const SplatInputs& in, const Camera& cam, const RasterConfig& cfg,
                               const std::vector<Projected2D>& projected,
                               const std::vector<Projected2DGrad>& grads) {
  const int P = in.size();
  SplatGrads out;
  out.positions = Tensor::Zero(P, 3);
  out.rotations.assign(static_cast<std::size_t>(P), Mat3::Zero());
  out.scales = Tensor::Zero(P, 3);
  out.opacities.assign(static_cast<std::size_t>(P), 0.0);
  out.sh = Tensor::Zero(P, in.sh->cols());
  out.mean2d.assign(static_cast<std::size_t>(P), Vec2::Zero());
  const Mat3 W = cam.rotation();
  const Vec3 center = cam.center();
  const int coeffs = static_cast<int>(in.sh->cols());

#pragma omp parallel for schedule(static)
  for (int i = 0; i < P; ++i) {
    if (!projected[i].visible) continue;
    const Projected2DGrad& g = grads[i];
    const Vec3 mu = in.positions.row(i).transpose();
    const Mat3& R = in.rotations[i];
    const Vec3 s = in.scales.row(i).transpose();
    const Mat3 M = R * s.asDiagonal();
    const Mat3 cov = M * M.transpose();
    ProjectionCore core;
    project_core(cov, mu, cam, cfg, &core);
    const Vec3& p = core.p_cam;

    // conic = Σ'⁻¹; the off-diagonal parameter appears twice in the quadratic form.
    const Mat2 conic = core.cov2d.inverse();
    Mat2 g_conic;
    g_conic << g.conic[0], 0.5 * g.conic[1], 0.5 * g.conic[1], g.conic[2];
    const Mat2 g_cov2d = -conic * g_conic * conic;

    const Mat3 g_cov = core.T.transpose() * g_cov2d * core.T;
    const Eigen::Matrix<double, 2, 3> g_T = 2.0 * g_cov2d * core.T * cov;
    const Eigen::Matrix<double, 2, 3> g_J = g_T * W.transpose();

    const double iz = 1.0 / p[2], iz2 = iz * iz, iz3 = iz2 * iz;
    Vec3 g_p = Vec3::Zero();
    g_p[0] += g_J(0, 2) * (-cam.fx * iz2) + g.mean[0] * cam.fx * iz;
    g_p[1] += g_J(1, 2) * (-cam.fy * iz2) + g.mean[1] * cam.fy * iz;
    g_p[2] += g_J(0, 0) * (-cam.fx * iz2) + g_J(0, 2) * (2.0 * cam.fx * p[0] * iz3) +
              g_J(1, 1) * (-cam.fy * iz2) + g_J(1, 2) * (2.0 * cam.fy * p[1] * iz3) -
              g.mean[0] * cam.fx * p[0] * iz2 - g.mean[1] * cam.fy * p[1] * iz2;
    Vec3 g_mu = W.transpose() * g_p;

    // Σ = R S² Rᵀ
    out.rotations[i] = 2.0 * g_cov * R * s.cwiseAbs2().asDiagonal();
    const Mat3 rgr = R.transpose() * g_cov * R;
    for (int k = 0; k < 3; ++k) out.scales(i, k) = 2.0 * s[k] * rgr(k, k);

    Vec3 g_view;
    compute_sh_color_backward(in.sh_degree, std::span<const double>(in.sh->row(i).data(), coeffs),
                              mu - center, projected[i].color, g.color,
                              std::span<double>(out.sh.row(i).data(), coeffs), g_view);
    g_mu += g_view;

    out.positions.row(i) = g_mu.transpose();
    out.opacities[i] = g.opacity;
    out.mean2d[i] = g.mean;
  }
  return out;
}

std::vector<int> depth_order(const std::vector<Projected2D>& projected) {
  std::vector<int> order;
  for (int i = 0; i < static_cast<int>(projected.size()); ++i)
    if (projected[i].visible) order.push_back(i);
  auto key = [&](int i) {
    const Projected2D& g = projected[i];
    return std::make_tuple(g.depth, g.mean[0], g.mean[1], g.conic[0], g.conic[1], g.conic[2],
                           g.opacity, g.color[0], g.color[1], g.color[2], i);
  };
  std::sort(order.begin(), order.end(), [&](int a, int b) { return key(a) < key(b); });
  return order;
}

RenderOutput rasterize(const std::vector<Projected2D>& projected, const Camera& cam,
                       const Vec3& background, const RasterConfig& cfg, RasterState* state_out) {
  const int W = cam.width, H = cam.height, ts = cfg.tile_size;
  RasterState state;
  state.tiles_x = (W + ts - 1) / ts;
  state.tiles_y = (H + ts - 1) / ts;
  const int tiles = state.tiles_x * state.tiles_y;
  state.order = depth_order(projected);

  // Count, then fill, so every tile list stays in depth order.
  std::vector<TileRect> rects(state.order.size());
  std::vector<int> counts(static_cast<std::size_t>(tiles) + 1, 0);
  for (std::size_t r = 0; r < state.order.size(); ++r) {
    rects[r] = tile_rect(projected[state.order[r]], cam, cfg, state.tiles_x, state.tiles_y);
    if (rects[r].empty()) continue;
    for (int ty = rects[r].y0; ty <= rects[r].y1; ++ty)
      for (int tx = rects[r].x0; tx <= rects[r].x1; ++tx) ++counts[ty * state.tiles_x + tx + 1];
  }
  state.tile_offsets.assign(counts.size(), 0);
  std::partial_sum(counts.begin(), counts.end(), state.tile_offsets.begin());
  state.tile_entries.assign(static_cast<std::size_t>(state.tile_offsets.back()), 0);
  std::vector<int> fill(state.tile_offsets.begin(), state.tile_offsets.end() - 1);
  for (std::size_t r = 0; r < state.order.size(); ++r) {
    if (rects[r].empty()) continue;
    for (int ty = rects[r].y0; ty <= rects[r].y1; ++ty)
      for (int tx = rects[r].x0; tx <= rects[r].x1; ++tx)
        state.tile_entries[fill[ty * state.tiles_x + tx]++] = state.order[r];
  }

  RenderOutput out;
  out.image = Image(W, H);
  out.transmittance.assign(static_cast<std::size_t>(W) * H, 1.0);
  out.contributors.assign(static_cast<std::size_t>(W) * H, 0);

#pragma omp parallel for schedule(dynamic)
  for (int tile = 0; tile < tiles; ++tile) {
    const int tx = tile % state.tiles_x, ty = tile / state.tiles_x;
    const int begin = state.tile_offsets[tile], end = state.tile_offsets[tile + 1];
    const std::vector<PackedSplat> splats = pack_tile(projected, state.tile_entries, begin, end, cfg);
    for (int y = ty * ts; y < std::min(H, (ty + 1) * ts); ++y) {
      for (int x = tx * ts; x < std::min(W, (tx + 1) * ts); ++x) {
        const double px = x + 0.5, py = y + 0.5;
        double T = 1.0;
        double C0 = 0.0, C1 = 0.0, C2 = 0.0;
        int n = 0;
        for (const PackedSplat& g : splats) {
          const double dx = g.mx - px, dy = g.my - py;
          const double power = -0.5 * (g.a * dx * dx + g.c * dy * dy) - g.b * dx * dy;
          if (power < g.skip_below) continue;
          const double alpha = std::min(cfg.alpha_max, g.opacity * std::exp(power));
          if (alpha < cfg.alpha_min) continue;
          const double w = alpha * T;
          C0 += g.r * w;
          C1 += g.g * w;
          C2 += g.bl * w;
          T *= 1.0 - alpha;
          ++n;
          if (T < cfg.transmittance_min) break;
        }
        const std::size_t pix = static_cast<std::size_t>(y) * W + x;
        const double C[3] = {C0, C1, C2};
        for (int c = 0; c < 3; ++c) out.image.at(x, y, c) = C[c] + T * background[c];
        out.transmittance[pix] = T;
        out.contributors[pix] = n;
      }
    }
  }
  if (state_out) *state_out = std::move(state);
  return out;
}

RenderOutput rasterize_reference(const std::vector<Projected2D>& projected, const Camera& cam,
                                 const Vec3& background, const RasterConfig& cfg) {
  const int W = cam.width, H = cam.height;
  const std::vector<int> order = depth_order(projected);
  RenderOutput out;
  out.image = Image(W, H);
  out.transmittance.assign(static_cast<std::size_t>(W) * H, 1.0);
  out.contributors.assign(static_cast<std::size_t>(W) * H, 0);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      double T = 1.0;
      Vec3 C = Vec3::Zero();
      int n = 0;
      for (int id : order) {
        const Projected2D& g = projected[id];
        double dx, dy;
        const double alpha = std::min(cfg.alpha_max, g.opacity * std::exp(gaussian_power(g, px, py, dx, dy)));
        C += g.color * (alpha * T);
        T *= 1.0 - alpha;
        ++n;
      }
      for (int c = 0; c < 3; ++c) out.image.at(x, y, c) = C[c] + T * background[c];
      out.transmittance[static_cast<std::size_t>(y) * W + x] = T;
      out.contributors[static_cast<std::size_t>(y) * W + x] = n;
    }
  }
  return out;
}

std::vector<Projected2DGrad> rasterize_backward(const std::vector<Projected2D>& projected,
                                                const Camera& cam, const Vec3& background,
                                                const RasterConfig& cfg, const RasterState& state,
                                                const Image& grad_image) {
  const int W = cam.width, H = cam.height, ts = cfg.tile_size;
  const int tiles = state.tiles_x * state.tiles_y;
  // One slot per tile entry so the final per-Gaussian sum runs in a fixed order.
  std::vector<Projected2DGrad> entry_grads(state.tile_entries.size());

#pragma omp parallel
  {
    struct Contribution {
      int entry;
      double alpha, T, G;
      double dx, dy;
      bool clamped;
    };
    std::vector<Contribution> list;
#pragma omp for schedule(dynamic)
    for (int tile = 0; tile < tiles; ++tile) {
      const int tx = tile % state.tiles_x, ty = tile / state.tiles_x;
      const int begin = state.tile_offsets[tile], end = state.tile_offsets[tile + 1];
      const std::vector<PackedSplat> splats = pack_tile(projected, state.tile_entries, begin, end, cfg);
      for (int y = ty * ts; y < std::min(H, (ty + 1) * ts); ++y) {
        for (int x = tx * ts; x < std::min(W, (tx + 1) * ts); ++x) {
          const Vec3 dC(grad_image.at(x, y, 0), grad_image.at(x, y, 1), grad_image.at(x, y, 2));
          if (dC.isZero(0.0)) continue;
          const double px = x + 0.5, py = y + 0.5;
          list.clear();
          double T = 1.0;
          for (int e = begin; e < end; ++e) {
            const PackedSplat& g = splats[e - begin];
            const double dx = g.mx - px, dy = g.my - py;
            const double power = -0.5 * (g.a * dx * dx + g.c * dy * dy) - g.b * dx * dy;
            if (power < g.skip_below) continue;
            const double G = std::exp(power);
            const double raw = g.opacity * G;
            const double alpha = std::min(cfg.alpha_max, raw);
            if (alpha < cfg.alpha_min) continue;
            list.push_back({e, alpha, T, G, dx, dy, raw > cfg.alpha_max});
            T *= 1.0 - alpha;
            if (T < cfg.transmittance_min) break;
          }
          // Color seen behind contribution k, built back to front.
          Vec3 behind = background;
          for (auto it = list.rbegin(); it != list.rend(); ++it) {
            const Projected2D& g = projected[state.tile_entries[it->entry]];
            Projected2DGrad& out = entry_grads[it->entry];
            out.color += dC * (it->alpha * it->T);
            const double d_alpha = it->T * dC.dot(g.color - behind);
            behind = g.color * it->alpha + behind * (1.0 - it->alpha);
            if (it->clamped) continue;
            out.opacity += d_alpha * it->G;
            const double d_power = d_alpha * it->alpha;
            const double a = g.conic[0], b = g.conic[1], c = g.conic[2];
            out.mean[0] += -d_power * (a * it->dx + b * it->dy);
            out.mean[1] += -d_power * (b * it->dx + c * it->dy);
            out.conic[0] += -0.5 * d_power * it->dx * it->dx;
            out.conic[1] += -d_power * it->dx * it->dy;
            out.conic[2] += -0.5 * d_power * it->dy * it->dy;
          }
        }
      }
    }
  }

  std::vector<Projected2DGrad> grads(projected.size());
  for (std::size_t e = 0; e < entry_grads.size(); ++e) {
    Projected2DGrad& dst = grads[state.tile_entries[e]];
    const Projected2DGrad& src = entry_grads[e];
    dst.mean += src.mean;
    dst.conic += src.conic;
    dst.color += src.color;
    dst.opacity += src.opacity;
  }
  return grads;
}

}  // namespace spgs
