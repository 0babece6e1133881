// Copyright Contributors to the spgs Project
// SPDX-License-Identifier: Apache-2.0
//
// CPU Gaussian splatting: EWA projection, depth-sorted 16×16 tile binning,
// front-to-back α-blending and the matching reverse pass. Pixel (x, y) is
// sampled at its center (x + 0.5, y + 0.5).
#pragma once

#include <optional>
#include <vector>

#include "spgs/scene.hpp"

namespace spgs {

struct RasterConfig {
  int tile_size = 16;
  double radius_sigma = 3.0;
  double alpha_min = 1.0 / 255.0;
  double alpha_max = 0.99;
  double transmittance_min = 1e-4;
  double dilation = 0.3;
  /// When false every visible Gaussian is binned to every tile.
  bool cull_by_radius = true;

  /// No α floor, no early termination, no radius culling.
  static RasterConfig exact() {
    RasterConfig c;
    c.alpha_min = 0.0;
    c.transmittance_min = 0.0;
    c.cull_by_radius = false;
    return c;
  }
};

struct Projected2D {
  Vec2 mean = Vec2::Zero();    // pixels
  Vec3 conic = Vec3::Zero();   // (a, b, c) of the inverse 2D covariance [[a, b], [b, c]]
  double depth = 0.0;
  double radius = 0.0;         // pixels
  Vec3 color = Vec3::Zero();
  double opacity = 0.0;
  bool visible = false;
};

struct Projected2DGrad {
  Vec2 mean = Vec2::Zero();
  Vec3 conic = Vec3::Zero();
  Vec3 color = Vec3::Zero();
  double opacity = 0.0;
};

/// EWA projection of one Gaussian (color and opacity left unset). Returns
/// nullopt when the center is not in front of the near plane.
std::optional<Projected2D> project_gaussian(const Mat3& cov, const Vec3& mean, const Camera& cam,
                                            const RasterConfig& cfg = {});

/// World-space Gaussians ready to be splatted (already deformed and activated).
struct SplatInputs {
  Tensor positions;             // P×3
  std::vector<Mat3> rotations;  // P
  Tensor scales;                // P×3, activated
  std::vector<double> opacities;
  const Tensor* sh = nullptr;   // P×3B
  int sh_degree = 0;            // degree actually evaluated (≤ stored degree)

  int size() const { return static_cast<int>(positions.rows()); }
};

struct SplatGrads {
  Tensor positions;             // dL/dμ
  std::vector<Mat3> rotations;  // dL/dR
  Tensor scales;                // dL/ds
  std::vector<double> opacities;
  Tensor sh;
  std::vector<Vec2> mean2d;     // dL/dμ' in pixels, kept for densification statistics
};

std::vector<Projected2D> preprocess(const SplatInputs& in, const Camera& cam, const RasterConfig& cfg);
SplatGrads preprocess_backward(const SplatInputs& in, const Camera& cam, const RasterConfig& cfg,
                               const std::vector<Projected2D>& projected,
                               const std::vector<Projected2DGrad>& grads);

struct RenderOutput {
  Image image;
  std::vector<double> transmittance;  // H×W
  std::vector<int> contributors;      // blended Gaussians per pixel
};

/// Depth order and tile lists; needed by the reverse pass.
struct RasterState {
  std::vector<int> order;           // visible Gaussian ids sorted front to back
  std::vector<int> tile_offsets;    // CSR offsets, tiles + 1
  std::vector<int> tile_entries;    // Gaussian ids per tile in depth order
  int tiles_x = 0, tiles_y = 0;
};

RenderOutput rasterize(const std::vector<Projected2D>& projected, const Camera& cam,
                       const Vec3& background, const RasterConfig& cfg = {},
                       RasterState* state = nullptr);

/// O(P·H·W) oracle: depth-sorted blend of every visible Gaussian at every
/// pixel, no tiling, no α floor, no early termination.
RenderOutput rasterize_reference(const std::vector<Projected2D>& projected, const Camera& cam,
                                 const Vec3& background, const RasterConfig& cfg = {});

/// Reverse pass of rasterize for an upstream dL/dimage (H×W×3).
std::vector<Projected2DGrad> rasterize_backward(const std::vector<Projected2D>& projected,
                                                const Camera& cam, const Vec3& background,
                                                const RasterConfig& cfg, const RasterState& state,
                                                const Image& grad_image);

/// Depth order used by both renderers: depth, then 2D center, then index.
std::vector<int> depth_order(const std::vector<Projected2D>& projected);

}  // namespace spgs
