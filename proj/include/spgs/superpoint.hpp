// Copyright Contributors to the spgs Project
// SPDX-License-Identifier: Apache-2.0
//
// Superpoints: farthest-point seeding, the sparse learnable Gaussian-to-
// superpoint association, property aggregation/redistribution and the
// property reconstruction loss.
#pragma once

#include <vector>

#include "spgs/types.hpp"

namespace spgs {

/// Logit given to the association slot of the superpoint a Gaussian seeded.
inline constexpr double kSeedLogit = 0.9;
inline constexpr double kDefaultLogit = 0.1;

/// Association is stored sparsely: row i lists the K nearest superpoints of
/// Gaussian i (ascending distance) and their raw logits.
struct SuperpointModel {
  Tensor positions;       // M×3 canonical positions
  IndexMatrix neighbors;  // P×K
  Tensor logits;          // P×K

  int count() const { return static_cast<int>(positions.rows()); }
  int k() const { return static_cast<int>(neighbors.cols()); }
  int gaussians() const { return static_cast<int>(neighbors.rows()); }
  void validate() const;
};

struct FpsResult {
  std::vector<int> indices;  // sampled Gaussian indices, in sampling order
  Tensor positions;          // M×3
};

/// Greedy farthest point sampling seeded at index 0.
FpsResult init_superpoints_fps(const Tensor& centers, int count);

/// Per-row ascending-distance neighbor lists; ties go to the smaller index.
IndexMatrix knn_superpoints(const Tensor& centers, const Tensor& superpoints, int k);

/// Logits 0.9 at the slot of the superpoint seeded by the Gaussian, 0.1 elsewhere.
Tensor init_association_logits(const IndexMatrix& neighbors, const std::vector<int>& seed_gaussians);

/// Builds a fresh model: FPS seeds, K-nearest lists and initial logits.
SuperpointModel init_superpoint_model(const Tensor& centers, int count, int k);

/// Row-wise softmax over the retained logits.
Tensor association_probabilities(const Tensor& logits);
Tensor association_probabilities_backward(const Tensor& probs, const Tensor& grad_probs);

struct GatherResult {
  Tensor values;            // M×d
  std::vector<double> mass;  // Σ_i a_ij per superpoint; 0 for empty superpoints
};

/// Superpoint properties as normalized association-weighted means of their
/// Gaussians' properties. Superpoints nobody lists keep `fallback` rows (zeros
/// when fallback is null). Accumulates in Gaussian order, so the result does
/// not depend on thread count.
GatherResult gather_superpoint_properties(const Tensor& probs, const IndexMatrix& neighbors,
                                          const Tensor& values, int superpoint_count,
                                          const Tensor* fallback = nullptr);
/// Accumulates dL/dvalues and dL/dprobs for an upstream dL/du.
void gather_superpoint_properties_backward(const Tensor& probs, const IndexMatrix& neighbors,
                                           const Tensor& values, const GatherResult& forward,
                                           const Tensor& grad_u, Tensor& grad_values,
                                           Tensor& grad_probs);

/// v'_i = Σ_k a_ik u_{n_ik}.
Tensor scatter_gaussian_properties(const Tensor& probs, const IndexMatrix& neighbors,
                                   const Tensor& superpoint_values);
void scatter_gaussian_properties_backward(const Tensor& probs, const IndexMatrix& neighbors,
                                          const Tensor& superpoint_values, const Tensor& grad_v,
                                          Tensor& grad_probs, Tensor& grad_u);

/// (1/P) Σ_i MSE(v_i, v'_i) with v' = scatter(gather(v)). When the gradient
/// outputs are non-null they are accumulated into (scaled by `weight`).
double property_reconstruction_loss(const Tensor& values, const Tensor& probs,
                                    const IndexMatrix& neighbors, int superpoint_count,
                                    Tensor* grad_values = nullptr, Tensor* grad_probs = nullptr,
                                    double weight = 1.0);

/// argmax over each row; equal probabilities go to the smaller superpoint id.
std::vector<int> hard_assignment(const Tensor& probs, const IndexMatrix& neighbors);

/// p^c ← gather(a, μ^c), keeping previous positions for empty superpoints.
Tensor update_canonical_positions(const SuperpointModel& model, const Tensor& centers);

/// Recomputes neighbor lists against the current superpoint positions.
/// Logits of neighbors that survive are kept, new slots start at 0.1.
/// Returns, per new slot, the old slot it came from (or -1).
IndexMatrix refresh_neighbors(SuperpointModel& model, const Tensor& centers);

/// Dense P×M association (zero outside the neighbor lists). Testing aid.
Tensor dense_association(const Tensor& probs, const IndexMatrix& neighbors, int superpoint_count);

}  // namespace spgs
