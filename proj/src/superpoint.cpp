// Copyright Contributors to the spgs Project
// SPDX-License-Identifier: Apache-2.0
//
#include "spgs/superpoint.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace spgs {

void SuperpointModel::validate() const {
  if (positions.cols() != 3) throw Error("superpoint positions must be M×3");
  if (neighbors.rows() != logits.rows() || neighbors.cols() != logits.cols())
    throw Error("neighbor/logit shape mismatch");
  const int M = count();
  for (Eigen::Index i = 0; i < neighbors.rows(); ++i) {
    for (Eigen::Index k = 0; k < neighbors.cols(); ++k) {
      const int j = neighbors(i, k);
      if (j < 0 || j >= M) throw Error("superpoint neighbor index out of range");
      for (Eigen::Index l = 0; l < k; ++l)
        if (neighbors(i, l) == j) throw Error("duplicate superpoint neighbor");
    }
  }
}

FpsResult init_superpoints_fps(const Tensor& centers, int count) {
  const int P = static_cast<int>(centers.rows());
  if (count < 1) throw Error("need at least one superpoint");
  if (count > P) throw Error("more superpoints than gaussians");
  FpsResult out;
  out.indices.reserve(count);
  std::vector<double> dist(P, std::numeric_limits<double>::infinity());
  int current = 0;
  for (int m = 0; m < count; ++m) {
    out.indices.push_back(current);
    const Eigen::RowVector3d c = centers.row(current);
    int best = 0;
    double best_d = -1.0;
    for (int i = 0; i < P; ++i) {
      const double d = (centers.row(i) - c).squaredNorm();
      if (d < dist[i]) dist[i] = d;
      if (dist[i] > best_d) {
        best_d = dist[i];
        best = i;
      }
    }
    current = best;
  }
  out.positions.resize(count, 3);
  for (int m = 0; m < count; ++m) out.positions.row(m) = centers.row(out.indices[m]);
  return out;
}

IndexMatrix knn_superpoints(const Tensor& centers, const Tensor& superpoints, int k) {
  const int P = static_cast<int>(centers.rows());
  const int M = static_cast<int>(superpoints.rows());
  if (k < 1 || k > M) throw Error("K must be in [1, M]");
  IndexMatrix out(P, k);
#pragma omp parallel
  {
    std::vector<std::pair<double, int>> cand(M);
#pragma omp for schedule(static)
    for (int i = 0; i < P; ++i) {
      const Eigen::RowVector3d c = centers.row(i);
      for (int j = 0; j < M; ++j) cand[j] = {(superpoints.row(j) - c).squaredNorm(), j};
      std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
      for (int l = 0; l < k; ++l) out(i, l) = cand[l].second;
    }
  }
  return out;
}

Tensor init_association_logits(const IndexMatrix& neighbors, const std::vector<int>& seed_gaussians) {
  const auto P = neighbors.rows();
  std::vector<int> seeded(static_cast<std::size_t>(P), -1);
  for (std::size_t j = 0; j < seed_gaussians.size(); ++j) {
    const int g = seed_gaussians[j];
    if (g >= 0 && g < P) seeded[g] = static_cast<int>(j);
  }
  Tensor logits = Tensor::Constant(P, neighbors.cols(), kDefaultLogit);
  for (Eigen::Index i = 0; i < P; ++i) {
    if (seeded[i] < 0) continue;
    for (Eigen::Index k = 0; k < neighbors.cols(); ++k)
      if (neighbors(i, k) == seeded[i]) logits(i, k) = kSeedLogit;
  }
  return logits;
}

SuperpointModel init_superpoint_model(const Tensor& centers, int count, int k) {
  FpsResult fps = init_superpoints_fps(centers, count);
  SuperpointModel model;
  model.positions = std::move(fps.positions);
  model.neighbors = knn_superpoints(centers, model.positions, k);
  model.logits = init_association_logits(model.neighbors, fps.indices);
  return model;
}

Tensor association_probabilities(const Tensor& logits) {
  Tensor out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index k = 0; k < logits.cols(); ++k) sum += out(i, k) = std::exp(logits(i, k) - mx);
    out.row(i) /= sum;
  }
  return out;
}

Tensor association_probabilities_backward(const Tensor& probs, const Tensor& grad_probs) {
  Tensor out(probs.rows(), probs.cols());
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    const double dot = probs.row(i).dot(grad_probs.row(i));
    out.row(i) = probs.row(i).cwiseProduct(grad_probs.row(i).array().matrix() -
                                            Eigen::RowVectorXd::Constant(probs.cols(), dot));
  }
  return out;
}

GatherResult gather_superpoint_properties(const Tensor& probs, const IndexMatrix& neighbors,
                                          const Tensor& values, int superpoint_count,
                                          const Tensor* fallback) {
  const auto d = values.cols();
  GatherResult out;
  out.values = Tensor::Zero(superpoint_count, d);
  out.mass.assign(superpoint_count, 0.0);
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    for (Eigen::Index k = 0; k < probs.cols(); ++k) {
      const int j = neighbors(i, k);
      out.mass[j] += probs(i, k);
      out.values.row(j) += probs(i, k) * values.row(i);
    }
  }
  for (int j = 0; j < superpoint_count; ++j) {
    if (out.mass[j] > 0.0)
      out.values.row(j) /= out.mass[j];
    else if (fallback)
      out.values.row(j) = fallback->row(j);
  }
  return out;
}

void gather_superpoint_properties_backward(const Tensor& probs, const IndexMatrix& neighbors,
                                           const Tensor& values, const GatherResult& forward,
                                           const Tensor& grad_u, Tensor& grad_values,
                                           Tensor& grad_probs) {
  // u_j = Σ a_ij v_i / S_j  ⇒  ∂u_j/∂v_i = a_ij/S_j,  ∂u_j/∂a_ij = (v_i - u_j)/S_j.
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    for (Eigen::Index k = 0; k < probs.cols(); ++k) {
      const int j = neighbors(i, k);
      const double S = forward.mass[j];
      if (!(S > 0.0)) continue;
      grad_values.row(i) += (probs(i, k) / S) * grad_u.row(j);
      grad_probs(i, k) += grad_u.row(j).dot(values.row(i) - forward.values.row(j)) / S;
    }
  }
}

Tensor scatter_gaussian_properties(const Tensor& probs, const IndexMatrix& neighbors,
                                   const Tensor& superpoint_values) {
  Tensor out = Tensor::Zero(probs.rows(), superpoint_values.cols());
  for (Eigen::Index i = 0; i < probs.rows(); ++i)
    for (Eigen::Index k = 0; k < probs.cols(); ++k)
      out.row(i) += probs(i, k) * superpoint_values.row(neighbors(i, k));
  return out;
}

void scatter_gaussian_properties_backward(const Tensor& probs, const IndexMatrix& neighbors,
                                          const Tensor& superpoint_values, const Tensor& grad_v,
                                          Tensor& grad_probs, Tensor& grad_u) {
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    for (Eigen::Index k = 0; k < probs.cols(); ++k) {
      const int j = neighbors(i, k);
      grad_probs(i, k) += grad_v.row(i).dot(superpoint_values.row(j));
      grad_u.row(j) += probs(i, k) * grad_v.row(i);
    }
  }
}

double property_reconstruction_loss(const Tensor& values, const Tensor& probs,
                                    const IndexMatrix& neighbors, int superpoint_count,
                                    Tensor* grad_values, Tensor* grad_probs, double weight) {
  const auto P = values.rows();
  const auto d = values.cols();
  if (P == 0) return 0.0;
  const GatherResult u = gather_superpoint_properties(probs, neighbors, values, superpoint_count);
  const Tensor recon = scatter_gaussian_properties(probs, neighbors, u.values);
  const Tensor diff = values - recon;
  const double norm = 1.0 / (static_cast<double>(P) * static_cast<double>(d));
  const double loss = diff.squaredNorm() * norm;
  if (grad_values && grad_probs) {
    const Tensor g_recon = (-2.0 * norm * weight) * diff;
    *grad_values += (2.0 * norm * weight) * diff;
    Tensor grad_u = Tensor::Zero(superpoint_count, d);
    scatter_gaussian_properties_backward(probs, neighbors, u.values, g_recon, *grad_probs, grad_u);
    gather_superpoint_properties_backward(probs, neighbors, values, u, grad_u, *grad_values,
                                          *grad_probs);
  }
  return loss;
}

std::vector<int> hard_assignment(const Tensor& probs, const IndexMatrix& neighbors) {
  std::vector<int> out(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    int best = neighbors(i, 0);
    double best_p = probs(i, 0);
    for (Eigen::Index k = 1; k < probs.cols(); ++k) {
      const double p = probs(i, k);
      const int j = neighbors(i, k);
      if (p > best_p || (p == best_p && j < best)) {
        best_p = p;
        best = j;
      }
    }
    out[i] = best;
  }
  return out;
}

Tensor update_canonical_positions(const SuperpointModel& model, const Tensor& centers) {
  const Tensor probs = association_probabilities(model.logits);
  return gather_superpoint_properties(probs, model.neighbors, centers, model.count(), &model.positions)
      .values;
}

IndexMatrix refresh_neighbors(SuperpointModel& model, const Tensor& centers) {
  const int K = std::min(model.k(), model.count());
  IndexMatrix fresh = knn_superpoints(centers, model.positions, K);
  Tensor logits = Tensor::Constant(fresh.rows(), K, kDefaultLogit);
  IndexMatrix source = IndexMatrix::Constant(fresh.rows(), K, -1);
  for (Eigen::Index i = 0; i < fresh.rows(); ++i) {
    for (Eigen::Index k = 0; k < K; ++k) {
      for (Eigen::Index l = 0; l < model.neighbors.cols(); ++l) {
        if (model.neighbors(i, l) == fresh(i, k)) {
          logits(i, k) = model.logits(i, l);
          source(i, k) = static_cast<int32_t>(l);
          break;
        }
      }
    }
  }
  model.neighbors = std::move(fresh);
  model.logits = std::move(logits);
  return source;
}

Tensor dense_association(const Tensor& probs, const IndexMatrix& neighbors, int superpoint_count) {
  Tensor dense = Tensor::Zero(probs.rows(), superpoint_count);
  for (Eigen::Index i = 0; i < probs.rows(); ++i)
    for (Eigen::Index k = 0; k < probs.cols(); ++k) dense(i, neighbors(i, k)) += probs(i, k);
  return dense;
}

}  // namespace spgs
