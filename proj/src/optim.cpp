// Copyright Contributors to the spgs Project
// SPDX-License-Identifier: Apache-2.0
//
#include "spgs/optim.hpp"

#include <algorithm>
#include <cmath>

namespace spgs {

void adam_step(Tensor& param, const Tensor& grad, AdamState& st, double lr, const AdamConfig& cfg) {
  if (grad.rows() != param.rows() || grad.cols() != param.cols()) throw Error("adam shape mismatch");
  if (st.m.rows() != param.rows() || st.m.cols() != param.cols()) st.reset_like(param);
  ++st.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
  const Eigen::Index n = param.size();
  double* p = param.data();
  const double* g = grad.data();
  double* m = st.m.data();
  double* v = st.v.data();
  for (Eigen::Index i = 0; i < n; ++i) {
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
    p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.eps);
  }
}

void MlpAdam::reset(const MlpParams& params) {
  weights.assign(params.weights.size(), {});
  biases.assign(params.biases.size(), {});
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    weights[l].reset_like(params.weights[l]);
    biases[l].reset_like(params.biases[l]);
  }
}

void MlpAdam::step(MlpParams& params, const MlpParams& grad, double lr, const AdamConfig& cfg) {
  if (weights.size() != params.weights.size()) reset(params);
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    adam_step(params.weights[l], grad.weights[l], weights[l], lr, cfg);
    adam_step(params.biases[l], grad.biases[l], biases[l], lr, cfg);
  }
}

double exp_decay_lr(double lr_start, double lr_end, std::int64_t iter, std::int64_t total) {
  if (total <= 0) return lr_end;
  const double r = std::clamp(static_cast<double>(iter) / static_cast<double>(total), 0.0, 1.0);
  return std::exp((1.0 - r) * std::log(lr_start) + r * std::log(lr_end));
}

}  // namespace spgs
