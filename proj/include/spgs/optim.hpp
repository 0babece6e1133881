// Copyright Contributors to the spgs Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <vector>

#include "spgs/mlp.hpp"
#include "spgs/types.hpp"

namespace spgs {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Tensor m, v;
  std::int64_t step = 0;

  void reset_like(const Tensor& param) {
    m = Tensor::Zero(param.rows(), param.cols());
    v = Tensor::Zero(param.rows(), param.cols());
  }
};

/// In-place bias-corrected Adam update.
void adam_step(Tensor& param, const Tensor& grad, AdamState& state, double lr,
               const AdamConfig& cfg = {});

/// One Adam state per tensor of an MLP.
struct MlpAdam {
  std::vector<AdamState> weights, biases;

  void reset(const MlpParams& params);
  void step(MlpParams& params, const MlpParams& grad, double lr, const AdamConfig& cfg = {});
};

/// Log-linear decay from lr_start (iter 0) to lr_end (iter == total).
double exp_decay_lr(double lr_start, double lr_end, std::int64_t iter, std::int64_t total);

}  // namespace spgs
