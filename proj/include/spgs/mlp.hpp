// Copyright Contributors to the spgs Project
// SPDX-License-Identifier: Apache-2.0
//
// Small fully connected ReLU network with an optional input skip connection
// and a hand-written reverse pass.
#pragma once

#include <cstdint>
#include <vector>

#include "spgs/types.hpp"

namespace spgs {

struct MlpConfig {
  int input_dim = 1;
  int width = 256;
  int depth = 8;       // hidden layers
  int output_dim = 6;
  int skip_layer = 4;  // hidden layer (0-based) that also receives the input; used when depth > skip_layer

  bool has_skip() const { return depth > skip_layer; }
};

/// Weights are stored in×out so a batch X (N×in) maps to X·W + b.
struct MlpParams {
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;  // 1×out

  MlpParams zeros_like() const;
  std::size_t parameter_count() const;
  void add_scaled(const MlpParams& other, double scale);
};

class Mlp {
 public:
  struct Cache {
    std::vector<Tensor> inputs;  // input fed to each layer
    std::vector<Tensor> pre;     // pre-activation of each hidden layer
  };

  Mlp() = default;
  /// Hidden layers uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)); output layer zero.
  Mlp(const MlpConfig& config, std::uint64_t seed);

  const MlpConfig& config() const { return config_; }
  MlpParams& params() { return params_; }
  const MlpParams& params() const { return params_; }

  Tensor forward(const Tensor& x, Cache* cache = nullptr) const;
  /// Accumulates parameter gradients into grad; writes dL/dx when grad_x is set.
  void backward(const Cache& cache, const Tensor& grad_out, MlpParams& grad, Tensor* grad_x) const;

 private:
  MlpConfig config_;
  MlpParams params_;
};

}  // namespace spgs
