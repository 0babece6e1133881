// Copyright Contributors to the spgs Project
// SPDX-License-Identifier: Apache-2.0
//
#include "spgs/mlp.hpp"

#include <cmath>
#include <random>

namespace spgs {

MlpParams MlpParams::zeros_like() const {
  MlpParams out;
  for (const auto& w : weights) out.weights.push_back(Tensor::Zero(w.rows(), w.cols()));
  for (const auto& b : biases) out.biases.push_back(Tensor::Zero(b.rows(), b.cols()));
  return out;
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += static_cast<std::size_t>(w.size());
  for (const auto& b : biases) n += static_cast<std::size_t>(b.size());
  return n;
}

void MlpParams::add_scaled(const MlpParams& other, double scale) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += scale * other.weights[l];
    biases[l] += scale * other.biases[l];
  }
}

Mlp::Mlp(const MlpConfig& config, std::uint64_t seed) : config_(config) {
  if (config.depth < 1 || config.width < 1 || config.input_dim < 1 || config.output_dim < 1)
    throw Error("invalid mlp configuration");
  std::mt19937_64 rng(seed);
  auto layer = [&](int in, int out, bool zero) {
    Tensor w(in, out), b(1, out);
    if (zero) {
      w.setZero();
      b.setZero();
    } else {
      const double bound = 1.0 / std::sqrt(static_cast<double>(in));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
      for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = u(rng);
    }
    params_.weights.push_back(std::move(w));
    params_.biases.push_back(std::move(b));
  };
  for (int l = 0; l < config.depth; ++l) {
    int in = l == 0 ? config.input_dim : config.width;
    if (config.has_skip() && l == config.skip_layer) in += config.input_dim;
    layer(in, config.width, false);
  }
  layer(config.width, config.output_dim, true);
}

Tensor Mlp::forward(const Tensor& x, Cache* cache) const {
  if (x.cols() != config_.input_dim) throw Error("mlp input dimension mismatch");
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  const int depth = config_.depth;
  Tensor h = x;
  for (int l = 0; l <= depth; ++l) {
    if (l < depth && config_.has_skip() && l == config_.skip_layer) {
      Tensor cat(h.rows(), h.cols() + x.cols());
      cat << h, x;
      h = std::move(cat);
    }
    Tensor z = h * params_.weights[l];
    z.rowwise() += params_.biases[l].row(0);
    if (cache) cache->inputs.push_back(h);
    if (l == depth) return z;
    if (cache) cache->pre.push_back(z);
    h = z.cwiseMax(0.0);
  }
  return h;
}

void Mlp::backward(const Cache& cache, const Tensor& grad_out, MlpParams& grad, Tensor* grad_x) const {
  const int depth = config_.depth;
  const auto N = grad_out.rows();
  Tensor gx;
  if (grad_x) gx = Tensor::Zero(N, config_.input_dim);
  Tensor dz = grad_out;
  for (int l = depth; l >= 0; --l) {
    const Tensor& in = cache.inputs[l];
    grad.weights[l].noalias() += in.transpose() * dz;
    grad.biases[l].row(0) += dz.colwise().sum();
    if (l == 0 && !grad_x) break;
    Tensor din = dz * params_.weights[l].transpose();
    if (config_.has_skip() && l == config_.skip_layer && l < depth) {
      if (grad_x) gx += din.rightCols(config_.input_dim);
      din = din.leftCols(config_.width).eval();
    }
    if (l == 0) {
      gx += din;
      break;
    }
    dz = (cache.pre[l - 1].array() > 0.0).select(din.array(), 0.0).matrix();
  }
  if (grad_x) *grad_x = std::move(gx);
}

}  // namespace spgs
