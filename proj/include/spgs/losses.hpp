// Copyright Contributors to the spgs Project
// SPDX-License-Identifier: Apache-2.0
//
// Image losses (L1, D-SSIM) with gradients, and PSNR/SSIM metrics.
#pragma once

#include "spgs/scene.hpp"

namespace spgs {

/// Mean absolute difference; accumulates dL/da into grad when given.
double l1_loss(const Image& a, const Image& b, Image* grad = nullptr, double weight = 1.0);

/// Mean SSIM over pixels and channels: 11×11 Gaussian window (σ = 1.5),
/// zero padding, C1 = 0.01², C2 = 0.03².
double ssim(const Image& a, const Image& b, Image* grad = nullptr, double weight = 1.0);

/// (1 - SSIM)/2.
double dssim_loss(const Image& a, const Image& b, Image* grad = nullptr, double weight = 1.0);

/// (1 - λ)·L1 + λ·D-SSIM.
double image_loss(const Image& render, const Image& target, double lambda_dssim = 0.2,
                  Image* grad = nullptr);

double mse(const Image& a, const Image& b);
double psnr(const Image& a, const Image& b);

}  // namespace spgs
