// Copyright Contributors to the spgs Project
// SPDX-License-Identifier: Apache-2.0
//
// Real spherical harmonics up to degree 3 (the layout 3D-GS checkpoints use).
#pragma once

#include <array>
#include <span>

#include "spgs/types.hpp"

namespace spgs {

inline constexpr double kShC0 = 0.28209479177387814;

/// Basis values Y_k(dir) for k < (degree+1)².
std::array<double, 16> sh_basis(int degree, const Vec3& dir);
/// dY_k/d(dir).
std::array<Vec3, 16> sh_basis_gradient(int degree, const Vec3& dir);

/// max(Σ_k Y_k(dir) h_k + 0.5, 0). `coeffs` is coefficient-major (3 per coefficient).
Vec3 compute_sh_color(int degree, std::span<const double> coeffs, const Vec3& dir);

/// Backward of compute_sh_color for an unnormalized view vector d (dir = d/|d|).
/// Channels clamped to 0 in the forward pass receive no gradient.
void compute_sh_color_backward(int degree, std::span<const double> coeffs, const Vec3& view,
                               const Vec3& color, const Vec3& grad_color,
                               std::span<double> grad_coeffs, Vec3& grad_view);

inline double rgb_to_sh0(double rgb) { return (rgb - 0.5) / kShC0; }

}  // namespace spgs
