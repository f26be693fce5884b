/*
 * Copyright 2026 The facenorm Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include "facenorm/morphable_model.hpp"

#include <Eigen/Dense>

#include <optional>

namespace facenorm {

using ShVector = Eigen::Matrix<double, 9, 1>;

/// Second-order spherical-harmonics lighting: 9 coefficients for each of the
/// R, G and B channels, stored as three consecutive blocks.
struct LightingCoefficients
{
    Eigen::Matrix<double, 27, 1> gamma = Eigen::Matrix<double, 27, 1>::Zero();

    /// Ambient light whose irradiance is exactly 1 in every direction.
    static LightingCoefficients identity();

    auto channel(int c) { return gamma.segment<9>(9 * c); }
    auto channel(int c) const { return gamma.segment<9>(9 * c); }

    bool operator==(const LightingCoefficients&) const = default;
};

/// DC coefficient that makes the band-0 term evaluate to exactly 1.
double identity_ambient_coefficient();

/// Real SH basis [Y00, Y1-1, Y10, Y11, Y2-2, Y2-1, Y20, Y21, Y22] at a unit
/// direction. Throws DataError if |n| deviates from 1 by more than 1e-6.
ShVector sh_basis(const Eigen::Vector3d& n);

/// Same polynomial without the unit-length check.
ShVector sh_basis_unchecked(const Eigen::Vector3d& n);

/// d(sh_basis)/dn of the polynomial form (9 x 3).
Eigen::Matrix<double, 9, 3> sh_basis_jacobian(const Eigen::Vector3d& n);

/// Per-channel dot(gamma_c, Y(n)). Not clamped.
Eigen::Vector3d irradiance(const LightingCoefficients& lighting, const Eigen::Vector3d& n);

/// Area-weighted vertex normals, normalized. Throws DataError naming the first
/// vertex whose accumulated normal has zero length.
Vertices vertex_normals(const Vertices& shape, const MeshTopology& topology);

/// Backpropagates a cotangent on the normalized vertex normals to positions.
Vertices vertex_normals_backward(const Vertices& shape, const MeshTopology& topology,
                                 const Vertices& normal_cotangent);

struct ShadeOptions
{
    /// Clamp negative irradiance to zero before multiplying the albedo.
    bool clamp_irradiance = true;
};

/// albedo * max(irradiance, 0), clamped to [0,1]. Without lighting the albedo
/// is returned unchanged.
Eigen::Vector3d shade(const Eigen::Vector3d& albedo, const std::optional<LightingCoefficients>& lighting,
                      const Eigen::Vector3d& n, const ShadeOptions& options = {});

} // namespace facenorm
