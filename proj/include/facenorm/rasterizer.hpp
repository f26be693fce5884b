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

#include "facenorm/image.hpp"
#include "facenorm/morphable_model.hpp"
#include "facenorm/shading.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

namespace facenorm {

/// Pinhole camera at the origin looking down +z (x right, y down in the image).
struct Camera
{
    double focal = 1.0;
    Eigen::Vector2d principal_point = Eigen::Vector2d::Zero();
    int height = 0;
    int width = 0;
    double near_plane = 0.1;
    double far_plane = 50.0;

    /// focal = 1.2 * max(H, W), principal point at the image center.
    static Camera default_for(int height, int width);

    void validate() const;

    /// Unnormalized viewing ray (z = 1) through continuous pixel coordinates.
    Eigen::Vector3d ray(double px, double py) const
    {
        return {(px - principal_point.x()) / focal, (py - principal_point.y()) / focal, 1.0};
    }

    bool operator==(const Camera&) const = default;
};

struct Projection
{
    Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor> pixels;
    Eigen::VectorXd depth;
    /// Zero for points at or in front of the near plane.
    std::vector<std::uint8_t> valid;
};

Projection project(const Camera& camera, const Vertices& points);

/// d(u, v)/d(x, y, z) of the pinhole projection.
Eigen::Matrix<double, 2, 3> projection_jacobian(const Camera& camera, const Eigen::Vector3d& point);

/// Rasterizer state for one image. Pixel (y, x) is sampled at its center.
struct RenderOutput
{
    Image color;
    /// Camera-space z of the visible surface; far plane where uncovered.
    std::vector<double> depth;
    Mask coverage;
    /// Owning triangle, -1 for background.
    std::vector<int> tri_id;
    /// Perspective-correct barycentric coordinates of the owning triangle.
    std::vector<Eigen::Vector3d> bary;
    std::uint64_t scene_key = 0;

    int height() const { return color.height(); }
    int width() const { return color.width(); }
    std::size_t index(int y, int x) const { return static_cast<std::size_t>(y) * width() + x; }
};

/// Z-buffered visibility of front-facing triangles. Ties go to the lowest
/// triangle index. Color is filled with `background`.
RenderOutput rasterize(const Camera& camera, const Vertices& shape, const MeshTopology& topology,
                       double background = 0.5);

/// Perspective-correct barycentrics of the pixel-center ray against a triangle:
/// b_k is proportional to ray . (X_{k+1} x X_{k+2}).
Eigen::Vector3d ray_barycentrics(const Eigen::Vector3d& ray, const Eigen::Vector3d& x0, const Eigen::Vector3d& x1,
                                 const Eigen::Vector3d& x2);

struct RenderOptions
{
    double background = 0.5;
    bool clamp_irradiance = true;
};

/// Per-vertex quantities shared by rendering and its backward pass.
struct SurfaceState
{
    Vertices world;
    Vertices normals;
    AppearanceEvaluation albedo;
};

SurfaceState evaluate_surface(const MorphableModel& model, const CoefficientVector& c);

/// Shades every pixel owned by a triangle in `tri_id`, recomputing barycentrics
/// from the current vertex positions. Albedo and normals are interpolated
/// perspective-correctly; lighting, when given, is evaluated per pixel on the
/// renormalized interpolated normal.
Image shade_pixels(std::span<const int> tri_id, const SurfaceState& surface, const MeshTopology& topology,
                   const Camera& camera, const std::optional<LightingCoefficients>& lighting,
                   const RenderOptions& options = {});

/// Per-pixel irradiance (unclamped) on covered pixels, zero elsewhere.
Image irradiance_map(const RenderOutput& geometry, const SurfaceState& surface, const MeshTopology& topology,
                     const LightingCoefficients& lighting);

RenderOutput render(const MorphableModel& model, const CoefficientVector& c,
                    const std::optional<LightingCoefficients>& lighting, const Camera& camera,
                    const RenderOptions& options = {});

std::uint64_t scene_key(const MorphableModel& model, const CoefficientVector& c,
                        const std::optional<LightingCoefficients>& lighting, const Camera& camera,
                        const RenderOptions& options);

struct SceneGradient
{
    CoefficientVector coefficients;
    LightingCoefficients lighting;
};

/// Gradient of sum(upstream * color) with coverage and triangle ownership held
/// fixed. Silhouette changes contribute nothing. Appearance clamping is passed
/// straight through. Throws DataError if `output` was not rendered from this scene.
SceneGradient render_backward(const RenderOutput& output, const Image& upstream, const MorphableModel& model,
                              const CoefficientVector& c, const std::optional<LightingCoefficients>& lighting,
                              const Camera& camera, const RenderOptions& options = {});

/// Pulls cotangents on world-space vertex positions and per-vertex albedo back
/// through the rigid transform and the linear model.
CoefficientVector backprop_to_coefficients(const MorphableModel& model, const CoefficientVector& c,
                                           const Vertices& world_cotangent, const Vertices* albedo_cotangent);

} // namespace facenorm
