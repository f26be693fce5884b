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
#include "facenorm/rasterizer.hpp"

#include <Eigen/Dense>

#include <vector>

namespace facenorm {

/// Square texture on the model's UV layout. Texel (i, j) sits at
/// uv = ((j + 0.5) / T, (i + 0.5) / T). Invisible texels hold `fill`.
struct UVTexture
{
    Image color;
    Mask visibility;
    Image fill;

    int size() const { return color.height(); }
};

/// Triangle ownership of each texel in UV space, with affine barycentrics.
/// Triangles that straddle the longitude seam (u extent > 0.5) are skipped.
struct UvRaster
{
    int size = 0;
    std::vector<int> tri_id;
    std::vector<Eigen::Vector3d> bary;

    std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * size + j; }
};

UvRaster rasterize_uv(const MeshTopology& topology, int size);

/// True for triangles excluded from the UV layout.
bool is_seam_triangle(const MeshTopology& topology, int t);

/// Per-vertex attribute interpolated over the UV layout; uncovered texels get
/// the attribute mean.
Image splat_to_uv(const UvRaster& raster, const MeshTopology& topology, const Vertices& attribute);

/// Fill texture: the model mean appearance splatted to UV.
Image mean_appearance_fill(const MorphableModel& model, const UvRaster& raster);

struct UnwarpOptions
{
    /// Visibility tolerance as a fraction of (far - near).
    double depth_tolerance = 1e-3;
};

/// Texel-to-pixel correspondence under a fitted pose.
struct TexelCorrespondence
{
    int size = 0;
    Mask visible;
    /// Continuous pixel coordinates of each visible texel's surface point.
    std::vector<Eigen::Vector2d> pixel;
    /// Camera-space depth of each texel's surface point.
    std::vector<double> depth;
    RenderOutput geometry;
};

/// A texel is visible when its surface point projects into the frame, its
/// triangle faces the camera, and its depth matches the depth buffer within
/// tolerance.
TexelCorrespondence texel_correspondence(const CoefficientVector& c, const MorphableModel& model,
                                         const Camera& camera, const UvRaster& raster,
                                         const UnwarpOptions& options = {});

/// Transports image pixels into UV space. Visible texels sample the image
/// bilinearly, using only pixels covered by the fitted mesh.
UVTexture unwarp(const Image& image, const CoefficientVector& c, const MorphableModel& model, const Camera& camera,
                 int size, const UnwarpOptions& options = {});

struct RewarpResult
{
    Image image;
    /// Covered pixels whose texture lookup touched at least one visible texel.
    Mask valid;
    Mask coverage;
};

/// Renders the mesh with the texture looked up by perspective-correct UV
/// interpolation. Lookups blend visible texels only.
RewarpResult rewarp(const UVTexture& texture, const CoefficientVector& c, const MorphableModel& model,
                    const Camera& camera, double background = 0.5);

/// Intersects texture visibility with an image-space mask carried into UV by
/// the same correspondence as unwarp. Newly hidden texels take the fill.
UVTexture apply_occlusion(const UVTexture& texture, const Mask& mask, const CoefficientVector& c,
                          const MorphableModel& model, const Camera& camera, const UnwarpOptions& options = {});

/// Gaussian blur restricted to `mask` (weights renormalized over masked texels).
Image gaussian_blur_masked(const Image& image, const Mask& mask, double sigma);

/// Bilinear lookup at continuous coordinates blending only pixels where
/// `mask` is set. Returns false when no masked neighbour exists.
bool sample_bilinear_masked(const Image& image, const Mask& mask, double x, double y, Eigen::Vector3d& out);

} // namespace facenorm
