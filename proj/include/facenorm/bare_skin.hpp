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

#include "facenorm/fitting.hpp"
#include "facenorm/image.hpp"
#include "facenorm/morphable_model.hpp"
#include "facenorm/rasterizer.hpp"
#include "facenorm/uv_texture.hpp"

#include <Eigen/Dense>

namespace facenorm {

struct BareSkinResult
{
    Image bare_image;
    /// Per-pixel irradiance of the fitted lighting (zero off coverage).
    Image shading_map;
    /// Input minus the fitted lit render on coverage.
    Image detail_residual;
    Eigen::Vector3d gain = Eigen::Vector3d::Ones();
    /// Pixels whose shading fell below the epsilon floor in some channel.
    Mask floor_mask;
    Mask coverage;
};

/// Divides covered pixels by the fitted shading, max(S, epsilon), and clamps to
/// [0, 1]. Background pixels pass through. Throws DataError on empty coverage.
BareSkinResult delight(const Image& image, const FitResult& fit, const MorphableModel& model, const Camera& camera,
                       double epsilon = 1e-3, bool clamp_irradiance = true);

/// Scales covered pixels per channel so their means match the unlit model
/// render. Throws DataError if a channel mean of the bare image is zero.
BareSkinResult match_skin_tone(const Image& bare_image, const FitResult& fit, const MorphableModel& model,
                               const Camera& camera);

struct DemakeupOptions
{
    double lambda = 1.0;
    /// Detail layer blur sigma as a fraction of the texture width.
    double blur_fraction = 0.02;
};

struct DemakeupResult
{
    /// Visible texels: low-frequency layer + detail; invisible texels: the
    /// low-frequency layer, which is also the fill.
    UVTexture texture;
    Eigen::VectorXd delta;
    Image low_frequency;
    Image detail;
    int visible_vertices = 0;
};

/// Projects the visible texture onto the appearance subspace by ridge
/// regression over vertex samples, then restores the input's high-pass detail.
/// Throws DataError("underdetermined") with fewer visible vertices than modes.
DemakeupResult demakeup_subspace(const UVTexture& uv_albedo, const MorphableModel& model,
                                 const DemakeupOptions& options = {});

} // namespace facenorm
