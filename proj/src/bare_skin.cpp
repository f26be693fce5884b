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
#include "facenorm/bare_skin.hpp"

#include "facenorm/error.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>

namespace facenorm {

BareSkinResult delight(const Image& image, const FitResult& fit, const MorphableModel& model, const Camera& camera,
                       double epsilon, bool clamp_irradiance)
{
    if (image.height() != camera.height || image.width() != camera.width) {
        throw DataError("image size does not match the camera");
    }
    const SurfaceState surface = evaluate_surface(model, fit.coefficients);
    const RenderOutput geometry = rasterize(camera, surface.world, model.topology);
    if (geometry.coverage.count() == 0) {
        throw DataError("fitted model covers no pixels");
    }
    const RenderOptions options{0.5, clamp_irradiance};
    const Image lit = shade_pixels(geometry.tri_id, surface, model.topology, camera, fit.lighting, options);

    BareSkinResult out;
    out.coverage = geometry.coverage;
    out.shading_map = irradiance_map(geometry, surface, model.topology, fit.lighting);
    out.bare_image = image;
    out.detail_residual = Image(image.height(), image.width(), 0.0);
    out.floor_mask = Mask(image.height(), image.width(), false);
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            if (!geometry.coverage(y, x)) {
                continue;
            }
            bool floored = false;
            for (int c = 0; c < 3; ++c) {
                const double s = out.shading_map.at(y, x, c);
                if (s < epsilon) {
                    floored = true;
                }
                out.bare_image.at(y, x, c) = std::clamp(image.at(y, x, c) / std::max(s, epsilon), 0.0, 1.0);
                out.detail_residual.at(y, x, c) = image.at(y, x, c) - lit.at(y, x, c);
            }
            out.floor_mask.set(y, x, floored);
        }
    }
    return out;
}

BareSkinResult match_skin_tone(const Image& bare_image, const FitResult& fit, const MorphableModel& model,
                               const Camera& camera)
{
    if (bare_image.height() != camera.height || bare_image.width() != camera.width) {
        throw DataError("image size does not match the camera");
    }
    const RenderOutput unlit = render(model, fit.coefficients, std::nullopt, camera);
    const std::size_t n = unlit.coverage.count();
    if (n == 0) {
        throw DataError("fitted model covers no pixels");
    }
    Eigen::Vector3d render_sum = Eigen::Vector3d::Zero();
    Eigen::Vector3d bare_sum = Eigen::Vector3d::Zero();
    for (int y = 0; y < camera.height; ++y) {
        for (int x = 0; x < camera.width; ++x) {
            if (unlit.coverage(y, x)) {
                render_sum += unlit.color.pixel(y, x);
                bare_sum += bare_image.pixel(y, x);
            }
        }
    }
    for (int c = 0; c < 3; ++c) {
        if (!(bare_sum[c] > 0.0)) {
            throw DataError("bare image channel " + std::to_string(c) + " has zero mean over the face");
        }
    }
    BareSkinResult out;
    out.gain = render_sum.cwiseQuotient(bare_sum);
    out.coverage = unlit.coverage;
    out.bare_image = bare_image;
    out.shading_map = Image(camera.height, camera.width, 0.0);
    out.detail_residual = Image(camera.height, camera.width, 0.0);
    out.floor_mask = Mask(camera.height, camera.width, false);
    for (int y = 0; y < camera.height; ++y) {
        for (int x = 0; x < camera.width; ++x) {
            if (unlit.coverage(y, x)) {
                out.bare_image.set_pixel(
                    y, x, out.gain.cwiseProduct(bare_image.pixel(y, x)).cwiseMax(0.0).cwiseMin(1.0));
            }
        }
    }
    return out;
}

DemakeupResult demakeup_subspace(const UVTexture& uv_albedo, const MorphableModel& model,
                                 const DemakeupOptions& options)
{
    if (!(options.lambda >= 0.0)) {
        throw DataError("lambda must be nonnegative");
    }
    const int size = uv_albedo.size();
    const int k = model.k_app();
    const MeshTopology& topo = model.topology;

    std::vector<int> vertices;
    std::vector<Eigen::Vector3d> samples;
    for (int i = 0; i < topo.vertex_count; ++i) {
        const Eigen::Vector2d uv = topo.uv_coords[i];
        Eigen::Vector3d rgb;
        if (sample_bilinear_masked(uv_albedo.color, uv_albedo.visibility, uv.x() * size, uv.y() * size, rgb)) {
            vertices.push_back(i);
            samples.push_back(rgb);
        }
    }
    DemakeupResult out;
    out.visible_vertices = static_cast<int>(vertices.size());
    if (out.visible_vertices < k || vertices.empty()) {
        throw DataError("underdetermined: " + std::to_string(vertices.size()) + " visible vertices for " +
                        std::to_string(k) + " appearance modes");
    }

    const auto rows = static_cast<Eigen::Index>(3 * vertices.size());
    Eigen::MatrixXd basis(rows, k);
    Eigen::VectorXd residual(rows);
    for (std::size_t s = 0; s < vertices.size(); ++s) {
        const Eigen::Index src = 3 * static_cast<Eigen::Index>(vertices[s]);
        const Eigen::Index dst = 3 * static_cast<Eigen::Index>(s);
        basis.middleRows(dst, 3) = model.basis_app.middleRows(src, 3);
        residual.segment<3>(dst) = samples[s] - model.mean_appearance.segment<3>(src);
    }
    Eigen::MatrixXd normal = basis.transpose() * basis;
    for (int j = 0; j < k; ++j) {
        normal(j, j) += options.lambda / (model.sigma_app[j] * model.sigma_app[j]);
    }
    out.delta = normal.ldlt().solve(basis.transpose() * residual);
    if (!out.delta.allFinite()) {
        throw NumericalError("appearance projection produced non-finite coefficients");
    }

    const UvRaster raster = rasterize_uv(topo, size);
    out.low_frequency = splat_to_uv(raster, topo, evaluate_appearance(model, out.delta).colors);
    const Image blurred =
        gaussian_blur_masked(uv_albedo.color, uv_albedo.visibility, std::max(options.blur_fraction * size, 1e-6));

    out.detail = Image(size, size, 0.0);
    out.texture.visibility = uv_albedo.visibility;
    out.texture.fill = out.low_frequency;
    out.texture.color = out.low_frequency;
    for (int i = 0; i < size; ++i) {
        for (int j = 0; j < size; ++j) {
            if (!uv_albedo.visibility(i, j)) {
                continue;
            }
            const Eigen::Vector3d detail = uv_albedo.color.pixel(i, j) - blurred.pixel(i, j);
            out.detail.set_pixel(i, j, detail);
            out.texture.color.set_pixel(i, j, (out.low_frequency.pixel(i, j) + detail).cwiseMax(0.0).cwiseMin(1.0));
        }
    }
    return out;
}

} // namespace facenorm
