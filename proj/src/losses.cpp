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
#include "facenorm/error.hpp"
#include "facenorm/fitting.hpp"

#include <cmath>

namespace facenorm {

Landmarks project_landmarks(const MorphableModel& model, const CoefficientVector& c, const Camera& camera)
{
    const Vertices world = evaluate_shape(model, c);
    const auto& idx = model.topology.landmark_indices;
    Vertices points(static_cast<Eigen::Index>(idx.size()), 3);
    for (std::size_t l = 0; l < idx.size(); ++l) {
        points.row(static_cast<Eigen::Index>(l)) = world.row(idx[l]);
    }
    return project(camera, points).pixels;
}

LandmarkLoss loss_landmark(const CoefficientVector& c, const MorphableModel& model, const Camera& camera,
                           const Landmarks& targets, bool normalize)
{
    const auto& idx = model.topology.landmark_indices;
    if (targets.rows() != static_cast<Eigen::Index>(idx.size())) {
        throw DataError("expected " + std::to_string(idx.size()) + " landmark targets, got " +
                        std::to_string(targets.rows()));
    }
    const Vertices world = evaluate_shape(model, c);
    const double scale =
        normalize ? 1.0 / (static_cast<double>(camera.height) * camera.height +
                           static_cast<double>(camera.width) * camera.width)
                  : 1.0;

    LandmarkLoss out;
    double sq_sum = 0.0;
    Vertices g_world = Vertices::Zero(world.rows(), 3);
    std::vector<std::pair<int, Eigen::Vector2d>> residuals;
    for (std::size_t l = 0; l < idx.size(); ++l) {
        const Eigen::Vector3d p = world.row(idx[l]).transpose();
        if (!(p.z() > camera.near_plane)) {
            continue;
        }
        const Eigen::Vector2d uv(camera.focal * p.x() / p.z() + camera.principal_point.x(),
                                 camera.focal * p.y() / p.z() + camera.principal_point.y());
        const Eigen::Vector2d r = uv - targets.row(static_cast<Eigen::Index>(l)).transpose();
        sq_sum += r.squaredNorm();
        residuals.emplace_back(static_cast<int>(l), r);
    }
    out.valid_count = static_cast<int>(residuals.size());
    if (out.valid_count == 0) {
        throw DataError("no landmark lies in front of the camera");
    }
    const double inv = 1.0 / out.valid_count;
    out.value = sq_sum * inv * scale;
    out.rmse_px = std::sqrt(sq_sum * inv);
    for (const auto& [l, r] : residuals) {
        const int v = idx[l];
        const Eigen::Vector3d p = world.row(v).transpose();
        g_world.row(v) += (2.0 * inv * scale * projection_jacobian(camera, p).transpose() * r).transpose();
    }
    out.gradient = backprop_to_coefficients(model, c, g_world, nullptr);
    return out;
}

PhotometricLoss loss_photometric(const Image& rendered, const Mask& mask, const Image& target)
{
    if (rendered.height() != target.height() || rendered.width() != target.width() ||
        mask.height() != target.height() || mask.width() != target.width()) {
        throw DataError("photometric loss inputs differ in size");
    }
    PhotometricLoss out;
    out.pixel_count = mask.count();
    if (out.pixel_count == 0) {
        throw DataError("photometric loss mask is empty");
    }
    out.cotangent = Image(rendered.height(), rendered.width(), 0.0);
    const double inv = 1.0 / (3.0 * static_cast<double>(out.pixel_count));
    double sum = 0.0;
    for (int y = 0; y < rendered.height(); ++y) {
        for (int x = 0; x < rendered.width(); ++x) {
            if (!mask(y, x)) {
                continue;
            }
            for (int c = 0; c < 3; ++c) {
                const double d = rendered.at(y, x, c) - target.at(y, x, c);
                sum += std::abs(d);
                out.cotangent.at(y, x, c) = d > 0.0 ? inv : (d < 0.0 ? -inv : 0.0);
            }
        }
    }
    out.value = sum * inv;
    return out;
}

PhotometricLoss loss_photometric(const RenderOutput& rendered, const Image& target, MaskMode mode)
{
    if (mode == MaskMode::foreground) {
        return loss_photometric(rendered.color, rendered.coverage, target);
    }
    return loss_photometric(rendered.color, Mask(rendered.height(), rendered.width(), true), target);
}

double loss_coeff(const CoefficientVector& student, const CoefficientVector& teacher)
{
    if (student.alpha.size() != teacher.alpha.size() || student.beta.size() != teacher.beta.size() ||
        student.delta.size() != teacher.delta.size()) {
        throw DataError("coefficient vectors differ in dimension");
    }
    return (student.flat() - teacher.flat()).squaredNorm() / student.dimension();
}

CoefficientVector loss_coeff_gradient(const CoefficientVector& student, const CoefficientVector& teacher)
{
    if (student.dimension() != teacher.dimension()) {
        throw DataError("coefficient vectors differ in dimension");
    }
    CoefficientVector g = student;
    g.assign_flat(2.0 * (student.flat() - teacher.flat()) / student.dimension());
    return g;
}

} // namespace facenorm
