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
#include "facenorm/rasterizer.hpp"

#include "facenorm/error.hpp"
#include "facenorm/hash.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace facenorm {

Camera Camera::default_for(int height, int width)
{
    Camera cam;
    cam.height = height;
    cam.width = width;
    cam.focal = 1.2 * std::max(height, width);
    cam.principal_point = {0.5 * width, 0.5 * height};
    return cam;
}

void Camera::validate() const
{
    if (!(focal > 0.0)) {
        throw DataError("camera focal length must be positive");
    }
    if (!(near_plane > 0.0 && near_plane < far_plane)) {
        throw DataError("camera requires 0 < near < far");
    }
    if (height <= 0 || width <= 0) {
        throw DataError("camera image size must be positive");
    }
}

Projection project(const Camera& camera, const Vertices& points)
{
    Projection out;
    out.pixels.resize(points.rows(), 2);
    out.depth.resize(points.rows());
    out.valid.assign(points.rows(), 0);
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        const double z = points(i, 2);
        out.depth[i] = z;
        if (z > camera.near_plane) {
            out.valid[i] = 1;
            out.pixels(i, 0) = camera.focal * points(i, 0) / z + camera.principal_point.x();
            out.pixels(i, 1) = camera.focal * points(i, 1) / z + camera.principal_point.y();
        } else {
            out.pixels.row(i).setConstant(std::numeric_limits<double>::quiet_NaN());
        }
    }
    return out;
}

Eigen::Matrix<double, 2, 3> projection_jacobian(const Camera& camera, const Eigen::Vector3d& p)
{
    const double iz = 1.0 / p.z();
    const double f = camera.focal;
    Eigen::Matrix<double, 2, 3> j;
    j << f * iz, 0.0, -f * p.x() * iz * iz, 0.0, f * iz, -f * p.y() * iz * iz;
    return j;
}

Eigen::Vector3d ray_barycentrics(const Eigen::Vector3d& ray, const Eigen::Vector3d& x0, const Eigen::Vector3d& x1,
                                 const Eigen::Vector3d& x2)
{
    const Eigen::Vector3d w(ray.dot(x1.cross(x2)), ray.dot(x2.cross(x0)), ray.dot(x0.cross(x1)));
    return w / w.sum();
}

RenderOutput rasterize(const Camera& camera, const Vertices& shape, const MeshTopology& topology, double background)
{
    camera.validate();
    const int h = camera.height;
    const int w = camera.width;
    RenderOutput out;
    out.color = Image(h, w, background);
    out.depth.assign(static_cast<std::size_t>(h) * w, camera.far_plane);
    out.coverage = Mask(h, w, false);
    out.tri_id.assign(static_cast<std::size_t>(h) * w, -1);
    out.bary.assign(static_cast<std::size_t>(h) * w, Eigen::Vector3d::Zero());
    if (shape.rows() == 0 || topology.faces.empty()) {
        return out;
    }
    const Projection proj = project(camera, shape);

    for (int t = 0; t < topology.face_count(); ++t) {
        const auto& f = topology.faces[t];
        if (!proj.valid[f[0]] || !proj.valid[f[1]] || !proj.valid[f[2]]) {
            continue;
        }
        const Eigen::Vector3d x0 = shape.row(f[0]);
        const Eigen::Vector3d x1 = shape.row(f[1]);
        const Eigen::Vector3d x2 = shape.row(f[2]);
        const Eigen::Vector3d normal = (x1 - x0).cross(x2 - x0);
        // Front-facing triangles have their normal pointing back at the camera.
        if (!(normal.dot(x0) < 0.0)) {
            continue;
        }
        const Eigen::Vector3d c0 = x1.cross(x2);
        const Eigen::Vector3d c1 = x2.cross(x0);
        const Eigen::Vector3d c2 = x0.cross(x1);
        const double plane = normal.dot(x0);

        double umin = proj.pixels(f[0], 0), umax = umin;
        double vmin = proj.pixels(f[0], 1), vmax = vmin;
        for (int k = 1; k < 3; ++k) {
            umin = std::min(umin, proj.pixels(f[k], 0));
            umax = std::max(umax, proj.pixels(f[k], 0));
            vmin = std::min(vmin, proj.pixels(f[k], 1));
            vmax = std::max(vmax, proj.pixels(f[k], 1));
        }
        const int x_begin = std::max(0, static_cast<int>(std::ceil(umin - 0.5)));
        const int x_end = std::min(w - 1, static_cast<int>(std::floor(umax - 0.5)));
        const int y_begin = std::max(0, static_cast<int>(std::ceil(vmin - 0.5)));
        const int y_end = std::min(h - 1, static_cast<int>(std::floor(vmax - 0.5)));

        for (int y = y_begin; y <= y_end; ++y) {
            for (int x = x_begin; x <= x_end; ++x) {
                const Eigen::Vector3d d = camera.ray(x + 0.5, y + 0.5);
                const double w0 = d.dot(c0);
                const double w1 = d.dot(c1);
                const double w2 = d.dot(c2);
                // Front-facing: the weights share the (negative) sign of their sum.
                if (w0 > 0.0 || w1 > 0.0 || w2 > 0.0) {
                    continue;
                }
                const double sum = w0 + w1 + w2;
                if (!(sum < 0.0)) {
                    continue;
                }
                const double z = plane / normal.dot(d);
                if (!(z > camera.near_plane && z < camera.far_plane)) {
                    continue;
                }
                const std::size_t idx = out.index(y, x);
                if (z < out.depth[idx]) {
                    out.depth[idx] = z;
                    out.tri_id[idx] = t;
                    out.bary[idx] = Eigen::Vector3d(w0, w1, w2) / sum;
                }
            }
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            out.coverage.set(y, x, out.tri_id[out.index(y, x)] >= 0);
        }
    }
    return out;
}

SurfaceState evaluate_surface(const MorphableModel& model, const CoefficientVector& c)
{
    SurfaceState s;
    s.world = evaluate_shape(model, c);
    s.normals = vertex_normals(s.world, model.topology);
    s.albedo = evaluate_appearance(model, c.delta);
    return s;
}

namespace {

struct PixelSample
{
    Eigen::Vector3d bary;
    Eigen::Vector3d albedo;
    Eigen::Vector3d normal_raw;
};

PixelSample sample_surface(int t, int y, int x, const SurfaceState& s, const MeshTopology& topology,
                           const Camera& camera)
{
    const auto& f = topology.faces[t];
    PixelSample p;
    p.bary = ray_barycentrics(camera.ray(x + 0.5, y + 0.5), s.world.row(f[0]), s.world.row(f[1]),
                              s.world.row(f[2]));
    p.albedo.setZero();
    p.normal_raw.setZero();
    for (int k = 0; k < 3; ++k) {
        p.albedo += p.bary[k] * s.albedo.colors.row(f[k]).transpose();
        p.normal_raw += p.bary[k] * s.normals.row(f[k]).transpose();
    }
    return p;
}

} // namespace

Image shade_pixels(std::span<const int> tri_id, const SurfaceState& surface, const MeshTopology& topology,
                   const Camera& camera, const std::optional<LightingCoefficients>& lighting,
                   const RenderOptions& options)
{
    Image img(camera.height, camera.width, options.background);
    const ShadeOptions shade_options{options.clamp_irradiance};
    for (int y = 0; y < camera.height; ++y) {
        for (int x = 0; x < camera.width; ++x) {
            const int t = tri_id[static_cast<std::size_t>(y) * camera.width + x];
            if (t < 0) {
                continue;
            }
            const PixelSample p = sample_surface(t, y, x, surface, topology, camera);
            img.set_pixel(y, x, shade(p.albedo, lighting, p.normal_raw.normalized(), shade_options));
        }
    }
    return img;
}

Image irradiance_map(const RenderOutput& geometry, const SurfaceState& surface, const MeshTopology& topology,
                     const LightingCoefficients& lighting)
{
    Camera cam;
    cam.height = geometry.height();
    cam.width = geometry.width();
    Image img(cam.height, cam.width, 0.0);
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            const std::size_t idx = geometry.index(y, x);
            const int t = geometry.tri_id[idx];
            if (t < 0) {
                continue;
            }
            const auto& f = topology.faces[t];
            Eigen::Vector3d n = Eigen::Vector3d::Zero();
            for (int k = 0; k < 3; ++k) {
                n += geometry.bary[idx][k] * surface.normals.row(f[k]).transpose();
            }
            img.set_pixel(y, x, irradiance(lighting, n.normalized()));
        }
    }
    return img;
}

std::uint64_t scene_key(const MorphableModel& model, const CoefficientVector& c,
                        const std::optional<LightingCoefficients>& lighting, const Camera& camera,
                        const RenderOptions& options)
{
    Fnv1a h;
    h.value(model.vertex_count());
    h.value(model.topology.face_count());
    const Eigen::VectorXd flat = c.flat();
    h.doubles({flat.data(), static_cast<std::size_t>(flat.size())});
    h.value(lighting.has_value());
    if (lighting) {
        h.doubles({lighting->gamma.data(), 27});
    }
    h.value(camera.focal);
    h.value(camera.principal_point.x());
    h.value(camera.principal_point.y());
    h.value(camera.height);
    h.value(camera.width);
    h.value(camera.near_plane);
    h.value(camera.far_plane);
    h.value(options.background);
    h.value(options.clamp_irradiance);
    return h.digest();
}

RenderOutput render(const MorphableModel& model, const CoefficientVector& c,
                    const std::optional<LightingCoefficients>& lighting, const Camera& camera,
                    const RenderOptions& options)
{
    const SurfaceState surface = evaluate_surface(model, c);
    RenderOutput out = rasterize(camera, surface.world, model.topology, options.background);
    out.color = shade_pixels(out.tri_id, surface, model.topology, camera, lighting, options);
    out.scene_key = scene_key(model, c, lighting, camera, options);
    return out;
}

} // namespace facenorm
