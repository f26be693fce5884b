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
#include "facenorm/uv_texture.hpp"

#include "facenorm/error.hpp"

#include <algorithm>
#include <cmath>

namespace facenorm {

bool is_seam_triangle(const MeshTopology& topology, int t)
{
    const auto& f = topology.faces[t];
    double lo = 1.0;
    double hi = 0.0;
    for (int k = 0; k < 3; ++k) {
        lo = std::min(lo, topology.uv_coords[f[k]].x());
        hi = std::max(hi, topology.uv_coords[f[k]].x());
    }
    return hi - lo > 0.5;
}

UvRaster rasterize_uv(const MeshTopology& topology, int size)
{
    if (size <= 0) {
        throw DataError("UV texture size must be positive");
    }
    UvRaster r;
    r.size = size;
    r.tri_id.assign(static_cast<std::size_t>(size) * size, -1);
    r.bary.assign(static_cast<std::size_t>(size) * size, Eigen::Vector3d::Zero());
    for (int t = 0; t < topology.face_count(); ++t) {
        if (is_seam_triangle(topology, t)) {
            continue;
        }
        const auto& f = topology.faces[t];
        const Eigen::Vector2d p0 = topology.uv_coords[f[0]] * size;
        const Eigen::Vector2d p1 = topology.uv_coords[f[1]] * size;
        const Eigen::Vector2d p2 = topology.uv_coords[f[2]] * size;
        const double area = (p1 - p0).x() * (p2 - p0).y() - (p1 - p0).y() * (p2 - p0).x();
        if (area == 0.0) {
            continue;
        }
        const int j0 = std::max(0, static_cast<int>(std::ceil(std::min({p0.x(), p1.x(), p2.x()}) - 0.5)));
        const int j1 = std::min(size - 1, static_cast<int>(std::floor(std::max({p0.x(), p1.x(), p2.x()}) - 0.5)));
        const int i0 = std::max(0, static_cast<int>(std::ceil(std::min({p0.y(), p1.y(), p2.y()}) - 0.5)));
        const int i1 = std::min(size - 1, static_cast<int>(std::floor(std::max({p0.y(), p1.y(), p2.y()}) - 0.5)));
        for (int i = i0; i <= i1; ++i) {
            for (int j = j0; j <= j1; ++j) {
                const Eigen::Vector2d q(j + 0.5, i + 0.5);
                const auto edge = [&](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
                    return ((b - a).x() * (q - a).y() - (b - a).y() * (q - a).x()) / area;
                };
                const Eigen::Vector3d b(edge(p1, p2), edge(p2, p0), edge(p0, p1));
                if (b.minCoeff() < 0.0) {
                    continue;
                }
                const std::size_t idx = r.index(i, j);
                if (r.tri_id[idx] < 0) {
                    r.tri_id[idx] = t;
                    r.bary[idx] = b / b.sum();
                }
            }
        }
    }
    return r;
}

Image splat_to_uv(const UvRaster& raster, const MeshTopology& topology, const Vertices& attribute)
{
    const Eigen::Vector3d mean = attribute.colwise().mean().transpose();
    Image img(raster.size, raster.size);
    for (int i = 0; i < raster.size; ++i) {
        for (int j = 0; j < raster.size; ++j) {
            const std::size_t idx = raster.index(i, j);
            const int t = raster.tri_id[idx];
            if (t < 0) {
                img.set_pixel(i, j, mean);
                continue;
            }
            const auto& f = topology.faces[t];
            Eigen::Vector3d v = Eigen::Vector3d::Zero();
            for (int k = 0; k < 3; ++k) {
                v += raster.bary[idx][k] * attribute.row(f[k]).transpose();
            }
            img.set_pixel(i, j, v);
        }
    }
    return img;
}

Image mean_appearance_fill(const MorphableModel& model, const UvRaster& raster)
{
    return splat_to_uv(raster, model.topology, unflatten(model.mean_appearance));
}

bool sample_bilinear_masked(const Image& image, const Mask& mask, double x, double y, Eigen::Vector3d& out)
{
    const double fx = std::clamp(x - 0.5, 0.0, static_cast<double>(image.width() - 1));
    const double fy = std::clamp(y - 0.5, 0.0, static_cast<double>(image.height() - 1));
    const int x0 = static_cast<int>(std::floor(fx));
    const int y0 = static_cast<int>(std::floor(fy));
    const int x1 = std::min(x0 + 1, image.width() - 1);
    const int y1 = std::min(y0 + 1, image.height() - 1);
    const double tx = fx - x0;
    const double ty = fy - y0;
    const int xs[4] = {x0, x1, x0, x1};
    const int ys[4] = {y0, y0, y1, y1};
    const double ws[4] = {(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty};
    Eigen::Vector3d acc = Eigen::Vector3d::Zero();
    double total = 0.0;
    for (int k = 0; k < 4; ++k) {
        if (ws[k] > 0.0 && mask(ys[k], xs[k])) {
            acc += ws[k] * image.pixel(ys[k], xs[k]);
            total += ws[k];
        }
    }
    if (!(total > 0.0)) {
        return false;
    }
    out = acc / total;
    return true;
}

TexelCorrespondence texel_correspondence(const CoefficientVector& c, const MorphableModel& model,
                                         const Camera& camera, const UvRaster& raster, const UnwarpOptions& options)
{
    const MeshTopology& topo = model.topology;
    const Vertices world = evaluate_shape(model, c);
    TexelCorrespondence out;
    out.size = raster.size;
    out.geometry = rasterize(camera, world, topo);
    out.visible = Mask(raster.size, raster.size, false);
    out.pixel.assign(raster.tri_id.size(), Eigen::Vector2d::Zero());
    out.depth.assign(raster.tri_id.size(), 0.0);
    const double tolerance = options.depth_tolerance * (camera.far_plane - camera.near_plane);

    for (int i = 0; i < raster.size; ++i) {
        for (int j = 0; j < raster.size; ++j) {
            const std::size_t idx = raster.index(i, j);
            const int t = raster.tri_id[idx];
            if (t < 0) {
                continue;
            }
            const auto& f = topo.faces[t];
            const Eigen::Vector3d x0 = world.row(f[0]);
            const Eigen::Vector3d x1 = world.row(f[1]);
            const Eigen::Vector3d x2 = world.row(f[2]);
            const Eigen::Vector3d p = raster.bary[idx][0] * x0 + raster.bary[idx][1] * x1 + raster.bary[idx][2] * x2;
            out.depth[idx] = p.z();
            if (!((x1 - x0).cross(x2 - x0).dot(x0) < 0.0) || !(p.z() > camera.near_plane)) {
                continue;
            }
            const Eigen::Vector2d px(camera.focal * p.x() / p.z() + camera.principal_point.x(),
                                     camera.focal * p.y() / p.z() + camera.principal_point.y());
            int row = 0;
            int col = 0;
            if (!pixel_at(camera.height, camera.width, px.x(), px.y(), row, col)) {
                continue;
            }
            const std::size_t pix = out.geometry.index(row, col);
            if (out.geometry.tri_id[pix] < 0 || std::abs(out.geometry.depth[pix] - p.z()) > tolerance) {
                continue;
            }
            out.visible.set(i, j, true);
            out.pixel[idx] = px;
        }
    }
    return out;
}

UVTexture unwarp(const Image& image, const CoefficientVector& c, const MorphableModel& model, const Camera& camera,
                 int size, const UnwarpOptions& options)
{
    if (image.height() != camera.height || image.width() != camera.width) {
        throw DataError("image size does not match the camera");
    }
    const UvRaster raster = rasterize_uv(model.topology, size);
    const TexelCorrespondence corr = texel_correspondence(c, model, camera, raster, options);
    UVTexture tex;
    tex.fill = mean_appearance_fill(model, raster);
    tex.color = tex.fill;
    tex.visibility = Mask(size, size, false);
    for (int i = 0; i < size; ++i) {
        for (int j = 0; j < size; ++j) {
            if (!corr.visible(i, j)) {
                continue;
            }
            const Eigen::Vector2d px = corr.pixel[raster.index(i, j)];
            Eigen::Vector3d rgb;
            if (sample_bilinear_masked(image, corr.geometry.coverage, px.x(), px.y(), rgb)) {
                tex.color.set_pixel(i, j, rgb);
                tex.visibility.set(i, j, true);
            }
        }
    }
    return tex;
}

RewarpResult rewarp(const UVTexture& texture, const CoefficientVector& c, const MorphableModel& model,
                    const Camera& camera, double background)
{
    const MeshTopology& topo = model.topology;
    const Vertices world = evaluate_shape(model, c);
    const RenderOutput geo = rasterize(camera, world, topo, background);
    RewarpResult out;
    out.image = geo.color;
    out.coverage = geo.coverage;
    out.valid = Mask(camera.height, camera.width, false);
    const int size = texture.size();
    for (int y = 0; y < camera.height; ++y) {
        for (int x = 0; x < camera.width; ++x) {
            const std::size_t idx = geo.index(y, x);
            const int t = geo.tri_id[idx];
            if (t < 0) {
                continue;
            }
            const auto& f = topo.faces[t];
            Eigen::Vector2d uv = Eigen::Vector2d::Zero();
            for (int k = 0; k < 3; ++k) {
                uv += geo.bary[idx][k] * topo.uv_coords[f[k]];
            }
            const double tx = uv.x() * size;
            const double ty = uv.y() * size;
            Eigen::Vector3d rgb;
            if (!is_seam_triangle(topo, t) && sample_bilinear_masked(texture.color, texture.visibility, tx, ty, rgb)) {
                out.valid.set(y, x, true);
            } else {
                rgb = sample_bilinear(texture.fill, tx, ty);
            }
            out.image.set_pixel(y, x, rgb);
        }
    }
    return out;
}

UVTexture apply_occlusion(const UVTexture& texture, const Mask& mask, const CoefficientVector& c,
                          const MorphableModel& model, const Camera& camera, const UnwarpOptions& options)
{
    if (mask.height() != camera.height || mask.width() != camera.width) {
        throw DataError("occlusion mask size does not match the image");
    }
    const UvRaster raster = rasterize_uv(model.topology, texture.size());
    const TexelCorrespondence corr = texel_correspondence(c, model, camera, raster, options);
    UVTexture out = texture;
    for (int i = 0; i < texture.size(); ++i) {
        for (int j = 0; j < texture.size(); ++j) {
            if (!texture.visibility(i, j)) {
                continue;
            }
            bool keep = corr.visible(i, j);
            if (keep) {
                const Eigen::Vector2d px = corr.pixel[raster.index(i, j)];
                int row = 0;
                int col = 0;
                keep = pixel_at(camera.height, camera.width, px.x(), px.y(), row, col) && mask(row, col);
            }
            if (!keep) {
                out.visibility.set(i, j, false);
                out.color.set_pixel(i, j, texture.fill.pixel(i, j));
            }
        }
    }
    return out;
}

Image gaussian_blur_masked(const Image& image, const Mask& mask, double sigma)
{
    const int h = image.height();
    const int w = image.width();
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(2 * radius + 1);
    for (int k = -radius; k <= radius; ++k) {
        kernel[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
    }
    // Channels 0..2 carry masked color, channel 3 the mask itself.
    std::vector<double> src(static_cast<std::size_t>(h) * w * 4, 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (mask(y, x)) {
                double* p = &src[(static_cast<std::size_t>(y) * w + x) * 4];
                p[0] = image.at(y, x, 0);
                p[1] = image.at(y, x, 1);
                p[2] = image.at(y, x, 2);
                p[3] = 1.0;
            }
        }
    }
    std::vector<double> tmp(src.size(), 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc[4] = {0, 0, 0, 0};
            for (int k = std::max(-radius, -x); k <= std::min(radius, w - 1 - x); ++k) {
                const double* p = &src[(static_cast<std::size_t>(y) * w + x + k) * 4];
                for (int c = 0; c < 4; ++c) {
                    acc[c] += kernel[k + radius] * p[c];
                }
            }
            std::copy(acc, acc + 4, &tmp[(static_cast<std::size_t>(y) * w + x) * 4]);
        }
    }
    Image out = image;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc[4] = {0, 0, 0, 0};
            for (int k = std::max(-radius, -y); k <= std::min(radius, h - 1 - y); ++k) {
                const double* p = &tmp[(static_cast<std::size_t>(y + k) * w + x) * 4];
                for (int c = 0; c < 4; ++c) {
                    acc[c] += kernel[k + radius] * p[c];
                }
            }
            if (acc[3] > 0.0) {
                out.set_pixel(y, x, Eigen::Vector3d(acc[0], acc[1], acc[2]) / acc[3]);
            }
        }
    }
    return out;
}

} // namespace facenorm
