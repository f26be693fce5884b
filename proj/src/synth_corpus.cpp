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
#include "facenorm/synth_corpus.hpp"

#include "facenorm/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <utility>

namespace facenorm {

std::uint64_t SplitMix64::next()
{
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double SplitMix64::normal()
{
    // Box-Muller; 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream)
{
    SplitMix64 g(seed ^ (stream * 0xD1B54A32D192ED03ULL));
    g.next();
    return g.next();
}

void CorpusSpec::validate() const
{
    if (n_samples <= 0) {
        throw DataError("n_samples must be positive");
    }
    if (template_subdivision < 0 || template_subdivision > 6) {
        throw DataError("template_subdivision must lie in [0, 6]");
    }
    if (bump_count < 0 || makeup_patch_count < 0) {
        throw DataError("counts must be nonnegative");
    }
    const auto [lo, hi] = bump_amplitude_range;
    if (!(std::isfinite(lo) && std::isfinite(hi) && lo >= 0.0 && hi >= lo)) {
        throw DataError("bump_amplitude_range must be finite, nonnegative and ordered");
    }
    for (int c = 0; c < 3; ++c) {
        const double a = skin_tone_range[0][c];
        const double b = skin_tone_range[1][c];
        if (!(a >= 0.0 && b <= 1.0 && a <= b)) {
            throw DataError("skin_tone_range must be an ordered interval inside [0,1]");
        }
    }
    for (const auto& uv : makeup_anchor_uvs) {
        if (!(uv.x() >= 0.0 && uv.x() <= 1.0 && uv.y() >= 0.0 && uv.y() <= 1.0)) {
            throw DataError("makeup anchor uv outside [0,1]^2");
        }
    }
    if (makeup_patch_count > 0 && makeup_anchor_uvs.empty()) {
        throw DataError("makeup patches need at least one anchor uv");
    }
}

namespace {

constexpr double kZStretch = 1.3;

struct Icosphere
{
    std::vector<Eigen::Vector3d> unit;
    std::vector<Eigen::Vector3i> faces;
};

Icosphere build_icosphere(int subdivision)
{
    if (subdivision < 0 || subdivision > 6) {
        throw DataError("subdivision must lie in [0, 6]");
    }
    const double p = (1.0 + std::sqrt(5.0)) / 2.0;
    Icosphere s;
    s.unit = {{-1, p, 0}, {1, p, 0}, {-1, -p, 0}, {1, -p, 0}, {0, -1, p}, {0, 1, p},
              {0, -1, -p}, {0, 1, -p}, {p, 0, -1}, {p, 0, 1}, {-p, 0, -1}, {-p, 0, 1}};
    for (auto& v : s.unit) {
        v.normalize();
    }
    s.faces = {{0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
               {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8},
               {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};
    for (int level = 0; level < subdivision; ++level) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            if (auto it = midpoint.find(key); it != midpoint.end()) {
                return it->second;
            }
            s.unit.push_back((s.unit[a] + s.unit[b]).normalized());
            const int id = static_cast<int>(s.unit.size()) - 1;
            midpoint.emplace(key, id);
            return id;
        };
        std::vector<Eigen::Vector3i> next;
        next.reserve(s.faces.size() * 4);
        for (const auto& f : s.faces) {
            const int ab = mid(f[0], f[1]);
            const int bc = mid(f[1], f[2]);
            const int ca = mid(f[2], f[0]);
            next.emplace_back(f[0], ab, ca);
            next.emplace_back(f[1], bc, ab);
            next.emplace_back(f[2], ca, bc);
            next.emplace_back(ab, bc, ca);
        }
        s.faces = std::move(next);
    }
    // Orient every face outward.
    for (auto& f : s.faces) {
        const Eigen::Vector3d n = (s.unit[f[1]] - s.unit[f[0]]).cross(s.unit[f[2]] - s.unit[f[0]]);
        if (n.dot(s.unit[f[0]] + s.unit[f[1]] + s.unit[f[2]]) < 0.0) {
            std::swap(f[1], f[2]);
        }
    }
    return s;
}

Eigen::Vector2d spherical_uv(const Eigen::Vector3d& d)
{
    const double u = 0.5 + std::atan2(d.x(), -d.z()) / (2.0 * std::numbers::pi);
    const double v = std::acos(std::clamp(-d.y(), -1.0, 1.0)) / std::numbers::pi;
    return {std::clamp(u, 0.0, 1.0), std::clamp(v, 0.0, 1.0)};
}

std::vector<Eigen::Vector3d> landmark_directions()
{
    std::vector<Eigen::Vector3d> dirs;
    dirs.emplace_back(0.0, 0.0, -1.0);
    const auto ring = [&](double polar_deg, int count, double phase) {
        const double polar = polar_deg * std::numbers::pi / 180.0;
        for (int i = 0; i < count; ++i) {
            const double az = phase + 2.0 * std::numbers::pi * i / count;
            dirs.emplace_back(std::sin(polar) * std::cos(az), std::sin(polar) * std::sin(az), -std::cos(polar));
        }
    };
    ring(25.0, 8, 0.0);
    ring(50.0, 8, std::numbers::pi / 8.0);
    ring(72.0, 10, 0.0);
    return dirs;
}

// Monomials x^a y^b z^c with 1 <= a+b+c <= 4, in a fixed order.
const std::vector<Eigen::Vector3i>& color_monomials()
{
    static const std::vector<Eigen::Vector3i> m = [] {
        std::vector<Eigen::Vector3i> out;
        for (int deg = 1; deg <= 4; ++deg) {
            for (int a = deg; a >= 0; --a) {
                for (int b = deg - a; b >= 0; --b) {
                    out.emplace_back(a, b, deg - a - b);
                }
            }
        }
        return out;
    }();
    return m;
}

double monomial(const Eigen::Vector3i& e, const Eigen::Vector3d& d)
{
    return std::pow(d.x(), e[0]) * std::pow(d.y(), e[1]) * std::pow(d.z(), e[2]);
}

double min_triangle_area(const Vertices& shape, const MeshTopology& topo)
{
    double area = std::numeric_limits<double>::infinity();
    for (const auto& f : topo.faces) {
        const Eigen::Vector3d a = shape.row(f[0]);
        const Eigen::Vector3d b = shape.row(f[1]);
        const Eigen::Vector3d c = shape.row(f[2]);
        area = std::min(area, 0.5 * (b - a).cross(c - a).norm());
    }
    return area;
}

Vertices unit_sphere_positions(int subdivision)
{
    const Icosphere s = build_icosphere(subdivision);
    Vertices out(static_cast<Eigen::Index>(s.unit.size()), 3);
    for (std::size_t i = 0; i < s.unit.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = s.unit[i].transpose();
    }
    return out;
}

} // namespace

MeshTopology generate_template(int subdivision)
{
    const Icosphere s = build_icosphere(subdivision);
    MeshTopology topo;
    topo.vertex_count = static_cast<int>(s.unit.size());
    topo.faces = s.faces;
    topo.uv_coords.reserve(s.unit.size());
    for (const auto& d : s.unit) {
        topo.uv_coords.push_back(spherical_uv(d));
    }
    const auto dirs = landmark_directions();
    const int count = std::min<int>(kTemplateLandmarkCount, topo.vertex_count);
    std::vector<std::uint8_t> used(s.unit.size(), 0);
    for (int l = 0; l < count; ++l) {
        int best = -1;
        double best_dot = -2.0;
        for (std::size_t i = 0; i < s.unit.size(); ++i) {
            const double dot = s.unit[i].dot(dirs[l]);
            if (!used[i] && dot > best_dot) {
                best_dot = dot;
                best = static_cast<int>(i);
            }
        }
        used[best] = 1;
        topo.landmark_indices.push_back(best);
    }
    topo.validate();
    return topo;
}

Vertices template_shape(int subdivision)
{
    Vertices v = unit_sphere_positions(subdivision);
    v.col(2) *= kZStretch;
    return v;
}

std::vector<Vertices> generate_blendshapes(const Vertices& template_positions, int count)
{
    std::vector<Vertices> out;
    out.reserve(count);
    const auto v = template_positions.rows();
    // Field 0 opens the lower half vertically; the rest are localized pushes
    // around golden-angle anchors spread over the front hemisphere.
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int j = 0; j < count; ++j) {
        Vertices field = Vertices::Zero(v, 3);
        if (j == 0) {
            for (Eigen::Index i = 0; i < v; ++i) {
                const double y = template_positions(i, 1);
                if (y > 0.0) {
                    field(i, 1) = 0.3 * y;
                }
            }
        } else {
            const double t = (j - 0.5) / std::max(1, count - 1);
            const double zc = -(1.0 - t);
            const double r = std::sqrt(std::max(0.0, 1.0 - zc * zc));
            const Eigen::Vector3d center(r * std::cos(golden * j), r * std::sin(golden * j), zc);
            const int kind = j % 3;
            for (Eigen::Index i = 0; i < v; ++i) {
                const Eigen::Vector3d p = template_positions.row(i).transpose();
                const Eigen::Vector3d d = Eigen::Vector3d(p.x(), p.y(), p.z() / kZStretch).normalized();
                const double weight = std::exp(-(d - center).squaredNorm() / (2.0 * 0.35 * 0.35));
                Eigen::Vector3d disp;
                switch (kind) {
                case 0: disp = d; break;
                case 1: disp = Eigen::Vector3d::UnitY(); break;
                default: disp = Eigen::Vector3d::UnitX(); break;
                }
                field.row(i) = (0.1 * weight * disp).transpose();
            }
        }
        out.push_back(std::move(field));
    }
    return out;
}

Corpus generate_corpus(const CorpusSpec& spec, int expression_count)
{
    spec.validate();
    if (expression_count < 0) {
        throw DataError("expression_count must be nonnegative");
    }
    Corpus corpus;
    corpus.topology = generate_template(spec.template_subdivision);
    const Vertices unit = unit_sphere_positions(spec.template_subdivision);
    const Vertices base = template_shape(spec.template_subdivision);
    const auto v = base.rows();
    const auto& monomials = color_monomials();
    const double min_area = min_triangle_area(base, corpus.topology);

    corpus.samples.reserve(spec.n_samples);
    for (int s = 0; s < spec.n_samples; ++s) {
        SplitMix64 rng(mix_seed(spec.seed, static_cast<std::uint64_t>(s)));
        SyntheticSample sample;
        SampleTruth& truth = sample.truth;
        for (int b = 0; b < spec.bump_count; ++b) {
            Eigen::Vector3d c(rng.normal(), rng.normal(), rng.normal());
            c.normalize();
            const double magnitude = rng.uniform(spec.bump_amplitude_range[0], spec.bump_amplitude_range[1]);
            const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
            truth.bump_centers.push_back(c);
            truth.bump_amplitudes.push_back(sign * magnitude);
            truth.bump_widths.push_back(rng.uniform(0.3, 0.6));
        }
        double damping = 1.0;
        for (int attempt = 0;; ++attempt) {
            sample.shape = base;
            for (Eigen::Index i = 0; i < v; ++i) {
                const Eigen::Vector3d d = unit.row(i).transpose();
                const Eigen::Vector3d radial = Eigen::Vector3d(base.row(i)).normalized();
                double offset = 0.0;
                for (int b = 0; b < spec.bump_count; ++b) {
                    const double w = truth.bump_widths[b];
                    offset += truth.bump_amplitudes[b] * std::exp(-(d - truth.bump_centers[b]).squaredNorm() / (2.0 * w * w));
                }
                sample.shape.row(i) += (damping * offset * radial).transpose();
            }
            if (min_triangle_area(sample.shape, corpus.topology) > 0.05 * min_area || attempt > 20) {
                break;
            }
            damping *= 0.5;
        }
        for (auto& a : truth.bump_amplitudes) {
            a *= damping;
        }

        for (int c = 0; c < 3; ++c) {
            truth.skin_tone[c] = rng.uniform(spec.skin_tone_range[0][c], spec.skin_tone_range[1][c]);
        }
        truth.color_weights.resize(static_cast<Eigen::Index>(monomials.size()), 3);
        for (std::size_t m = 0; m < monomials.size(); ++m) {
            const int degree = monomials[m].sum();
            for (int c = 0; c < 3; ++c) {
                truth.color_weights(static_cast<Eigen::Index>(m), c) = 0.03 / degree * rng.normal();
            }
        }
        sample.appearance.resize(v, 3);
        for (Eigen::Index i = 0; i < v; ++i) {
            const Eigen::Vector3d d = unit.row(i).transpose();
            Eigen::Vector3d color = truth.skin_tone;
            for (std::size_t m = 0; m < monomials.size(); ++m) {
                color += monomial(monomials[m], d) * truth.color_weights.row(static_cast<Eigen::Index>(m)).transpose();
            }
            sample.appearance.row(i) = color.cwiseMax(0.0).cwiseMin(1.0).transpose();
        }
        corpus.samples.push_back(std::move(sample));
    }
    corpus.blendshapes = generate_blendshapes(base, expression_count);
    return corpus;
}

MakeupOptions MakeupOptions::from_spec(const CorpusSpec& spec)
{
    MakeupOptions o;
    o.patch_count = spec.makeup_patch_count;
    o.anchor_uvs = spec.makeup_anchor_uvs;
    return o;
}

namespace {

Eigen::Vector3d hsv_to_rgb(double h, double s, double v)
{
    const double c = v * s;
    const double hp = h * 6.0;
    const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
    Eigen::Vector3d rgb;
    switch (static_cast<int>(hp) % 6) {
    case 0: rgb = {c, x, 0}; break;
    case 1: rgb = {x, c, 0}; break;
    case 2: rgb = {0, c, x}; break;
    case 3: rgb = {0, x, c}; break;
    case 4: rgb = {x, 0, c}; break;
    default: rgb = {c, 0, x}; break;
    }
    return rgb + Eigen::Vector3d::Constant(v - c);
}

} // namespace

MakeupResult apply_makeup(const SyntheticSample& sample, const MeshTopology& topology, const MakeupOptions& options,
                          std::uint64_t seed)
{
    if (sample.appearance.rows() != topology.vertex_count) {
        throw DataError("sample does not match topology");
    }
    if (options.patch_count > 0 && options.anchor_uvs.empty()) {
        throw DataError("makeup patches need at least one anchor uv");
    }
    MakeupResult out;
    out.sample = sample;
    out.patch_alpha.assign(topology.vertex_count, 0.0);
    SplitMix64 rng(mix_seed(seed, 0x6D616B65ULL));
    for (int p = 0; p < options.patch_count; ++p) {
        const Eigen::Vector2d anchor = options.anchor_uvs[p % options.anchor_uvs.size()];
        const double ax = rng.uniform(options.semi_axis_range[0], options.semi_axis_range[1]);
        const double ay = rng.uniform(options.semi_axis_range[0], options.semi_axis_range[1]);
        const double opacity = rng.uniform(options.opacity_range[0], options.opacity_range[1]);
        const Eigen::Vector3d color = hsv_to_rgb(rng.uniform(), rng.uniform(0.7, 1.0), rng.uniform(0.5, 0.9));
        out.patch_colors.push_back(color);
        for (int i = 0; i < topology.vertex_count; ++i) {
            const Eigen::Vector2d uv = topology.uv_coords[i];
            const double du = (uv.x() - anchor.x()) / ax;
            const double dv = (uv.y() - anchor.y()) / ay;
            if (du * du + dv * dv > 1.0) {
                continue;
            }
            const Eigen::Vector3d a = out.sample.appearance.row(i).transpose();
            out.sample.appearance.row(i) = ((1.0 - opacity) * a + opacity * color).transpose();
            out.patch_alpha[i] = 1.0 - (1.0 - out.patch_alpha[i]) * (1.0 - opacity);
        }
    }
    return out;
}

Mask synth_occlusion_mask(std::uint64_t seed, int height, int width, const OcclusionOptions& options)
{
    if (height < 16 || width < 16) {
        throw DataError("occlusion masks need height, width >= 16");
    }
    SplitMix64 rng(mix_seed(seed, 0x6F63636CULL));
    const double size = std::min(height, width);
    const int lo = options.blob_count_range[0];
    const int hi = options.blob_count_range[1];
    const int blobs = lo + static_cast<int>(rng.uniform() * (hi - lo + 1));
    struct Blob
    {
        double cx, cy, r;
    };
    std::vector<Blob> blob_list;
    for (int b = 0; b < std::min(blobs, hi); ++b) {
        blob_list.push_back({rng.uniform(0.15, 0.85) * width, rng.uniform(0.15, 0.85) * height,
                             rng.uniform(0.06, 0.14) * size});
    }
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const Eigen::Vector2d dir(std::cos(angle), std::sin(angle));
    double offset = rng.uniform(0.25, 0.45) * size;

    auto build = [&](double radius_scale, double plane_offset) {
        Mask m(height, width, true);
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                const double px = x + 0.5;
                const double py = y + 0.5;
                double field = 0.0;
                for (const auto& b : blob_list) {
                    const double r = b.r * radius_scale;
                    field += std::exp(-((px - b.cx) * (px - b.cx) + (py - b.cy) * (py - b.cy)) / (2.0 * r * r));
                }
                bool visible = field < 0.5;
                if (options.half_plane) {
                    const Eigen::Vector2d rel(px - 0.5 * width, py - 0.5 * height);
                    visible = visible && rel.dot(dir) < plane_offset;
                }
                m.set(y, x, visible);
            }
        }
        return m;
    };

    double scale = 1.0;
    Mask mask = build(scale, offset);
    if (blob_list.empty() && !options.half_plane) {
        return mask;
    }
    for (int iter = 0; iter < 40; ++iter) {
        const double frac = mask.fraction();
        if (frac < options.visible_fraction_band[0]) {
            scale *= 0.85;
            offset += 0.05 * size;
        } else if (frac > options.visible_fraction_band[1]) {
            scale *= 1.2;
            offset -= 0.05 * size;
        } else {
            break;
        }
        mask = build(scale, offset);
    }
    return mask;
}

} // namespace facenorm
