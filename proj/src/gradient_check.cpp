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
#include "facenorm/synth_corpus.hpp"

#include <cmath>
#include <numeric>

namespace facenorm {

const BlockReport* GradientReport::find(const std::string& name) const
{
    for (const auto& b : blocks) {
        if (b.block == name) {
            return &b;
        }
    }
    return nullptr;
}

namespace {

struct BlockRange
{
    Eigen::Index offset;
    Eigen::Index size;
};

BlockRange block_range(const std::string& name, const CoefficientVector& c)
{
    const Eigen::Index a = c.alpha.size();
    const Eigen::Index b = c.beta.size();
    const Eigen::Index d = c.delta.size();
    if (name == "alpha") return {0, a};
    if (name == "beta") return {a, b};
    if (name == "delta") return {a + b, d};
    if (name == "rotation") return {a + b + d, 3};
    if (name == "translation") return {a + b + d + 3, 3};
    if (name == "gamma") return {a + b + d + 6, 27};
    throw DataError("unknown parameter block '" + name + "'");
}

} // namespace

GradientReport gradient_check(const GradientScene& scene, GradientLoss loss, double epsilon,
                              const std::vector<std::string>& blocks, int params_per_block, std::uint64_t seed)
{
    if (scene.model == nullptr) {
        throw DataError("gradient scene has no model");
    }
    const MorphableModel& model = *scene.model;
    const Camera& cam = scene.camera;
    const int dim = scene.coefficients.dimension();
    const bool lit = loss == GradientLoss::photometric_lit;
    const std::optional<LightingCoefficients> lighting =
        lit ? std::optional<LightingCoefficients>(scene.lighting) : std::nullopt;

    Eigen::VectorXd analytic = Eigen::VectorXd::Zero(dim + 27);
    RenderOutput base;
    Image cotangent;
    if (loss == GradientLoss::landmark) {
        analytic.head(dim) = loss_landmark(scene.coefficients, model, cam, scene.landmarks).gradient.flat();
    } else {
        base = render(model, scene.coefficients, lighting, cam);
        const PhotometricLoss photo = loss_photometric(base, scene.target, MaskMode::foreground);
        const SceneGradient g = render_backward(base, photo.cotangent, model, scene.coefficients, lighting, cam);
        analytic.head(dim) = g.coefficients.flat();
        analytic.tail<27>() = g.lighting.gamma;
        cotangent = photo.cotangent;
    }

    // Loss as a function of the packed parameters with triangle ownership and
    // the L1 residual signs frozen at `base`; the L1 loss then equals the
    // cotangent-weighted render up to a constant, so differencing never steps
    // across a kink of the absolute value.
    auto evaluate = [&](const Eigen::VectorXd& p) {
        CoefficientVector c = scene.coefficients;
        c.assign_flat(p.head(dim));
        if (loss == GradientLoss::landmark) {
            return loss_landmark(c, model, cam, scene.landmarks).value;
        }
        std::optional<LightingCoefficients> l;
        if (lit) {
            l = LightingCoefficients{p.tail<27>()};
        }
        const SurfaceState surface = evaluate_surface(model, c);
        const Image img = shade_pixels(base.tri_id, surface, model.topology, cam, l);
        const auto pixels = img.data();
        const auto weights = cotangent.data();
        return std::inner_product(pixels.begin(), pixels.end(), weights.begin(), 0.0);
    };

    Eigen::VectorXd packed(dim + 27);
    packed << scene.coefficients.flat(), scene.lighting.gamma;

    GradientReport report;
    SplitMix64 rng(mix_seed(seed, 0x67726164ULL));
    for (const auto& name : blocks) {
        const BlockRange range = block_range(name, scene.coefficients);
        std::vector<Eigen::Index> order(static_cast<std::size_t>(range.size));
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        const auto take = std::min<std::size_t>(order.size(), static_cast<std::size_t>(params_per_block));
        for (std::size_t i = 0; i < take; ++i) {
            const auto j = i + static_cast<std::size_t>(rng.uniform() * (order.size() - i));
            std::swap(order[i], order[std::min(j, order.size() - 1)]);
        }
        BlockReport br;
        br.block = name;
        double sum = 0.0;
        for (std::size_t i = 0; i < take; ++i) {
            const Eigen::Index k = range.offset + order[i];
            Eigen::VectorXd plus = packed;
            Eigen::VectorXd minus = packed;
            plus[k] += epsilon;
            minus[k] -= epsilon;
            const double numeric = (evaluate(plus) - evaluate(minus)) / (2.0 * epsilon);
            const double a = analytic[k];
            const double denom = std::max(std::abs(a), std::abs(numeric));
            const double rel = denom < 1e-14 ? 0.0 : std::abs(a - numeric) / denom;
            br.max_rel_error = std::max(br.max_rel_error, rel);
            sum += rel;
            ++br.checked;
        }
        br.mean_rel_error = br.checked > 0 ? sum / br.checked : 0.0;
        report.blocks.push_back(br);
    }
    return report;
}

} // namespace facenorm
