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
#include "facenorm/rasterizer.hpp"
#include "facenorm/rotation.hpp"

namespace facenorm {

CoefficientVector backprop_to_coefficients(const MorphableModel& model, const CoefficientVector& c,
                                           const Vertices& world_cotangent, const Vertices* albedo_cotangent)
{
    check_dimensions(model, c);
    const Vertices local = morph_shape(model, c);
    const Eigen::Matrix3d r = rotation_from_axis_angle(c.rotation);

    CoefficientVector g = CoefficientVector::zeros(model);
    // Row i of local_cotangent is R^T g_i.
    const Vertices local_cotangent = world_cotangent * r;
    const auto flat = flatten(local_cotangent);
    g.alpha = model.basis_id.transpose() * flat;
    g.beta = model.basis_exp.transpose() * flat;
    g.translation = world_cotangent.colwise().sum().transpose();

    const Eigen::Matrix3d outer = world_cotangent.transpose() * local;
    const auto dr = rotation_jacobian(c.rotation);
    for (int k = 0; k < 3; ++k) {
        g.rotation[k] = dr[k].cwiseProduct(outer).sum();
    }
    if (albedo_cotangent != nullptr) {
        g.delta = model.basis_app.transpose() * flatten(*albedo_cotangent);
    }
    return g;
}

SceneGradient render_backward(const RenderOutput& output, const Image& upstream, const MorphableModel& model,
                              const CoefficientVector& c, const std::optional<LightingCoefficients>& lighting,
                              const Camera& camera, const RenderOptions& options)
{
    if (output.scene_key != scene_key(model, c, lighting, camera, options)) {
        throw DataError("render output does not belong to this scene");
    }
    if (upstream.height() != output.height() || upstream.width() != output.width()) {
        throw DataError("upstream cotangent image has the wrong size");
    }
    const SurfaceState s = evaluate_surface(model, c);
    const MeshTopology& topo = model.topology;
    const auto v = static_cast<Eigen::Index>(s.world.rows());

    Vertices g_world = Vertices::Zero(v, 3);
    Vertices g_albedo = Vertices::Zero(v, 3);
    Vertices g_normals = Vertices::Zero(v, 3);
    SceneGradient grad;

    for (int y = 0; y < output.height(); ++y) {
        for (int x = 0; x < output.width(); ++x) {
            const std::size_t idx = output.index(y, x);
            const int t = output.tri_id[idx];
            if (t < 0) {
                continue;
            }
            const Eigen::Vector3d g = upstream.pixel(y, x);
            if (g.isZero(0.0)) {
                continue;
            }
            const auto& f = topo.faces[t];
            const Eigen::Vector3d x0 = s.world.row(f[0]);
            const Eigen::Vector3d x1 = s.world.row(f[1]);
            const Eigen::Vector3d x2 = s.world.row(f[2]);
            const Eigen::Vector3d d = camera.ray(x + 0.5, y + 0.5);
            const Eigen::Vector3d w(d.dot(x1.cross(x2)), d.dot(x2.cross(x0)), d.dot(x0.cross(x1)));
            const double wsum = w.sum();
            const Eigen::Vector3d b = w / wsum;

            Eigen::Vector3d albedo = Eigen::Vector3d::Zero();
            Eigen::Vector3d n_raw = Eigen::Vector3d::Zero();
            for (int k = 0; k < 3; ++k) {
                albedo += b[k] * s.albedo.colors.row(f[k]).transpose();
                n_raw += b[k] * s.normals.row(f[k]).transpose();
            }

            Eigen::Vector3d g_a = Eigen::Vector3d::Zero();
            Eigen::Vector3d g_nraw = Eigen::Vector3d::Zero();
            if (!lighting) {
                g_a = g;
            } else {
                const double len = n_raw.norm();
                const Eigen::Vector3d n = n_raw / len;
                const ShVector sh = sh_basis_unchecked(n);
                const Eigen::Matrix<double, 9, 3> jsh = sh_basis_jacobian(n);
                Eigen::Vector3d g_n = Eigen::Vector3d::Zero();
                for (int ch = 0; ch < 3; ++ch) {
                    const auto gamma_c = lighting->channel(ch);
                    const double irr = gamma_c.dot(sh);
                    if (options.clamp_irradiance && irr < 0.0) {
                        continue;
                    }
                    const double prod = albedo[ch] * irr;
                    if (prod < 0.0 || prod > 1.0) {
                        continue;
                    }
                    g_a[ch] = g[ch] * irr;
                    const double g_irr = g[ch] * albedo[ch];
                    grad.lighting.gamma.segment<9>(9 * ch) += g_irr * sh;
                    g_n += g_irr * (jsh.transpose() * gamma_c);
                }
                g_nraw = (g_n - n * n.dot(g_n)) / len;
            }

            Eigen::Vector3d g_b;
            for (int k = 0; k < 3; ++k) {
                const Eigen::Vector3d a_k = s.albedo.colors.row(f[k]).transpose();
                const Eigen::Vector3d n_k = s.normals.row(f[k]).transpose();
                g_b[k] = g_a.dot(a_k) + g_nraw.dot(n_k);
                g_albedo.row(f[k]) += b[k] * g_a.transpose();
                g_normals.row(f[k]) += b[k] * g_nraw.transpose();
            }
            const Eigen::Vector3d g_w = (g_b - Eigen::Vector3d::Constant(g_b.dot(b))) / wsum;
            // w_k = d . (X_{k+1} x X_{k+2})
            const Eigen::Vector3d* xs[3] = {&x0, &x1, &x2};
            for (int k = 0; k < 3; ++k) {
                const int k1 = (k + 1) % 3;
                const int k2 = (k + 2) % 3;
                g_world.row(f[k1]) += g_w[k] * xs[k2]->cross(d).transpose();
                g_world.row(f[k2]) += g_w[k] * d.cross(*xs[k1]).transpose();
            }
        }
    }
    if (lighting) {
        g_world += vertex_normals_backward(s.world, topo, g_normals);
    }
    grad.coefficients = backprop_to_coefficients(model, c, g_world, &g_albedo);
    return grad;
}

} // namespace facenorm
