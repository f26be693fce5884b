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
#include "facenorm/shading.hpp"

#include "facenorm/error.hpp"

#include <cmath>
#include <numbers>

namespace facenorm {

namespace {

const double kY00 = 0.5 / std::sqrt(std::numbers::pi);
const double kY1 = std::sqrt(3.0 / (4.0 * std::numbers::pi));
const double kY2 = std::sqrt(15.0 / (4.0 * std::numbers::pi));
const double kY20 = std::sqrt(5.0 / (16.0 * std::numbers::pi));
const double kY22 = std::sqrt(15.0 / (16.0 * std::numbers::pi));

double find_identity_coefficient()
{
    double g = 1.0 / kY00;
    // Step to a neighbour whose product rounds to exactly one, if needed.
    for (int i = 0; i < 8 && g * kY00 != 1.0; ++i) {
        g = std::nextafter(g, g * kY00 < 1.0 ? 2.0 * g : 0.0);
    }
    return g;
}

} // namespace

double identity_ambient_coefficient()
{
    static const double g = find_identity_coefficient();
    return g;
}

LightingCoefficients LightingCoefficients::identity()
{
    LightingCoefficients l;
    for (int c = 0; c < 3; ++c) {
        l.gamma[9 * c] = identity_ambient_coefficient();
    }
    return l;
}

ShVector sh_basis_unchecked(const Eigen::Vector3d& n)
{
    const double x = n.x();
    const double y = n.y();
    const double z = n.z();
    ShVector out;
    out << kY00, kY1 * y, kY1 * z, kY1 * x, kY2 * x * y, kY2 * y * z, kY20 * (3.0 * z * z - 1.0), kY2 * x * z,
        kY22 * (x * x - y * y);
    return out;
}

ShVector sh_basis(const Eigen::Vector3d& n)
{
    if (!(std::abs(n.norm() - 1.0) <= 1e-6)) {
        throw DataError("sh_basis requires a unit direction");
    }
    return sh_basis_unchecked(n);
}

Eigen::Matrix<double, 9, 3> sh_basis_jacobian(const Eigen::Vector3d& n)
{
    const double x = n.x();
    const double y = n.y();
    const double z = n.z();
    Eigen::Matrix<double, 9, 3> j;
    j << 0.0, 0.0, 0.0,
        0.0, kY1, 0.0,
        0.0, 0.0, kY1,
        kY1, 0.0, 0.0,
        kY2 * y, kY2 * x, 0.0,
        0.0, kY2 * z, kY2 * y,
        0.0, 0.0, 6.0 * kY20 * z,
        kY2 * z, 0.0, kY2 * x,
        2.0 * kY22 * x, -2.0 * kY22 * y, 0.0;
    return j;
}

Eigen::Vector3d irradiance(const LightingCoefficients& lighting, const Eigen::Vector3d& n)
{
    const ShVector y = sh_basis(n);
    Eigen::Vector3d out;
    for (int c = 0; c < 3; ++c) {
        double sum = 0.0;
        for (int k = 0; k < 9; ++k) {
            sum += lighting.gamma[9 * c + k] * y[k];
        }
        out[c] = sum;
    }
    return out;
}

Vertices vertex_normals(const Vertices& shape, const MeshTopology& topology)
{
    Vertices acc = Vertices::Zero(shape.rows(), 3);
    for (const auto& f : topology.faces) {
        const Eigen::Vector3d a = shape.row(f[0]);
        const Eigen::Vector3d b = shape.row(f[1]);
        const Eigen::Vector3d c = shape.row(f[2]);
        // Cross product length is twice the area, so the sum is area weighted.
        const Eigen::RowVector3d q = (b - a).cross(c - a).transpose();
        acc.row(f[0]) += q;
        acc.row(f[1]) += q;
        acc.row(f[2]) += q;
    }
    for (Eigen::Index i = 0; i < acc.rows(); ++i) {
        const double len = acc.row(i).norm();
        if (!(len > 0.0)) {
            throw DataError("vertex " + std::to_string(i) + " has a zero-length normal");
        }
        acc.row(i) /= len;
    }
    return acc;
}

Vertices vertex_normals_backward(const Vertices& shape, const MeshTopology& topology,
                                 const Vertices& normal_cotangent)
{
    Vertices acc = Vertices::Zero(shape.rows(), 3);
    for (const auto& f : topology.faces) {
        const Eigen::Vector3d a = shape.row(f[0]);
        const Eigen::Vector3d b = shape.row(f[1]);
        const Eigen::Vector3d c = shape.row(f[2]);
        acc.row(f[0]) += (b - a).cross(c - a).transpose();
        acc.row(f[1]) += (b - a).cross(c - a).transpose();
        acc.row(f[2]) += (b - a).cross(c - a).transpose();
    }
    // Cotangent on the unnormalized sums: (I - n n^T) g / |m|.
    Vertices g_sum(shape.rows(), 3);
    for (Eigen::Index i = 0; i < acc.rows(); ++i) {
        const Eigen::Vector3d m = acc.row(i).transpose();
        const double len = m.norm();
        if (!(len > 0.0)) {
            throw DataError("vertex " + std::to_string(i) + " has a zero-length normal");
        }
        const Eigen::Vector3d n = m / len;
        const Eigen::Vector3d g = normal_cotangent.row(i).transpose();
        g_sum.row(i) = ((g - n * n.dot(g)) / len).transpose();
    }
    Vertices grad = Vertices::Zero(shape.rows(), 3);
    for (const auto& f : topology.faces) {
        const Eigen::Vector3d a = shape.row(f[0]);
        const Eigen::Vector3d e1 = Eigen::Vector3d(shape.row(f[1])) - a;
        const Eigen::Vector3d e2 = Eigen::Vector3d(shape.row(f[2])) - a;
        const Eigen::Vector3d g = (g_sum.row(f[0]) + g_sum.row(f[1]) + g_sum.row(f[2])).transpose();
        const Eigen::Vector3d ge1 = e2.cross(g);
        const Eigen::Vector3d ge2 = g.cross(e1);
        grad.row(f[1]) += ge1.transpose();
        grad.row(f[2]) += ge2.transpose();
        grad.row(f[0]) -= (ge1 + ge2).transpose();
    }
    return grad;
}

Eigen::Vector3d shade(const Eigen::Vector3d& albedo, const std::optional<LightingCoefficients>& lighting,
                      const Eigen::Vector3d& n, const ShadeOptions& options)
{
    if (!lighting) {
        return albedo;
    }
    Eigen::Vector3d irr = irradiance(*lighting, n);
    if (options.clamp_irradiance) {
        irr = irr.cwiseMax(0.0);
    }
    return albedo.cwiseProduct(irr).cwiseMax(0.0).cwiseMin(1.0);
}

} // namespace facenorm
