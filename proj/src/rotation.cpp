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
#include "facenorm/rotation.hpp"

#include <cmath>

namespace facenorm {

namespace {

// R = I + a [w]x + b [w]x^2 with a = sin(t)/t, b = (1 - cos(t))/t^2.
// da = (da/dt)/t and db = (db/dt)/t are the radial derivative factors.
struct RodriguesCoefficients
{
    double a;
    double b;
    double da;
    double db;
};

RodriguesCoefficients rodrigues_coefficients(double theta)
{
    const double t2 = theta * theta;
    if (theta < 1e-4) {
        return {1.0 - t2 / 6.0, 0.5 - t2 / 24.0, -1.0 / 3.0 + t2 / 30.0, -1.0 / 12.0 + t2 / 180.0};
    }
    const double s = std::sin(theta);
    const double c = std::cos(theta);
    return {s / theta, (1.0 - c) / t2, (theta * c - s) / (t2 * theta),
            (theta * s - 2.0 * (1.0 - c)) / (t2 * t2)};
}

} // namespace

Eigen::Matrix3d skew(const Eigen::Vector3d& v)
{
    Eigen::Matrix3d m;
    m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
    return m;
}

Eigen::Matrix3d rotation_from_axis_angle(const Eigen::Vector3d& omega)
{
    const auto k = rodrigues_coefficients(omega.norm());
    const Eigen::Matrix3d w = skew(omega);
    return Eigen::Matrix3d::Identity() + k.a * w + k.b * w * w;
}

std::array<Eigen::Matrix3d, 3> rotation_jacobian(const Eigen::Vector3d& omega)
{
    const auto k = rodrigues_coefficients(omega.norm());
    const Eigen::Matrix3d w = skew(omega);
    const Eigen::Matrix3d w2 = w * w;
    std::array<Eigen::Matrix3d, 3> out;
    for (int i = 0; i < 3; ++i) {
        const Eigen::Matrix3d e = skew(Eigen::Vector3d::Unit(i));
        out[i] = k.a * e + k.b * (e * w + w * e) + omega[i] * (k.da * w + k.db * w2);
    }
    return out;
}

} // namespace facenorm
