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

#include <Eigen/Dense>

#include <array>

namespace facenorm {

/// Exponential map from an axis-angle vector (radians) to a rotation matrix.
Eigen::Matrix3d rotation_from_axis_angle(const Eigen::Vector3d& omega);

/// Partial derivatives dR/d(omega_k), k = 0..2. Stable through omega = 0.
std::array<Eigen::Matrix3d, 3> rotation_jacobian(const Eigen::Vector3d& omega);

Eigen::Matrix3d skew(const Eigen::Vector3d& v);

} // namespace facenorm
