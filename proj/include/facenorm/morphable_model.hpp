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

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace facenorm {

/// V x 3 vertex attributes (positions, colors, normals). Row-major, so the
/// underlying storage is the 3V vector (x0, y0, z0, x1, ...) used by the bases.
using Vertices = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

inline Eigen::Map<const Eigen::VectorXd> flatten(const Vertices& v)
{
    return {v.data(), v.size()};
}

inline Vertices unflatten(const Eigen::VectorXd& flat)
{
    return Eigen::Map<const Vertices>(flat.data(), flat.size() / 3, 3);
}

struct MeshTopology
{
    int vertex_count = 0;
    std::vector<Eigen::Vector3i> faces;
    std::vector<Eigen::Vector2d> uv_coords;
    std::vector<int> landmark_indices;

    int face_count() const { return static_cast<int>(faces.size()); }
    int landmark_count() const { return static_cast<int>(landmark_indices.size()); }

    /// Throws DataError on out-of-range or degenerate faces, duplicate
    /// landmarks, or UVs outside the unit square.
    void validate() const;
};

/// Linear face model: shape = mean_shape + basis_id * alpha + basis_exp * beta,
/// appearance = mean_appearance + basis_app * delta. Immutable once built.
struct MorphableModel
{
    MeshTopology topology;
    Eigen::VectorXd mean_shape;
    Eigen::VectorXd mean_appearance;
    Eigen::MatrixXd basis_id;
    Eigen::MatrixXd basis_exp;
    Eigen::MatrixXd basis_app;
    Eigen::VectorXd sigma_id;
    Eigen::VectorXd sigma_exp;
    Eigen::VectorXd sigma_app;

    int vertex_count() const { return topology.vertex_count; }
    int k_id() const { return static_cast<int>(basis_id.cols()); }
    int k_exp() const { return static_cast<int>(basis_exp.cols()); }
    int k_app() const { return static_cast<int>(basis_app.cols()); }

    void validate() const;
};

/// Model coefficients: identity, expression, appearance, then a rigid pose
/// (axis-angle rotation in radians, translation in model units).
struct CoefficientVector
{
    Eigen::VectorXd alpha;
    Eigen::VectorXd beta;
    Eigen::VectorXd delta;
    Eigen::Vector3d rotation = Eigen::Vector3d::Zero();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    static CoefficientVector zeros(const MorphableModel& model);

    int dimension() const { return static_cast<int>(alpha.size() + beta.size() + delta.size()) + 6; }

    /// Concatenation [alpha, beta, delta, rotation, translation].
    Eigen::VectorXd flat() const;
    void assign_flat(const Eigen::VectorXd& flat);

    bool operator==(const CoefficientVector& other) const;
};

/// Throws DataError naming the first block whose size disagrees with the model.
void check_dimensions(const MorphableModel& model, const CoefficientVector& c);

/// Morphed shape in model space, before the rigid transform.
Vertices morph_shape(const MorphableModel& model, const CoefficientVector& c);

/// Morphed shape rotated by c.rotation and translated by c.translation.
Vertices evaluate_shape(const MorphableModel& model, const CoefficientVector& c);

struct AppearanceEvaluation
{
    Vertices colors;
    /// Nonzero where any channel was clamped to [0, 1].
    std::vector<std::uint8_t> clamped;
};

AppearanceEvaluation evaluate_appearance(const MorphableModel& model, const Eigen::VectorXd& delta);

/// Sum of squared standardized coefficients over alpha, beta, delta.
/// Pose is excluded, as are modes whose sigma is zero.
double regularization_energy(const CoefficientVector& c, const MorphableModel& model);

/// Gradient of regularization_energy; pose entries are zero.
CoefficientVector regularization_gradient(const CoefficientVector& c, const MorphableModel& model);

struct PcaBuildInput
{
    MeshTopology topology;
    std::vector<Vertices> shapes;
    std::vector<Vertices> appearances;
    int k_id = 0;
    int k_app = 0;
    /// Expression deformation fields, one V x 3 field per mode.
    std::vector<Vertices> blendshapes;
    /// Standard deviation assigned to every expression mode.
    double sigma_exp = 1.0;
};

struct PcaBuildResult
{
    MorphableModel model;
    std::vector<std::string> warnings;
};

/// Builds the identity and appearance bases by PCA over the corpus and stores
/// unit-normalized blendshapes as the expression basis. Requested widths above
/// the numerical rank of the centered data are reduced with a warning.
PcaBuildResult build_pca_model(const PcaBuildInput& input);

/// Binary "MFM1" container, little-endian f64 payload, bit-exact round trip.
void save_model(const std::filesystem::path& path, const MorphableModel& model);
MorphableModel load_model(const std::filesystem::path& path);
std::vector<std::uint8_t> serialize_model(const MorphableModel& model);
MorphableModel deserialize_model(std::span<const std::uint8_t> bytes);

} // namespace facenorm
