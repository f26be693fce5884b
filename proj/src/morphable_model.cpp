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
#include "facenorm/morphable_model.hpp"

#include "facenorm/error.hpp"
#include "facenorm/rotation.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <set>

namespace facenorm {

void MeshTopology::validate() const
{
    if (vertex_count <= 0) {
        throw DataError("topology has no vertices");
    }
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const auto& face = faces[f];
        for (int k = 0; k < 3; ++k) {
            if (face[k] < 0 || face[k] >= vertex_count) {
                throw DataError("face " + std::to_string(f) + " references vertex out of range");
            }
        }
        if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2]) {
            throw DataError("face " + std::to_string(f) + " is degenerate");
        }
    }
    if (static_cast<int>(uv_coords.size()) != vertex_count) {
        throw DataError("uv_coords count does not match vertex_count");
    }
    for (const auto& uv : uv_coords) {
        if (!(uv.x() >= 0.0 && uv.x() <= 1.0 && uv.y() >= 0.0 && uv.y() <= 1.0)) {
            throw DataError("uv coordinate outside [0,1]^2");
        }
    }
    std::set<int> seen;
    for (int idx : landmark_indices) {
        if (idx < 0 || idx >= vertex_count) {
            throw DataError("landmark index out of range");
        }
        if (!seen.insert(idx).second) {
            throw DataError("duplicate landmark index " + std::to_string(idx));
        }
    }
}

void MorphableModel::validate() const
{
    topology.validate();
    const Eigen::Index n = 3 * static_cast<Eigen::Index>(vertex_count());
    if (mean_shape.size() != n || mean_appearance.size() != n) {
        throw DataError("mean vectors must have 3V entries");
    }
    if (basis_id.rows() != n || basis_exp.rows() != n || basis_app.rows() != n) {
        throw DataError("basis row count must be 3V");
    }
    if (sigma_id.size() != basis_id.cols() || sigma_exp.size() != basis_exp.cols() ||
        sigma_app.size() != basis_app.cols()) {
        throw DataError("sigma count must equal basis column count");
    }
    for (const auto* s : {&sigma_id, &sigma_exp, &sigma_app}) {
        if (s->size() > 0 && !(s->minCoeff() > 0.0)) {
            throw DataError("model standard deviations must be positive");
        }
    }
}

CoefficientVector CoefficientVector::zeros(const MorphableModel& model)
{
    CoefficientVector c;
    c.alpha = Eigen::VectorXd::Zero(model.k_id());
    c.beta = Eigen::VectorXd::Zero(model.k_exp());
    c.delta = Eigen::VectorXd::Zero(model.k_app());
    return c;
}

Eigen::VectorXd CoefficientVector::flat() const
{
    Eigen::VectorXd out(dimension());
    out << alpha, beta, delta, rotation, translation;
    return out;
}

void CoefficientVector::assign_flat(const Eigen::VectorXd& flat)
{
    if (flat.size() != dimension()) {
        throw DataError("flat coefficient vector has wrong length");
    }
    Eigen::Index o = 0;
    alpha = flat.segment(o, alpha.size());
    o += alpha.size();
    beta = flat.segment(o, beta.size());
    o += beta.size();
    delta = flat.segment(o, delta.size());
    o += delta.size();
    rotation = flat.segment<3>(o);
    translation = flat.segment<3>(o + 3);
}

bool CoefficientVector::operator==(const CoefficientVector& other) const
{
    return alpha.size() == other.alpha.size() && beta.size() == other.beta.size() &&
           delta.size() == other.delta.size() && flat() == other.flat();
}

void check_dimensions(const MorphableModel& model, const CoefficientVector& c)
{
    if (c.alpha.size() != model.k_id()) {
        throw DataError("alpha has " + std::to_string(c.alpha.size()) + " entries, model expects " +
                        std::to_string(model.k_id()));
    }
    if (c.beta.size() != model.k_exp()) {
        throw DataError("beta has " + std::to_string(c.beta.size()) + " entries, model expects " +
                        std::to_string(model.k_exp()));
    }
    if (c.delta.size() != model.k_app()) {
        throw DataError("delta has " + std::to_string(c.delta.size()) + " entries, model expects " +
                        std::to_string(model.k_app()));
    }
}

Vertices morph_shape(const MorphableModel& model, const CoefficientVector& c)
{
    check_dimensions(model, c);
    const Eigen::VectorXd flat = model.mean_shape + model.basis_id * c.alpha + model.basis_exp * c.beta;
    return unflatten(flat);
}

Vertices evaluate_shape(const MorphableModel& model, const CoefficientVector& c)
{
    const Vertices local = morph_shape(model, c);
    const Eigen::Matrix3d r = rotation_from_axis_angle(c.rotation);
    Vertices world = local * r.transpose();
    world.rowwise() += c.translation.transpose();
    return world;
}

AppearanceEvaluation evaluate_appearance(const MorphableModel& model, const Eigen::VectorXd& delta)
{
    if (delta.size() != model.k_app()) {
        throw DataError("delta has " + std::to_string(delta.size()) + " entries, model expects " +
                        std::to_string(model.k_app()));
    }
    AppearanceEvaluation out;
    out.colors = unflatten(model.mean_appearance + model.basis_app * delta);
    out.clamped.assign(out.colors.rows(), 0);
    for (Eigen::Index i = 0; i < out.colors.rows(); ++i) {
        for (int ch = 0; ch < 3; ++ch) {
            double& v = out.colors(i, ch);
            if (v < 0.0 || v > 1.0) {
                v = std::clamp(v, 0.0, 1.0);
                out.clamped[i] = 1;
            }
        }
    }
    return out;
}

namespace {

double standardized_sum(const Eigen::VectorXd& x, const Eigen::VectorXd& sigma)
{
    double sum = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (sigma[i] > 0.0) {
            const double z = x[i] / sigma[i];
            sum += z * z;
        }
    }
    return sum;
}

Eigen::VectorXd standardized_gradient(const Eigen::VectorXd& x, const Eigen::VectorXd& sigma)
{
    Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (sigma[i] > 0.0) {
            g[i] = 2.0 * x[i] / (sigma[i] * sigma[i]);
        }
    }
    return g;
}

} // namespace

double regularization_energy(const CoefficientVector& c, const MorphableModel& model)
{
    check_dimensions(model, c);
    return standardized_sum(c.alpha, model.sigma_id) + standardized_sum(c.beta, model.sigma_exp) +
           standardized_sum(c.delta, model.sigma_app);
}

CoefficientVector regularization_gradient(const CoefficientVector& c, const MorphableModel& model)
{
    check_dimensions(model, c);
    CoefficientVector g = CoefficientVector::zeros(model);
    g.alpha = standardized_gradient(c.alpha, model.sigma_id);
    g.beta = standardized_gradient(c.beta, model.sigma_exp);
    g.delta = standardized_gradient(c.delta, model.sigma_app);
    return g;
}

namespace {

struct PcaBlock
{
    Eigen::VectorXd mean;
    Eigen::MatrixXd basis;
    Eigen::VectorXd sigma;
};

PcaBlock principal_components(const std::vector<Vertices>& samples, int requested, const char* name,
                              std::vector<std::string>& warnings)
{
    const auto n = static_cast<Eigen::Index>(samples.size());
    const Eigen::Index rows = samples.front().size();
    Eigen::MatrixXd data(rows, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        if (samples[j].size() != rows) {
            throw DataError(std::string(name) + " sample " + std::to_string(j) + " has a different vertex count");
        }
        data.col(j) = flatten(samples[j]);
    }
    PcaBlock out;
    out.mean = data.rowwise().mean();
    data.colwise() -= out.mean;

    Eigen::BDCSVD<Eigen::MatrixXd> svd(data, Eigen::ComputeThinU);
    const Eigen::VectorXd& s = svd.singularValues();
    const double scale = std::max(1.0, out.mean.cwiseAbs().maxCoeff()) * std::sqrt(static_cast<double>(rows));
    const double threshold = 1e-10 * scale;
    int rank = 0;
    while (rank < s.size() && s[rank] > threshold) {
        ++rank;
    }
    int k = requested;
    if (k > rank) {
        warnings.push_back(std::string(name) + " data is rank deficient: requested " + std::to_string(requested) +
                           " components, rank is " + std::to_string(rank));
        k = rank;
    }
    out.basis = svd.matrixU().leftCols(k);
    out.sigma = s.head(k) / std::sqrt(static_cast<double>(n - 1));
    // Deterministic sign: largest-magnitude entry of each column is positive.
    for (int j = 0; j < k; ++j) {
        Eigen::Index imax = 0;
        out.basis.col(j).cwiseAbs().maxCoeff(&imax);
        if (out.basis(imax, j) < 0.0) {
            out.basis.col(j) *= -1.0;
        }
    }
    return out;
}

} // namespace

PcaBuildResult build_pca_model(const PcaBuildInput& input)
{
    const auto n = static_cast<int>(input.shapes.size());
    if (n < 2) {
        throw DataError("PCA model needs at least 2 samples, got " + std::to_string(n));
    }
    if (static_cast<int>(input.appearances.size()) != n) {
        throw DataError("shape and appearance sample counts differ");
    }
    if (input.k_id < 0 || input.k_id > n - 1 || input.k_app < 0 || input.k_app > n - 1) {
        throw DataError("requested PCA widths must lie in [0, N-1] = [0, " + std::to_string(n - 1) + "]");
    }
    if (!(input.sigma_exp > 0.0)) {
        throw DataError("sigma_exp must be positive");
    }
    input.topology.validate();
    const int v = input.topology.vertex_count;
    for (const auto& s : input.shapes) {
        if (s.rows() != v) {
            throw DataError("shape sample does not match topology vertex count");
        }
    }
    for (const auto& a : input.appearances) {
        if (a.rows() != v) {
            throw DataError("appearance sample does not match topology vertex count");
        }
    }

    PcaBuildResult result;
    auto shape = principal_components(input.shapes, input.k_id, "shape", result.warnings);
    auto appearance = principal_components(input.appearances, input.k_app, "appearance", result.warnings);

    MorphableModel& m = result.model;
    m.topology = input.topology;
    m.mean_shape = std::move(shape.mean);
    m.basis_id = std::move(shape.basis);
    m.sigma_id = std::move(shape.sigma);
    m.mean_appearance = std::move(appearance.mean);
    m.basis_app = std::move(appearance.basis);
    m.sigma_app = std::move(appearance.sigma);

    const auto k_exp = static_cast<Eigen::Index>(input.blendshapes.size());
    m.basis_exp.resize(3 * static_cast<Eigen::Index>(v), k_exp);
    for (Eigen::Index j = 0; j < k_exp; ++j) {
        if (input.blendshapes[j].rows() != v) {
            throw DataError("blendshape " + std::to_string(j) + " does not match topology vertex count");
        }
        const double norm = flatten(input.blendshapes[j]).norm();
        if (!(norm > 0.0)) {
            throw DataError("blendshape " + std::to_string(j) + " is identically zero");
        }
        m.basis_exp.col(j) = flatten(input.blendshapes[j]) / norm;
    }
    m.sigma_exp = Eigen::VectorXd::Constant(k_exp, input.sigma_exp);
    m.validate();
    return result;
}

} // namespace facenorm
