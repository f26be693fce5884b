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

#include "facenorm/image.hpp"
#include "facenorm/morphable_model.hpp"
#include "facenorm/rasterizer.hpp"
#include "facenorm/shading.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace facenorm {

/// L x 2 landmark pixel positions.
using Landmarks = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

enum class MaskMode
{
    foreground,
    full,
};

/// Individual loss terms can be switched off for ablations.
struct LossToggles
{
    bool coeff = true;
    bool land = true;
    bool diff = true;
    bool light = true;
    bool reg = true;

    /// Sets a toggle by name ("coeff", "land", "diff", "light", "reg").
    /// Returns false for an unknown name.
    bool set(const std::string& name, bool on);
};

struct FitConfig
{
    double w_coeff = 1e-1;
    double w_land = 8e-2;
    double w_diff = 100.0;
    double w_light = 100.0;
    double w_reg = 1e-3;
    /// Weight of the L1 photo term when scoring bare-skin images.
    double w_photo = 100.0;

    double learning_rate = 1e-2;
    /// Learning rate decays geometrically to learning_rate * lr_final_fraction
    /// at the last iteration. 1 keeps it constant.
    double lr_final_fraction = 0.05;
    int iterations = 500;
    /// Teacher schedule: the first fraction of iterations uses landmarks and
    /// regularization only, the next fraction updates only the lighting, then
    /// everything is optimized jointly.
    double landmark_warmup_fraction = 0.1;
    double lighting_warmup_fraction = 0.25;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    LossToggles toggles;
    MaskMode mask_mode = MaskMode::foreground;
    bool normalize_landmarks = true;
    bool clamp_irradiance = true;
    int render_size = 256;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Adam with bias-corrected moments.
class Adam
{
public:
    Adam(Eigen::Index size, double beta1, double beta2, double epsilon);

    /// In-place update of `params` with step size `lr`.
    void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr);
    int steps() const { return t_; }

private:
    Eigen::VectorXd m_;
    Eigen::VectorXd v_;
    double beta1_;
    double beta2_;
    double epsilon_;
    int t_ = 0;
};

struct LossRecord
{
    int iter = 0;
    double total = 0.0;
    /// Weighted contributions keyed by term name; they sum to `total`.
    std::map<std::string, double> terms;
};

struct FitResult
{
    CoefficientVector coefficients;
    LightingCoefficients lighting;
    std::vector<LossRecord> trace;
    bool converged = false;
};

/// Thrown when a fit hits a non-finite loss; carries the trace so far.
class FitDivergence : public std::runtime_error
{
public:
    FitDivergence(const std::string& what, std::vector<LossRecord> trace)
        : std::runtime_error(what), trace_(std::move(trace))
    {
    }
    const std::vector<LossRecord>& trace() const { return trace_; }

private:
    std::vector<LossRecord> trace_;
};

struct LandmarkLoss
{
    double value = 0.0;
    CoefficientVector gradient;
    /// Root mean squared pixel distance over valid landmarks.
    double rmse_px = 0.0;
    int valid_count = 0;
};

/// Mean squared pixel distance between projected landmark vertices and
/// targets, divided by the squared image diagonal when `normalize` is set.
/// Landmarks at or behind the near plane are skipped; throws DataError if none remain.
LandmarkLoss loss_landmark(const CoefficientVector& c, const MorphableModel& model, const Camera& camera,
                           const Landmarks& targets, bool normalize = true);

/// Projections of the model's landmark vertices.
Landmarks project_landmarks(const MorphableModel& model, const CoefficientVector& c, const Camera& camera);

struct PhotometricLoss
{
    double value = 0.0;
    /// d value / d rendered color.
    Image cotangent;
    std::size_t pixel_count = 0;
};

/// Mean absolute per-channel difference over the render's coverage
/// (foreground) or the whole frame (full). Throws DataError on an empty mask.
PhotometricLoss loss_photometric(const RenderOutput& rendered, const Image& target, MaskMode mode);
PhotometricLoss loss_photometric(const Image& rendered, const Mask& mask, const Image& target);

/// Mean squared difference over the full coefficient vector, pose included.
double loss_coeff(const CoefficientVector& student, const CoefficientVector& teacher);
CoefficientVector loss_coeff_gradient(const CoefficientVector& student, const CoefficientVector& teacher);

/// Zero coefficients with the head centered in front of the camera at the
/// distance where the mean shape spans about 60% of the frame.
CoefficientVector initial_coefficients(const MorphableModel& model, const Camera& camera);

/// Jointly fits coefficients and lighting to `image` by Adam on
/// w_land * landmark + w_light * L1(lit render, image) + w_reg * regularization.
FitResult fit_teacher(const Image& image, const Landmarks& landmarks, const MorphableModel& model,
                      const Camera& camera, const FitConfig& config);

/// Refits coefficients to the bare-skin image with the teacher's lighting held
/// fixed: w_coeff * coefficient consistency + w_land * landmark
/// + w_diff * L1(unlit render, bare) + w_light * L1(lit render, reference)
/// + w_reg * regularization. Starts from the teacher's coefficients.
FitResult fit_student(const Image& bare_image, const Image& reference_image, const Landmarks& landmarks,
                      const FitResult& teacher, const MorphableModel& model, const Camera& camera,
                      const FitConfig& config);

enum class GradientLoss
{
    photometric_lit,
    photometric_unlit,
    landmark,
};

/// Scene for finite-difference verification.
struct GradientScene
{
    const MorphableModel* model = nullptr;
    CoefficientVector coefficients;
    LightingCoefficients lighting;
    Camera camera;
    Image target;
    Landmarks landmarks;
};

struct BlockReport
{
    std::string block;
    int checked = 0;
    double max_rel_error = 0.0;
    double mean_rel_error = 0.0;
};

struct GradientReport
{
    std::vector<BlockReport> blocks;
    const BlockReport* find(const std::string& name) const;
};

/// Central differences against the analytic gradient on up to
/// `params_per_block` randomly chosen entries of each block (all entries when
/// the block is smaller). Photometric losses keep the base render's triangle
/// ownership and L1 residual signs frozen while differencing.
GradientReport gradient_check(const GradientScene& scene, GradientLoss loss, double epsilon,
                              const std::vector<std::string>& blocks, int params_per_block = 20,
                              std::uint64_t seed = 0);

// JSON form: {"alpha":[…],"beta":[…],"delta":[…],"rotation":[…],"translation":[…],
// "gamma":[…],"converged":b,"trace":[{"iter":n,"total":x,"land":…}]}.
std::string fit_result_to_json(const FitResult& result);
FitResult fit_result_from_json(const std::string& text);

} // namespace facenorm
