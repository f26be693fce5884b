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
#include "facenorm/fitting.hpp"

#include "facenorm/error.hpp"

#include <cmath>
#include <functional>

namespace facenorm {

bool LossToggles::set(const std::string& name, bool on)
{
    if (name == "coeff") coeff = on;
    else if (name == "land") land = on;
    else if (name == "diff") diff = on;
    else if (name == "light") light = on;
    else if (name == "reg") reg = on;
    else return false;
    return true;
}

void FitConfig::validate() const
{
    for (double w : {w_coeff, w_land, w_diff, w_light, w_reg, w_photo}) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw DataError("loss weights must be finite and nonnegative");
        }
    }
    if (!(learning_rate > 0.0)) {
        throw DataError("learning_rate must be positive");
    }
    if (!(lr_final_fraction > 0.0 && lr_final_fraction <= 1.0)) {
        throw DataError("lr_final_fraction must lie in (0, 1]");
    }
    if (!(landmark_warmup_fraction >= 0.0 && lighting_warmup_fraction >= 0.0 &&
          landmark_warmup_fraction + lighting_warmup_fraction <= 1.0)) {
        throw DataError("warm-up fractions must be nonnegative and sum to at most 1");
    }
    if (iterations < 0) {
        throw DataError("iterations must be nonnegative");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && epsilon > 0.0)) {
        throw DataError("invalid Adam hyperparameters");
    }
}

Adam::Adam(Eigen::Index size, double beta1, double beta2, double epsilon)
    : m_(Eigen::VectorXd::Zero(size)), v_(Eigen::VectorXd::Zero(size)), beta1_(beta1), beta2_(beta2),
      epsilon_(epsilon)
{
}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr)
{
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    for (Eigen::Index i = 0; i < params.size(); ++i) {
        const double m_hat = m_[i] / c1;
        const double v_hat = v_[i] / c2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + epsilon_);
    }
}

CoefficientVector initial_coefficients(const MorphableModel& model, const Camera& camera)
{
    CoefficientVector c = CoefficientVector::zeros(model);
    const Vertices mean = unflatten(model.mean_shape);
    const Eigen::RowVector3d centroid = mean.colwise().mean();
    const double extent = (mean.rowwise() - centroid).leftCols<2>().cwiseAbs().maxCoeff();
    const double distance = 2.0 * extent * camera.focal / (0.6 * std::min(camera.height, camera.width));
    c.translation = Eigen::Vector3d(-centroid.x(), -centroid.y(), distance - centroid.z());
    return c;
}

namespace {

struct Evaluation
{
    double total = 0.0;
    std::map<std::string, double> terms;
    Eigen::VectorXd gradient;
};

void add_term(Evaluation& e, const std::string& name, double weighted)
{
    e.terms[name] = weighted;
    e.total += weighted;
}

bool converged_trace(const std::vector<LossRecord>& trace)
{
    if (trace.size() < 2) {
        return false;
    }
    const std::size_t k = std::min<std::size_t>(50, trace.size() - 1);
    const double last = trace.back().total;
    const double before = trace[trace.size() - 1 - k].total;
    return std::abs(last - before) <= 1e-4 * std::max(std::abs(last), 1e-12);
}

// Iteration ranges of the teacher's staged schedule.
struct Stages
{
    int landmark_end = 0;
    int lighting_end = 0;
};

Stages teacher_stages(const FitConfig& config)
{
    Stages s;
    s.landmark_end = static_cast<int>(std::lround(config.landmark_warmup_fraction * config.iterations));
    s.lighting_end =
        s.landmark_end + static_cast<int>(std::lround(config.lighting_warmup_fraction * config.iterations));
    return s;
}

template <typename EvalFn>
void run_adam(Eigen::VectorXd& params, const FitConfig& config, std::vector<LossRecord>& trace, EvalFn&& evaluate,
              const std::function<void(int, Eigen::VectorXd&)>& mask_gradient = {})
{
    Adam adam(params.size(), config.beta1, config.beta2, config.epsilon);
    const int n = config.iterations;
    for (int it = 0; it < n; ++it) {
        Evaluation e = evaluate(params, it);
        LossRecord rec;
        rec.iter = it;
        rec.total = e.total;
        rec.terms = std::move(e.terms);
        trace.push_back(std::move(rec));
        if (!std::isfinite(e.total) || !e.gradient.allFinite()) {
            throw FitDivergence("non-finite loss at iteration " + std::to_string(it), trace);
        }
        const double progress = n > 1 ? static_cast<double>(it) / (n - 1) : 0.0;
        const double lr = config.learning_rate * std::pow(config.lr_final_fraction, progress);
        if (mask_gradient) {
            mask_gradient(it, e.gradient);
        }
        adam.step(params, e.gradient, lr);
    }
}

Camera render_camera(const Camera& camera, const Image& image)
{
    if (image.height() != camera.height || image.width() != camera.width) {
        throw DataError("image size does not match the camera");
    }
    camera.validate();
    return camera;
}

} // namespace

FitResult fit_teacher(const Image& image, const Landmarks& landmarks, const MorphableModel& model,
                      const Camera& camera, const FitConfig& config)
{
    config.validate();
    const Camera cam = render_camera(camera, image);
    FitResult result;
    result.coefficients = initial_coefficients(model, cam);
    result.lighting = LightingCoefficients::identity();
    const int dim = result.coefficients.dimension();
    const RenderOptions options{0.5, config.clamp_irradiance};

    Eigen::VectorXd params(dim + 27);
    params << result.coefficients.flat(), result.lighting.gamma;

    CoefficientVector c = result.coefficients;
    LightingCoefficients lighting;
    auto unpack = [&](const Eigen::VectorXd& p) {
        c.assign_flat(p.head(dim));
        lighting.gamma = p.tail<27>();
    };

    const Stages stages = teacher_stages(config);
    auto evaluate = [&](const Eigen::VectorXd& p, int it) {
        unpack(p);
        Evaluation e;
        e.gradient = Eigen::VectorXd::Zero(p.size());
        if (config.toggles.land) {
            const LandmarkLoss l = loss_landmark(c, model, cam, landmarks, config.normalize_landmarks);
            add_term(e, "land", config.w_land * l.value);
            e.gradient.head(dim) += config.w_land * l.gradient.flat();
        }
        if (config.toggles.light && (it >= stages.landmark_end || !config.toggles.land)) {
            const RenderOutput out = render(model, c, lighting, cam, options);
            PhotometricLoss photo = loss_photometric(out, image, config.mask_mode);
            add_term(e, "light", config.w_light * photo.value);
            for (double& v : photo.cotangent.data()) {
                v *= config.w_light;
            }
            const SceneGradient g = render_backward(out, photo.cotangent, model, c, lighting, cam, options);
            e.gradient.head(dim) += g.coefficients.flat();
            e.gradient.tail<27>() += g.lighting.gamma;
        }
        if (config.toggles.reg) {
            add_term(e, "reg", config.w_reg * regularization_energy(c, model));
            e.gradient.head(dim) += config.w_reg * regularization_gradient(c, model).flat();
        }
        return e;
    };

    // The photometric term only joins after landmarks have aligned the head,
    // and the coefficients stay frozen until the lighting has caught up;
    // otherwise the lighting mismatch is absorbed by rotating the head.
    auto mask_gradient = [&](int it, Eigen::VectorXd& g) {
        if (it >= stages.landmark_end && it < stages.lighting_end) {
            g.head(dim).setZero();
        }
    };
    run_adam(params, config, result.trace, evaluate, mask_gradient);
    unpack(params);
    result.coefficients = c;
    result.lighting = lighting;
    result.converged = converged_trace(result.trace);
    return result;
}

FitResult fit_student(const Image& bare_image, const Image& reference_image, const Landmarks& landmarks,
                      const FitResult& teacher, const MorphableModel& model, const Camera& camera,
                      const FitConfig& config)
{
    config.validate();
    const Camera cam = render_camera(camera, bare_image);
    render_camera(camera, reference_image);
    check_dimensions(model, teacher.coefficients);

    FitResult result;
    result.coefficients = teacher.coefficients;
    result.lighting = teacher.lighting;
    const RenderOptions options{0.5, config.clamp_irradiance};
    Eigen::VectorXd params = teacher.coefficients.flat();
    CoefficientVector c = teacher.coefficients;

    auto evaluate = [&](const Eigen::VectorXd& p, int) {
        c.assign_flat(p);
        Evaluation e;
        e.gradient = Eigen::VectorXd::Zero(p.size());
        if (config.toggles.coeff) {
            add_term(e, "coeff", config.w_coeff * loss_coeff(c, teacher.coefficients));
            e.gradient += config.w_coeff * loss_coeff_gradient(c, teacher.coefficients).flat();
        }
        if (config.toggles.land) {
            const LandmarkLoss l = loss_landmark(c, model, cam, landmarks, config.normalize_landmarks);
            add_term(e, "land", config.w_land * l.value);
            e.gradient += config.w_land * l.gradient.flat();
        }
        if (config.toggles.diff) {
            const RenderOutput out = render(model, c, std::nullopt, cam, options);
            PhotometricLoss photo = loss_photometric(out, bare_image, config.mask_mode);
            add_term(e, "diff", config.w_diff * photo.value);
            for (double& v : photo.cotangent.data()) {
                v *= config.w_diff;
            }
            e.gradient += render_backward(out, photo.cotangent, model, c, std::nullopt, cam, options)
                              .coefficients.flat();
        }
        if (config.toggles.light) {
            const RenderOutput out = render(model, c, teacher.lighting, cam, options);
            PhotometricLoss photo = loss_photometric(out, reference_image, config.mask_mode);
            add_term(e, "light", config.w_light * photo.value);
            for (double& v : photo.cotangent.data()) {
                v *= config.w_light;
            }
            e.gradient += render_backward(out, photo.cotangent, model, c, teacher.lighting, cam, options)
                              .coefficients.flat();
        }
        if (config.toggles.reg) {
            add_term(e, "reg", config.w_reg * regularization_energy(c, model));
            e.gradient += config.w_reg * regularization_gradient(c, model).flat();
        }
        return e;
    };

    run_adam(params, config, result.trace, evaluate);
    c.assign_flat(params);
    result.coefficients = c;
    result.converged = converged_trace(result.trace);
    return result;
}

} // namespace facenorm
