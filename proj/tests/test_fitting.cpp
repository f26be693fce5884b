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
#include "facenorm/pipeline.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace facenorm;
using namespace facenorm::testing;

namespace {

MorphableModel one_landmark_model()
{
    MorphableModel m = toy_model(3);
    m.topology.landmark_indices = {0};
    return m;
}

FitConfig short_config(int iterations)
{
    FitConfig cfg;
    cfg.iterations = iterations;
    return cfg;
}

// Teacher result that reproduces a known scene exactly.
struct KnownScene
{
    Camera camera;
    FitResult teacher;
    Image lit;
    Image unlit;
    Landmarks landmarks;
};

KnownScene known_scene(const MorphableModel& model, int size, std::uint64_t seed)
{
    KnownScene s;
    s.camera = Camera::default_for(size, size);
    s.teacher.coefficients = near_mean_coefficients(model, s.camera, seed);
    s.teacher.lighting = random_lighting(seed + 1);
    s.lit = render(model, s.teacher.coefficients, s.teacher.lighting, s.camera).color;
    s.unlit = render(model, s.teacher.coefficients, std::nullopt, s.camera).color;
    s.landmarks = project_landmarks(model, s.teacher.coefficients, s.camera);
    return s;
}

} // namespace

TEST_CASE("landmark loss")
{
    const MorphableModel m = one_landmark_model();
    const Camera cam = Camera::default_for(40, 30);
    const CoefficientVector c = initial_coefficients(m, cam);
    Landmarks target = project_landmarks(m, c, cam);
    CHECK(loss_landmark(c, m, cam, target, false).value == doctest::Approx(0.0).scale(1.0));

    target(0, 0) += 3.0;
    target(0, 1) += 4.0;
    const LandmarkLoss raw = loss_landmark(c, m, cam, target, false);
    CHECK(raw.value == doctest::Approx(25.0));
    CHECK(raw.rmse_px == doctest::Approx(5.0));
    CHECK(raw.valid_count == 1);
    CHECK(loss_landmark(c, m, cam, target, true).value == doctest::Approx(25.0 / (40.0 * 40.0 + 30.0 * 30.0)));

    CoefficientVector behind = c;
    behind.translation.z() = -5.0;
    CHECK_THROWS_AS(loss_landmark(behind, m, cam, target), DataError);
    CHECK_THROWS_AS(loss_landmark(c, m, cam, Landmarks::Zero(3, 2)), DataError);
}

TEST_CASE("landmark gradient matches central differences")
{
    const MorphableModel& model = face_model();
    const Camera cam = Camera::default_for(48, 48);
    GradientScene scene;
    scene.model = &model;
    scene.camera = cam;
    scene.coefficients = near_mean_coefficients(model, cam, 21);
    scene.landmarks = project_landmarks(model, scene.coefficients, cam);
    for (Eigen::Index i = 0; i < scene.landmarks.rows(); ++i) {
        scene.landmarks(i, 0) += std::sin(1.7 * i) * 2.0;
        scene.landmarks(i, 1) += std::cos(0.9 * i) * 2.0;
    }
    const GradientReport r =
        gradient_check(scene, GradientLoss::landmark, 1e-5, {"alpha", "beta", "rotation", "translation"});
    CHECK(r.find("rotation")->max_rel_error < 1e-5);
    CHECK(r.find("translation")->max_rel_error < 1e-6);
    CHECK(r.find("alpha")->max_rel_error < 1e-5);
    CHECK(r.find("beta")->max_rel_error < 1e-5);
}

TEST_CASE("photometric loss")
{
    const MorphableModel& model = face_model();
    const Camera cam = Camera::default_for(24, 24);
    const RenderOutput out = render(model, near_mean_coefficients(model, cam, 1), std::nullopt, cam);
    CHECK(loss_photometric(out, out.color, MaskMode::foreground).value == 0.0);

    Image shifted = out.color;
    for (double& v : shifted.data()) v += 0.1;
    const PhotometricLoss shift = loss_photometric(out, shifted, MaskMode::foreground);
    CHECK(shift.value == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(shift.pixel_count == out.coverage.count());

    const Image target = random_image(24, 24, 2);
    for (MaskMode mode : {MaskMode::foreground, MaskMode::full}) {
        double sum = 0.0;
        int n = 0;
        for (int y = 0; y < 24; ++y) {
            for (int x = 0; x < 24; ++x) {
                if (mode == MaskMode::foreground && !out.coverage(y, x)) continue;
                for (int c = 0; c < 3; ++c) sum += std::abs(out.color.at(y, x, c) - target.at(y, x, c));
                n += 3;
            }
        }
        const PhotometricLoss l = loss_photometric(out, target, mode);
        CHECK(l.value == doctest::Approx(sum / n).epsilon(1e-12));
        // the cotangent is the sign of the residual over the pixel count
        const double w = 1.0 / n;
        CHECK(std::abs(l.cotangent.at(12, 12, 0)) == doctest::Approx(w));
    }
    CHECK_THROWS_AS(loss_photometric(out.color, Mask(24, 24, false), target), DataError);
    CHECK_THROWS_AS(loss_photometric(out, Image(8, 8), MaskMode::full), DataError);
}

TEST_CASE("coefficient consistency loss")
{
    CoefficientVector a;
    a.alpha = Eigen::VectorXd::Zero(80);
    a.beta = Eigen::VectorXd::Zero(64);
    a.delta = Eigen::VectorXd::Zero(148);
    CHECK(a.dimension() == 298);
    CHECK(loss_coeff(a, a) == 0.0);
    CoefficientVector b = a;
    b.delta[5] = 1.0;
    CHECK(loss_coeff(b, a) == doctest::Approx(1.0 / 298.0));

    b.assign_flat(random_vector(298, 3));
    const Eigen::VectorXd fa = a.flat(), fb = b.flat();
    CHECK(loss_coeff(b, a) == doctest::Approx((fb - fa).squaredNorm() / 298.0).epsilon(1e-13));
    const Eigen::VectorXd g = loss_coeff_gradient(b, a).flat();
    CHECK((g - 2.0 * (fb - fa) / 298.0).cwiseAbs().maxCoeff() < 1e-15);

    CoefficientVector short_one = a;
    short_one.beta.resize(3);
    CHECK_THROWS_AS(loss_coeff(short_one, a), DataError);
}

TEST_CASE("Adam takes the textbook first two steps")
{
    Adam adam(1, 0.9, 0.999, 1e-8);
    Eigen::VectorXd p = Eigen::VectorXd::Zero(1);
    adam.step(p, Eigen::VectorXd::Constant(1, 1.0), 0.1);
    CHECK(p[0] == doctest::Approx(-0.09999999900000002).epsilon(1e-14));
    adam.step(p, Eigen::VectorXd::Constant(1, 2.0), 0.1);
    CHECK(p[0] == doctest::Approx(-0.1965182009718337).epsilon(1e-14));
    CHECK(adam.steps() == 2);
}

TEST_CASE("fit configuration validation and toggles")
{
    FitConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.w_land = -1.0;
    CHECK_THROWS_AS(cfg.validate(), DataError);
    cfg = FitConfig{};
    cfg.landmark_warmup_fraction = 0.8;
    cfg.lighting_warmup_fraction = 0.5;
    CHECK_THROWS_AS(cfg.validate(), DataError);
    cfg = FitConfig{};
    cfg.lr_final_fraction = 0.0;
    CHECK_THROWS_AS(cfg.validate(), DataError);

    LossToggles t;
    CHECK(t.set("light", false));
    CHECK_FALSE(t.light);
    CHECK_FALSE(t.set("bogus", false));
}

TEST_CASE("initial pose frames the mean face")
{
    const MorphableModel& model = face_model();
    const Camera cam = Camera::default_for(64, 64);
    const CoefficientVector c = initial_coefficients(model, cam);
    CHECK(regularization_energy(c, model) == 0.0);
    const Projection p = project(cam, evaluate_shape(model, c));
    const double span = p.pixels.col(0).maxCoeff() - p.pixels.col(0).minCoeff();
    CHECK(span > 0.5 * 64);
    CHECK(span < 0.8 * 64);
    CHECK(p.pixels.col(0).mean() == doctest::Approx(32.0).epsilon(0.05));
}

TEST_CASE("teacher fit with zero iterations returns the initialization")
{
    const MorphableModel& model = face_model();
    const KnownScene s = known_scene(model, 32, 3);
    const FitResult r = fit_teacher(s.lit, s.landmarks, model, s.camera, short_config(0));
    CHECK(r.coefficients == initial_coefficients(model, s.camera));
    CHECK(r.lighting == LightingCoefficients::identity());
    CHECK(r.trace.empty());
    CHECK_THROWS_AS(fit_teacher(Image(16, 16), s.landmarks, model, s.camera, short_config(1)), DataError);
}

TEST_CASE("teacher fit lowers its loss and stronger regularization shrinks the coefficients")
{
    const MorphableModel& model = face_model();
    const KnownScene s = known_scene(model, 32, 4);
    FitConfig cfg = short_config(200);
    const FitResult a = fit_teacher(s.lit, s.landmarks, model, s.camera, cfg);
    REQUIRE(a.trace.size() == 200);
    // weighted terms add up to the total
    double sum = 0.0;
    for (const auto& [name, v] : a.trace.back().terms) sum += v;
    CHECK(sum == doctest::Approx(a.trace.back().total));
    const auto first_joint = a.trace[static_cast<std::size_t>(200 * 0.1)];
    CHECK(a.trace.back().total < first_joint.total);

    cfg.w_reg *= 2.0;
    const FitResult b = fit_teacher(s.lit, s.landmarks, model, s.camera, cfg);
    CHECK(regularization_energy(b.coefficients, model) <= regularization_energy(a.coefficients, model) + 1e-12);
}

TEST_CASE("a non-finite target raises FitDivergence with the trace so far")
{
    const MorphableModel& model = face_model();
    const KnownScene s = known_scene(model, 32, 5);
    Image poisoned = s.lit;
    for (double& v : poisoned.data()) v = std::numeric_limits<double>::quiet_NaN();
    const FitConfig cfg = short_config(40);
    try {
        fit_teacher(poisoned, s.landmarks, model, s.camera, cfg);
        FAIL("expected FitDivergence");
    } catch (const FitDivergence& e) {
        // the photometric term joins after the landmark warm-up
        CHECK(e.trace().size() == static_cast<std::size_t>(40 * cfg.landmark_warmup_fraction) + 1);
        CHECK_FALSE(std::isfinite(e.trace().back().total));
    }
}

TEST_CASE("student fit stays at a consistent solution")
{
    const MorphableModel& model = face_model();
    const KnownScene s = known_scene(model, 48, 6);
    FitConfig cfg = short_config(200);
    cfg.lr_final_fraction = 1e-3;
    const FitResult r = fit_student(s.unlit, s.lit, s.landmarks, s.teacher, model, s.camera, cfg);
    const Eigen::VectorXd drift = r.coefficients.flat() - s.teacher.coefficients.flat();
    CHECK(drift.cwiseAbs().maxCoeff() <= 1e-2);
    CHECK(r.lighting == s.teacher.lighting);
}

TEST_CASE("a strong coefficient term pins the student to the teacher")
{
    const MorphableModel& model = face_model();
    const KnownScene s = known_scene(model, 32, 7);
    // the bare image comes from different appearance coefficients
    CoefficientVector other = s.teacher.coefficients;
    other.delta = -other.delta;
    const Image bare = render(model, other, std::nullopt, s.camera).color;
    FitConfig loose = short_config(150);
    loose.w_coeff = 0.0;
    FitConfig tight = loose;
    tight.w_coeff = 1e4;
    const auto dist = [&](const FitResult& r) {
        return (r.coefficients.flat() - s.teacher.coefficients.flat()).norm();
    };
    const double d_loose = dist(fit_student(bare, s.lit, s.landmarks, s.teacher, model, s.camera, loose));
    const double d_tight = dist(fit_student(bare, s.lit, s.landmarks, s.teacher, model, s.camera, tight));
    CHECK(d_tight < 0.5 * d_loose);
}

TEST_CASE("with only regularization the student shrinks toward zero")
{
    const MorphableModel& model = face_model();
    const KnownScene s = known_scene(model, 32, 8);
    FitConfig cfg = short_config(300);
    cfg.w_reg = 1.0;
    for (const char* name : {"coeff", "land", "diff", "light"}) cfg.toggles.set(name, false);
    const FitResult r = fit_student(s.unlit, s.lit, s.landmarks, s.teacher, model, s.camera, cfg);
    const double e0 = r.trace.front().terms.at("reg");
    const double e1 = regularization_energy(r.coefficients, model);
    CHECK(e1 < 1e-3 * e0);
    // monotone until Adam starts oscillating around the minimum
    for (std::size_t i = 1; i < r.trace.size() && r.trace[i - 1].total > 1e-2 * e0; ++i) {
        CHECK(r.trace[i].total <= r.trace[i - 1].total);
    }
    CHECK(r.coefficients.translation == s.teacher.coefficients.translation);
}

TEST_CASE("fit results and configs round trip through JSON")
{
    const MorphableModel& model = face_model();
    const KnownScene s = known_scene(model, 32, 9);
    FitResult r = fit_student(s.unlit, s.lit, s.landmarks, s.teacher, model, s.camera, short_config(3));
    const FitResult back = fit_result_from_json(fit_result_to_json(r));
    CHECK(back.coefficients == r.coefficients);
    CHECK(back.lighting == r.lighting);
    REQUIRE(back.trace.size() == 3);
    CHECK(back.trace[2].terms == r.trace[2].terms);
    CHECK(fit_result_to_json(back) == fit_result_to_json(r));
    CHECK_THROWS_AS(fit_result_from_json("{}"), DataError);

    FitConfig cfg;
    cfg.w_light = 3.5;
    cfg.toggles.diff = false;
    cfg.mask_mode = MaskMode::full;
    const FitConfig cb = fit_config_from_json(fit_config_to_json(cfg));
    CHECK(cb.w_light == 3.5);
    CHECK_FALSE(cb.toggles.diff);
    CHECK(cb.mask_mode == MaskMode::full);
    CHECK(fit_config_to_json(cb) == fit_config_to_json(cfg));
    CHECK_THROWS_AS(fit_config_from_json(R"({"w_lihgt": 1})"), DataError);

    PipelineConfig pc;
    pc.seed = 99;
    pc.fit.iterations = 12;
    const PipelineConfig pb = pipeline_config_from_json(pipeline_config_to_json(pc));
    CHECK(pb.seed == 99);
    CHECK(pb.fit.iterations == 12);
    CHECK(pipeline_config_to_json(pb) == pipeline_config_to_json(pc));
    CHECK(pipeline_config_from_json(R"({"render_size": 40})").render_size == 40);
    CHECK_THROWS_AS(pipeline_config_from_json(R"({"unknown": 1})"), DataError);
    CHECK(config_hash(pipeline_config_to_json(pc)).size() == 16);
    CHECK(config_hash("a") != config_hash("b"));
}
