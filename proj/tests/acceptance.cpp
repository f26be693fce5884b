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
// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include "facenorm/bare_skin.hpp"
#include "facenorm/fitting.hpp"
#include "facenorm/metrics.hpp"
#include "facenorm/pipeline.hpp"
#include "facenorm/shading.hpp"
#include "facenorm/synth_corpus.hpp"
#include "facenorm/uv_texture.hpp"

#include "metric_oracle.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <unistd.h>
#include <sstream>
#include <string>
#include <vector>

using namespace facenorm;
using namespace facenorm::testing;

namespace {

struct Outcome
{
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1. Gradient fidelity
Outcome gradient_fidelity()
{
    const auto t0 = std::chrono::steady_clock::now();
    const MorphableModel& model = face_model();
    const Camera camera = Camera::default_for(64, 64);
    GradientScene scene;
    scene.model = &model;
    scene.coefficients = near_mean_coefficients(model, camera, 3);
    scene.lighting = random_lighting(4);
    scene.camera = camera;
    scene.target = random_image(64, 64, 5);
    scene.landmarks = project_landmarks(model, scene.coefficients, camera);
    scene.landmarks.array() += 1.5;

    // Large enough that roundoff in the differenced loss stays below the
    // tolerance for near-zero gradient entries.
    const double eps = 1e-4;
    const GradientReport photo =
        gradient_check(scene, GradientLoss::photometric_lit, eps, {"gamma", "delta", "alpha", "beta"});
    const GradientReport land = gradient_check(scene, GradientLoss::landmark, eps, {"translation"});
    const double gamma = photo.find("gamma")->max_rel_error;
    const double translation = land.find("translation")->max_rel_error;
    const double delta = photo.find("delta")->max_rel_error;
    const double shape = std::max(photo.find("alpha")->max_rel_error, photo.find("beta")->max_rel_error);
    const double runtime = seconds_since(t0);
    Outcome o;
    o.pass = model.topology.face_count() <= 5000 && gamma <= 1e-5 && translation <= 1e-5 && delta <= 1e-4 &&
             shape <= 1e-4 && runtime <= 60.0;
    o.detail = fmt("faces=%d gamma=%.2e translation=%.2e delta=%.2e alpha/beta=%.2e runtime=%.1fs",
                   model.topology.face_count(), gamma, translation, delta, shape, runtime);
    return o;
}

struct SelfRenderScene
{
    Camera camera;
    CoefficientVector truth;
    LightingCoefficients lighting;
    Image image;
    Landmarks landmarks;
};

SelfRenderScene self_render_scene(const MorphableModel& model, int size, std::uint64_t seed)
{
    SelfRenderScene s;
    s.camera = Camera::default_for(size, size);
    s.truth = near_mean_coefficients(model, s.camera, seed);
    s.lighting = random_lighting(seed + 100);
    s.image = render(model, s.truth, s.lighting, s.camera).color;
    s.landmarks = project_landmarks(model, s.truth, s.camera);
    return s;
}

// Mean relative irradiance error over probe normals on the camera-facing
// hemisphere, per channel.
double irradiance_error(const LightingCoefficients& truth, const LightingCoefficients& estimate, int probes)
{
    SplitMix64 rng(0x1badb002);
    double sum = 0.0;
    int n = 0;
    while (n < probes) {
        Eigen::Vector3d v(rng.normal(), rng.normal(), rng.normal());
        v.normalize();
        if (v.z() > -0.3) {
            continue;
        }
        const ShVector y = sh_basis(v);
        for (int c = 0; c < 3; ++c) {
            const double a = truth.channel(c).dot(y);
            sum += std::abs(estimate.channel(c).dot(y) - a) / std::abs(a);
        }
        ++n;
    }
    return sum / (3.0 * probes);
}

// 2. Self-render round trip
Outcome self_render_round_trip()
{
    const MorphableModel& model = face_model();
    FitConfig config;
    config.iterations = 2000;
    Outcome o{true, ""};
    for (std::uint64_t seed : {1, 2, 3}) {
        const SelfRenderScene s = self_render_scene(model, 96, seed);
        const FitResult fit = fit_teacher(s.image, s.landmarks, model, s.camera, config);
        const double rmse = loss_landmark(fit.coefficients, model, s.camera, s.landmarks).rmse_px;
        const RenderOutput r = render(model, fit.coefficients, fit.lighting, s.camera);
        const double l1 = loss_photometric(r, s.image, MaskMode::foreground).value;
        const double irr = irradiance_error(s.lighting, fit.lighting, 100);
        o.pass = o.pass && rmse <= 0.5 && l1 <= 0.02 && irr <= 0.05;
        o.detail += fmt("seed%d[lm=%.3fpx L1=%.4f irr=%.3f] ", static_cast<int>(seed), rmse, l1, irr);
    }
    o.detail += fmt("iters=%d", config.iterations);
    return o;
}

// 3. Teacher-student consistency
Outcome teacher_student()
{
    const MorphableModel& model = face_model();
    int wins = 0;
    std::string detail;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const SelfRenderScene s = self_render_scene(model, 64, seed);
        FitConfig config;
        config.iterations = 1000;
        const FitResult teacher = fit_teacher(s.image, s.landmarks, model, s.camera, config);
        const Image bare = delight(s.image, teacher, model, s.camera).bare_image;
        FitConfig student = config;
        student.iterations = 1000;
        student.lr_final_fraction = 1e-3;
        student.w_coeff = 0.1;
        const FitResult with = fit_student(bare, s.image, s.landmarks, teacher, model, s.camera, student);
        student.w_coeff = 0.0;
        const FitResult without = fit_student(bare, s.image, s.landmarks, teacher, model, s.camera, student);
        const Eigen::VectorXd base = teacher.coefficients.flat();
        const double d_with = (with.coefficients.flat() - base).lpNorm<Eigen::Infinity>();
        const double d_without = (without.coefficients.flat() - base).lpNorm<Eigen::Infinity>();
        wins += d_with < d_without ? 1 : 0;
        detail += fmt("%.3e<%.3e ", d_with, d_without);
    }
    return {wins == 5, fmt("%d/5 seeds, max deviation from teacher with w_coeff=0.1 < without: ", wins) + detail};
}

// 4. De-lighting recovery
Outcome delighting()
{
    const MorphableModel& model = face_model();
    const Camera camera = Camera::default_for(96, 96);
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        FitResult fit;
        fit.coefficients = near_mean_coefficients(model, camera, seed);
        fit.lighting = random_lighting(seed + 500, 0.5);
        const RenderOutput lit = render(model, fit.coefficients, fit.lighting, camera);
        const Image albedo = render(model, fit.coefficients, std::nullopt, camera).color;
        const BareSkinResult bare = delight(lit.color, fit, model, camera);
        double sum = 0.0;
        std::size_t n = 0;
        for (int y = 0; y < camera.height; ++y) {
            for (int x = 0; x < camera.width; ++x) {
                if (!lit.coverage(y, x) || bare.floor_mask(y, x)) {
                    continue;
                }
                const Eigen::Vector3d p = lit.color.pixel(y, x);
                if (p.maxCoeff() >= 1.0) {
                    continue;
                }
                sum += (bare.bare_image.pixel(y, x) - albedo.pixel(y, x)).cwiseAbs().sum();
                n += 3;
            }
        }
        worst = std::max(worst, sum / static_cast<double>(n));
    }

    FitResult ambient;
    ambient.coefficients = near_mean_coefficients(model, camera, 99);
    ambient.lighting = LightingCoefficients::identity();
    const RenderOutput lit = render(model, ambient.coefficients, ambient.lighting, camera);
    const Image albedo = render(model, ambient.coefficients, std::nullopt, camera).color;
    const BareSkinResult bare = delight(lit.color, ambient, model, camera);
    double identity_error = 0.0;
    for (int y = 0; y < camera.height; ++y) {
        for (int x = 0; x < camera.width; ++x) {
            if (lit.coverage(y, x)) {
                identity_error = std::max(
                    identity_error, (bare.bare_image.pixel(y, x) - albedo.pixel(y, x)).cwiseAbs().maxCoeff());
            }
        }
    }
    return {worst <= 0.02 && identity_error <= 1e-6,
            fmt("worst mean abs error over 20 lightings=%.2e identity lighting max error=%.2e", worst,
                identity_error)};
}

// 5. De-makeup direction of effect, through the full pipeline: teacher fit on
// the made-up image, delight, student fit, unwarp and subspace projection.
Outcome demakeup_direction()
{
    namespace fs = std::filesystem;
    const fs::path root = fs::temp_directory_path() / fmt("facenorm_demakeup_%d", static_cast<int>(::getpid()));
    PipelineConfig config;
    config.render_size = 96;
    int wins = 0;
    double raw_sum = 0.0;
    double clean_sum = 0.0;
    for (int i = 1; i <= 20; ++i) {
        config.seed = static_cast<std::uint64_t>(i);
        const PipelineReport r = run_pipeline(config, root);
        wins += r.normalized.rmse < r.raw.rmse ? 1 : 0;
        raw_sum += r.raw.rmse;
        clean_sum += r.normalized.rmse;
    }
    fs::remove_all(root);
    const double reduction = 1.0 - clean_sum / raw_sum;
    return {wins >= 18 && reduction >= 0.25,
            fmt("improved %d/20 subjects, mean UV RMSE %.4f -> %.4f (%.1f%% lower)", wins, raw_sum / 20,
                clean_sum / 20, 100.0 * reduction)};
}

// 6. UV round trip
Outcome uv_round_trip()
{
    const MorphableModel& model = face_model();
    const Camera camera = Camera::default_for(96, 96);
    double worst = std::numeric_limits<double>::infinity();
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const CoefficientVector c = near_mean_coefficients(model, camera, seed + 200);
        const Image image = render(model, c, random_lighting(seed + 300), camera).color;
        const UVTexture uv = unwarp(image, c, model, camera, 256);
        const RewarpResult back = rewarp(uv, c, model, camera);
        worst = std::min(worst, metric_suite(back.image, image, false, back.valid).psnr);
    }
    return {worst >= 30.0, fmt("minimum PSNR over 10 scenes=%.2f dB", worst)};
}

// 7. Metric oracle equivalence
Outcome metric_oracle()
{
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        const Image a = random_image(32, 32, seed);
        Image b = a;
        SplitMix64 rng(seed + 1000);
        for (double& v : b.data()) {
            v = std::clamp(v + 0.1 * rng.normal(), 0.0, 1.0);
        }
        const MetricResult m = metric_suite(a, b, false);
        worst = std::max({worst, std::abs(m.rmse - oracle::rmse(a, b)), std::abs(m.psnr - oracle::psnr(a, b)),
                          std::abs(m.ssim - oracle::ssim(a, b))});
    }
    const Image clean = random_image(32, 32, 4242);
    std::vector<double> ssim;
    for (double sigma : {0.01, 0.03, 0.1, 0.2, 0.4}) {
        Image noisy = clean;
        SplitMix64 rng(99);
        for (double& v : noisy.data()) {
            v += sigma * rng.normal();
        }
        ssim.push_back(metric_suite(clean, noisy, false).ssim);
    }
    const bool monotone = std::is_sorted(ssim.rbegin(), ssim.rend()) &&
                          std::adjacent_find(ssim.begin(), ssim.end()) == ssim.end();
    return {worst <= 1e-6 && monotone,
            fmt("max deviation=%.2e ssim over noise=[%.4f %.4f %.4f %.4f %.4f]", worst, ssim[0], ssim[1], ssim[2],
                ssim[3], ssim[4])};
}

// 8. PCA correctness
Outcome pca_correctness()
{
    CorpusSpec spec;
    spec.seed = 5;
    spec.n_samples = 12;
    spec.template_subdivision = 2;
    const Corpus corpus = generate_corpus(spec, 2);
    const int n = spec.n_samples;
    std::vector<double> truncation;
    double full_rank = 0.0;
    for (int k = 1; k <= n - 1; ++k) {
        PcaBuildInput in;
        in.topology = corpus.topology;
        for (const auto& s : corpus.samples) {
            in.shapes.push_back(s.shape);
            in.appearances.push_back(s.appearance);
        }
        in.k_id = k;
        in.k_app = k;
        in.blendshapes = corpus.blendshapes;
        const MorphableModel model = build_pca_model(in).model;
        double err = 0.0;
        for (const auto& s : corpus.samples) {
            for (const auto& [x, mean, basis] :
                 {std::tuple{flatten(s.shape), model.mean_shape, model.basis_id},
                  std::tuple{flatten(s.appearance), model.mean_appearance, model.basis_app}}) {
                const Eigen::VectorXd centered = x - mean;
                const Eigen::VectorXd recon = mean + basis * (basis.transpose() * centered);
                const double rel = (recon - x).norm() / x.norm();
                err += (recon - x).squaredNorm();
                if (k == n - 1) {
                    full_rank = std::max(full_rank, rel);
                }
            }
        }
        truncation.push_back(err);
    }
    bool monotone = true;
    for (std::size_t i = 1; i < truncation.size(); ++i) {
        monotone = monotone && truncation[i] <= truncation[i - 1] * (1.0 + 1e-12) + 1e-18;
    }
    return {full_rank <= 1e-6 && monotone,
            fmt("full-rank max relative error=%.2e truncation error K=1..%d monotone=%s (%.3e -> %.3e)", full_rank,
                n - 1, monotone ? "yes" : "no", truncation.front(), truncation.back())};
}

// 9. SH orthonormality
Outcome sh_orthonormality()
{
    SplitMix64 rng(2024);
    Eigen::Matrix<double, 9, 9> gram = Eigen::Matrix<double, 9, 9>::Zero();
    const int samples = 1'000'000;
    for (int i = 0; i < samples; ++i) {
        Eigen::Vector3d v(rng.normal(), rng.normal(), rng.normal());
        v.normalize();
        const ShVector y = sh_basis(v);
        gram.noalias() += y * y.transpose();
    }
    gram *= 4.0 * M_PI / samples;
    const double dev = (gram - Eigen::Matrix<double, 9, 9>::Identity()).cwiseAbs().maxCoeff();
    return {dev <= 1e-2, fmt("max |G - I|=%.2e over %d samples", dev, samples)};
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 10. Determinism
Outcome determinism()
{
    namespace fs = std::filesystem;
    const fs::path root = fs::temp_directory_path() / fmt("facenorm_determinism_%d", static_cast<int>(::getpid()));
    PipelineConfig config;
    config.seed = 17;
    config.render_size = 64;
    config.iterations = 150;
    run_pipeline(config, root / "a");
    run_pipeline(config, root / "b");
    int files = 0;
    bool same = true;
    for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
        if (!entry.is_regular_file()) {
            continue;
        }
        const auto ext = entry.path().extension();
        if (ext != ".png" && entry.path().filename() != "metrics.json") {
            continue;
        }
        const fs::path other = root / "b" / fs::relative(entry.path(), root / "a");
        same = same && fs::exists(other) && slurp(entry.path()) == slurp(other);
        ++files;
    }
    fs::remove_all(root);
    return {same && files > 1, fmt("%d image/metrics files compared, identical=%s", files, same ? "yes" : "no")};
}

} // namespace

int main()
{
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"gradient fidelity", gradient_fidelity},
        {"self-render round trip", self_render_round_trip},
        {"teacher-student consistency", teacher_student},
        {"de-lighting recovery", delighting},
        {"de-makeup direction of effect", demakeup_direction},
        {"UV round trip", uv_round_trip},
        {"metric oracle equivalence", metric_oracle},
        {"PCA correctness", pca_correctness},
        {"SH orthonormality", sh_orthonormality},
        {"determinism", determinism},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += o.pass ? 0 : 1;
        std::printf("%s %2zu %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    o.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
