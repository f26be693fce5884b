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
// facenorm: command-line front end for the fitting and normalization stages.

#include "facenorm/bare_skin.hpp"
#include "facenorm/error.hpp"
#include "facenorm/fitting.hpp"
#include "facenorm/metrics.hpp"
#include "facenorm/pipeline.hpp"
#include "facenorm/synth_corpus.hpp"
#include "facenorm/uv_texture.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <limits>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace facenorm;

namespace {

enum ExitCode
{
    kOk = 0,
    kUsage = 2,
    kData = 3,
    kNumerical = 4,
};

// Flags shared by every subcommand; they override the --config file.
struct CommonFlags
{
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    std::optional<int> size;
    std::optional<int> iters;
    std::vector<std::string> toggles;
    bool scale255 = false;
};

struct Context
{
    PipelineConfig config;
    fs::path out;
    std::vector<fs::path> inputs;
    std::vector<fs::path> outputs;
};

void add_common(CLI::App* app, CommonFlags& f)
{
    app->add_option("--config", f.config, "JSON config file (flags take precedence)")->check(CLI::ExistingFile);
    app->add_option("--seed", f.seed, "random seed");
    app->add_option("--out", f.out, "output directory");
    app->add_option("--size", f.size, "render size in pixels");
    app->add_option("--iters", f.iters, "optimizer iterations");
    app->add_option("--toggle-loss", f.toggles, "enable or disable a loss term, NAME=on|off");
    app->add_flag("--scale255", f.scale255, "report metrics on the 0-255 scale");
}

Context make_context(const CommonFlags& f)
{
    Context ctx;
    if (!f.config.empty()) {
        ctx.config = pipeline_config_from_json(read_text(f.config));
        ctx.inputs.emplace_back(f.config);
    }
    PipelineConfig& c = ctx.config;
    if (f.seed) {
        c.seed = *f.seed;
        c.fit.seed = *f.seed;
    }
    if (f.size) {
        c.render_size = *f.size;
    }
    c.fit.render_size = c.render_size;
    if (f.iters) {
        c.iterations = *f.iters;
        c.fit.iterations = *f.iters;
    }
    for (const std::string& t : f.toggles) {
        const auto eq = t.find('=');
        const std::string name = t.substr(0, eq);
        const std::string state = eq == std::string::npos ? "" : t.substr(eq + 1);
        if ((state != "on" && state != "off") || !c.fit.toggles.set(name, state == "on")) {
            throw CLI::ValidationError("--toggle-loss", "expected NAME=on|off with NAME in coeff, land, diff, light, reg");
        }
    }
    c.scale255 = c.scale255 || f.scale255;
    if (!c.model_path.empty()) {
        ctx.inputs.push_back(c.model_path);
    }
    c.validate();
    ctx.out = f.out;
    fs::create_directories(ctx.out);
    return ctx;
}

fs::path output(Context& ctx, const std::string& name)
{
    ctx.outputs.push_back(ctx.out / name);
    return ctx.out / name;
}

fs::path input(Context& ctx, const std::string& path)
{
    if (!fs::exists(path)) {
        throw DataError("input does not exist: " + path);
    }
    ctx.inputs.emplace_back(path);
    return path;
}

void finish(Context& ctx, const std::string& command)
{
    Manifest m;
    m.command = command;
    m.inputs = ctx.inputs;
    m.outputs = ctx.outputs;
    m.config_json = pipeline_config_to_json(ctx.config);
    m.seed = ctx.config.seed;
    write_manifest(ctx.out, m);
}

MorphableModel load_or_build(Context& ctx, const std::string& model_path)
{
    if (!model_path.empty()) {
        return load_model(input(ctx, model_path));
    }
    return pipeline_model(ctx.config);
}

Landmarks read_landmarks(const fs::path& path)
{
    try {
        const auto j = nlohmann::json::parse(read_text(path));
        Landmarks lm(static_cast<Eigen::Index>(j.size()), 2);
        for (std::size_t i = 0; i < j.size(); ++i) {
            lm(static_cast<Eigen::Index>(i), 0) = j[i].at(0).get<double>();
            lm(static_cast<Eigen::Index>(i), 1) = j[i].at(1).get<double>();
        }
        return lm;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("landmark file must be a JSON array of [x, y] pairs: " + std::string(e.what()));
    }
}

void write_landmarks(const fs::path& path, const Landmarks& lm)
{
    auto j = nlohmann::json::array();
    for (Eigen::Index i = 0; i < lm.rows(); ++i) {
        j.push_back({lm(i, 0), lm(i, 1)});
    }
    write_text(path, j.dump() + "\n");
}

FitResult read_fit(Context& ctx, const std::string& path, const MorphableModel& model)
{
    FitResult fit = fit_result_from_json(read_text(input(ctx, path)));
    check_dimensions(model, fit.coefficients);
    return fit;
}

Camera camera_for(const Image& image)
{
    return Camera::default_for(image.height(), image.width());
}

std::string report_json(const GradientReport& report)
{
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& b : report.blocks) {
        j.push_back({{"block", b.block},
                     {"checked", b.checked},
                     {"max_rel_error", b.max_rel_error},
                     {"mean_rel_error", b.mean_rel_error}});
    }
    return j.dump(2) + "\n";
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"facenorm: 3D morphable model fitting and face texture normalization"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    CommonFlags flags;
    std::function<void()> action;

    // synth-corpus
    auto* synth = app.add_subcommand("synth-corpus", "generate the seeded synthetic head corpus");
    add_common(synth, flags);
    synth->callback([&] {
        action = [&] {
            Context ctx = make_context(flags);
            if (flags.seed) {
                ctx.config.corpus.seed = *flags.seed;
            }
            const Corpus corpus = generate_corpus(ctx.config.corpus, ctx.config.k_exp);
            write_corpus(ctx.out, ctx.config.corpus, corpus);
            for (const auto& e : fs::directory_iterator(ctx.out)) {
                if (e.path().filename() != "manifest.json") {
                    ctx.outputs.push_back(e.path());
                }
            }
            std::sort(ctx.outputs.begin(), ctx.outputs.end());
            finish(ctx, "synth-corpus");
        };
    });

    // build-model
    std::string corpus_dir;
    auto* build = app.add_subcommand("build-model", "build the PCA morphable model from a corpus");
    add_common(build, flags);
    build->add_option("--corpus", corpus_dir, "corpus directory (default: generate from the config)");
    build->callback([&] {
        action = [&] {
            Context ctx = make_context(flags);
            Corpus corpus;
            if (!corpus_dir.empty()) {
                corpus = read_corpus(input(ctx, corpus_dir), &ctx.config.corpus);
            } else {
                if (flags.seed) {
                    ctx.config.corpus.seed = *flags.seed;
                }
                corpus = generate_corpus(ctx.config.corpus, ctx.config.k_exp);
            }
            const PcaBuildResult built = build_model_from_corpus(corpus, ctx.config.k_id, ctx.config.k_app);
            for (const auto& w : built.warnings) {
                std::cerr << "warning: " << w << '\n';
            }
            save_model(output(ctx, "model.mfm"), built.model);
            finish(ctx, "build-model");
        };
    });

    // render
    std::string model_path;
    std::string fit_path;
    bool unlit = false;
    auto* rend = app.add_subcommand("render", "render the model for given coefficients");
    add_common(rend, flags);
    rend->add_option("--model", model_path, "model file (default: build from the config)");
    rend->add_option("--fit", fit_path, "fit JSON with coefficients and gamma (default: mean face, ambient light)");
    rend->add_flag("--unlit", unlit, "render albedo without lighting");
    rend->callback([&] {
        action = [&] {
            Context ctx = make_context(flags);
            const MorphableModel model = load_or_build(ctx, model_path);
            const Camera camera = Camera::default_for(ctx.config.render_size, ctx.config.render_size);
            FitResult fit;
            if (fit_path.empty()) {
                fit.coefficients = initial_coefficients(model, camera);
                fit.lighting = LightingCoefficients::identity();
            } else {
                fit = read_fit(ctx, fit_path, model);
            }
            const RenderOutput out =
                render(model, fit.coefficients, unlit ? std::nullopt : std::optional(fit.lighting), camera,
                       {0.5, ctx.config.fit.clamp_irradiance});
            write_png(output(ctx, "render.png"), out.color);
            write_png(output(ctx, "coverage.png"), out.coverage);
            write_png_normalized(output(ctx, "depth.png"), out.height(), out.width(), out.depth,
                                 std::numeric_limits<double>::infinity());
            write_landmarks(output(ctx, "landmarks.json"), project_landmarks(model, fit.coefficients, camera));
            finish(ctx, "render");
        };
    });

    // fit (teacher)
    std::string image_path;
    std::string landmarks_path;
    auto* fit = app.add_subcommand("fit", "fit coefficients and lighting to an image");
    add_common(fit, flags);
    fit->add_option("--model", model_path, "model file (default: build from the config)");
    fit->add_option("--image", image_path, "input PNG")->required();
    fit->add_option("--landmarks", landmarks_path, "landmark JSON, [[x, y], ...]")->required();
    fit->callback([&] {
        action = [&] {
            Context ctx = make_context(flags);
            const MorphableModel model = load_or_build(ctx, model_path);
            const Image image = read_png(input(ctx, image_path));
            const Landmarks lm = read_landmarks(input(ctx, landmarks_path));
            FitConfig config = ctx.config.fit;
            config.iterations = ctx.config.iterations;
            const Camera camera = camera_for(image);
            const FitResult result = fit_teacher(image, lm, model, camera, config);
            write_text(output(ctx, "fit.json"), fit_result_to_json(result));
            write_png(output(ctx, "render.png"), render(model, result.coefficients, result.lighting, camera).color);
            finish(ctx, "fit");
        };
    });

    // fit-student
    std::string bare_path;
    std::string reference_path;
    std::string teacher_path;
    auto* student = app.add_subcommand("fit-student", "refit coefficients to a bare-skin image");
    add_common(student, flags);
    student->add_option("--model", model_path, "model file (default: build from the config)");
    student->add_option("--bare", bare_path, "bare-skin PNG")->required();
    student->add_option("--reference", reference_path, "reference PNG the teacher was fitted to")->required();
    student->add_option("--landmarks", landmarks_path, "landmark JSON")->required();
    student->add_option("--teacher", teacher_path, "teacher fit JSON")->required();
    student->callback([&] {
        action = [&] {
            Context ctx = make_context(flags);
            const MorphableModel model = load_or_build(ctx, model_path);
            const Image bare = read_png(input(ctx, bare_path));
            const Image reference = read_png(input(ctx, reference_path));
            const Landmarks lm = read_landmarks(input(ctx, landmarks_path));
            const FitResult teacher = read_fit(ctx, teacher_path, model);
            FitConfig config = ctx.config.fit;
            config.iterations = flags.iters ? *flags.iters : ctx.config.student_iterations;
            config.lr_final_fraction = ctx.config.student_lr_final_fraction;
            const FitResult result = fit_student(bare, reference, lm, teacher, model, camera_for(bare), config);
            write_text(output(ctx, "fit_student.json"), fit_result_to_json(result));
            finish(ctx, "fit-student");
        };
    });

    // delight
    bool match_tone = false;
    auto* del = app.add_subcommand("delight", "divide out the fitted shading");
    add_common(del, flags);
    del->add_option("--model", model_path, "model file (default: build from the config)");
    del->add_option("--image", image_path, "input PNG")->required();
    del->add_option("--fit", fit_path, "fit JSON")->required();
    del->add_flag("--match-tone", match_tone, "rescale to the model's diffuse skin tone");
    del->callback([&] {
        action = [&] {
            Context ctx = make_context(flags);
            const MorphableModel model = load_or_build(ctx, model_path);
            const Image image = read_png(input(ctx, image_path));
            const FitResult f = read_fit(ctx, fit_path, model);
            const Camera camera = camera_for(image);
            BareSkinResult r = delight(image, f, model, camera, 1e-3, ctx.config.fit.clamp_irradiance);
            Image bare = r.bare_image;
            if (match_tone) {
                bare = match_skin_tone(bare, f, model, camera).bare_image;
            }
            write_png(output(ctx, "bare.png"), bare);
            write_png(output(ctx, "shading.png"), r.shading_map);
            write_png(output(ctx, "floor_mask.png"), r.floor_mask);
            finish(ctx, "delight");
        };
    });

    // unwarp
    auto* unw = app.add_subcommand("unwarp", "transport image pixels into the UV map");
    add_common(unw, flags);
    unw->add_option("--model", model_path, "model file (default: build from the config)");
    unw->add_option("--image", image_path, "input PNG")->required();
    unw->add_option("--fit", fit_path, "fit JSON")->required();
    unw->callback([&] {
        action = [&] {
            Context ctx = make_context(flags);
            const MorphableModel model = load_or_build(ctx, model_path);
            const Image image = read_png(input(ctx, image_path));
            const FitResult f = read_fit(ctx, fit_path, model);
            const UVTexture uv = unwarp(image, f.coefficients, model, camera_for(image), ctx.config.uv_size);
            write_png(output(ctx, "uv.png"), uv.color);
            write_png(output(ctx, "uv_visibility.png"), uv.visibility);
            finish(ctx, "unwarp");
        };
    });

    // demakeup
    std::string uv_path;
    std::string visibility_path;
    auto* dem = app.add_subcommand("demakeup", "project a UV albedo onto the appearance subspace");
    add_common(dem, flags);
    dem->add_option("--model", model_path, "model file (default: build from the config)");
    dem->add_option("--uv", uv_path, "UV albedo PNG")->required();
    dem->add_option("--visibility", visibility_path, "UV visibility mask PNG")->required();
    dem->callback([&] {
        action = [&] {
            Context ctx = make_context(flags);
            const MorphableModel model = load_or_build(ctx, model_path);
            UVTexture uv;
            uv.color = read_png(input(ctx, uv_path));
            uv.visibility = read_mask_png(input(ctx, visibility_path));
            if (uv.visibility.height() != uv.color.height() || uv.visibility.width() != uv.color.width() ||
                uv.color.height() != uv.color.width()) {
                throw DataError("UV image and visibility must be square and of equal size");
            }
            uv.fill = uv.color;
            const DemakeupResult r = demakeup_subspace(uv, model, ctx.config.demakeup);
            write_png(output(ctx, "uv_normalized.png"), r.texture.color);
            finish(ctx, "demakeup");
        };
    });

    // metrics
    std::string a_path;
    std::string b_path;
    std::string mask_path;
    auto* met = app.add_subcommand("metrics", "RMSE, PSNR and SSIM between two images");
    add_common(met, flags);
    met->add_option("a", a_path, "first PNG")->required();
    met->add_option("b", b_path, "second PNG")->required();
    met->add_option("--mask", mask_path, "restrict to a mask PNG");
    met->callback([&] {
        action = [&] {
            Context ctx = make_context(flags);
            const Image a = read_png(input(ctx, a_path));
            const Image b = read_png(input(ctx, b_path));
            std::optional<Mask> mask;
            if (!mask_path.empty()) {
                mask = read_mask_png(input(ctx, mask_path));
            }
            const std::string json = metrics_to_json(metric_suite(a, b, ctx.config.scale255, mask));
            write_text(output(ctx, "metrics.json"), json + "\n");
            std::cout << json << '\n';
            finish(ctx, "metrics");
        };
    });

    // gradcheck
    std::vector<std::string> blocks;
    std::string loss_name = "lit";
    double epsilon = 1e-4;
    double tolerance = 1e-4;
    auto* grad = app.add_subcommand("gradcheck", "compare analytic and finite-difference gradients");
    add_common(grad, flags);
    grad->add_option("--model", model_path, "model file (default: build from the config)");
    grad->add_option("--block", blocks, "parameter block: alpha, beta, delta, rotation, translation, gamma");
    grad->add_option("--loss", loss_name, "lit, unlit or landmark")
        ->check(CLI::IsMember({"lit", "unlit", "landmark"}));
    grad->add_option("--eps", epsilon, "finite-difference step");
    grad->add_option("--tolerance", tolerance, "maximum accepted relative error");
    grad->callback([&] {
        action = [&] {
            Context ctx = make_context(flags);
            if (!flags.size) {
                ctx.config.render_size = 64;
            }
            const MorphableModel model = load_or_build(ctx, model_path);
            const int size = ctx.config.render_size;
            GradientScene scene;
            scene.model = &model;
            scene.camera = Camera::default_for(size, size);
            const SyntheticSubject subject = synth_subject(model, ctx.config.corpus, size, ctx.config.seed);
            scene.coefficients = subject.coefficients;
            scene.lighting = subject.lighting;
            SplitMix64 rng(mix_seed(ctx.config.seed, 9));
            scene.target = Image(size, size);
            for (double& v : scene.target.data()) {
                v = rng.uniform();
            }
            scene.landmarks = subject.landmarks;
            scene.landmarks.array() += 1.5;
            if (blocks.empty()) {
                blocks = {"alpha", "beta", "delta", "rotation", "translation", "gamma"};
            }
            const GradientLoss loss = loss_name == "lit"     ? GradientLoss::photometric_lit
                                      : loss_name == "unlit" ? GradientLoss::photometric_unlit
                                                             : GradientLoss::landmark;
            const GradientReport report = gradient_check(scene, loss, epsilon, blocks, 20, ctx.config.seed);
            write_text(output(ctx, "gradcheck.json"), report_json(report));
            double worst = 0.0;
            for (const auto& b : report.blocks) {
                std::printf("%-12s checked=%-3d max_rel=%.3e mean_rel=%.3e\n", b.block.c_str(), b.checked,
                            b.max_rel_error, b.mean_rel_error);
                worst = std::max(worst, b.max_rel_error);
            }
            finish(ctx, "gradcheck");
            if (worst > tolerance) {
                throw NumericalError("gradient check exceeded tolerance: " + std::to_string(worst));
            }
        };
    });

    // pipeline
    auto* pipe = app.add_subcommand("pipeline", "end-to-end normalization of a synthetic made-up subject");
    add_common(pipe, flags);
    pipe->add_option("--model", model_path, "model file (default: build from the config)");
    pipe->callback([&] {
        action = [&] {
            Context ctx = make_context(flags);
            if (!model_path.empty()) {
                ctx.config.model_path = input(ctx, model_path);
            }
            const PipelineReport report = run_pipeline(ctx.config, ctx.out);
            ctx.outputs.insert(ctx.outputs.end(), report.outputs.begin(), report.outputs.end());
            std::printf("raw unwarp RMSE=%.5f normalized RMSE=%.5f\n", report.raw.rmse, report.normalized.rmse);
            finish(ctx, "pipeline");
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }
    try {
        action();
    } catch (const CLI::ValidationError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const FitDivergence& e) {
        std::cerr << "numerical error: " << e.what() << " after " << e.trace().size() << " iterations\n";
        return kNumerical;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kNumerical;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const std::exception& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    }
    return kOk;
}
