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
#include "facenorm/pipeline.hpp"

#include "facenorm/error.hpp"
#include "facenorm/hash.hpp"
#include "facenorm/uv_texture.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iterator>
#include <set>

namespace facenorm {

namespace {

using json = nlohmann::ordered_json;

json parse_object(const std::string& text, const char* what)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("invalid ") + what + " JSON: " + e.what());
    }
    if (!j.is_object()) {
        throw DataError(std::string(what) + " JSON must be an object");
    }
    return j;
}

void reject_unknown(const json& j, const std::set<std::string>& known, const char* what)
{
    for (const auto& [key, value] : j.items()) {
        if (!known.contains(key)) {
            throw DataError(std::string("unknown ") + what + " field '" + key + "'");
        }
    }
}

template <typename T>
void read_field(const json& j, const char* key, T& out)
{
    if (j.contains(key)) {
        try {
            out = j.at(key).get<T>();
        } catch (const json::exception& e) {
            throw DataError(std::string("field '") + key + "': " + e.what());
        }
    }
}

LightingCoefficients subject_lighting(std::uint64_t seed)
{
    SplitMix64 rng(seed);
    LightingCoefficients l = LightingCoefficients::identity();
    // Light from the camera side: facing normals have negative z.
    const Eigen::Vector3d toward =
        Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, -0.3)).normalized();
    const double strength = rng.uniform(0.2, 0.5);
    for (int c = 0; c < 3; ++c) {
        l.gamma[9 * c] *= rng.uniform(0.85, 1.1);
        l.gamma[9 * c + 1] = strength * toward.y();
        l.gamma[9 * c + 2] = strength * toward.z();
        l.gamma[9 * c + 3] = strength * toward.x();
        for (int k = 4; k < 9; ++k) {
            l.gamma[9 * c + k] = 0.05 * strength * rng.uniform(-1, 1);
        }
    }
    return l;
}

} // namespace

CorpusSpec PipelineConfig::default_corpus()
{
    CorpusSpec spec;
    spec.template_subdivision = 3;
    return spec;
}

void PipelineConfig::validate() const
{
    corpus.validate();
    fit.validate();
    if (k_id < 1 || k_exp < 0 || k_app < 1) {
        throw DataError("model widths must be positive");
    }
    if (render_size < 16 || uv_size < 16) {
        throw DataError("render_size and uv_size must be at least 16");
    }
    if (iterations < 0 || student_iterations < 0) {
        throw DataError("iteration counts must be nonnegative");
    }
    if (!(student_lr_final_fraction > 0.0 && student_lr_final_fraction <= 1.0)) {
        throw DataError("student_lr_final_fraction must lie in (0, 1]");
    }
    if (!(demakeup.lambda >= 0.0) || !(demakeup.blur_fraction > 0.0)) {
        throw DataError("demakeup lambda must be nonnegative and blur_fraction positive");
    }
    if (!model_path.empty() && !std::filesystem::exists(model_path)) {
        throw DataError("model file does not exist: " + model_path.string());
    }
}

std::string fit_config_to_json(const FitConfig& c)
{
    json j;
    j["w_coeff"] = c.w_coeff;
    j["w_land"] = c.w_land;
    j["w_diff"] = c.w_diff;
    j["w_light"] = c.w_light;
    j["w_reg"] = c.w_reg;
    j["w_photo"] = c.w_photo;
    j["learning_rate"] = c.learning_rate;
    j["lr_final_fraction"] = c.lr_final_fraction;
    j["iterations"] = c.iterations;
    j["landmark_warmup_fraction"] = c.landmark_warmup_fraction;
    j["lighting_warmup_fraction"] = c.lighting_warmup_fraction;
    j["beta1"] = c.beta1;
    j["beta2"] = c.beta2;
    j["epsilon"] = c.epsilon;
    j["toggles"] = {{"coeff", c.toggles.coeff},
                    {"land", c.toggles.land},
                    {"diff", c.toggles.diff},
                    {"light", c.toggles.light},
                    {"reg", c.toggles.reg}};
    j["mask_mode"] = c.mask_mode == MaskMode::full ? "full" : "foreground";
    j["normalize_landmarks"] = c.normalize_landmarks;
    j["clamp_irradiance"] = c.clamp_irradiance;
    j["render_size"] = c.render_size;
    j["seed"] = c.seed;
    return j.dump();
}

FitConfig fit_config_from_json(const std::string& text, const FitConfig& base)
{
    const json j = parse_object(text, "fit config");
    reject_unknown(j,
                   {"w_coeff", "w_land", "w_diff", "w_light", "w_reg", "w_photo", "learning_rate",
                    "lr_final_fraction", "iterations", "landmark_warmup_fraction", "lighting_warmup_fraction",
                    "beta1", "beta2", "epsilon", "toggles", "mask_mode", "normalize_landmarks", "clamp_irradiance",
                    "render_size", "seed"},
                   "fit config");
    FitConfig c = base;
    read_field(j, "w_coeff", c.w_coeff);
    read_field(j, "w_land", c.w_land);
    read_field(j, "w_diff", c.w_diff);
    read_field(j, "w_light", c.w_light);
    read_field(j, "w_reg", c.w_reg);
    read_field(j, "w_photo", c.w_photo);
    read_field(j, "learning_rate", c.learning_rate);
    read_field(j, "lr_final_fraction", c.lr_final_fraction);
    read_field(j, "iterations", c.iterations);
    read_field(j, "landmark_warmup_fraction", c.landmark_warmup_fraction);
    read_field(j, "lighting_warmup_fraction", c.lighting_warmup_fraction);
    read_field(j, "beta1", c.beta1);
    read_field(j, "beta2", c.beta2);
    read_field(j, "epsilon", c.epsilon);
    if (j.contains("toggles")) {
        const json& t = j.at("toggles");
        if (!t.is_object()) {
            throw DataError("toggles must be an object");
        }
        for (const auto& [name, value] : t.items()) {
            if (!value.is_boolean() || !c.toggles.set(name, value.get<bool>())) {
                throw DataError("invalid loss toggle '" + name + "'");
            }
        }
    }
    if (j.contains("mask_mode")) {
        const std::string mode = j.at("mask_mode").is_string() ? j.at("mask_mode").get<std::string>() : "";
        if (mode == "foreground") {
            c.mask_mode = MaskMode::foreground;
        } else if (mode == "full") {
            c.mask_mode = MaskMode::full;
        } else {
            throw DataError("mask_mode must be \"foreground\" or \"full\"");
        }
    }
    read_field(j, "normalize_landmarks", c.normalize_landmarks);
    read_field(j, "clamp_irradiance", c.clamp_irradiance);
    read_field(j, "render_size", c.render_size);
    read_field(j, "seed", c.seed);
    c.validate();
    return c;
}

std::string pipeline_config_to_json(const PipelineConfig& c)
{
    json j;
    j["model_path"] = c.model_path.string();
    j["corpus"] = json::parse(corpus_spec_to_json(c.corpus));
    j["k_id"] = c.k_id;
    j["k_exp"] = c.k_exp;
    j["k_app"] = c.k_app;
    j["fit"] = json::parse(fit_config_to_json(c.fit));
    j["demakeup"] = {{"lambda", c.demakeup.lambda}, {"blur_fraction", c.demakeup.blur_fraction}};
    j["seed"] = c.seed;
    j["render_size"] = c.render_size;
    j["uv_size"] = c.uv_size;
    j["iterations"] = c.iterations;
    j["student_iterations"] = c.student_iterations;
    j["student_lr_final_fraction"] = c.student_lr_final_fraction;
    j["scale255"] = c.scale255;
    return j.dump();
}

PipelineConfig pipeline_config_from_json(const std::string& text, const PipelineConfig& base)
{
    const json j = parse_object(text, "config");
    reject_unknown(j,
                   {"model_path", "corpus", "k_id", "k_exp", "k_app", "fit", "demakeup", "seed", "render_size",
                    "uv_size", "iterations", "student_iterations", "student_lr_final_fraction", "scale255"},
                   "config");
    PipelineConfig c = base;
    std::string model_path = c.model_path.string();
    read_field(j, "model_path", model_path);
    c.model_path = model_path;
    if (j.contains("corpus")) {
        // Merge over the base corpus so partial sections are allowed.
        json merged = json::parse(corpus_spec_to_json(c.corpus));
        merged.update(j.at("corpus"));
        c.corpus = corpus_spec_from_json(merged.dump());
    }
    read_field(j, "k_id", c.k_id);
    read_field(j, "k_exp", c.k_exp);
    read_field(j, "k_app", c.k_app);
    if (j.contains("fit")) {
        c.fit = fit_config_from_json(j.at("fit").dump(), c.fit);
    }
    if (j.contains("demakeup")) {
        const json& d = j.at("demakeup");
        reject_unknown(d, {"lambda", "blur_fraction"}, "demakeup");
        read_field(d, "lambda", c.demakeup.lambda);
        read_field(d, "blur_fraction", c.demakeup.blur_fraction);
    }
    read_field(j, "seed", c.seed);
    read_field(j, "render_size", c.render_size);
    read_field(j, "uv_size", c.uv_size);
    read_field(j, "iterations", c.iterations);
    read_field(j, "student_iterations", c.student_iterations);
    read_field(j, "student_lr_final_fraction", c.student_lr_final_fraction);
    read_field(j, "scale255", c.scale255);
    return c;
}

PcaBuildResult build_model_from_corpus(const Corpus& corpus, int k_id, int k_app)
{
    PcaBuildInput in;
    in.topology = corpus.topology;
    for (const auto& s : corpus.samples) {
        in.shapes.push_back(s.shape);
        in.appearances.push_back(s.appearance);
    }
    in.k_id = k_id;
    in.k_app = k_app;
    in.blendshapes = corpus.blendshapes;
    return build_pca_model(in);
}

MorphableModel pipeline_model(const PipelineConfig& config)
{
    if (!config.model_path.empty()) {
        return load_model(config.model_path);
    }
    return build_model_from_corpus(generate_corpus(config.corpus, config.k_exp), config.k_id, config.k_app).model;
}

Image render_albedo(const MorphableModel& model, const CoefficientVector& c, const Vertices& albedo,
                    const std::optional<LightingCoefficients>& lighting, const Camera& camera,
                    const RenderOptions& options)
{
    SurfaceState surface = evaluate_surface(model, c);
    if (albedo.rows() != surface.albedo.colors.rows()) {
        throw DataError("albedo has the wrong vertex count");
    }
    surface.albedo.colors = albedo;
    const RenderOutput geometry = rasterize(camera, surface.world, model.topology, options.background);
    return shade_pixels(geometry.tri_id, surface, model.topology, camera, lighting, options);
}

SyntheticSubject synth_subject(const MorphableModel& model, const CorpusSpec& corpus, int render_size,
                               std::uint64_t seed)
{
    SyntheticSubject s;
    s.camera = Camera::default_for(render_size, render_size);
    SplitMix64 rng(mix_seed(seed, 1));
    CoefficientVector c = initial_coefficients(model, s.camera);
    for (Eigen::Index i = 0; i < c.alpha.size(); ++i) {
        c.alpha[i] = 0.5 * model.sigma_id[i] * rng.normal();
    }
    for (Eigen::Index i = 0; i < c.beta.size(); ++i) {
        c.beta[i] = 0.2 * model.sigma_exp[i] * rng.normal();
    }
    for (Eigen::Index i = 0; i < c.delta.size(); ++i) {
        c.delta[i] = 0.5 * model.sigma_app[i] * rng.normal();
    }
    c.rotation = Eigen::Vector3d(rng.uniform(-0.1, 0.1), rng.uniform(-0.2, 0.2), rng.uniform(-0.05, 0.05));
    c.translation += Eigen::Vector3d(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), rng.uniform(-0.1, 0.1));
    s.coefficients = c;
    s.lighting = subject_lighting(mix_seed(seed, 2));

    SyntheticSample bare;
    bare.shape = morph_shape(model, c);
    bare.appearance = evaluate_appearance(model, c.delta).colors;
    s.bare_appearance = bare.appearance;
    s.makeup_appearance =
        apply_makeup(bare, model.topology, MakeupOptions::from_spec(corpus), mix_seed(seed, 3)).sample.appearance;
    s.image = render_albedo(model, c, s.makeup_appearance, s.lighting, s.camera);
    s.landmarks = project_landmarks(model, c, s.camera);
    return s;
}

PipelineReport run_pipeline(const PipelineConfig& config, const std::filesystem::path& out_dir)
{
    config.validate();
    std::filesystem::create_directories(out_dir);
    PipelineReport report;
    auto out = [&](const char* name) {
        report.outputs.push_back(out_dir / name);
        return out_dir / name;
    };

    const MorphableModel model = pipeline_model(config);
    const SyntheticSubject subject = synth_subject(model, config.corpus, config.render_size, config.seed);
    write_png(out("input.png"), subject.image);

    FitConfig teacher_config = config.fit;
    teacher_config.iterations = config.iterations;
    teacher_config.seed = config.seed;
    const FitResult teacher = fit_teacher(subject.image, subject.landmarks, model, subject.camera, teacher_config);
    write_text(out("fit_teacher.json"), fit_result_to_json(teacher));
    report.landmark_rmse_px = loss_landmark(teacher.coefficients, model, subject.camera, subject.landmarks).rmse_px;

    const BareSkinResult delit = delight(subject.image, teacher, model, subject.camera, 1e-3,
                                         config.fit.clamp_irradiance);
    const BareSkinResult toned = match_skin_tone(delit.bare_image, teacher, model, subject.camera);
    write_png(out("bare.png"), toned.bare_image);
    write_png(out("shading.png"), delit.shading_map);

    FitConfig student_config = config.fit;
    student_config.iterations = config.student_iterations;
    student_config.lr_final_fraction = config.student_lr_final_fraction;
    student_config.seed = config.seed;
    const FitResult student = fit_student(toned.bare_image, subject.image, subject.landmarks, teacher, model,
                                          subject.camera, student_config);
    write_text(out("fit_student.json"), fit_result_to_json(student));

    const UVTexture raw = unwarp(subject.image, teacher.coefficients, model, subject.camera, config.uv_size);
    const UVTexture bare_uv =
        unwarp(toned.bare_image, student.coefficients, model, subject.camera, config.uv_size);
    DemakeupResult clean = demakeup_subspace(bare_uv, model, config.demakeup);

    UVTexture truth;
    truth.color = splat_to_uv(rasterize_uv(model.topology, config.uv_size), model.topology,
                              subject.bare_appearance);
    truth.visibility = mask_and(raw.visibility, bare_uv.visibility);
    truth.fill = truth.color;
    write_png(out("uv_raw.png"), raw.color);
    write_png(out("uv_bare.png"), bare_uv.color);
    write_png(out("uv_normalized.png"), clean.texture.color);
    write_png(out("uv_truth.png"), truth.color);
    write_png(out("uv_visibility.png"), truth.visibility);

    report.raw = metric_suite(raw, truth, config.scale255);
    report.normalized = metric_suite(clean.texture, truth, config.scale255);
    json metrics;
    metrics["raw_unwarp"] = json::parse(metrics_to_json(report.raw));
    metrics["normalized"] = json::parse(metrics_to_json(report.normalized));
    metrics["landmark_rmse_px"] = report.landmark_rmse_px;
    metrics["scale255"] = config.scale255;
    write_text(out("metrics.json"), metrics.dump(2) + "\n");
    return report;
}

std::string config_hash(const std::string& canonical_json)
{
    Fnv1a h;
    h.text(canonical_json);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h.digest()));
    return buf;
}

void write_manifest(const std::filesystem::path& out_dir, const Manifest& m)
{
    std::filesystem::create_directories(out_dir);
    json j;
    j["command"] = m.command;
    auto paths = [](const std::vector<std::filesystem::path>& v) {
        json a = json::array();
        for (const auto& p : v) {
            a.push_back(p.string());
        }
        return a;
    };
    j["inputs"] = paths(m.inputs);
    j["outputs"] = paths(m.outputs);
    j["config"] = m.config_json.empty() ? json::object() : json::parse(m.config_json);
    j["config_hash"] = config_hash(m.config_json);
    j["seed"] = m.seed;
    j["version"] = kVersion;
    write_text(out_dir / "manifest.json", j.dump(2) + "\n");
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw DataError("cannot write " + path.string());
    }
    f << text;
}

std::string read_text(const std::filesystem::path& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw DataError("cannot read " + path.string());
    }
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

} // namespace facenorm
