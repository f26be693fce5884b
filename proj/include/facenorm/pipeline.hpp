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

#include "facenorm/bare_skin.hpp"
#include "facenorm/fitting.hpp"
#include "facenorm/metrics.hpp"
#include "facenorm/synth_corpus.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace facenorm {

inline constexpr const char* kVersion = "0.1.0";

/// Settings shared by the command-line stages. The corpus and fit sections
/// use the same JSON forms as their standalone files.
struct PipelineConfig
{
    /// Existing model file; empty means build one from `corpus`.
    std::filesystem::path model_path;
    CorpusSpec corpus = default_corpus();
    int k_id = 12;
    int k_exp = 6;
    int k_app = 30;
    FitConfig fit;
    DemakeupOptions demakeup;
    std::uint64_t seed = 7;
    int render_size = 128;
    int uv_size = 128;
    /// Teacher iterations; the student runs `student_iterations` with its
    /// learning rate decaying to `student_lr_final_fraction` of the start.
    int iterations = 1000;
    int student_iterations = 1000;
    double student_lr_final_fraction = 1e-3;
    bool scale255 = false;

    void validate() const;
    static CorpusSpec default_corpus();
};

std::string pipeline_config_to_json(const PipelineConfig& config);
/// Fields absent from `text` keep the values in `base`; unknown fields are errors.
PipelineConfig pipeline_config_from_json(const std::string& text, const PipelineConfig& base = {});

std::string fit_config_to_json(const FitConfig& config);
FitConfig fit_config_from_json(const std::string& text, const FitConfig& base = {});

/// Builds the PCA model for a corpus with the configured widths.
PcaBuildResult build_model_from_corpus(const Corpus& corpus, int k_id, int k_app);

/// Model named by `config.model_path`, or one built from the configured corpus.
MorphableModel pipeline_model(const PipelineConfig& config);

/// Synthetic made-up subject drawn from the model with known geometry,
/// lighting and bare appearance.
struct SyntheticSubject
{
    Camera camera;
    CoefficientVector coefficients;
    LightingCoefficients lighting;
    Vertices bare_appearance;
    Vertices makeup_appearance;
    Image image;
    Landmarks landmarks;
};

SyntheticSubject synth_subject(const MorphableModel& model, const CorpusSpec& corpus, int render_size,
                               std::uint64_t seed);

/// Renders `albedo` per vertex on the geometry of `c`.
Image render_albedo(const MorphableModel& model, const CoefficientVector& c, const Vertices& albedo,
                    const std::optional<LightingCoefficients>& lighting, const Camera& camera,
                    const RenderOptions& options = {});

struct PipelineReport
{
    MetricResult raw;
    MetricResult normalized;
    double landmark_rmse_px = 0.0;
    std::vector<std::filesystem::path> outputs;
};

/// Made-up synthetic image -> teacher fit -> delight -> student fit -> unwarp
/// -> demakeup -> UV metrics against the ground-truth bare texture. Writes
/// images, fits and metrics.json under `out_dir`.
PipelineReport run_pipeline(const PipelineConfig& config, const std::filesystem::path& out_dir);

/// FNV-1a digest of a config's canonical JSON, as 16 hex digits.
std::string config_hash(const std::string& canonical_json);

struct Manifest
{
    std::string command;
    std::vector<std::filesystem::path> inputs;
    std::vector<std::filesystem::path> outputs;
    std::string config_json;
    std::uint64_t seed = 0;
};

/// Writes manifest.json (command, inputs, outputs, config and its hash,
/// seed, version) into `out_dir`.
void write_manifest(const std::filesystem::path& out_dir, const Manifest& manifest);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

} // namespace facenorm
