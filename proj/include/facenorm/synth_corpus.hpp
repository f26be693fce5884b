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

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace facenorm {

/// Parameters of the procedural face corpus. Field names match the JSON form.
struct CorpusSpec
{
    std::uint64_t seed = 1;
    int n_samples = 40;
    int template_subdivision = 4;
    int bump_count = 6;
    /// Bump magnitudes are drawn from this range with a random sign.
    std::array<double, 2> bump_amplitude_range = {0.02, 0.08};
    /// Base skin tone per channel: low RGB, high RGB.
    std::array<Eigen::Vector3d, 2> skin_tone_range = {Eigen::Vector3d(0.55, 0.38, 0.30),
                                                      Eigen::Vector3d(0.80, 0.58, 0.48)};
    int makeup_patch_count = 5;
    std::vector<Eigen::Vector2d> makeup_anchor_uvs = {{0.5, 0.64}, {0.43, 0.56}, {0.57, 0.56},
                                                      {0.45, 0.43}, {0.55, 0.43}};

    void validate() const;
};

/// Generator parameters kept alongside each sample for test oracles.
struct SampleTruth
{
    std::vector<Eigen::Vector3d> bump_centers;
    std::vector<double> bump_amplitudes;
    std::vector<double> bump_widths;
    Eigen::Vector3d skin_tone = Eigen::Vector3d::Zero();
    /// Color-field weights, one row per monomial, one column per channel.
    Eigen::MatrixX3d color_weights;
};

struct SyntheticSample
{
    Vertices shape;
    Vertices appearance;
    SampleTruth truth;
};

struct Corpus
{
    MeshTopology topology;
    std::vector<SyntheticSample> samples;
    std::vector<Vertices> blendshapes;
};

/// Number of landmarks placed on generated templates (fewer if V is smaller).
inline constexpr int kTemplateLandmarkCount = 27;

/// Icosphere of the given subdivision level stretched 1.3x along z, with a
/// spherical UV layout whose seam sits at the back (+z) and landmarks picked
/// as the extremal vertices along fixed directions of the camera-facing (-z)
/// hemisphere. The unstretched unit sphere is the reference for UVs.
MeshTopology generate_template(int subdivision);

/// Template vertex positions matching generate_template(subdivision).
Vertices template_shape(int subdivision);

/// Samples the corpus and `expression_count` analytic expression fields.
/// Identical spec and count give bitwise identical output.
Corpus generate_corpus(const CorpusSpec& spec, int expression_count);

/// Analytic expression deformation fields on the template.
std::vector<Vertices> generate_blendshapes(const Vertices& template_positions, int count);

struct MakeupOptions
{
    int patch_count = 5;
    std::vector<Eigen::Vector2d> anchor_uvs;
    /// Ellipse semi-axes in UV units are drawn from this range.
    std::array<double, 2> semi_axis_range = {0.03, 0.06};
    std::array<double, 2> opacity_range = {0.6, 0.9};

    static MakeupOptions from_spec(const CorpusSpec& spec);
};

struct MakeupResult
{
    SyntheticSample sample;
    /// Per-vertex composite patch opacity in [0, 1]; zero outside all patches.
    std::vector<double> patch_alpha;
    std::vector<Eigen::Vector3d> patch_colors;
};

/// Alpha-blends saturated elliptical color patches (in UV space) over the
/// appearance. Geometry is untouched.
MakeupResult apply_makeup(const SyntheticSample& sample, const MeshTopology& topology, const MakeupOptions& options,
                          std::uint64_t seed);

struct OcclusionOptions
{
    std::array<int, 2> blob_count_range = {1, 3};
    bool half_plane = true;
    /// Required visible area fraction; blob radii are rescaled until it holds.
    std::array<double, 2> visible_fraction_band = {0.5, 0.95};
};

/// Skin-visibility mask: true where the face is unoccluded. Occluders are
/// smooth blobs and an optional half-plane entering from the border.
Mask synth_occlusion_mask(std::uint64_t seed, int height, int width, const OcclusionOptions& options = {});

/// Deterministic 64-bit stream used by every generator.
class SplitMix64
{
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next();
    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal();

private:
    std::uint64_t state_;
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

// Export: OBJ with vt records plus a per-vertex color sidecar (one "r g b" line per vertex).
void write_obj(const std::filesystem::path& path, const Vertices& shape, const MeshTopology& topology);
void write_vertex_colors(const std::filesystem::path& path, const Vertices& colors);
Vertices read_vertex_colors(const std::filesystem::path& path);
/// Vertex positions ("v" records) of an OBJ file.
Vertices read_obj_vertices(const std::filesystem::path& path);

/// Directory layout: corpus_spec.json, sample_NNN.obj, sample_NNN_colors.txt
/// and blendshape_NN.txt (V x 3 displacement rows).
void write_corpus(const std::filesystem::path& dir, const CorpusSpec& spec, const Corpus& corpus);
/// Reads a corpus directory; topology is regenerated from the recorded
/// subdivision and checked against the stored vertex counts.
Corpus read_corpus(const std::filesystem::path& dir, CorpusSpec* spec = nullptr);
std::string corpus_spec_to_json(const CorpusSpec& spec);
CorpusSpec corpus_spec_from_json(const std::string& text);

} // namespace facenorm
