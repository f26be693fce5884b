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
#include "facenorm/synth_corpus.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>

namespace facenorm {

void write_obj(const std::filesystem::path& path, const Vertices& shape, const MeshTopology& topology)
{
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot open " + path.string() + " for writing");
    }
    out << std::setprecision(17);
    for (Eigen::Index i = 0; i < shape.rows(); ++i) {
        out << "v " << shape(i, 0) << ' ' << shape(i, 1) << ' ' << shape(i, 2) << '\n';
    }
    for (const auto& uv : topology.uv_coords) {
        out << "vt " << uv.x() << ' ' << uv.y() << '\n';
    }
    for (const auto& f : topology.faces) {
        out << 'f';
        for (int k = 0; k < 3; ++k) {
            out << ' ' << f[k] + 1 << '/' << f[k] + 1;
        }
        out << '\n';
    }
}

void write_vertex_colors(const std::filesystem::path& path, const Vertices& colors)
{
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot open " + path.string() + " for writing");
    }
    out << std::setprecision(17);
    for (Eigen::Index i = 0; i < colors.rows(); ++i) {
        out << colors(i, 0) << ' ' << colors(i, 1) << ' ' << colors(i, 2) << '\n';
    }
}

Vertices read_vertex_colors(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    std::vector<double> values;
    double v = 0.0;
    while (in >> v) {
        values.push_back(v);
    }
    if (!in.eof() || values.size() % 3 != 0) {
        throw DataError("malformed vertex color file " + path.string());
    }
    return Eigen::Map<const Vertices>(values.data(), static_cast<Eigen::Index>(values.size() / 3), 3);
}

Vertices read_obj_vertices(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    std::vector<double> values;
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("v ", 0) != 0) {
            continue;
        }
        std::istringstream fields(line.substr(2));
        double x = 0.0;
        double y = 0.0;
        double z = 0.0;
        if (!(fields >> x >> y >> z)) {
            throw DataError("malformed vertex record in " + path.string());
        }
        values.insert(values.end(), {x, y, z});
    }
    return Eigen::Map<const Vertices>(values.data(), static_cast<Eigen::Index>(values.size() / 3), 3);
}

namespace {

std::filesystem::path numbered(const std::filesystem::path& dir, const char* pattern, std::size_t i)
{
    char name[64];
    std::snprintf(name, sizeof name, pattern, i);
    return dir / name;
}

} // namespace

void write_corpus(const std::filesystem::path& dir, const CorpusSpec& spec, const Corpus& corpus)
{
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "corpus_spec.json");
        if (!out) {
            throw DataError("cannot write corpus spec in " + dir.string());
        }
        out << corpus_spec_to_json(spec) << '\n';
    }
    for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
        write_obj(numbered(dir, "sample_%03zu.obj", i), corpus.samples[i].shape, corpus.topology);
        write_vertex_colors(numbered(dir, "sample_%03zu_colors.txt", i), corpus.samples[i].appearance);
    }
    for (std::size_t i = 0; i < corpus.blendshapes.size(); ++i) {
        write_vertex_colors(numbered(dir, "blendshape_%02zu.txt", i), corpus.blendshapes[i]);
    }
}

Corpus read_corpus(const std::filesystem::path& dir, CorpusSpec* spec_out)
{
    std::ifstream in(dir / "corpus_spec.json");
    if (!in) {
        throw DataError("no corpus_spec.json in " + dir.string());
    }
    const CorpusSpec spec =
        corpus_spec_from_json({std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()});
    Corpus corpus;
    corpus.topology = generate_template(spec.template_subdivision);
    const auto v = static_cast<Eigen::Index>(corpus.topology.vertex_count);
    auto check = [&](const Vertices& m, const std::filesystem::path& p) {
        if (m.rows() != v) {
            throw DataError(p.string() + " has " + std::to_string(m.rows()) + " vertices, expected " +
                            std::to_string(v));
        }
    };
    for (std::size_t i = 0; std::filesystem::exists(numbered(dir, "sample_%03zu.obj", i)); ++i) {
        SyntheticSample s;
        s.shape = read_obj_vertices(numbered(dir, "sample_%03zu.obj", i));
        check(s.shape, numbered(dir, "sample_%03zu.obj", i));
        s.appearance = read_vertex_colors(numbered(dir, "sample_%03zu_colors.txt", i));
        check(s.appearance, numbered(dir, "sample_%03zu_colors.txt", i));
        corpus.samples.push_back(std::move(s));
    }
    if (corpus.samples.empty()) {
        throw DataError("corpus directory " + dir.string() + " holds no samples");
    }
    for (std::size_t i = 0; std::filesystem::exists(numbered(dir, "blendshape_%02zu.txt", i)); ++i) {
        corpus.blendshapes.push_back(read_vertex_colors(numbered(dir, "blendshape_%02zu.txt", i)));
        check(corpus.blendshapes.back(), numbered(dir, "blendshape_%02zu.txt", i));
    }
    if (spec_out) {
        *spec_out = spec;
    }
    return corpus;
}

std::string corpus_spec_to_json(const CorpusSpec& spec)
{
    nlohmann::ordered_json j;
    j["seed"] = spec.seed;
    j["n_samples"] = spec.n_samples;
    j["template_subdivision"] = spec.template_subdivision;
    j["bump_count"] = spec.bump_count;
    j["bump_amplitude_range"] = spec.bump_amplitude_range;
    j["skin_tone_range"] = {{spec.skin_tone_range[0].x(), spec.skin_tone_range[0].y(), spec.skin_tone_range[0].z()},
                            {spec.skin_tone_range[1].x(), spec.skin_tone_range[1].y(), spec.skin_tone_range[1].z()}};
    j["makeup_patch_count"] = spec.makeup_patch_count;
    auto anchors = nlohmann::ordered_json::array();
    for (const auto& uv : spec.makeup_anchor_uvs) {
        anchors.push_back({uv.x(), uv.y()});
    }
    j["makeup_anchor_uvs"] = anchors;
    return j.dump(2);
}

CorpusSpec corpus_spec_from_json(const std::string& text)
{
    CorpusSpec spec;
    try {
        const auto j = nlohmann::json::parse(text);
        static const char* known[] = {"seed", "n_samples", "template_subdivision", "bump_count",
                                      "bump_amplitude_range", "skin_tone_range", "makeup_patch_count",
                                      "makeup_anchor_uvs"};
        for (const auto& [key, value] : j.items()) {
            if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
                throw DataError("unknown corpus spec field '" + key + "'");
            }
        }
        if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("n_samples")) spec.n_samples = j.at("n_samples").get<int>();
        if (j.contains("template_subdivision")) spec.template_subdivision = j.at("template_subdivision").get<int>();
        if (j.contains("bump_count")) spec.bump_count = j.at("bump_count").get<int>();
        if (j.contains("bump_amplitude_range")) {
            spec.bump_amplitude_range = j.at("bump_amplitude_range").get<std::array<double, 2>>();
        }
        if (j.contains("skin_tone_range")) {
            const auto r = j.at("skin_tone_range").get<std::array<std::array<double, 3>, 2>>();
            for (int k = 0; k < 2; ++k) {
                spec.skin_tone_range[k] = {r[k][0], r[k][1], r[k][2]};
            }
        }
        if (j.contains("makeup_patch_count")) spec.makeup_patch_count = j.at("makeup_patch_count").get<int>();
        if (j.contains("makeup_anchor_uvs")) {
            spec.makeup_anchor_uvs.clear();
            for (const auto& uv : j.at("makeup_anchor_uvs").get<std::vector<std::array<double, 2>>>()) {
                spec.makeup_anchor_uvs.emplace_back(uv[0], uv[1]);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("invalid corpus spec JSON: ") + e.what());
    }
    spec.validate();
    return spec;
}

} // namespace facenorm
