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
#include "facenorm/morphable_model.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace facenorm {

namespace {

constexpr char kMagic[4] = {'M', 'F', 'M', '1'};
constexpr std::uint32_t kVersion = 1;

class Writer
{
public:
    void u32(std::uint32_t v)
    {
        for (int i = 0; i < 4; ++i) {
            bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
    void f64(double d)
    {
        const auto v = std::bit_cast<std::uint64_t>(d);
        for (int i = 0; i < 8; ++i) {
            bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
    void f64s(const double* p, Eigen::Index n)
    {
        for (Eigen::Index i = 0; i < n; ++i) {
            f64(p[i]);
        }
    }
    void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
    std::vector<std::uint8_t> take() { return std::move(bytes_); }

private:
    std::vector<std::uint8_t> bytes_;
};

class Reader
{
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint32_t u32()
    {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
        }
        pos_ += 4;
        return v;
    }
    double f64()
    {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
        }
        pos_ += 8;
        return std::bit_cast<double>(v);
    }
    void f64s(double* p, Eigen::Index n)
    {
        for (Eigen::Index i = 0; i < n; ++i) {
            p[i] = f64();
        }
    }
    void raw(char* p, std::size_t n)
    {
        need(n);
        std::memcpy(p, bytes_.data() + pos_, n);
        pos_ += n;
    }
    bool at_end() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const
    {
        if (pos_ + n > bytes_.size()) {
            throw DataError("model container is truncated");
        }
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

} // namespace

std::vector<std::uint8_t> serialize_model(const MorphableModel& model)
{
    model.validate();
    Writer w;
    w.raw(kMagic, 4);
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(model.vertex_count()));
    w.u32(static_cast<std::uint32_t>(model.topology.face_count()));
    w.u32(static_cast<std::uint32_t>(model.k_id()));
    w.u32(static_cast<std::uint32_t>(model.k_exp()));
    w.u32(static_cast<std::uint32_t>(model.k_app()));
    w.u32(static_cast<std::uint32_t>(model.topology.landmark_count()));
    w.f64s(model.mean_shape.data(), model.mean_shape.size());
    w.f64s(model.mean_appearance.data(), model.mean_appearance.size());
    // Eigen's default storage is column-major.
    w.f64s(model.basis_id.data(), model.basis_id.size());
    w.f64s(model.basis_exp.data(), model.basis_exp.size());
    w.f64s(model.basis_app.data(), model.basis_app.size());
    w.f64s(model.sigma_id.data(), model.sigma_id.size());
    w.f64s(model.sigma_exp.data(), model.sigma_exp.size());
    w.f64s(model.sigma_app.data(), model.sigma_app.size());
    for (const auto& uv : model.topology.uv_coords) {
        w.f64(uv.x());
        w.f64(uv.y());
    }
    for (const auto& f : model.topology.faces) {
        for (int k = 0; k < 3; ++k) {
            w.u32(static_cast<std::uint32_t>(f[k]));
        }
    }
    for (int idx : model.topology.landmark_indices) {
        w.u32(static_cast<std::uint32_t>(idx));
    }
    return w.take();
}

MorphableModel deserialize_model(std::span<const std::uint8_t> bytes)
{
    Reader r(bytes);
    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw DataError("not an MFM1 model container");
    }
    const std::uint32_t version = r.u32();
    if (version != kVersion) {
        throw DataError("unsupported model container version " + std::to_string(version));
    }
    const std::uint32_t v = r.u32();
    const std::uint32_t f = r.u32();
    const std::uint32_t k_id = r.u32();
    const std::uint32_t k_exp = r.u32();
    const std::uint32_t k_app = r.u32();
    const std::uint32_t l = r.u32();
    // Reject headers whose payload cannot fit in the buffer before allocating.
    const double payload = 8.0 * (6.0 * v + 3.0 * v * (double(k_id) + k_exp + k_app) + k_id + k_exp + k_app + 2.0 * v) +
                           4.0 * (3.0 * f + l);
    if (payload > static_cast<double>(bytes.size())) {
        throw DataError("model container is truncated");
    }
    const Eigen::Index n = 3 * static_cast<Eigen::Index>(v);

    MorphableModel m;
    m.topology.vertex_count = static_cast<int>(v);
    m.mean_shape.resize(n);
    m.mean_appearance.resize(n);
    m.basis_id.resize(n, k_id);
    m.basis_exp.resize(n, k_exp);
    m.basis_app.resize(n, k_app);
    m.sigma_id.resize(k_id);
    m.sigma_exp.resize(k_exp);
    m.sigma_app.resize(k_app);
    r.f64s(m.mean_shape.data(), n);
    r.f64s(m.mean_appearance.data(), n);
    r.f64s(m.basis_id.data(), m.basis_id.size());
    r.f64s(m.basis_exp.data(), m.basis_exp.size());
    r.f64s(m.basis_app.data(), m.basis_app.size());
    r.f64s(m.sigma_id.data(), k_id);
    r.f64s(m.sigma_exp.data(), k_exp);
    r.f64s(m.sigma_app.data(), k_app);
    m.topology.uv_coords.resize(v);
    for (auto& uv : m.topology.uv_coords) {
        uv.x() = r.f64();
        uv.y() = r.f64();
    }
    m.topology.faces.resize(f);
    for (auto& face : m.topology.faces) {
        for (int k = 0; k < 3; ++k) {
            face[k] = static_cast<int>(r.u32());
        }
    }
    m.topology.landmark_indices.resize(l);
    for (auto& idx : m.topology.landmark_indices) {
        idx = static_cast<int>(r.u32());
    }
    if (!r.at_end()) {
        throw DataError("trailing bytes after model container payload");
    }
    m.validate();
    return m;
}

void save_model(const std::filesystem::path& path, const MorphableModel& model)
{
    const auto bytes = serialize_model(model);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot open " + path.string() + " for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

MorphableModel load_model(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open model " + path.string());
    }
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_model(bytes);
}

} // namespace facenorm
