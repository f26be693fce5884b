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
#include "facenorm/shading.hpp"
#include "facenorm/synth_corpus.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace facenorm;
using namespace facenorm::testing;

namespace {

// Real SH with the usual tabulated constants, written out term by term.
ShVector sh_table(const Eigen::Vector3d& n)
{
    const double x = n.x(), y = n.y(), z = n.z();
    ShVector s;
    s << 0.28209479177387814, 0.4886025119029199 * y, 0.4886025119029199 * z, 0.4886025119029199 * x,
        1.0925484305920792 * x * y, 1.0925484305920792 * y * z, 0.31539156525252005 * (3 * z * z - 1),
        1.0925484305920792 * x * z, 0.5462742152960396 * (x * x - y * y);
    return s;
}

Eigen::Vector3d random_unit(SplitMix64& rng)
{
    return Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()).normalized();
}

// Accumulates face cross products (twice the area-weighted normal) per vertex.
Vertices naive_normals(const Vertices& x, const MeshTopology& t)
{
    Vertices n = Vertices::Zero(x.rows(), 3);
    for (const auto& f : t.faces) {
        const Eigen::Vector3d a = x.row(f[0]);
        const Eigen::Vector3d b = x.row(f[1]);
        const Eigen::Vector3d c = x.row(f[2]);
        const Eigen::Vector3d fn = (b - a).cross(c - a);
        for (int k = 0; k < 3; ++k) n.row(f[k]) += fn.transpose();
    }
    for (Eigen::Index i = 0; i < n.rows(); ++i) n.row(i).normalize();
    return n;
}

} // namespace

TEST_CASE("SH basis matches the tabulated polynomials")
{
    SplitMix64 rng(1);
    for (int i = 0; i < 100; ++i) {
        const Eigen::Vector3d n = random_unit(rng);
        CHECK((sh_basis(n) - sh_table(n)).cwiseAbs().maxCoeff() < 1e-12);
    }
    const ShVector up = sh_basis(Eigen::Vector3d::UnitZ());
    CHECK(up[0] == doctest::Approx(0.5 / std::sqrt(std::numbers::pi)));
    CHECK(up[2] == doctest::Approx(std::sqrt(3.0 / (4.0 * std::numbers::pi))));
    CHECK(up[1] == 0.0);
    CHECK(up[3] == 0.0);
    CHECK_THROWS_AS(sh_basis(Eigen::Vector3d(1.0, 0.1, 0.0)), DataError);
}

TEST_CASE("SH basis is orthonormal under Monte Carlo integration")
{
    SplitMix64 rng(2);
    const int n = 200000;
    Eigen::Matrix<double, 9, 9> gram = Eigen::Matrix<double, 9, 9>::Zero();
    for (int i = 0; i < n; ++i) {
        const ShVector y = sh_basis(random_unit(rng));
        gram += y * y.transpose();
    }
    gram *= 4.0 * std::numbers::pi / n;
    CHECK((gram - Eigen::Matrix<double, 9, 9>::Identity()).cwiseAbs().maxCoeff() < 3e-2);
}

TEST_CASE("SH jacobian matches central differences")
{
    SplitMix64 rng(3);
    for (int i = 0; i < 10; ++i) {
        const Eigen::Vector3d n = random_unit(rng) * 1.3;
        const auto j = sh_basis_jacobian(n);
        for (int k = 0; k < 3; ++k) {
            Eigen::Vector3d p = n;
            Eigen::Vector3d m = n;
            p[k] += 1e-6;
            m[k] -= 1e-6;
            const ShVector fd = (sh_basis_unchecked(p) - sh_basis_unchecked(m)) / 2e-6;
            CHECK((j.col(k) - fd).cwiseAbs().maxCoeff() < 1e-8);
        }
    }
}

TEST_CASE("irradiance")
{
    SplitMix64 rng(4);
    const Eigen::Vector3d n = random_unit(rng);
    LightingCoefficients ambient;
    ambient.gamma[0] = 0.7;
    ambient.gamma[9] = 0.2;
    ambient.gamma[18] = 1.1;
    const Eigen::Vector3d e = irradiance(ambient, n);
    const double y00 = 0.5 / std::sqrt(std::numbers::pi);
    CHECK(e[0] == doctest::Approx(0.7 * y00));
    CHECK(e[1] == doctest::Approx(0.2 * y00));
    CHECK(e[2] == doctest::Approx(1.1 * y00));

    CHECK(irradiance(LightingCoefficients{}, n) == Eigen::Vector3d::Zero());
    CHECK(irradiance(LightingCoefficients::identity(), n) == Eigen::Vector3d::Ones());
    CHECK(identity_ambient_coefficient() * y00 == doctest::Approx(1.0).epsilon(1e-15));

    for (int t = 0; t < 20; ++t) {
        LightingCoefficients l;
        for (int i = 0; i < 27; ++i) l.gamma[i] = rng.uniform(-1, 1);
        const Eigen::Vector3d m = random_unit(rng);
        const ShVector y = sh_table(m);
        const Eigen::Vector3d got = irradiance(l, m);
        for (int c = 0; c < 3; ++c) {
            double acc = 0.0;
            for (int k = 0; k < 9; ++k) acc += l.gamma[9 * c + k] * y[k];
            CHECK(got[c] == doctest::Approx(acc).epsilon(1e-12));
        }
    }
}

TEST_CASE("vertex normals of an icosahedron point along the vertices")
{
    const MeshTopology t = generate_template(0);
    Vertices x = template_shape(0);
    x.col(2) /= 1.3;
    const Vertices n = vertex_normals(x, t);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        CHECK((n.row(i) - x.row(i).normalized()).norm() < 1e-12);
    }
}

TEST_CASE("vertex normals of a flat fan equal the plane normal")
{
    MeshTopology t;
    t.vertex_count = 7;
    Vertices x(7, 3);
    x.row(0) << 0, 0, 2;
    t.uv_coords.assign(7, Eigen::Vector2d(0.5, 0.5));
    for (int k = 0; k < 6; ++k) {
        const double a = k * std::numbers::pi / 3;
        x.row(k + 1) << std::cos(a), std::sin(a), 2;
        t.faces.emplace_back(0, k + 1, (k + 1) % 6 + 1);
    }
    const Vertices n = vertex_normals(x, t);
    for (int i = 0; i < 7; ++i) {
        CHECK((n.row(i) - Eigen::RowVector3d(0, 0, 1)).norm() < 1e-12);
    }
}

TEST_CASE("vertex normals match a naive accumulation on a bumpy mesh")
{
    const Corpus& corpus = face_corpus({2, 2, 1, 1, 1, 5});
    for (const auto& s : corpus.samples) {
        const Vertices n = vertex_normals(s.shape, corpus.topology);
        CHECK((n - naive_normals(s.shape, corpus.topology)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("a vertex without faces has no normal")
{
    MeshTopology t;
    t.vertex_count = 4;
    t.faces = {{0, 1, 2}};
    t.uv_coords.assign(4, Eigen::Vector2d(0.5, 0.5));
    Vertices x(4, 3);
    x << 0, 0, 0, 1, 0, 0, 0, 1, 0, 5, 5, 5;
    try {
        vertex_normals(x, t);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find('3') != std::string::npos);
    }
}

TEST_CASE("vertex normal backward matches central differences")
{
    const MeshTopology t = generate_template(1);
    const Vertices x = template_shape(1);
    Vertices w(x.rows(), 3);
    Eigen::Map<Eigen::VectorXd>(w.data(), w.size()) = random_vector(w.size(), 6);
    const Vertices g = vertex_normals_backward(x, t, w);
    auto objective = [&](const Vertices& y) { return (vertex_normals(y, t).array() * w.array()).sum(); };
    SplitMix64 rng(7);
    for (int trial = 0; trial < 30; ++trial) {
        const auto i = static_cast<Eigen::Index>(rng.uniform() * x.rows());
        const int a = static_cast<int>(rng.uniform() * 3);
        Vertices p = x;
        Vertices m = x;
        p(i, a) += 1e-6;
        m(i, a) -= 1e-6;
        const double fd = (objective(p) - objective(m)) / 2e-6;
        CHECK(g(i, a) == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
    }
}

TEST_CASE("shade")
{
    const Eigen::Vector3d albedo(0.2, 0.5, 0.9);
    const Eigen::Vector3d n(0, 0, -1);
    CHECK(shade(albedo, LightingCoefficients::identity(), n) == albedo);
    CHECK(shade(albedo, std::nullopt, n) == albedo);

    LightingCoefficients dark;
    for (int c = 0; c < 3; ++c) dark.gamma[9 * c] = -1.0;
    CHECK(shade(albedo, dark, n) == Eigen::Vector3d::Zero());

    SplitMix64 rng(8);
    for (int t = 0; t < 50; ++t) {
        LightingCoefficients l;
        for (int i = 0; i < 27; ++i) l.gamma[i] = rng.uniform(-1, 3);
        const Eigen::Vector3d a(rng.uniform(), rng.uniform(), rng.uniform());
        const Eigen::Vector3d m = random_unit(rng);
        const ShVector y = sh_table(m);
        const Eigen::Vector3d got = shade(a, l, m);
        for (int c = 0; c < 3; ++c) {
            const double e = std::max(0.0, l.gamma.segment<9>(9 * c).dot(y));
            CHECK(got[c] == doctest::Approx(std::min(1.0, a[c] * e)).epsilon(1e-12));
        }
    }
}
