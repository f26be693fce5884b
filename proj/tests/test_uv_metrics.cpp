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
#include "facenorm/metrics.hpp"
#include "facenorm/uv_texture.hpp"

#include "metric_oracle.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace facenorm;
using namespace facenorm::testing;

TEST_CASE("bilinear sampling hits pixel values at pixel centers")
{
    const Image img = random_image(5, 7, 1);
    for (int y = 0; y < 5; ++y) {
        for (int x = 0; x < 7; ++x) {
            CHECK((sample_bilinear(img, x + 0.5, y + 0.5) - img.pixel(y, x)).norm() < 1e-15);
        }
    }
    const Eigen::Vector3d mid = sample_bilinear(img, 1.0, 2.5);
    CHECK((mid - 0.5 * (img.pixel(2, 0) + img.pixel(2, 1))).norm() < 1e-15);

    Mask m(5, 7, false);
    m.set(2, 1, true);
    Eigen::Vector3d out;
    REQUIRE(sample_bilinear_masked(img, m, 1.0, 2.5, out));
    CHECK((out - img.pixel(2, 1)).norm() < 1e-15);
    CHECK_FALSE(sample_bilinear_masked(img, m, 5.5, 4.5, out));
}

TEST_CASE("UV rasterization interpolates the layout affinely")
{
    const MorphableModel& model = face_model();
    const int size = 64;
    const UvRaster raster = rasterize_uv(model.topology, size);
    Vertices uv = Vertices::Zero(model.vertex_count(), 3);
    for (int v = 0; v < model.vertex_count(); ++v) {
        uv(v, 0) = model.topology.uv_coords[v].x();
        uv(v, 1) = model.topology.uv_coords[v].y();
    }
    const Image splat = splat_to_uv(raster, model.topology, uv);
    int covered = 0;
    for (int i = 0; i < size; ++i) {
        for (int j = 0; j < size; ++j) {
            const int t = raster.tri_id[raster.index(i, j)];
            if (t < 0) continue;
            ++covered;
            CHECK_FALSE(is_seam_triangle(model.topology, t));
            CHECK(raster.bary[raster.index(i, j)].sum() == doctest::Approx(1.0));
            CHECK(splat.at(i, j, 0) == doctest::Approx((j + 0.5) / size).epsilon(1e-9));
            CHECK(splat.at(i, j, 1) == doctest::Approx((i + 0.5) / size).epsilon(1e-9));
        }
    }
    CHECK(covered > size * size / 2);
}

TEST_CASE("unwarping a self-render recovers the model texture")
{
    const MorphableModel& model = face_model();
    const Camera cam = Camera::default_for(128, 128);
    const CoefficientVector c = near_mean_coefficients(model, cam, 2);
    const Image img = render(model, c, std::nullopt, cam).color;
    const int size = 128;
    const UVTexture tex = unwarp(img, c, model, cam, size);
    const Image truth =
        splat_to_uv(rasterize_uv(model.topology, size), model.topology, evaluate_appearance(model, c.delta).colors);
    REQUIRE(tex.visibility.count() > 1000);
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        for (int j = 0; j < size; ++j) {
            if (tex.visibility(i, j)) sum += (tex.color.pixel(i, j) - truth.pixel(i, j)).cwiseAbs().sum();
        }
    }
    CHECK(sum / (3.0 * tex.visibility.count()) <= 0.02);
    // hidden texels hold the fill
    for (int i = 0; i < size; ++i) {
        for (int j = 0; j < size; ++j) {
            if (!tex.visibility(i, j)) CHECK(tex.color.pixel(i, j) == tex.fill.pixel(i, j));
        }
    }
}

TEST_CASE("a head turned away shows none of the frontal texels")
{
    const MorphableModel& model = face_model();
    const Camera cam = Camera::default_for(64, 64);
    CoefficientVector c = initial_coefficients(model, cam);
    c.rotation = Eigen::Vector3d(0, std::numbers::pi, 0);
    const int size = 64;
    const UVTexture tex = unwarp(Image(64, 64, 0.3), c, model, cam, size);
    CHECK(tex.visibility.count() > 0);
    for (int i = 0; i < size; ++i) {
        for (int j = 0; j < size; ++j) {
            const double u = (j + 0.5) / size, v = (i + 0.5) / size;
            if (u > 0.4 && u < 0.6 && v > 0.4 && v < 0.7) CHECK_FALSE(tex.visibility(i, j));
        }
    }
}

TEST_CASE("rewarp")
{
    const MorphableModel& model = face_model();
    const Camera cam = Camera::default_for(96, 96);
    const CoefficientVector c = near_mean_coefficients(model, cam, 3);
    const Image img = render(model, c, std::nullopt, cam).color;
    const UVTexture tex = unwarp(img, c, model, cam, 256);

    SUBCASE("round trip")
    {
        const RewarpResult back = rewarp(tex, c, model, cam);
        REQUIRE(back.valid.count() > 0.9 * back.coverage.count());
        CHECK(metric_suite(back.image, img, false, back.valid).psnr >= 30.0);
    }
    SUBCASE("constant texture")
    {
        UVTexture flat = tex;
        flat.color = Image(256, 256, 0.37);
        const RewarpResult back = rewarp(flat, c, model, cam);
        for (int y = 0; y < 96; ++y) {
            for (int x = 0; x < 96; ++x) {
                if (back.valid(y, x)) CHECK((back.image.pixel(y, x).array() - 0.37).abs().maxCoeff() < 1e-12);
            }
        }
    }
    SUBCASE("hidden texels never leak")
    {
        UVTexture poisoned = tex;
        for (int i = 0; i < 256; ++i) {
            for (int j = 0; j < 256; ++j) {
                if (!tex.visibility(i, j)) poisoned.color.set_pixel(i, j, Eigen::Vector3d::Constant(5.0));
            }
        }
        poisoned.fill = Image(256, 256, 5.0);
        const RewarpResult back = rewarp(poisoned, c, model, cam);
        for (int y = 0; y < 96; ++y) {
            for (int x = 0; x < 96; ++x) {
                if (back.valid(y, x)) CHECK(back.image.pixel(y, x).maxCoeff() <= 1.0);
            }
        }
    }
}

TEST_CASE("occlusion in image space carries into UV")
{
    const MorphableModel& model = face_model();
    const Camera cam = Camera::default_for(64, 64);
    const CoefficientVector c = initial_coefficients(model, cam);
    const Image img = render(model, c, std::nullopt, cam).color;
    const UVTexture tex = unwarp(img, c, model, cam, 128);

    const UVTexture all = apply_occlusion(tex, Mask(64, 64, true), c, model, cam);
    CHECK(all.visibility == tex.visibility);
    CHECK(all.color == tex.color);

    const UVTexture none = apply_occlusion(tex, Mask(64, 64, false), c, model, cam);
    CHECK(none.visibility.count() == 0);
    CHECK(none.color == tex.fill);

    // the mean head is mirror symmetric, so the left half hides half of it
    Mask left(64, 64, true);
    for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 32; ++x) left.set(y, x, false);
    }
    const UVTexture half = apply_occlusion(tex, left, c, model, cam);
    const double uv_fraction = static_cast<double>(half.visibility.count()) / tex.visibility.count();
    const RenderOutput geo = render(model, c, std::nullopt, cam);
    const double image_fraction =
        static_cast<double>(mask_and(geo.coverage, left).count()) / geo.coverage.count();
    CHECK(std::abs(uv_fraction - image_fraction) <= 0.05);
    CHECK_THROWS_AS(apply_occlusion(tex, Mask(8, 8, true), c, model, cam), DataError);
}

TEST_CASE("masked blur keeps constants and ignores unmasked pixels")
{
    Image img(20, 20, 0.4);
    Mask m(20, 20, false);
    for (int y = 5; y < 15; ++y) {
        for (int x = 3; x < 12; ++x) m.set(y, x, true);
    }
    for (int y = 0; y < 20; ++y) {
        for (int x = 0; x < 20; ++x) {
            if (!m(y, x)) img.set_pixel(y, x, Eigen::Vector3d::Constant(9.0));
        }
    }
    const Image out = gaussian_blur_masked(img, m, 2.0);
    for (int y = 0; y < 20; ++y) {
        for (int x = 0; x < 20; ++x) {
            if (m(y, x)) CHECK((out.pixel(y, x).array() - 0.4).abs().maxCoeff() < 1e-12);
        }
    }
}

TEST_CASE("metric suite")
{
    const Image a = random_image(24, 24, 4);
    const MetricResult same = metric_suite(a, a, false);
    CHECK(same.rmse == 0.0);
    CHECK(std::isinf(same.psnr));
    CHECK(same.ssim == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(metrics_to_json(same).find("\"inf\"") != std::string::npos);

    Image b = a;
    for (double& v : b.data()) v += 0.1;
    const MetricResult shift = metric_suite(a, b, false);
    CHECK(shift.rmse == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(shift.psnr == doctest::Approx(20.0).epsilon(1e-10));
    const MetricResult shift255 = metric_suite(a, b, true);
    CHECK(shift255.rmse == doctest::Approx(25.5).epsilon(1e-12));
    CHECK(shift255.psnr == doctest::Approx(20.0).epsilon(1e-10));

    for (std::uint64_t s = 0; s < 5; ++s) {
        const Image x = random_image(30, 26, 10 + s);
        const Image y = random_image(30, 26, 20 + s);
        const MetricResult m = metric_suite(x, y, false);
        CHECK(m.rmse == doctest::Approx(oracle::rmse(x, y)).epsilon(1e-12));
        CHECK(m.psnr == doctest::Approx(oracle::psnr(x, y)).epsilon(1e-12));
        CHECK(m.ssim == doctest::Approx(oracle::ssim(x, y)).epsilon(1e-9));
    }

    Mask m(24, 24, false);
    m.set(12, 12, true);
    Image c = a;
    c.at(12, 12, 1) += 0.3;
    c.at(3, 4, 0) += 0.9; // outside the mask
    CHECK(metric_suite(a, c, false, m).rmse == doctest::Approx(std::sqrt(0.09 / 3)));

    CHECK_THROWS_AS(metric_suite(a, random_image(24, 25, 1), false), DataError);
    CHECK_THROWS_AS(metric_suite(a, a, false, Mask(24, 24, false)), DataError);
}
