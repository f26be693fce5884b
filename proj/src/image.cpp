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
#include "facenorm/image.hpp"

#include "facenorm/error.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>

namespace facenorm {

Image::Image(int height, int width, double fill)
    : height_(height), width_(width), data_(static_cast<std::size_t>(height) * width * 3, fill)
{
    if (height < 0 || width < 0) {
        throw DataError("image dimensions must be nonnegative");
    }
}

Eigen::Vector3d Image::pixel(int y, int x) const
{
    const double* p = &data_[(static_cast<std::size_t>(y) * width_ + x) * 3];
    return {p[0], p[1], p[2]};
}

void Image::set_pixel(int y, int x, const Eigen::Vector3d& rgb)
{
    double* p = &data_[(static_cast<std::size_t>(y) * width_ + x) * 3];
    p[0] = rgb[0];
    p[1] = rgb[1];
    p[2] = rgb[2];
}

Mask::Mask(int height, int width, bool fill)
    : height_(height), width_(width), data_(static_cast<std::size_t>(height) * width, fill ? 1 : 0)
{
    if (height < 0 || width < 0) {
        throw DataError("mask dimensions must be nonnegative");
    }
}

std::size_t Mask::count() const
{
    return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

Mask mask_and(const Mask& a, const Mask& b)
{
    if (a.height() != b.height() || a.width() != b.width()) {
        throw DataError("mask dimensions differ");
    }
    Mask out(a.height(), a.width());
    for (int y = 0; y < a.height(); ++y) {
        for (int x = 0; x < a.width(); ++x) {
            out.set(y, x, a(y, x) && b(y, x));
        }
    }
    return out;
}

Eigen::Vector3d sample_bilinear(const Image& image, double x, double y)
{
    const double fx = std::clamp(x - 0.5, 0.0, static_cast<double>(image.width() - 1));
    const double fy = std::clamp(y - 0.5, 0.0, static_cast<double>(image.height() - 1));
    const int x0 = static_cast<int>(std::floor(fx));
    const int y0 = static_cast<int>(std::floor(fy));
    const int x1 = std::min(x0 + 1, image.width() - 1);
    const int y1 = std::min(y0 + 1, image.height() - 1);
    const double tx = fx - x0;
    const double ty = fy - y0;
    const Eigen::Vector3d top = (1.0 - tx) * image.pixel(y0, x0) + tx * image.pixel(y0, x1);
    const Eigen::Vector3d bottom = (1.0 - tx) * image.pixel(y1, x0) + tx * image.pixel(y1, x1);
    return (1.0 - ty) * top + ty * bottom;
}

bool pixel_at(int height, int width, double x, double y, int& row, int& col)
{
    if (!(x >= 0.0 && y >= 0.0 && x < width && y < height)) {
        return false;
    }
    col = static_cast<int>(x);
    row = static_cast<int>(y);
    return true;
}

std::uint8_t to_byte(double value)
{
    if (!std::isfinite(value)) {
        return 0;
    }
    return static_cast<std::uint8_t>(std::lround(std::clamp(value, 0.0, 1.0) * 255.0));
}

namespace {

struct FileCloser
{
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void write_png_bytes(const std::filesystem::path& path, int height, int width, int channels,
                     const std::vector<std::uint8_t>& bytes)
{
    FilePtr file(std::fopen(path.c_str(), "wb"));
    if (!file) {
        throw DataError("cannot open " + path.string() + " for writing");
    }
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw DataError("libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("libpng write failed for " + path.string());
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    // Values are written as-is; tag the file sRGB without applying a curve.
    png_set_sRGB(png, info, PNG_sRGB_INTENT_PERCEPTUAL);
    png_write_info(png, info);
    for (int y = 0; y < height; ++y) {
        png_write_row(png, const_cast<png_bytep>(&bytes[static_cast<std::size_t>(y) * width * channels]));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

std::vector<std::uint8_t> read_png_rgb(const std::filesystem::path& path, int& height, int& width)
{
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) {
        throw DataError("cannot open " + path.string());
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("not a readable PNG: " + path.string());
    }
    png_init_io(png, file.get());
    png_read_info(png, info);
    const png_byte color_type = png_get_color_type(png, info);
    if (png_get_bit_depth(png, info) == 16) {
        png_set_strip_16(png);
    }
    if (color_type == PNG_COLOR_TYPE_PALETTE) {
        png_set_palette_to_rgb(png);
    }
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
        if (png_get_bit_depth(png, info) < 8) {
            png_set_expand_gray_1_2_4_to_8(png);
        }
        png_set_gray_to_rgb(png);
    }
    if (color_type & PNG_COLOR_MASK_ALPHA) {
        png_set_strip_alpha(png);
    }
    png_read_update_info(png, info);
    width = static_cast<int>(png_get_image_width(png, info));
    height = static_cast<int>(png_get_image_height(png, info));
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(width) * height * 3);
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y) {
        rows[y] = &bytes[static_cast<std::size_t>(y) * width * 3];
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return bytes;
}

} // namespace

void write_png(const std::filesystem::path& path, const Image& image)
{
    std::vector<std::uint8_t> bytes(image.data().size());
    std::transform(image.data().begin(), image.data().end(), bytes.begin(), to_byte);
    write_png_bytes(path, image.height(), image.width(), 3, bytes);
}

void write_png(const std::filesystem::path& path, const Mask& mask)
{
    std::vector<std::uint8_t> bytes(mask.size());
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            bytes[static_cast<std::size_t>(y) * mask.width() + x] = mask(y, x) ? 255 : 0;
        }
    }
    write_png_bytes(path, mask.height(), mask.width(), 1, bytes);
}

void write_png_normalized(const std::filesystem::path& path, int height, int width,
                          std::span<const double> values, double ignore_value)
{
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (double v : values) {
        if (std::isfinite(v) && v != ignore_value) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    std::vector<std::uint8_t> bytes(values.size(), 0);
    const double range = hi > lo ? hi - lo : 1.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double v = values[i];
        if (std::isfinite(v) && v != ignore_value) {
            // near surfaces bright
            bytes[i] = to_byte(1.0 - (v - lo) / range);
        }
    }
    write_png_bytes(path, height, width, 1, bytes);
}

Image read_png(const std::filesystem::path& path)
{
    int height = 0;
    int width = 0;
    const auto bytes = read_png_rgb(path, height, width);
    Image image(height, width);
    std::transform(bytes.begin(), bytes.end(), image.data().begin(),
                   [](std::uint8_t b) { return b / 255.0; });
    return image;
}

Mask read_mask_png(const std::filesystem::path& path)
{
    int height = 0;
    int width = 0;
    const auto bytes = read_png_rgb(path, height, width);
    Mask mask(height, width);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            mask.set(y, x, bytes[(static_cast<std::size_t>(y) * width + x) * 3] >= 128);
        }
    }
    return mask;
}

} // namespace facenorm
