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

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace facenorm {

/// Linear-intensity RGB image, row-major, channels interleaved.
/// PNG I/O maps bytes to values by v = byte / 255 with no transfer curve.
class Image
{
public:
    Image() = default;
    Image(int height, int width, double fill = 0.0);

    int height() const { return height_; }
    int width() const { return width_; }
    bool empty() const { return data_.empty(); }
    std::size_t pixel_count() const { return static_cast<std::size_t>(height_) * width_; }

    double& at(int y, int x, int c) { return data_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c]; }
    double at(int y, int x, int c) const { return data_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c]; }

    Eigen::Vector3d pixel(int y, int x) const;
    void set_pixel(int y, int x, const Eigen::Vector3d& rgb);

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    bool operator==(const Image&) const = default;

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<double> data_;
};

/// Boolean raster, row-major.
class Mask
{
public:
    Mask() = default;
    Mask(int height, int width, bool fill = false);

    int height() const { return height_; }
    int width() const { return width_; }
    std::size_t size() const { return data_.size(); }

    bool operator()(int y, int x) const { return data_[static_cast<std::size_t>(y) * width_ + x] != 0; }
    void set(int y, int x, bool v) { data_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }

    std::size_t count() const;
    double fraction() const { return data_.empty() ? 0.0 : static_cast<double>(count()) / data_.size(); }

    bool operator==(const Mask&) const = default;

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<std::uint8_t> data_;
};

Mask mask_and(const Mask& a, const Mask& b);

/// Bilinear lookup at continuous pixel coordinates (x, y); pixel (i, j) has its
/// center at (j + 0.5, i + 0.5). Coordinates are clamped to the image border.
Eigen::Vector3d sample_bilinear(const Image& image, double x, double y);

/// Nearest pixel to continuous coordinates, or false when outside the frame.
bool pixel_at(int height, int width, double x, double y, int& row, int& col);

std::uint8_t to_byte(double value);

void write_png(const std::filesystem::path& path, const Image& image);
void write_png(const std::filesystem::path& path, const Mask& mask);
/// Grayscale PNG of a scalar field normalized to [0, 1] over the finite range of `values`.
void write_png_normalized(const std::filesystem::path& path, int height, int width,
                          std::span<const double> values, double ignore_value);
Image read_png(const std::filesystem::path& path);
Mask read_mask_png(const std::filesystem::path& path);

} // namespace facenorm
