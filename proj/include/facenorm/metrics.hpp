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
#include "facenorm/uv_texture.hpp"

#include <optional>
#include <string>

namespace facenorm {

struct MetricResult
{
    double rmse = 0.0;
    /// +infinity for identical inputs.
    double psnr = 0.0;
    double ssim = 0.0;
};

struct SsimParams
{
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
};

/// RMSE and PSNR over pixels in `mask` (all pixels when absent); SSIM is the
/// mean local SSIM over window centers in `mask`, per channel, averaged over
/// channels. With `scale255` values are scaled to 0..255 first and PSNR uses
/// MAX = 255; otherwise MAX = 1.
MetricResult metric_suite(const Image& a, const Image& b, bool scale255, const std::optional<Mask>& mask = {},
                          const SsimParams& params = {});

/// Evaluated over the intersection of the two visibility masks.
MetricResult metric_suite(const UVTexture& a, const UVTexture& b, bool scale255, const SsimParams& params = {});

/// {"rmse":…,"psnr":…,"ssim":…} with the string "inf" for infinite PSNR.
std::string metrics_to_json(const MetricResult& m);

} // namespace facenorm
