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
#include "facenorm/metrics.hpp"

#include "facenorm/error.hpp"

#include <json.hpp>

#include <cmath>
#include <limits>
#include <vector>

namespace facenorm {

namespace {

std::vector<double> gaussian_window(const SsimParams& p)
{
    std::vector<double> w(p.window);
    const int half = p.window / 2;
    double sum = 0.0;
    for (int k = 0; k < p.window; ++k) {
        w[k] = std::exp(-0.5 * (k - half) * (k - half) / (p.sigma * p.sigma));
        sum += w[k];
    }
    for (double& v : w) {
        v /= sum;
    }
    return w;
}

// Separable filtering over the "valid" region: output (i, j) is the window
// whose top-left corner is at input (i, j).
std::vector<double> filter_valid(const std::vector<double>& src, int h, int w, const std::vector<double>& k)
{
    const int n = static_cast<int>(k.size());
    const int oh = h - n + 1;
    const int ow = w - n + 1;
    std::vector<double> rows(static_cast<std::size_t>(h) * ow, 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int t = 0; t < n; ++t) {
                acc += k[t] * src[static_cast<std::size_t>(y) * w + x + t];
            }
            rows[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(oh) * ow, 0.0);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int t = 0; t < n; ++t) {
                acc += k[t] * rows[static_cast<std::size_t>(y + t) * ow + x];
            }
            out[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    }
    return out;
}

} // namespace

MetricResult metric_suite(const Image& a, const Image& b, bool scale255, const std::optional<Mask>& mask,
                          const SsimParams& params)
{
    if (a.height() != b.height() || a.width() != b.width()) {
        throw DataError("metric inputs differ in size");
    }
    const int h = a.height();
    const int w = a.width();
    if (mask && (mask->height() != h || mask->width() != w)) {
        throw DataError("metric mask differs in size");
    }
    const auto in_mask = [&](int y, int x) { return !mask || (*mask)(y, x); };
    const double range = scale255 ? 255.0 : 1.0;

    MetricResult out;
    double sq = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!in_mask(y, x)) {
                continue;
            }
            for (int c = 0; c < 3; ++c) {
                const double d = range * (a.at(y, x, c) - b.at(y, x, c));
                sq += d * d;
            }
            ++n;
        }
    }
    if (n == 0) {
        throw DataError("metric region is empty");
    }
    out.rmse = std::sqrt(sq / (3.0 * static_cast<double>(n)));
    out.psnr = out.rmse == 0.0 ? std::numeric_limits<double>::infinity() : 20.0 * std::log10(range / out.rmse);

    const int half = params.window / 2;
    if (h < params.window || w < params.window) {
        throw DataError("image smaller than the SSIM window");
    }
    const auto kernel = gaussian_window(params);
    const double c1 = (params.k1 * range) * (params.k1 * range);
    const double c2 = (params.k2 * range) * (params.k2 * range);
    const int oh = h - params.window + 1;
    const int ow = w - params.window + 1;
    double ssim_sum = 0.0;
    std::size_t windows = 0;
    for (int c = 0; c < 3; ++c) {
        std::vector<double> xa(static_cast<std::size_t>(h) * w);
        std::vector<double> xb(xa.size());
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                xa[static_cast<std::size_t>(y) * w + x] = range * a.at(y, x, c);
                xb[static_cast<std::size_t>(y) * w + x] = range * b.at(y, x, c);
            }
        }
        std::vector<double> aa(xa.size());
        std::vector<double> bb(xa.size());
        std::vector<double> ab(xa.size());
        for (std::size_t i = 0; i < xa.size(); ++i) {
            aa[i] = xa[i] * xa[i];
            bb[i] = xb[i] * xb[i];
            ab[i] = xa[i] * xb[i];
        }
        const auto mu_a = filter_valid(xa, h, w, kernel);
        const auto mu_b = filter_valid(xb, h, w, kernel);
        const auto s_aa = filter_valid(aa, h, w, kernel);
        const auto s_bb = filter_valid(bb, h, w, kernel);
        const auto s_ab = filter_valid(ab, h, w, kernel);
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                if (!in_mask(y + half, x + half)) {
                    continue;
                }
                const std::size_t i = static_cast<std::size_t>(y) * ow + x;
                const double va = s_aa[i] - mu_a[i] * mu_a[i];
                const double vb = s_bb[i] - mu_b[i] * mu_b[i];
                const double cov = s_ab[i] - mu_a[i] * mu_b[i];
                ssim_sum += ((2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2)) /
                            ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2));
                ++windows;
            }
        }
    }
    if (windows == 0) {
        throw DataError("no SSIM window center lies in the metric region");
    }
    out.ssim = ssim_sum / static_cast<double>(windows);
    return out;
}

MetricResult metric_suite(const UVTexture& a, const UVTexture& b, bool scale255, const SsimParams& params)
{
    return metric_suite(a.color, b.color, scale255, mask_and(a.visibility, b.visibility), params);
}

std::string metrics_to_json(const MetricResult& m)
{
    nlohmann::ordered_json j;
    j["rmse"] = m.rmse;
    if (std::isinf(m.psnr)) {
        j["psnr"] = "inf";
    } else {
        j["psnr"] = m.psnr;
    }
    j["ssim"] = m.ssim;
    return j.dump();
}

} // namespace facenorm
