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

#include <cstdint>
#include <span>
#include <string_view>

namespace facenorm {

/// 64-bit FNV-1a, used for scene keys and config fingerprints.
class Fnv1a
{
public:
    void bytes(const void* data, std::size_t n)
    {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            state_ ^= p[i];
            state_ *= 1099511628211ULL;
        }
    }
    void text(std::string_view s) { bytes(s.data(), s.size()); }
    void doubles(std::span<const double> values) { bytes(values.data(), values.size_bytes()); }
    template <typename T>
    void value(const T& v)
    {
        bytes(&v, sizeof(T));
    }
    std::uint64_t digest() const { return state_; }

private:
    std::uint64_t state_ = 14695981039346656037ULL;
};

} // namespace facenorm
