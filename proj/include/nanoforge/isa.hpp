/*******************************************************************************
* Copyright 2026 The nanoforge Authors
*
* Licensed under the Apache License, Version 2.0 (the "License");
* you may not use this file except in compliance with the License.
* You may obtain a copy of the License at
*
*     http://www.apache.org/licenses/LICENSE-2.0
*
* Unless required by applicable law or agreed to in writing, software
* distributed under the License is distributed on an "AS IS" BASIS,
* WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
* See the License for the specific language governing permissions and
* limitations under the License.
*******************************************************************************/
#pragma once

// Abstract target descriptions and lowering-path selection.

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "nanoforge/error.hpp"

namespace nanoforge {

enum class DType { F32, BF16 };

enum class Layout { Flat, Vnni };

enum class Feature {
    AmxBf16,       // tile load/store + tile BF16 dot product
    Avx512Bf16Dot, // packed BF16 dot with FP32 accumulate
    Avx2Bf16Pack,  // scalar broadcast + even/odd BF16->FP32 conversions
};

enum class LoweringPath { FP32, BF16_AMX, BF16_DOT, BF16_AVX2PACK, BF16_FALLBACK };

inline const char *to_string(DType t) { return t == DType::F32 ? "f32" : "bf16"; }
inline const char *to_string(Layout l) { return l == Layout::Flat ? "flat" : "vnni"; }

inline const char *to_string(Feature f) {
    switch (f) {
        case Feature::AmxBf16: return "amx_bf16";
        case Feature::Avx512Bf16Dot: return "avx512_bf16_dot";
        case Feature::Avx2Bf16Pack: return "avx2_bf16_pack";
    }
    return "?";
}

inline const char *to_string(LoweringPath p) {
    switch (p) {
        case LoweringPath::FP32: return "FP32";
        case LoweringPath::BF16_AMX: return "BF16_AMX";
        case LoweringPath::BF16_DOT: return "BF16_DOT";
        case LoweringPath::BF16_AVX2PACK: return "BF16_AVX2PACK";
        case LoweringPath::BF16_FALLBACK: return "BF16_FALLBACK";
    }
    return "?";
}

inline std::optional<Feature> parse_feature(std::string_view s) {
    for (Feature f : {Feature::AmxBf16, Feature::Avx512Bf16Dot, Feature::Avx2Bf16Pack})
        if (s == to_string(f)) return f;
    return std::nullopt;
}

struct IsaProfile {
    std::string name;
    int vector_width_bits = 512;
    int vector_register_count = 32;
    std::set<Feature> features;
    int tile_register_count = 0;
    int tile_rows_max = 0;
    int tile_row_bytes_max = 0;

    bool has(Feature f) const { return features.count(f) != 0; }
    int vector_bytes() const { return vector_width_bits / 8; }

    /// Throws Error(Config) naming the first broken invariant.
    void check() const {
        auto fail = [&](const std::string &why) {
            throw Error(ErrorKind::Config, "profile '" + name + "': " + why);
        };
        if (vector_width_bits != 128 && vector_width_bits != 256 && vector_width_bits != 512)
            fail("vector_width_bits must be 128, 256 or 512");
        if (vector_register_count <= 0) fail("vector_register_count must be positive");
        if (tile_register_count < 0) fail("tile_register_count must be non-negative");
        if (has(Feature::AmxBf16)) {
            if (tile_register_count < 1) fail("amx_bf16 requires at least one tile register");
            if (tile_rows_max != 16 || tile_row_bytes_max != 64)
                fail("amx_bf16 requires 16-row, 64-byte tiles");
        }
    }
};

namespace isa {

inline std::vector<IsaProfile> builtin_profiles() {
    std::vector<IsaProfile> out;
    out.push_back({"amx512", 512, 32, {Feature::AmxBf16, Feature::Avx512Bf16Dot}, 8, 16, 64});
    out.push_back({"avx512dot", 512, 32, {Feature::Avx512Bf16Dot}, 0, 0, 0});
    out.push_back({"avx2pack", 256, 16, {Feature::Avx2Bf16Pack}, 0, 0, 0});
    out.push_back({"generic256", 256, 16, {}, 0, 0, 0});
    out.push_back({"generic128", 128, 16, {}, 0, 0, 0});
    // plain AVX-512F: FP32 kernels and the generic BF16 fallback
    out.push_back({"avx512", 512, 32, {}, 0, 0, 0});
    return out;
}

inline IsaProfile find_profile(std::string_view name) {
    for (auto &p : builtin_profiles())
        if (p.name == name) return p;
    throw Error(ErrorKind::Config, "unknown profile '" + std::string(name) + "'");
}

/// FP32 always takes the FP32 path. BF16 picks the first available of
/// AMX > AVX512 dot > AVX2 pack > generic fallback.
inline LoweringPath select_path(const IsaProfile &profile, DType dtype) {
    if (dtype == DType::F32) return LoweringPath::FP32;
    if (profile.has(Feature::AmxBf16)) return LoweringPath::BF16_AMX;
    if (profile.has(Feature::Avx512Bf16Dot)) return LoweringPath::BF16_DOT;
    if (profile.has(Feature::Avx2Bf16Pack)) return LoweringPath::BF16_AVX2PACK;
    return LoweringPath::BF16_FALLBACK;
}

} // namespace isa
} // namespace nanoforge
