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

// VNNI layout transforms, 128-bit-lane word interleave, and the permutations
// that undo the column interleaving of flat-layout BF16 schedules.

#include <cstdint>
#include <string>
#include <vector>

#include "nanoforge/error.hpp"
#include "nanoforge/isa.hpp"
#include "nanoforge/tiling.hpp"

namespace nanoforge {

/// [k_outer][n][vnni_factor] packed matrix.
template <typename T>
struct VnniMatrixT {
    int64_t k_outer = 0;
    int64_t n = 0;
    int vnni_factor = 1;
    std::vector<T> data;

    const T &at(int64_t k, int64_t col) const {
        return data[(k / vnni_factor * n + col) * vnni_factor + k % vnni_factor];
    }
};

using VnniMatrix = VnniMatrixT<std::uint16_t>;

namespace packing {

template <typename T>
VnniMatrixT<T> pack_vnni(const std::vector<T> &flat, int64_t k, int64_t n, int v) {
    if (v <= 0 || k % v != 0)
        throw Error(ErrorKind::Shape, "vnni factor " + std::to_string(v) + " does not divide K=" +
                                          std::to_string(k));
    if (int64_t(flat.size()) != k * n)
        throw Error(ErrorKind::Shape, "flat matrix has " + std::to_string(flat.size()) +
                                          " elements, expected " + std::to_string(k * n));
    VnniMatrixT<T> out {k / v, n, v, std::vector<T>(flat.size())};
    for (int64_t r = 0; r < k; ++r)
        for (int64_t c = 0; c < n; ++c)
            out.data[(r / v * n + c) * v + r % v] = flat[r * n + c];
    return out;
}

template <typename T>
std::vector<T> unpack_vnni(const VnniMatrixT<T> &p) {
    const int v = p.vnni_factor;
    const int64_t k = p.k_outer * v;
    std::vector<T> flat(k * p.n);
    for (int64_t r = 0; r < k; ++r)
        for (int64_t c = 0; c < p.n; ++c) flat[r * p.n + c] = p.at(r, c);
    return flat;
}

/// Packs each of `batch` consecutive K x N matrices; returns the concatenated data.
template <typename T>
std::vector<T> pack_vnni_batched(const std::vector<T> &flat, int64_t batch, int64_t k, int64_t n,
                                 int v) {
    std::vector<T> out;
    out.reserve(flat.size());
    for (int64_t b = 0; b < batch; ++b) {
        std::vector<T> one(flat.begin() + b * k * n, flat.begin() + (b + 1) * k * n);
        auto p = pack_vnni(one, k, n, v);
        out.insert(out.end(), p.data.begin(), p.data.end());
    }
    return out;
}

namespace detail {

template <typename T>
std::vector<T> interleave128(const std::vector<T> &a, const std::vector<T> &b, int half) {
    if (a.size() != b.size())
        throw Error(ErrorKind::Shape, "interleave width mismatch: " + std::to_string(a.size()) +
                                          " vs " + std::to_string(b.size()) + " words");
    if (a.size() % 8 != 0)
        throw Error(ErrorKind::Shape,
                    "interleave width " + std::to_string(a.size()) + " words is not a multiple of 128 bits");
    std::vector<T> r(a.size());
    for (size_t lane = 0; lane < a.size() / 8; ++lane)
        for (int i = 0; i < 4; ++i) {
            r[lane * 8 + 2 * i] = a[lane * 8 + 4 * half + i];
            r[lane * 8 + 2 * i + 1] = b[lane * 8 + 4 * half + i];
        }
    return r;
}

} // namespace detail

/// punpcklwd: per 128-bit lane (a0,b0,a1,b1,a2,b2,a3,b3).
template <typename T>
std::vector<T> interleave_lo128(const std::vector<T> &a, const std::vector<T> &b) {
    return detail::interleave128(a, b, 0);
}

/// punpckhwd: per 128-bit lane (a4,b4,a5,b5,a6,b6,a7,b7).
template <typename T>
std::vector<T> interleave_hi128(const std::vector<T> &a, const std::vector<T> &b) {
    return detail::interleave128(a, b, 1);
}

/// Word 2i of each pair in a vector of 16-bit words.
template <typename T>
std::vector<T> even_words(const std::vector<T> &w) {
    std::vector<T> r(w.size() / 2);
    for (size_t i = 0; i < r.size(); ++i) r[i] = w[2 * i];
    return r;
}

template <typename T>
std::vector<T> odd_words(const std::vector<T> &w) {
    std::vector<T> r(w.size() / 2);
    for (size_t i = 0; i < r.size(); ++i) r[i] = w[2 * i + 1];
    return r;
}

/// Little-endian pairing of 16-bit words into 32-bit lanes.
inline std::vector<std::uint32_t> words_to_dwords(const std::vector<std::uint16_t> &w) {
    std::vector<std::uint32_t> r(w.size() / 2);
    for (size_t i = 0; i < r.size(); ++i) r[i] = std::uint32_t(w[2 * i]) | std::uint32_t(w[2 * i + 1]) << 16;
    return r;
}

inline std::vector<std::uint16_t> dwords_to_words(const std::vector<std::uint32_t> &d) {
    std::vector<std::uint16_t> r(d.size() * 2);
    for (size_t i = 0; i < d.size(); ++i) {
        r[2 * i] = std::uint16_t(d[i]);
        r[2 * i + 1] = std::uint16_t(d[i] >> 16);
    }
    return r;
}

/// Two-source shuffle indices for one output register: out[x] = concat(s0, s1)[idx[x]].
using ShuffleIndices = std::vector<int>;

namespace detail {

// Column carried by each F32 lane of the two accumulator-feeding registers of
// one chunk pair, obtained by running the path's B-side load schedule on
// column-tagged rows. Tags encode the column in the low 15 bits; row k+1 is
// marked with the top bit so pair (k, k+1) membership is checked too.
inline std::vector<std::vector<int>> tagged_chunk_columns(LoweringPath path, int lanes) {
    const int words = 2 * lanes;
    std::vector<std::uint16_t> row0(words), row1(words);
    for (int i = 0; i < words; ++i) {
        row0[i] = std::uint16_t(i);
        row1[i] = std::uint16_t(i | 0x8000);
    }
    auto check_pair = [](std::uint16_t lo, std::uint16_t hi) {
        if ((lo & 0x8000) || !(hi & 0x8000) || (lo & 0x7fff) != (hi & 0x7fff))
            throw Error(ErrorKind::Render, "symbolic pack produced a mismatched k pair");
    };
    auto strip = [](const std::vector<std::uint16_t> &w) {
        std::vector<int> cols(w.size());
        for (size_t i = 0; i < w.size(); ++i) cols[i] = w[i] & 0x7fff;
        return cols;
    };

    std::vector<std::vector<int>> out;
    switch (path) {
        case LoweringPath::BF16_DOT:
        case LoweringPath::BF16_AMX: {
            for (const auto &v : {interleave_lo128(row0, row1), interleave_hi128(row0, row1)}) {
                for (int x = 0; x < lanes; ++x) check_pair(v[2 * x], v[2 * x + 1]);
                out.push_back(strip(even_words(v)));
            }
            break;
        }
        case LoweringPath::BF16_AVX2PACK:
            out.push_back(strip(even_words(row0)));
            out.push_back(strip(odd_words(row0)));
            break;
        case LoweringPath::BF16_FALLBACK: {
            const auto d = words_to_dwords(row0);
            std::vector<std::uint32_t> shl(d.size()), msk(d.size());
            for (size_t i = 0; i < d.size(); ++i) {
                shl[i] = d[i] << 16;
                msk[i] = d[i] & 0xFFFF0000u;
            }
            // the F32 value lives in the high half-word
            out.push_back(strip(odd_words(dwords_to_words(shl))));
            out.push_back(strip(odd_words(dwords_to_words(msk))));
            break;
        }
        case LoweringPath::FP32: break;
    }
    return out;
}

inline std::vector<ShuffleIndices> identity_pair(int lanes) {
    std::vector<ShuffleIndices> r(2, ShuffleIndices(lanes));
    for (int o = 0; o < 2; ++o)
        for (int x = 0; x < lanes; ++x) r[o][x] = o * lanes + x;
    return r;
}

// Inverts the tagged lane mapping: output register o lane x must hold chunk
// column o*lanes + x.
inline std::vector<ShuffleIndices> invert_pair(const std::vector<std::vector<int>> &cols,
                                               int lanes) {
    std::vector<ShuffleIndices> r(2, ShuffleIndices(lanes, -1));
    for (int s = 0; s < 2; ++s)
        for (int x = 0; x < lanes; ++x) {
            const int col = cols[s][x];
            r[col / lanes][col % lanes] = s * lanes + x;
        }
    for (const auto &v : r)
        for (int i : v)
            if (i < 0) throw Error(ErrorKind::Render, "symbolic pack lost a column");
    return r;
}

} // namespace detail

/// Shuffle indices for the two registers of one accumulator chunk pair.
/// Sources are (acc chunk 2p, acc chunk 2p+1) in that order; entry 0 yields
/// the natural-order chunk 2p, entry 1 chunk 2p+1.
inline std::vector<ShuffleIndices> chunk_pair_permutation(LoweringPath path, int lanes) {
    auto cols = detail::tagged_chunk_columns(path, lanes);
    if (cols.empty()) return detail::identity_pair(lanes);
    return detail::invert_pair(cols, lanes);
}

/// Per-accumulator fixup shuffles, indexed like the accumulators (row-major
/// over mb x n_chunks). The two sources of accumulator (i, j) are the
/// accumulators (i, j & ~1) and (i, j | 1). Layouts and paths that never
/// interleave columns get identity lists.
inline std::vector<ShuffleIndices> derive_fixup_permutation(const TilingPlan &plan,
                                                            LoweringPath path, Layout layout) {
    const int lanes = plan.lanes;
    const int c = plan.n_chunks;
    const bool interleaves = layout == Layout::Flat && tiling::pairs_chunks(path, layout);
    std::vector<ShuffleIndices> out;
    const auto pair = interleaves ? chunk_pair_permutation(path, lanes) : detail::identity_pair(lanes);
    for (int i = 0; i < plan.mb; ++i)
        for (int j = 0; j < c; ++j) {
            if (interleaves)
                out.push_back(pair[j & 1]);
            else
                out.push_back(detail::identity_pair(lanes)[0]);
        }
    return out;
}

inline std::vector<ShuffleIndices> derive_fixup_permutation(const TilingPlan &plan,
                                                            LoweringPath path) {
    return derive_fixup_permutation(plan, path, Layout::Flat);
}

/// Inverse of derive_fixup_permutation: shuffles that place natural-order C
/// chunks (2p, 2p+1) into the lane order the body accumulates in, so a
/// beta=1 prologue can seed interleaved accumulators.
inline std::vector<ShuffleIndices> derive_prologue_permutation(const TilingPlan &plan,
                                                               LoweringPath path, Layout layout) {
    const int lanes = plan.lanes;
    const bool interleaves = layout == Layout::Flat && tiling::pairs_chunks(path, layout);
    std::vector<ShuffleIndices> pair = detail::identity_pair(lanes);
    if (interleaves) pair = detail::tagged_chunk_columns(path, lanes);
    std::vector<ShuffleIndices> out;
    for (int i = 0; i < plan.mb; ++i)
        for (int j = 0; j < plan.n_chunks; ++j) out.push_back(pair[interleaves ? (j & 1) : 0]);
    return out;
}

/// Dword shuffles that turn the interleave_lo/hi results of two flat rows
/// into contiguous VNNI pairs: entry o selects from (lo, hi) the pairs for
/// columns o*lanes .. o*lanes+lanes-1.
inline std::vector<ShuffleIndices> derive_pack_shuffle(int lanes) {
    return chunk_pair_permutation(LoweringPath::BF16_DOT, lanes);
}

} // namespace packing
} // namespace nanoforge
