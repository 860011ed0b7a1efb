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

// Spill-free register tiling: kernel description, register budgets, and the
// (mb, nb, kb) planner.

#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "nanoforge/error.hpp"
#include "nanoforge/isa.hpp"

namespace nanoforge {

enum class Epilogue { None, BiasRelu };

inline const char *to_string(Epilogue e) { return e == Epilogue::None ? "none" : "bias_relu"; }

/// C = beta * C + sum_i A_i x B_i over `batch` pairs, optionally followed by
/// C = max(0, C + bias).
struct KernelSpec {
    int64_t m = 0, n = 0, k = 0;
    int64_t batch = 1;
    DType dtype = DType::F32;
    Layout layout = Layout::Flat;
    int vnni_factor = 1;
    int beta = 0;
    Epilogue epilogue = Epilogue::None;
    DType c_dtype = DType::F32;

    void check() const {
        auto fail = [](const char *field, const std::string &why) {
            throw Error(ErrorKind::Config, std::string(field) + ": " + why);
        };
        if (m <= 0) fail("m", "must be positive");
        if (n <= 0) fail("n", "must be positive");
        if (k <= 0) fail("k", "must be positive");
        if (batch <= 0) fail("batch", "must be positive");
        if (beta != 0 && beta != 1) fail("beta", "must be 0 or 1");
        if (layout == Layout::Vnni) {
            if (dtype != DType::BF16) fail("layout", "vnni layout requires dtype bf16");
            if (vnni_factor != 2) fail("vnni_factor", "must be 2 for bf16 vnni");
            if (k % 2 != 0) fail("k", "must be even for vnni layout");
        } else if (vnni_factor != 1) {
            fail("vnni_factor", "must be 1 for flat layout");
        }
    }
};

enum class OperandRole { BroadcastA, BroadcastB };

inline const char *to_string(OperandRole r) {
    return r == OperandRole::BroadcastA ? "BROADCAST_A" : "BROADCAST_B";
}

struct RegisterBudget {
    int acc_regs = 0;
    int a_regs = 0;
    int b_regs = 0;
    int scratch_regs = 0;
    int total = 0;
};

enum class TilePurpose { Acc, APanel, BPanel };

inline const char *to_string(TilePurpose p) {
    switch (p) {
        case TilePurpose::Acc: return "ACC";
        case TilePurpose::APanel: return "A_PANEL";
        case TilePurpose::BPanel: return "B_PANEL";
    }
    return "?";
}

struct TileAssignment {
    int tile_id = 0;
    TilePurpose purpose = TilePurpose::Acc;
    int row_block = 0; // 16-row block of the subpanel (A panels, accumulators)
    int col_block = 0; // 16-column block (B panels, accumulators)
};

struct AmxTileMap {
    int acc_tiles = 0;
    int a_tiles = 0;
    int b_tiles = 0;
    std::vector<TileAssignment> tiles; // accumulators first, then B, then A

    int total() const { return acc_tiles + a_tiles + b_tiles; }
    int acc_id(int row_block, int col_block) const { return row_block * b_tiles + col_block; }
    int b_id(int col_block) const { return acc_tiles + col_block; }
    int a_id(int row_block) const { return acc_tiles + b_tiles + row_block; }
};

struct TilingPlan {
    int64_t mb = 0, nb = 0, kb = 0;
    int batch_tile = 1;
    OperandRole role = OperandRole::BroadcastA;
    int lanes = 0;
    int64_t n_chunks = 0;
    RegisterBudget budget;
    LoweringPath path = LoweringPath::FP32;
    std::optional<AmxTileMap> amx_tiles;
    // Vector registers the AMX path needs for B packing and C staging.
    int amx_aux_vregs = 0;
};

namespace tiling {

inline int fp32_lanes(const IsaProfile &profile) { return profile.vector_width_bits / 32; }

/// Paths whose FLAT schedule consumes B in pairs of chunks.
inline bool pairs_chunks(LoweringPath path, Layout layout) {
    return layout == Layout::Flat &&
           (path == LoweringPath::BF16_DOT || path == LoweringPath::BF16_AVX2PACK ||
            path == LoweringPath::BF16_FALLBACK);
}

/// K step of the innermost loop for a path.
inline int64_t k_step(LoweringPath path) {
    switch (path) {
        case LoweringPath::FP32: return 1;
        case LoweringPath::BF16_AMX: return 32;
        default: return 2;
    }
}

inline RegisterBudget register_cost(LoweringPath path, OperandRole role, Layout layout,
                                    int64_t mb, int64_t nb, int lanes) {
    if (path == LoweringPath::BF16_AMX)
        throw Error(ErrorKind::Config, "BF16_AMX uses tile budgets (plan_amx)");
    if (mb <= 0) throw Error(ErrorKind::NoFeasibleTiling, "mb must be at least 1");
    if (lanes <= 0 || nb <= 0 || nb % lanes != 0)
        throw Error(ErrorKind::NonDivisible,
                    "nb=" + std::to_string(nb) + " is not a multiple of " +
                        std::to_string(lanes) + " lanes");
    const int c = static_cast<int>(nb / lanes);
    RegisterBudget b;
    b.acc_regs = static_cast<int>(mb) * c;
    if (role == OperandRole::BroadcastA) {
        b.a_regs = static_cast<int>(mb);
        b.b_regs = 1;
    } else {
        b.a_regs = 1;
        b.b_regs = c;
    }
    if (path == LoweringPath::BF16_DOT && layout == Layout::Flat) b.b_regs += 1;
    if (path == LoweringPath::BF16_FALLBACK) b.scratch_regs = 1;
    b.total = b.acc_regs + b.a_regs + b.b_regs + b.scratch_regs;
    return b;
}

inline AmxTileMap plan_amx(int64_t mb, int64_t nb, int64_t kb, const IsaProfile &profile) {
    auto ok_dim = [](int64_t d) { return d == 16 || d == 32; };
    if (!ok_dim(mb) || !ok_dim(nb) || kb != 32)
        throw Error(ErrorKind::NoFeasibleTiling,
                    "AMX tiling needs mb, nb in {16, 32} and kb = 32");
    AmxTileMap map;
    const int rb = static_cast<int>(mb / 16), cb = static_cast<int>(nb / 16);
    map.acc_tiles = rb * cb;
    map.a_tiles = rb;
    map.b_tiles = cb;
    if (map.total() > profile.tile_register_count)
        throw Error(ErrorKind::Spill, std::to_string(map.total()) + " tiles needed, " +
                                          std::to_string(profile.tile_register_count) +
                                          " available");
    for (int r = 0; r < rb; ++r)
        for (int c = 0; c < cb; ++c)
            map.tiles.push_back({map.acc_id(r, c), TilePurpose::Acc, r, c});
    for (int c = 0; c < cb; ++c)
        map.tiles.push_back({map.b_id(c), TilePurpose::BPanel, 0, c});
    for (int r = 0; r < rb; ++r)
        map.tiles.push_back({map.a_id(r), TilePurpose::APanel, r, 0});
    return map;
}

/// Vector registers used outside the tile budget on the AMX path: three for
/// the flat B pre-pack (row, interleave half, shuffle output), one for C
/// staging, one more when the bias is added during staging.
inline int amx_aux_vregs(const KernelSpec &spec) {
    int n = 0;
    if (spec.layout == Layout::Flat) n = std::max(n, 3);
    const bool stage_in = spec.beta == 1 && spec.c_dtype == DType::BF16;
    const bool stage_out = spec.epilogue != Epilogue::None || spec.c_dtype == DType::BF16;
    if (stage_in) n = std::max(n, 1);
    if (stage_out) n = std::max(n, spec.epilogue == Epilogue::BiasRelu ? 2 : 1);
    return n;
}

namespace detail {

inline TilingPlan make_vector_plan(const KernelSpec &spec, LoweringPath path, OperandRole role,
                                   int64_t mb, int64_t nb, int lanes) {
    TilingPlan p;
    p.mb = mb;
    p.nb = nb;
    p.kb = k_step(path);
    p.role = role;
    p.lanes = lanes;
    p.n_chunks = nb / lanes;
    p.path = path;
    p.budget = register_cost(path, role, spec.layout, mb, nb, lanes);
    return p;
}

inline TilingPlan make_amx_plan(const KernelSpec &spec, const IsaProfile &profile, int64_t mb,
                                int64_t nb) {
    TilingPlan p;
    p.mb = mb;
    p.nb = nb;
    p.kb = 32;
    p.lanes = fp32_lanes(profile);
    p.n_chunks = nb / p.lanes;
    p.path = LoweringPath::BF16_AMX;
    p.amx_tiles = plan_amx(mb, nb, 32, profile);
    p.budget.acc_regs = p.amx_tiles->acc_tiles;
    p.budget.a_regs = p.amx_tiles->a_tiles;
    p.budget.b_regs = p.amx_tiles->b_tiles;
    p.budget.total = p.amx_tiles->total();
    p.amx_aux_vregs = amx_aux_vregs(spec);
    return p;
}

} // namespace detail

/// Picks a spill-free (mb, nb, kb) and operand role. With `requested`, tries
/// the standard role first and swaps roles if it spills. Without, searches
/// mb in 1..8 and nb in lanes..8*lanes for the largest accumulator block.
inline TilingPlan choose_plan(const KernelSpec &spec, const IsaProfile &profile,
                              std::optional<std::pair<int64_t, int64_t>> requested = {}) {
    spec.check();
    profile.check();
    const LoweringPath path = isa::select_path(profile, spec.dtype);
    const int lanes = fp32_lanes(profile);
    const int64_t kb = k_step(path);
    if (spec.k % kb != 0)
        throw Error(ErrorKind::NoFeasibleTiling, "k=" + std::to_string(spec.k) +
                                                     " is not a multiple of the " +
                                                     to_string(path) + " k step " +
                                                     std::to_string(kb));

    if (requested) {
        auto [mb, nb] = *requested;
        if (mb <= 0 || nb <= 0 || spec.m % mb != 0 || spec.n % nb != 0)
            throw Error(ErrorKind::NonDivisible, "requested tile (" + std::to_string(mb) + ", " +
                                                     std::to_string(nb) +
                                                     ") does not divide (m, n) = (" +
                                                     std::to_string(spec.m) + ", " +
                                                     std::to_string(spec.n) + ")");
        if (path == LoweringPath::BF16_AMX) {
            try {
                return detail::make_amx_plan(spec, profile, mb, nb);
            } catch (const Error &e) {
                throw Error(ErrorKind::NoFeasibleTiling, e.what());
            }
        }
        if (nb % lanes != 0)
            throw Error(ErrorKind::NonDivisible, "nb=" + std::to_string(nb) +
                                                     " is not a multiple of " +
                                                     std::to_string(lanes) + " lanes");
        if (pairs_chunks(path, spec.layout) && (nb / lanes) % 2 != 0)
            throw Error(ErrorKind::NoFeasibleTiling,
                        std::string("flat ") + to_string(path) +
                            " consumes B chunks in pairs; nb/lanes must be even");
        for (OperandRole role : {OperandRole::BroadcastA, OperandRole::BroadcastB}) {
            TilingPlan p = detail::make_vector_plan(spec, path, role, mb, nb, lanes);
            if (p.budget.total <= profile.vector_register_count) return p;
        }
        throw Error(ErrorKind::NoFeasibleTiling,
                    "tile (" + std::to_string(mb) + ", " + std::to_string(nb) +
                        ") spills in both operand roles on " + profile.name);
    }

    std::optional<TilingPlan> best;
    auto better = [](const TilingPlan &a, const TilingPlan &b) {
        if (a.budget.acc_regs != b.budget.acc_regs) return a.budget.acc_regs > b.budget.acc_regs;
        if (a.nb != b.nb) return a.nb > b.nb;
        if (a.mb != b.mb) return a.mb < b.mb;
        return a.role == OperandRole::BroadcastA && b.role != OperandRole::BroadcastA;
    };
    if (path == LoweringPath::BF16_AMX) {
        for (int64_t mb : {16, 32}) {
            for (int64_t nb : {16, 32}) {
                if (spec.m % mb != 0 || spec.n % nb != 0) continue;
                try {
                    TilingPlan p = detail::make_amx_plan(spec, profile, mb, nb);
                    if (!best || better(p, *best)) best = p;
                } catch (const Error &) {
                }
            }
        }
    } else {
        for (int64_t mb = 1; mb <= 8; ++mb) {
            if (spec.m % mb != 0) continue;
            for (int j = 1; j <= 8; ++j) {
                const int64_t nb = int64_t(j) * lanes;
                if (spec.n % nb != 0) continue;
                if (pairs_chunks(path, spec.layout) && j % 2 != 0) continue;
                for (OperandRole role : {OperandRole::BroadcastA, OperandRole::BroadcastB}) {
                    TilingPlan p = detail::make_vector_plan(spec, path, role, mb, nb, lanes);
                    if (p.budget.total > profile.vector_register_count) continue;
                    if (!best || better(p, *best)) best = p;
                }
            }
        }
    }
    if (!best)
        throw Error(ErrorKind::NoFeasibleTiling,
                    "no divisor-respecting spill-free tiling for m=" + std::to_string(spec.m) +
                        " n=" + std::to_string(spec.n) + " on " + profile.name);
    return *best;
}

/// Human-readable plan report; the last line is the machine-readable summary.
inline std::string format_plan(const TilingPlan &p, const IsaProfile &profile) {
    std::ostringstream os;
    os << "profile      " << profile.name << " (" << profile.vector_width_bits << "-bit, "
       << profile.vector_register_count << " vregs";
    if (profile.tile_register_count) os << ", " << profile.tile_register_count << " tiles";
    os << ")\n";
    os << "path         " << to_string(p.path) << "\n";
    os << "tile         mb=" << p.mb << " nb=" << p.nb << " kb=" << p.kb
       << " batch_tile=" << p.batch_tile << "\n";
    os << "role         " << to_string(p.role) << "\n";
    os << "lanes        " << p.lanes << " (chunks " << p.n_chunks << ")\n";
    if (p.amx_tiles) {
        const auto &t = *p.amx_tiles;
        os << "tiles        acc " << t.acc_tiles << " + A " << t.a_tiles << " + B " << t.b_tiles
           << " = " << t.total() << " / " << profile.tile_register_count << "\n";
        for (const auto &a : t.tiles) {
            os << "  T" << a.tile_id << "  " << to_string(a.purpose);
            if (a.purpose == TilePurpose::Acc)
                os << " rows " << 16 * a.row_block << ".." << 16 * a.row_block + 15 << " cols "
                   << 16 * a.col_block << ".." << 16 * a.col_block + 15;
            else if (a.purpose == TilePurpose::APanel)
                os << " rows " << 16 * a.row_block << ".." << 16 * a.row_block + 15;
            else
                os << " cols " << 16 * a.col_block << ".." << 16 * a.col_block + 15;
            os << "\n";
        }
        os << "aux vregs    " << p.amx_aux_vregs << "\n";
    } else {
        os << "budget       acc " << p.budget.acc_regs << " + a " << p.budget.a_regs << " + b "
           << p.budget.b_regs << " + scratch " << p.budget.scratch_regs << " = "
           << p.budget.total << " / " << profile.vector_register_count << "\n";
    }
    os << "PLAN path=" << to_string(p.path) << " mb=" << p.mb << " nb=" << p.nb
       << " kb=" << p.kb << " role=" << to_string(p.role) << " total=" << p.budget.total;
    if (p.amx_tiles) os << " tiles=" << p.amx_tiles->total();
    os << "\n";
    return os.str();
}

} // namespace tiling
} // namespace nanoforge
