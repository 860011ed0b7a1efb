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

// Nanokernel generation: (KernelSpec, IsaProfile, TilingPlan) -> VirProgram.
// One body generator per (path, layout); a shared loop nest, prologue and
// epilogue around it.

#include <deque>
#include <string>
#include <vector>

#include "nanoforge/error.hpp"
#include "nanoforge/packing.hpp"
#include "nanoforge/tiling.hpp"
#include "nanoforge/validate.hpp"
#include "nanoforge/vir.hpp"

namespace nanoforge {

enum class EpilogueStep { FixupShuffle, BiasAdd, Relu, Downconvert, Store };

inline const char *to_string(EpilogueStep s) {
    switch (s) {
        case EpilogueStep::FixupShuffle: return "FIXUP_SHUFFLE";
        case EpilogueStep::BiasAdd: return "BIAS_ADD";
        case EpilogueStep::Relu: return "RELU";
        case EpilogueStep::Downconvert: return "DOWNCONVERT";
        case EpilogueStep::Store: return "STORE";
    }
    return "?";
}

struct Schedule {
    LoweringPath path = LoweringPath::FP32;
    Layout layout = Layout::Flat;
    TilingPlan plan;
    std::vector<EpilogueStep> steps;

    bool has(EpilogueStep s) const {
        for (auto x : steps)
            if (x == s) return true;
        return false;
    }
};

/// Test hooks that deliberately break a program.
struct GenerateOptions {
    bool drop_fixup = false;      // omit the fixup shuffles
    bool drop_accumulate = false; // omit the last multiply-accumulate of the k body
};

namespace codegen {

inline constexpr std::uint32_t kOddMask = 0xFFFF0000u;
inline constexpr std::uint32_t kEvenShift = 16;

inline Schedule make_schedule(const KernelSpec &spec, const TilingPlan &plan) {
    Schedule s;
    s.path = plan.path;
    s.layout = spec.layout;
    s.plan = plan;
    if (tiling::pairs_chunks(plan.path, spec.layout)) s.steps.push_back(EpilogueStep::FixupShuffle);
    if (spec.epilogue == Epilogue::BiasRelu) {
        s.steps.push_back(EpilogueStep::BiasAdd);
        s.steps.push_back(EpilogueStep::Relu);
    }
    if (spec.c_dtype == DType::BF16 && plan.path != LoweringPath::BF16_AMX)
        s.steps.push_back(EpilogueStep::Downconvert);
    s.steps.push_back(EpilogueStep::Store);
    return s;
}

using Seq = std::vector<Node>;

namespace detail {

inline Node ins(Instr i) { return Node {std::move(i)}; }

inline Node loop(std::string iv, int64_t lo, int64_t hi, int64_t step, Seq body) {
    return Node {Loop {std::move(iv), lo, hi, step, std::move(body)}};
}

/// Register numbering and address expressions shared by the body generators.
struct Ctx {
    KernelSpec spec;
    TilingPlan plan;
    IsaProfile profile;
    int lanes = 0;
    int c = 0;
    int mb = 0;
    int acc_base = 0, a_base = 0, b_base = 0, scratch = -1;
    int buf_a = -1, buf_b = -1, buf_c = -1, buf_bias = -1, buf_pack = -1, buf_stage = -1;
    ElemType in_t = ElemType::F32;
    ElemType c_t = ElemType::F32;

    Reg acc(int i, int j) const { return vreg(acc_base + i * c + j); }
    Reg a(int i) const { return vreg(a_base + i); }
    Reg b(int j) const { return vreg(b_base + j); }
    Reg s() const { return vreg(scratch); }

    // A[i_br][i_m + i][i_k + kk]
    MemRef mem_a(int64_t i, int64_t kk, int64_t count) const {
        const int64_t m = spec.m, k = spec.k;
        return {buf_a, Affine(i * k + kk, {{"i_br", m * k}, {"i_m", k}, {"i_k", 1}}), in_t, count};
    }
    // flat B[i_br][i_k + kk][i_n + col]
    MemRef mem_bf(int64_t kk, int64_t col, int64_t count) const {
        const int64_t n = spec.n, k = spec.k;
        return {buf_b, Affine(kk * n + col, {{"i_br", k * n}, {"i_k", n}, {"i_n", 1}}), in_t,
                count};
    }
    // VNNI B[i_br][(i_k + kk) / 2][i_n + col][0], kk even
    MemRef mem_bv(int64_t kk, int64_t col, int64_t count) const {
        const int64_t n = spec.n, k = spec.k;
        return {buf_b, Affine(kk * n + 2 * col, {{"i_br", k * n}, {"i_k", n}, {"i_n", 2}}), in_t,
                count};
    }
    MemRef mem_c(int64_t i, int64_t col, int64_t count) const {
        return {buf_c, Affine(i * spec.n + col, {{"i_m", spec.n}, {"i_n", 1}}), c_t, count};
    }
    MemRef mem_bias(int64_t col, int64_t count) const {
        return {buf_bias, Affine(col, {{"i_n", 1}}), ElemType::F32, count};
    }
};

inline Instr mk(Op op, Reg dst = {}, Reg a = {}, Reg b = {}) {
    Instr i;
    i.op = op;
    i.dst = dst;
    i.a = a;
    i.b = b;
    return i;
}

inline Instr mem_op(Op op, Reg r, MemRef m) {
    Instr i;
    i.op = op;
    if (op == Op::VStore || op == Op::TStore)
        i.a = r;
    else
        i.dst = r;
    i.mem = std::move(m);
    return i;
}

inline Instr bitcast(Reg dst, Reg src, ElemType t) {
    Instr i = mk(Op::Bitcast, dst, src);
    i.to_type = t;
    return i;
}

inline Instr shli(Reg dst, Reg src) {
    Instr i = mk(Op::Shli, dst, src);
    i.imm = kEvenShift;
    return i;
}

inline Instr andi(Reg dst, Reg src) {
    Instr i = mk(Op::Andi, dst, src);
    i.imm = kOddMask;
    return i;
}

// BF16 pair in `pair` (already I32) -> one BF16 half as F32 in `dst`.
inline void emit_half(Seq &out, Reg dst, Reg pair, bool odd) {
    out.push_back(ins(odd ? andi(dst, pair) : shli(dst, pair)));
    out.push_back(ins(bitcast(dst, dst, ElemType::F32)));
}

inline Instr tile_op(Op op, Reg t, MemRef m, int64_t rows, int64_t stride) {
    Instr i = mem_op(op, t, std::move(m));
    i.rows = rows;
    i.mem->row_stride = stride;
    return i;
}

} // namespace detail

// ---------------------------------------------------------------------------
// k-loop bodies

inline Seq body_fp32(const detail::Ctx &x) {
    using namespace detail;
    Seq s;
    if (x.plan.role == OperandRole::BroadcastA) {
        for (int i = 0; i < x.mb; ++i) s.push_back(ins(mem_op(Op::VBcastF32, x.a(i), x.mem_a(i, 0, 1))));
        for (int j = 0; j < x.c; ++j) {
            s.push_back(ins(mem_op(Op::VLoad, x.b(0), x.mem_bf(0, j * x.lanes, x.lanes))));
            for (int i = 0; i < x.mb; ++i) s.push_back(ins(mk(Op::Fma, x.acc(i, j), x.a(i), x.b(0))));
        }
    } else {
        for (int j = 0; j < x.c; ++j)
            s.push_back(ins(mem_op(Op::VLoad, x.b(j), x.mem_bf(0, j * x.lanes, x.lanes))));
        for (int i = 0; i < x.mb; ++i) {
            s.push_back(ins(mem_op(Op::VBcastF32, x.a(0), x.mem_a(i, 0, 1))));
            for (int j = 0; j < x.c; ++j) s.push_back(ins(mk(Op::Fma, x.acc(i, j), x.a(0), x.b(j))));
        }
    }
    return s;
}

inline Seq body_bf16_vnni_dot(const detail::Ctx &x) {
    using namespace detail;
    Seq s;
    const int64_t w = 2 * x.lanes;
    if (x.plan.role == OperandRole::BroadcastA) {
        for (int i = 0; i < x.mb; ++i)
            s.push_back(ins(mem_op(Op::VBcastPairBF16, x.a(i), x.mem_a(i, 0, 2))));
        for (int j = 0; j < x.c; ++j) {
            s.push_back(ins(mem_op(Op::VLoad, x.b(0), x.mem_bv(0, j * x.lanes, w))));
            for (int i = 0; i < x.mb; ++i)
                s.push_back(ins(mk(Op::DotBF16, x.acc(i, j), x.a(i), x.b(0))));
        }
    } else {
        for (int j = 0; j < x.c; ++j)
            s.push_back(ins(mem_op(Op::VLoad, x.b(j), x.mem_bv(0, j * x.lanes, w))));
        for (int i = 0; i < x.mb; ++i) {
            s.push_back(ins(mem_op(Op::VBcastPairBF16, x.a(0), x.mem_a(i, 0, 2))));
            for (int j = 0; j < x.c; ++j)
                s.push_back(ins(mk(Op::DotBF16, x.acc(i, j), x.a(0), x.b(j))));
        }
    }
    return s;
}

inline Seq body_bf16_vnni_avx2pack(const detail::Ctx &x) {
    using namespace detail;
    Seq s;
    const int64_t w = 2 * x.lanes;
    for (bool odd : {true, false}) {
        const Op half = odd ? Op::OddBF16ToF32 : Op::EvenBF16ToF32;
        const int kk = odd ? 1 : 0;
        if (x.plan.role == OperandRole::BroadcastA) {
            for (int i = 0; i < x.mb; ++i)
                s.push_back(ins(mem_op(Op::BcastBF16ToF32, x.a(i), x.mem_a(i, kk, 1))));
            for (int j = 0; j < x.c; ++j) {
                s.push_back(ins(mem_op(half, x.b(0), x.mem_bv(0, j * x.lanes, w))));
                for (int i = 0; i < x.mb; ++i)
                    s.push_back(ins(mk(Op::Fma, x.acc(i, j), x.a(i), x.b(0))));
            }
        } else {
            for (int j = 0; j < x.c; ++j)
                s.push_back(ins(mem_op(half, x.b(j), x.mem_bv(0, j * x.lanes, w))));
            for (int i = 0; i < x.mb; ++i) {
                s.push_back(ins(mem_op(Op::BcastBF16ToF32, x.a(0), x.mem_a(i, kk, 1))));
                for (int j = 0; j < x.c; ++j)
                    s.push_back(ins(mk(Op::Fma, x.acc(i, j), x.a(0), x.b(j))));
            }
        }
    }
    return s;
}

inline Seq body_bf16_vnni_fallback(const detail::Ctx &x) {
    using namespace detail;
    Seq s;
    const int64_t w = 2 * x.lanes;
    auto a_half = [&](Reg dst, int i, bool odd) {
        s.push_back(ins(mem_op(Op::VBcastPairBF16, x.s(), x.mem_a(i, 0, 2))));
        s.push_back(ins(bitcast(x.s(), x.s(), ElemType::I32)));
        emit_half(s, dst, x.s(), odd);
    };
    auto b_half = [&](Reg r, int j, bool odd) {
        s.push_back(ins(mem_op(Op::VLoad, r, x.mem_bv(0, j * x.lanes, w))));
        s.push_back(ins(bitcast(r, r, ElemType::I32)));
        emit_half(s, r, r, odd);
    };
    for (bool odd : {true, false}) {
        if (x.plan.role == OperandRole::BroadcastA) {
            for (int i = 0; i < x.mb; ++i) a_half(x.a(i), i, odd);
            for (int j = 0; j < x.c; ++j) {
                b_half(x.b(0), j, odd);
                for (int i = 0; i < x.mb; ++i)
                    s.push_back(ins(mk(Op::Fma, x.acc(i, j), x.a(i), x.b(0))));
            }
        } else {
            for (int j = 0; j < x.c; ++j) b_half(x.b(j), j, odd);
            for (int i = 0; i < x.mb; ++i) {
                a_half(x.a(0), i, odd);
                for (int j = 0; j < x.c; ++j)
                    s.push_back(ins(mk(Op::Fma, x.acc(i, j), x.a(0), x.b(j))));
            }
        }
    }
    return s;
}

inline Seq body_bf16_flat_dot(const detail::Ctx &x) {
    using namespace detail;
    Seq s;
    const int64_t w = 2 * x.lanes;
    auto ilv = [&](Op op, Reg dst, Reg a, std::optional<MemRef> m, Reg b = {}) {
        Instr i = mk(op, dst, a, b);
        i.mem = std::move(m);
        s.push_back(ins(std::move(i)));
    };
    if (x.plan.role == OperandRole::BroadcastA) {
        for (int i = 0; i < x.mb; ++i)
            s.push_back(ins(mem_op(Op::VBcastPairBF16, x.a(i), x.mem_a(i, 0, 2))));
        for (int p = 0; p < x.c / 2; ++p) {
            const int64_t col = 2 * p * x.lanes;
            s.push_back(ins(mem_op(Op::VLoad, x.b(1), x.mem_bf(0, col, w))));
            ilv(Op::InterleaveLo128, x.b(0), x.b(1), x.mem_bf(1, col, w));
            ilv(Op::InterleaveHi128, x.b(1), x.b(1), x.mem_bf(1, col, w));
            for (int h = 0; h < 2; ++h)
                for (int i = 0; i < x.mb; ++i)
                    s.push_back(ins(mk(Op::DotBF16, x.acc(i, 2 * p + h), x.a(i), x.b(h))));
        }
    } else {
        const Reg stage = x.b(x.c);
        for (int p = 0; p < x.c / 2; ++p) {
            const int64_t col = 2 * p * x.lanes;
            s.push_back(ins(mem_op(Op::VLoad, stage, x.mem_bf(0, col, w))));
            s.push_back(ins(mem_op(Op::VLoad, x.b(2 * p + 1), x.mem_bf(1, col, w))));
            ilv(Op::InterleaveLo128, x.b(2 * p), stage, std::nullopt, x.b(2 * p + 1));
            ilv(Op::InterleaveHi128, x.b(2 * p + 1), stage, std::nullopt, x.b(2 * p + 1));
        }
        for (int i = 0; i < x.mb; ++i) {
            s.push_back(ins(mem_op(Op::VBcastPairBF16, x.a(0), x.mem_a(i, 0, 2))));
            for (int j = 0; j < x.c; ++j)
                s.push_back(ins(mk(Op::DotBF16, x.acc(i, j), x.a(0), x.b(j))));
        }
    }
    return s;
}

inline Seq body_bf16_flat_avx2pack(const detail::Ctx &x) {
    using namespace detail;
    Seq s;
    const int64_t w = 2 * x.lanes;
    for (int kk = 0; kk < 2; ++kk) {
        if (x.plan.role == OperandRole::BroadcastA) {
            for (int i = 0; i < x.mb; ++i)
                s.push_back(ins(mem_op(Op::BcastBF16ToF32, x.a(i), x.mem_a(i, kk, 1))));
            for (int p = 0; p < x.c / 2; ++p) {
                for (int h = 0; h < 2; ++h) {
                    const Op half = h == 0 ? Op::EvenBF16ToF32 : Op::OddBF16ToF32;
                    s.push_back(ins(mem_op(half, x.b(0), x.mem_bf(kk, 2 * p * x.lanes, w))));
                    for (int i = 0; i < x.mb; ++i)
                        s.push_back(ins(mk(Op::Fma, x.acc(i, 2 * p + h), x.a(i), x.b(0))));
                }
            }
        } else {
            for (int p = 0; p < x.c / 2; ++p) {
                const auto m = x.mem_bf(kk, 2 * p * x.lanes, w);
                s.push_back(ins(mem_op(Op::EvenBF16ToF32, x.b(2 * p), m)));
                s.push_back(ins(mem_op(Op::OddBF16ToF32, x.b(2 * p + 1), m)));
            }
            for (int i = 0; i < x.mb; ++i) {
                s.push_back(ins(mem_op(Op::BcastBF16ToF32, x.a(0), x.mem_a(i, kk, 1))));
                for (int j = 0; j < x.c; ++j)
                    s.push_back(ins(mk(Op::Fma, x.acc(i, j), x.a(0), x.b(j))));
            }
        }
    }
    return s;
}

inline Seq body_bf16_flat_fallback(const detail::Ctx &x) {
    using namespace detail;
    Seq s;
    const int64_t w = 2 * x.lanes;
    auto a_elem = [&](Reg dst, int i, int kk) {
        s.push_back(ins(mem_op(Op::VBcastPairBF16, x.s(), x.mem_a(i, 0, 2))));
        s.push_back(ins(bitcast(x.s(), x.s(), ElemType::I32)));
        emit_half(s, dst, x.s(), kk == 1);
    };
    for (int kk = 0; kk < 2; ++kk) {
        if (x.plan.role == OperandRole::BroadcastA) {
            for (int i = 0; i < x.mb; ++i) a_elem(x.a(i), i, kk);
            for (int p = 0; p < x.c / 2; ++p) {
                s.push_back(ins(mem_op(Op::VLoad, x.b(0), x.mem_bf(kk, 2 * p * x.lanes, w))));
                s.push_back(ins(bitcast(x.b(0), x.b(0), ElemType::I32)));
                emit_half(s, x.s(), x.b(0), false);
                for (int i = 0; i < x.mb; ++i)
                    s.push_back(ins(mk(Op::Fma, x.acc(i, 2 * p), x.a(i), x.s())));
                emit_half(s, x.b(0), x.b(0), true);
                for (int i = 0; i < x.mb; ++i)
                    s.push_back(ins(mk(Op::Fma, x.acc(i, 2 * p + 1), x.a(i), x.b(0))));
            }
        } else {
            for (int p = 0; p < x.c / 2; ++p) {
                const Reg ev = x.b(2 * p), od = x.b(2 * p + 1);
                s.push_back(ins(mem_op(Op::VLoad, od, x.mem_bf(kk, 2 * p * x.lanes, w))));
                s.push_back(ins(bitcast(od, od, ElemType::I32)));
                emit_half(s, ev, od, false);
                emit_half(s, od, od, true);
            }
            for (int i = 0; i < x.mb; ++i) {
                a_elem(x.a(0), i, kk);
                for (int j = 0; j < x.c; ++j)
                    s.push_back(ins(mk(Op::Fma, x.acc(i, j), x.a(0), x.b(j))));
            }
        }
    }
    return s;
}

// ---------------------------------------------------------------------------
// AMX

namespace detail {

inline MemRef amx_mem_a(const Ctx &x, int r, const std::string &kiv, std::optional<int64_t> batch) {
    const int64_t m = x.spec.m, k = x.spec.k;
    Affine addr(16 * r * k + (batch ? *batch * m * k : 0), {{"i_m", k}, {kiv, 1}});
    if (!batch) addr.terms.push_back({"i_br", m * k});
    return {x.buf_a, addr, ElemType::BF16, 32};
}

inline Seq amx_tile_products(const Ctx &x, const std::vector<MemRef> &b_panels,
                             const std::vector<MemRef> &a_panels, int64_t b_stride) {
    const auto &t = *x.plan.amx_tiles;
    Seq s;
    for (int cb = 0; cb < t.b_tiles; ++cb)
        s.push_back(ins(tile_op(Op::TLoad, treg(t.b_id(cb)), b_panels[cb], 16, b_stride)));
    for (int rb = 0; rb < t.a_tiles; ++rb)
        s.push_back(ins(tile_op(Op::TLoad, treg(t.a_id(rb)), a_panels[rb], 16, x.spec.k)));
    for (int rb = 0; rb < t.a_tiles; ++rb)
        for (int cb = 0; cb < t.b_tiles; ++cb)
            s.push_back(ins(mk(Op::TMulfBF16, treg(t.acc_id(rb, cb)), treg(t.a_id(rb)),
                               treg(t.b_id(cb)))));
    return s;
}

/// Packs one flat K x nb B subpanel into the VNNI scratch panel. `batch_term`
/// selects the source batch: a constant index or i_br + 1.
inline Node amx_pack_loop(const Ctx &x, const std::string &iv, std::optional<int64_t> batch) {
    const int64_t n = x.spec.n, k = x.spec.k, nb = x.plan.nb;
    const int L = x.lanes;
    const int64_t w = std::min<int64_t>(2 * L, nb); // words per row chunk
    const int le = int(w / 2);
    auto shuf = packing::derive_pack_shuffle(le);
    for (auto &v : shuf) {
        for (int &idx : v) idx = idx / le * L + idx % le;
        v.resize(L, 0);
    }
    auto src = [&](int64_t row, int64_t col) {
        Affine a(row * n + col + (batch ? *batch * k * n : k * n), {{iv, n}, {"i_n", 1}});
        if (!batch) a.terms.push_back({"i_br", k * n});
        return MemRef {x.buf_b, a, ElemType::BF16, w};
    };
    const Reg v0 = vreg(0), v1 = vreg(1), v2 = vreg(2);
    Seq body;
    for (int64_t q = 0; q < nb / w; ++q) {
        body.push_back(ins(mem_op(Op::VLoad, v0, src(0, q * w))));
        Instr hi = mk(Op::InterleaveHi128, v1, v0);
        hi.mem = src(1, q * w);
        Instr lo = mk(Op::InterleaveLo128, v0, v0);
        lo.mem = src(1, q * w);
        body.push_back(ins(hi));
        body.push_back(ins(lo));
        for (int o = 0; o < 2; ++o) {
            Instr sh = mk(Op::Shuffle, v2, v0, v1);
            sh.indices = shuf[o];
            body.push_back(ins(sh));
            body.push_back(ins(mem_op(
                Op::VStore, v2,
                {x.buf_pack, Affine(2 * q * w + o * w, {{iv, nb}}), ElemType::BF16, w})));
        }
    }
    return loop(iv, 0, k, 2, std::move(body));
}

} // namespace detail

inline Seq body_bf16_vnni_amx(const detail::Ctx &x) {
    using namespace detail;
    const auto &t = *x.plan.amx_tiles;
    const int64_t n = x.spec.n, k = x.spec.k;
    std::vector<MemRef> bp, ap;
    for (int cb = 0; cb < t.b_tiles; ++cb)
        bp.push_back({x.buf_b, Affine(32 * cb, {{"i_br", k * n}, {"i_k", n}, {"i_n", 2}}),
                      ElemType::BF16, 32});
    for (int rb = 0; rb < t.a_tiles; ++rb) ap.push_back(amx_mem_a(x, rb, "i_k", std::nullopt));
    return amx_tile_products(x, bp, ap, 2 * n);
}

/// Tile products for one batch element against the packed scratch panel.
inline Seq body_bf16_flat_amx(const detail::Ctx &x, const std::string &kiv,
                              std::optional<int64_t> batch) {
    using namespace detail;
    const auto &t = *x.plan.amx_tiles;
    const int64_t nb = x.plan.nb;
    std::vector<MemRef> bp, ap;
    for (int cb = 0; cb < t.b_tiles; ++cb)
        bp.push_back({x.buf_pack, Affine(32 * cb, {{kiv, nb}}), ElemType::BF16, 32});
    for (int rb = 0; rb < t.a_tiles; ++rb) ap.push_back(amx_mem_a(x, rb, kiv, batch));
    return amx_tile_products(x, bp, ap, 2 * nb);
}

// ---------------------------------------------------------------------------
// prologue / epilogue

inline Seq prologue(const detail::Ctx &x) {
    using namespace detail;
    Seq s;
    if (x.plan.path == LoweringPath::BF16_AMX) {
        const auto &t = *x.plan.amx_tiles;
        const int64_t n = x.spec.n, nb = x.plan.nb;
        if (x.spec.beta == 0) {
            for (const auto &a : t.tiles)
                if (a.purpose == TilePurpose::Acc) s.push_back(ins(mk(Op::TZero, treg(a.tile_id))));
            return s;
        }
        if (x.c_t == ElemType::F32) {
            for (const auto &a : t.tiles)
                if (a.purpose == TilePurpose::Acc)
                    s.push_back(ins(tile_op(Op::TLoad, treg(a.tile_id),
                                            x.mem_c(16 * a.row_block, 16 * a.col_block, 16), 16, n)));
            return s;
        }
        Seq up;
        for (int j = 0; j < x.c; ++j) {
            up.push_back(ins(mem_op(Op::VLoad, vreg(0),
                                    {x.buf_c, Affine(j * x.lanes, {{"i_m", n}, {"i_n", 1}, {"i_ci", n}}),
                                     ElemType::BF16, x.lanes})));
            up.push_back(ins(mk(Op::CvtBF16ToF32, vreg(0), vreg(0))));
            up.push_back(ins(mem_op(Op::VStore, vreg(0),
                                    {x.buf_stage, Affine(j * x.lanes, {{"i_ci", nb}}), ElemType::F32,
                                     x.lanes})));
        }
        s.push_back(loop("i_ci", 0, x.plan.mb, 1, std::move(up)));
        for (const auto &a : t.tiles)
            if (a.purpose == TilePurpose::Acc)
                s.push_back(ins(tile_op(
                    Op::TLoad, treg(a.tile_id),
                    {x.buf_stage, Affine(16 * a.row_block * nb + 16 * a.col_block), ElemType::F32, 16},
                    16, nb)));
        return s;
    }
    if (x.spec.beta == 1 && tiling::pairs_chunks(x.plan.path, x.spec.layout)) {
        // Seed each accumulator pair in the body's interleaved column order.
        const auto perm = packing::derive_prologue_permutation(x.plan, x.plan.path, x.spec.layout);
        const Reg t = vreg(x.mb * x.c);
        for (int i = 0; i < x.mb; ++i)
            for (int p = 0; p < x.c / 2; ++p) {
                const Reg hi = x.acc(i, 2 * p + 1);
                for (auto [r, j] : {std::pair {t, 2 * p}, std::pair {hi, 2 * p + 1}}) {
                    s.push_back(ins(mem_op(Op::VLoad, r, x.mem_c(i, j * x.lanes, x.lanes))));
                    if (x.c_t == ElemType::BF16) s.push_back(ins(mk(Op::CvtBF16ToF32, r, r)));
                }
                for (int h = 0; h < 2; ++h) {
                    Instr sh = mk(Op::Shuffle, x.acc(i, 2 * p + h), t, hi);
                    sh.indices = perm[i * x.c + 2 * p + h];
                    s.push_back(ins(sh));
                }
            }
        return s;
    }
    for (int i = 0; i < x.mb; ++i)
        for (int j = 0; j < x.c; ++j) {
            if (x.spec.beta == 0) {
                s.push_back(ins(mk(Op::VXorZero, x.acc(i, j))));
            } else {
                s.push_back(ins(mem_op(Op::VLoad, x.acc(i, j), x.mem_c(i, j * x.lanes, x.lanes))));
                if (x.c_t == ElemType::BF16)
                    s.push_back(ins(mk(Op::CvtBF16ToF32, x.acc(i, j), x.acc(i, j))));
            }
        }
    return s;
}

inline Seq epilogue(const detail::Ctx &x, const Schedule &sch, const GenerateOptions &opt = {}) {
    using namespace detail;
    Seq s;
    if (sch.path == LoweringPath::BF16_AMX) {
        const auto &t = *x.plan.amx_tiles;
        const int64_t n = x.spec.n, nb = x.plan.nb;
        const bool stage = x.spec.epilogue != Epilogue::None || x.c_t == ElemType::BF16;
        for (const auto &a : t.tiles) {
            if (a.purpose != TilePurpose::Acc) continue;
            MemRef dst = stage ? MemRef {x.buf_stage,
                                         Affine(16 * a.row_block * nb + 16 * a.col_block),
                                         ElemType::F32, 16}
                               : x.mem_c(16 * a.row_block, 16 * a.col_block, 16);
            s.push_back(ins(tile_op(Op::TStore, treg(a.tile_id), dst, 16, stage ? nb : n)));
        }
        if (!stage) return s;
        Seq out;
        const Reg v = vreg(0), bias = vreg(1);
        for (int j = 0; j < x.c; ++j) {
            out.push_back(ins(mem_op(Op::VLoad, v,
                                     {x.buf_stage, Affine(j * x.lanes, {{"i_co", nb}}), ElemType::F32,
                                      x.lanes})));
            if (sch.has(EpilogueStep::BiasAdd)) {
                out.push_back(ins(mem_op(Op::VLoad, bias, x.mem_bias(j * x.lanes, x.lanes))));
                out.push_back(ins(mk(Op::VAdd, v, v, bias)));
            }
            if (sch.has(EpilogueStep::Relu)) out.push_back(ins(mk(Op::VMax0, v, v)));
            if (x.c_t == ElemType::BF16) out.push_back(ins(mk(Op::CvtF32ToBF16, v, v)));
            out.push_back(ins(mem_op(Op::VStore, v,
                                     {x.buf_c, Affine(j * x.lanes, {{"i_m", n}, {"i_n", 1}, {"i_co", n}}),
                                      x.c_t, x.lanes})));
        }
        s.push_back(loop("i_co", 0, x.plan.mb, 1, std::move(out)));
        return s;
    }

    // Accumulators may move during the fixup; phys maps logical -> register.
    std::vector<Reg> phys;
    for (int i = 0; i < x.mb; ++i)
        for (int j = 0; j < x.c; ++j) phys.push_back(x.acc(i, j));
    auto at = [&](int i, int j) -> Reg & { return phys[i * x.c + j]; };
    std::deque<Reg> free;
    for (int r = x.mb * x.c; r < x.plan.budget.total; ++r) free.push_back(vreg(r));

    for (EpilogueStep step : sch.steps) {
        switch (step) {
            case EpilogueStep::FixupShuffle: {
                if (opt.drop_fixup) break;
                const auto perm = packing::derive_fixup_permutation(x.plan, sch.path, sch.layout);
                for (int i = 0; i < x.mb; ++i)
                    for (int p = 0; p < x.c / 2; ++p) {
                        const Reg lo = at(i, 2 * p), hi = at(i, 2 * p + 1);
                        const Reg fresh = free.front();
                        free.pop_front();
                        Instr s0 = mk(Op::Shuffle, fresh, lo, hi);
                        s0.indices = perm[i * x.c + 2 * p];
                        Instr s1 = mk(Op::Shuffle, hi, lo, hi);
                        s1.indices = perm[i * x.c + 2 * p + 1];
                        s.push_back(ins(s0));
                        s.push_back(ins(s1));
                        at(i, 2 * p) = fresh;
                        free.push_back(lo);
                    }
                break;
            }
            case EpilogueStep::BiasAdd:
                for (int j = 0; j < x.c; ++j) {
                    const Reg b = free.front();
                    s.push_back(ins(mem_op(Op::VLoad, b, x.mem_bias(j * x.lanes, x.lanes))));
                    for (int i = 0; i < x.mb; ++i) s.push_back(ins(mk(Op::VAdd, at(i, j), at(i, j), b)));
                }
                break;
            case EpilogueStep::Relu:
                for (Reg r : phys) s.push_back(ins(mk(Op::VMax0, r, r)));
                break;
            case EpilogueStep::Downconvert:
                for (Reg r : phys) s.push_back(ins(mk(Op::CvtF32ToBF16, r, r)));
                break;
            case EpilogueStep::Store:
                for (int i = 0; i < x.mb; ++i)
                    for (int j = 0; j < x.c; ++j)
                        s.push_back(ins(mem_op(Op::VStore, at(i, j), x.mem_c(i, j * x.lanes, x.lanes))));
                break;
        }
    }
    return s;
}

// ---------------------------------------------------------------------------

namespace detail {

inline Ctx make_ctx(const KernelSpec &spec, const IsaProfile &profile, const TilingPlan &plan) {
    Ctx x;
    x.spec = spec;
    x.plan = plan;
    x.profile = profile;
    x.lanes = plan.lanes;
    x.c = int(plan.n_chunks);
    x.mb = int(plan.mb);
    x.in_t = elem_of(spec.dtype);
    x.c_t = elem_of(spec.c_dtype);
    const auto &b = plan.budget;
    x.acc_base = 0;
    if (plan.role == OperandRole::BroadcastA) {
        x.a_base = b.acc_regs;
        x.b_base = b.acc_regs + b.a_regs;
    } else {
        x.b_base = b.acc_regs;
        x.a_base = b.acc_regs + b.b_regs;
    }
    if (b.scratch_regs) x.scratch = b.total - 1;
    return x;
}

inline void declare_buffers(VirProgram &p, Ctx &x) {
    const auto &s = x.spec;
    auto add = [&](std::string name, BufferRole role, ElemType t, std::vector<int64_t> shape,
                   Layout layout) {
        const int id = int(p.buffers.size());
        p.buffers.push_back({id, std::move(name), role, t, std::move(shape), layout});
        return id;
    };
    x.buf_a = add("A", BufferRole::A, x.in_t, {s.batch, s.m, s.k}, Layout::Flat);
    x.buf_b = s.layout == Layout::Vnni
                  ? add("B", BufferRole::B, x.in_t, {s.batch, s.k / 2, s.n, 2}, Layout::Vnni)
                  : add("B", BufferRole::B, x.in_t, {s.batch, s.k, s.n}, Layout::Flat);
    x.buf_c = add("C", BufferRole::C, x.c_t, {s.m, s.n}, Layout::Flat);
    if (s.epilogue == Epilogue::BiasRelu)
        x.buf_bias = add("bias", BufferRole::Bias, ElemType::F32, {s.n}, Layout::Flat);
    if (x.plan.path == LoweringPath::BF16_AMX) {
        if (s.layout == Layout::Flat)
            x.buf_pack = add("packB", BufferRole::Scratch, ElemType::BF16, {s.k / 2, x.plan.nb, 2},
                             Layout::Vnni);
        const bool stage_in = s.beta == 1 && s.c_dtype == DType::BF16;
        const bool stage_out = s.epilogue != Epilogue::None || s.c_dtype == DType::BF16;
        if (stage_in || stage_out)
            x.buf_stage = add("cstage", BufferRole::Scratch, ElemType::F32, {x.plan.mb, x.plan.nb},
                              Layout::Flat);
    }
}

inline Seq k_body(const Ctx &x) {
    const bool flat = x.spec.layout == Layout::Flat;
    switch (x.plan.path) {
        case LoweringPath::FP32: return body_fp32(x);
        case LoweringPath::BF16_DOT: return flat ? body_bf16_flat_dot(x) : body_bf16_vnni_dot(x);
        case LoweringPath::BF16_AVX2PACK:
            return flat ? body_bf16_flat_avx2pack(x) : body_bf16_vnni_avx2pack(x);
        case LoweringPath::BF16_FALLBACK:
            return flat ? body_bf16_flat_fallback(x) : body_bf16_vnni_fallback(x);
        case LoweringPath::BF16_AMX:
            return flat ? body_bf16_flat_amx(x, "i_k", std::nullopt) : body_bf16_vnni_amx(x);
    }
    return {};
}

inline void drop_last_accumulate(Seq &body) {
    for (auto it = body.rbegin(); it != body.rend(); ++it) {
        if (it->is_loop()) continue;
        const Op op = it->instr().op;
        if (op == Op::Fma || op == Op::DotBF16 || op == Op::TMulfBF16) {
            body.erase(std::next(it).base());
            return;
        }
    }
}

} // namespace detail

/// Full nanokernel for (spec, profile, plan). The result passes
/// vir::validate; a failure there is reported as a Validation error.
inline VirProgram generate(const KernelSpec &spec, const IsaProfile &profile, const TilingPlan &plan,
                           const GenerateOptions &opt = {}) {
    using namespace detail;
    spec.check();
    if (plan.path != isa::select_path(profile, spec.dtype))
        throw Error(ErrorKind::Config, std::string("plan path ") + to_string(plan.path) +
                                           " does not match profile " + profile.name);
    if (spec.m % plan.mb != 0 || spec.n % plan.nb != 0 || spec.k % plan.kb != 0)
        throw Error(ErrorKind::NonDivisible, "plan tile does not divide the kernel shape");

    VirProgram p;
    p.profile = profile;
    p.spec = spec;
    p.plan = plan;
    Ctx x = make_ctx(spec, profile, plan);
    declare_buffers(p, x);
    const Schedule sch = make_schedule(spec, plan);

    Seq tile = prologue(x);
    Seq kb = k_body(x);
    if (opt.drop_accumulate) drop_last_accumulate(kb);

    if (plan.path == LoweringPath::BF16_AMX && spec.layout == Layout::Flat) {
        // pack B[0]; per batch: products on the packed panel, then pack B[i_br+1];
        // the last batch drains without packing.
        tile.push_back(amx_pack_loop(x, "i_p0", int64_t(0)));
        Seq br;
        br.push_back(loop("i_k", 0, spec.k, plan.kb, std::move(kb)));
        br.push_back(amx_pack_loop(x, "i_p", std::nullopt));
        tile.push_back(loop("i_br", 0, spec.batch - 1, 1, std::move(br)));
        Seq drain = body_bf16_flat_amx(x, "i_kd", spec.batch - 1);
        if (opt.drop_accumulate) drop_last_accumulate(drain);
        tile.push_back(loop("i_kd", 0, spec.k, plan.kb, std::move(drain)));
    } else {
        Seq br;
        br.push_back(loop("i_k", 0, spec.k, plan.kb, std::move(kb)));
        tile.push_back(loop("i_br", 0, spec.batch, 1, std::move(br)));
    }
    for (auto &n : epilogue(x, sch, opt)) tile.push_back(std::move(n));

    Seq in_n;
    in_n.push_back(loop("i_n", 0, spec.n, plan.nb, std::move(tile)));
    p.body.push_back(loop("i_m", 0, spec.m, plan.mb, std::move(in_n)));

    if (!opt.drop_accumulate && !opt.drop_fixup) vir::validate_or_throw(p);
    return p;
}

} // namespace codegen
} // namespace nanoforge
