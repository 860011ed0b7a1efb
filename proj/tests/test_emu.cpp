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
#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <regex>
#include <sstream>

#include "nanoforge/codegen.hpp"
#include "nanoforge/emu.hpp"
#include "nanoforge/verify.hpp"

using namespace nanoforge;

namespace {

Instr instr(Op op, Reg dst = {}, Reg a = {}, Reg b = {}) {
    Instr i;
    i.op = op;
    i.dst = dst;
    i.a = a;
    i.b = b;
    return i;
}

Instr memop(Op op, Reg r, int buf, Affine addr, ElemType t, int64_t count) {
    Instr i = instr(op);
    (op == Op::VStore ? i.a : i.dst) = r;
    i.mem = MemRef {buf, std::move(addr), t, count};
    return i;
}

Instr with_imm(Instr i, std::uint32_t imm) {
    i.imm = imm;
    return i;
}

Instr cast(Reg d, Reg s, ElemType t) {
    Instr i = instr(Op::Bitcast, d, s);
    i.to_type = t;
    return i;
}

VirProgram f32_program(const std::string &profile = "avx512") {
    VirProgram p;
    p.profile = isa::find_profile(profile);
    p.buffers.push_back({0, "X", BufferRole::A, ElemType::F32, {64}, Layout::Flat});
    p.buffers.push_back({1, "Y", BufferRole::C, ElemType::F32, {64}, Layout::Flat});
    return p;
}

ErrorKind kind_of(const std::function<void()> &f) {
    try {
        f();
    } catch (const Error &e) {
        return e.kind();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorKind::Config;
}

std::uint32_t pair(std::uint16_t lo, std::uint16_t hi) { return std::uint32_t(hi) << 16 | lo; }

std::uint16_t rne_reference(float x) {
    const double v = x;
    const std::uint32_t bits = std::bit_cast<std::uint32_t>(x);
    const std::uint16_t down = std::uint16_t(bits >> 16);
    const std::uint16_t up = std::uint16_t(down + 1);
    if ((bits & 0xFFFF) == 0) return down;
    if ((up & 0x7F80) == 0x7F80) return (bits & 0xFFFF) > 0x8000 || ((bits & 0xFFFF) == 0x8000 && (down & 1)) ? up : down;
    const double dd = std::fabs(v - double(bf16::to_f32(down)));
    const double du = std::fabs(double(bf16::to_f32(up)) - v);
    if (dd < du) return down;
    if (du < dd) return up;
    return (down & 1) ? up : down;
}

} // namespace

TEST(Bf16, KnownValues) {
    EXPECT_EQ(bf16::to_f32(0x3F80), 1.0f);
    EXPECT_EQ(bf16::to_f32(0xC000), -2.0f);
    EXPECT_EQ(bf16::from_f32(1.0f), 0x3F80);
    EXPECT_EQ(bf16::from_f32(-2.0f), 0xC000);
    EXPECT_EQ(bf16::from_f32(1.0f + 1.0f / 256), 0x3F80);
    EXPECT_EQ(bf16::from_f32(1.0f + 3.0f / 256), 0x3F82);
}

TEST(Bf16, ExhaustiveRoundTrip) {
    for (std::uint32_t b = 0; b <= 0xFFFF; ++b) {
        const auto h = std::uint16_t(b);
        if (bf16::is_nan(h)) {
            EXPECT_TRUE(std::isnan(bf16::to_f32(h)));
            EXPECT_TRUE(bf16::is_nan(bf16::from_f32(bf16::to_f32(h))));
            continue;
        }
        ASSERT_EQ(bf16::from_f32(bf16::to_f32(h)), h) << std::hex << b;
    }
}

TEST(Bf16, RoundNearestEvenMatchesReference) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 1000000; ++i) {
        const auto bits = std::uint32_t(rng());
        const float x = std::bit_cast<float>(bits);
        if (std::isnan(x) || std::isinf(x)) continue;
        const auto want = rne_reference(x);
        if ((want & 0x7F80) == 0x7F80) continue;
        ASSERT_EQ(bf16::from_f32(x), want) << std::hex << bits;
    }
    for (std::uint32_t hi = 0; hi < 0x7F7F; hi += 37) {
        const float tie = std::bit_cast<float>(hi << 16 | 0x8000);
        ASSERT_EQ(bf16::from_f32(tie), rne_reference(tie));
    }
}

TEST(Dot, SingleLane) {
    const auto a = pair(bf16::from_f32(1), bf16::from_f32(2));
    const auto b = pair(bf16::from_f32(3), bf16::from_f32(4));
    EXPECT_EQ(std::bit_cast<float>(emu::dot_lane(0, a, b)), 11.0f);
    EXPECT_EQ(std::bit_cast<float>(emu::dot_lane(std::bit_cast<std::uint32_t>(1.5f), a, b)), 12.5f);
}

TEST(Dot, RoundsEachStepToF32) {
    std::mt19937 rng(5);
    std::uniform_real_distribution<float> d(-4, 4);
    for (int i = 0; i < 10000; ++i) {
        const float acc = d(rng);
        const auto a0 = bf16::from_f32(d(rng)), a1 = bf16::from_f32(d(rng));
        const auto b0 = bf16::from_f32(d(rng)), b1 = bf16::from_f32(d(rng));
        volatile float p0 = bf16::to_f32(a0) * bf16::to_f32(b0);
        volatile float s0 = acc + p0;
        volatile float p1 = bf16::to_f32(a1) * bf16::to_f32(b1);
        volatile float s1 = s0 + p1;
        ASSERT_EQ(emu::dot_lane(std::bit_cast<std::uint32_t>(acc), pair(a0, a1), pair(b0, b1)),
                  std::bit_cast<std::uint32_t>(float(s1)));
    }
}

TEST(Dot, VectorLaneCountMismatch) {
    EXPECT_EQ(kind_of([] { emu::exec_dot_bf16({0, 0}, {0, 0}, {0}); }), ErrorKind::Shape);
}

TEST(Tmulf, AllOnes) {
    emu::TileCells zero {}, ones {};
    ones.fill(pair(0x3F80, 0x3F80));
    const auto r = emu::exec_tmulf_bf16(zero, ones, ones);
    for (auto c : r) ASSERT_EQ(std::bit_cast<float>(c), 32.0f);
}

TEST(Tmulf, EqualsOrderedDotSteps) {
    std::mt19937 rng(9);
    std::uniform_real_distribution<float> d(-1, 1);
    emu::TileCells acc {}, a {}, b {};
    for (auto &c : acc) c = std::bit_cast<std::uint32_t>(d(rng));
    for (auto &c : a) c = pair(bf16::from_f32(d(rng)), bf16::from_f32(d(rng)));
    for (auto &c : b) c = pair(bf16::from_f32(d(rng)), bf16::from_f32(d(rng)));
    const auto r = emu::exec_tmulf_bf16(acc, a, b);
    for (int m = 0; m < 16; ++m)
        for (int n = 0; n < 16; ++n) {
            volatile float s = std::bit_cast<float>(acc[m * 16 + n]);
            for (int p = 0; p < 16; ++p)
                for (int h = 0; h < 2; ++h) {
                    const float x = bf16::to_f32(std::uint16_t(a[m * 16 + p] >> (16 * h)));
                    const float y = bf16::to_f32(std::uint16_t(b[p * 16 + n] >> (16 * h)));
                    volatile float prod = x * y;
                    s = s + prod;
                }
            ASSERT_EQ(r[m * 16 + n], std::bit_cast<std::uint32_t>(float(s)));
        }
}

TEST(Max0, Semantics) {
    auto u = [](float x) { return std::bit_cast<std::uint32_t>(x); };
    EXPECT_EQ(emu::max0_lane(u(2.5f)), u(2.5f));
    EXPECT_EQ(emu::max0_lane(u(-2.5f)), 0u);
    EXPECT_EQ(emu::max0_lane(u(-0.0f)), 0u);
    EXPECT_TRUE(std::isnan(std::bit_cast<float>(emu::max0_lane(u(std::nanf(""))))));
}

TEST(Emulator, UninitializedRead) {
    auto p = f32_program();
    p.body.push_back({instr(Op::VXorZero, vreg(0))});
    p.body.push_back({instr(Op::Fma, vreg(0), vreg(1), vreg(0))});
    auto b = make_bindings(p);
    EXPECT_EQ(kind_of([&] { emu::run(p, b); }), ErrorKind::Emulation);
}

TEST(Emulator, OutOfBounds) {
    auto p = f32_program();
    Loop l {"i", 0, 64, 8, {}};
    l.body.push_back({memop(Op::VLoad, vreg(0), 0, Affine(0, {{"i", 1}}), ElemType::F32, 16)});
    p.body.push_back({l});
    auto b = make_bindings(p);
    EXPECT_EQ(kind_of([&] { emu::run(p, b); }), ErrorKind::Emulation);
}

TEST(Emulator, BindingMismatch) {
    auto p = f32_program();
    auto b = make_bindings(p);
    b.pop_back();
    EXPECT_EQ(kind_of([&] { emu::run(p, b); }), ErrorKind::Emulation);
}

TEST(Emulator, LoopCopy) {
    auto p = f32_program();
    Loop l {"i", 0, 64, 16, {}};
    l.body.push_back({memop(Op::VLoad, vreg(0), 0, Affine(0, {{"i", 1}}), ElemType::F32, 16)});
    l.body.push_back({memop(Op::VStore, vreg(0), 1, Affine(0, {{"i", 1}}), ElemType::F32, 16)});
    p.body.push_back({l});
    auto b = make_bindings(p);
    std::vector<float> x(64);
    for (int i = 0; i < 64; ++i) x[i] = float(i) - 7.25f;
    b[0].assign(x);
    emu::run(p, b);
    EXPECT_EQ(b[1].values(), x);
}

TEST(Emulator, ShiftAndMaskSplitBf16Pairs) {
    VirProgram p;
    p.profile = isa::find_profile("generic128");
    p.buffers.push_back({0, "H", BufferRole::B, ElemType::BF16, {8}, Layout::Flat});
    p.buffers.push_back({1, "O", BufferRole::C, ElemType::F32, {8}, Layout::Flat});
    p.body.push_back({memop(Op::VLoad, vreg(0), 0, Affine(0), ElemType::BF16, 8)});
    p.body.push_back({cast(vreg(0), vreg(0), ElemType::I32)});
    p.body.push_back({with_imm(instr(Op::Shli, vreg(1), vreg(0)), 16)});
    p.body.push_back({cast(vreg(1), vreg(1), ElemType::F32)});
    p.body.push_back({with_imm(instr(Op::Andi, vreg(2), vreg(0)), 0xFFFF0000u)});
    p.body.push_back({cast(vreg(2), vreg(2), ElemType::F32)});
    p.body.push_back({memop(Op::VStore, vreg(1), 1, Affine(0), ElemType::F32, 4)});
    p.body.push_back({memop(Op::VStore, vreg(2), 1, Affine(4), ElemType::F32, 4)});
    std::mt19937 rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        auto b = make_bindings(p);
        for (auto &h : b[0].data16) h = std::uint16_t(rng());
        emu::run(p, b);
        for (int x = 0; x < 4; ++x) {
            ASSERT_EQ(b[1].data32[x], std::uint32_t(b[0].data16[2 * x]) << 16);
            ASSERT_EQ(b[1].data32[4 + x], std::uint32_t(b[0].data16[2 * x + 1]) << 16);
        }
    }
}

TEST(Emulator, IdentityMatmulIsExact) {
    KernelSpec s;
    s.m = 16;
    s.n = 32;
    s.k = 16;
    const auto prof = isa::find_profile("avx512");
    const auto p = codegen::generate(s, prof, tiling::choose_plan(s, prof));
    auto b = make_bindings(p);
    std::vector<float> a(16 * 16, 0.0f), bm(16 * 32);
    for (int i = 0; i < 16; ++i) a[i * 16 + i] = 1.0f;
    std::mt19937 rng(2);
    std::uniform_real_distribution<float> d(-100, 100);
    for (auto &x : bm) x = d(rng);
    b[0].assign(a);
    b[1].assign(bm);
    emu::run(p, b);
    EXPECT_EQ(b[2].values(), bm);
}

TEST(Emulator, TraceFormat) {
    auto p = f32_program("generic128");
    Loop l {"i", 0, 8, 4, {}};
    l.body.push_back({memop(Op::VLoad, vreg(0), 0, Affine(0, {{"i", 1}}), ElemType::F32, 4)});
    p.body.push_back({l});
    auto b = make_bindings(p);
    b[0].set(4, 1.0f);
    std::ostringstream os;
    emu::run(p, b, &os);
    const std::string text = os.str();
    EXPECT_EQ(text,
              "0 i=0 v0 = vload f32x4 X[i] => 00000000 00000000 00000000 00000000\n"
              "0 i=4 v0 = vload f32x4 X[i] => 3f800000 00000000 00000000 00000000\n");
}

TEST(Emulator, TraceFromEnvironment) {
    ::setenv("NANOFORGE_TRACE", "1", 1);
    EXPECT_TRUE(emu::trace_from_env());
    ::setenv("NANOFORGE_TRACE", "0", 1);
    EXPECT_FALSE(emu::trace_from_env());
    ::unsetenv("NANOFORGE_TRACE");
    EXPECT_FALSE(emu::trace_from_env());
}

TEST(Emulator, Fp32LongReductionWithinTolerance) {
    KernelSpec s;
    s.m = 16;
    s.n = 32;
    s.k = 256;
    const auto prof = isa::find_profile("avx512");
    const auto p = codegen::generate(s, prof, tiling::choose_plan(s, prof));
    const auto r = verify::check(p, verify::make_problem(s, 31));
    EXPECT_LT(r.max_rel_err, 1e-4) << oracle::format_report(r);
}
