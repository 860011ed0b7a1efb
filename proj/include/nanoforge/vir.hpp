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

// Virtual vector IR: a register-allocated loop nest of typed vector and tile
// instructions with affine addressing. Register ids are physical; the IR
// never spills.

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "nanoforge/error.hpp"
#include "nanoforge/isa.hpp"
#include "nanoforge/tiling.hpp"

namespace nanoforge {

enum class ElemType { F32, BF16, I32 };

inline int elem_bytes(ElemType t) { return t == ElemType::BF16 ? 2 : 4; }

inline const char *to_string(ElemType t) {
    switch (t) {
        case ElemType::F32: return "f32";
        case ElemType::BF16: return "bf16";
        case ElemType::I32: return "i32";
    }
    return "?";
}

inline ElemType elem_of(DType t) { return t == DType::F32 ? ElemType::F32 : ElemType::BF16; }

enum class RegClass { Vector, Tile };

struct Reg {
    RegClass cls = RegClass::Vector;
    int id = -1;

    bool valid() const { return id >= 0; }
    friend bool operator==(const Reg &, const Reg &) = default;
    friend auto operator<=>(const Reg &, const Reg &) = default;
};

inline Reg vreg(int id) { return {RegClass::Vector, id}; }
inline Reg treg(int id) { return {RegClass::Tile, id}; }

/// base + sum(coeff * iv), in elements.
struct Affine {
    struct Term {
        std::string iv;
        int64_t coeff = 0;
    };
    int64_t base = 0;
    std::vector<Term> terms;

    Affine() = default;
    Affine(int64_t b, std::initializer_list<Term> t = {}) : base(b) {
        for (const auto &x : t)
            if (x.coeff != 0) terms.push_back(x);
    }

    Affine operator+(int64_t off) const {
        Affine r = *this;
        r.base += off;
        return r;
    }
};

struct MemRef {
    int buffer = -1;
    Affine addr;
    ElemType elem = ElemType::F32;
    int64_t count = 0;      // elements per access (per row for tile ops)
    int64_t row_stride = 0; // tile ops only
};

enum class Op {
    VLoad,
    VStore,
    VBcastF32,
    VBcastPairBF16,
    Fma,
    DotBF16,
    BcastBF16ToF32,
    EvenBF16ToF32,
    OddBF16ToF32,
    CvtF32ToBF16,
    CvtBF16ToF32,
    InterleaveLo128,
    InterleaveHi128,
    Shuffle,
    Bitcast,
    Shli,
    Andi,
    VXorZero,
    VMax0,
    VAdd,
    TLoad,
    TStore,
    TZero,
    TMulfBF16,
};

inline bool is_tile_op(Op op) {
    return op == Op::TLoad || op == Op::TStore || op == Op::TZero || op == Op::TMulfBF16;
}

/// Operand use by opcode:
///   VLoad/VBcast*/Even/Odd : dst <- mem
///   VStore                 : a -> mem
///   Fma/DotBF16            : dst <- a*b + dst
///   Cvt*/Bitcast/Shli/Andi/VMax0 : dst <- f(a)
///   Interleave*            : dst <- f(a, b) or f(a, mem)
///   Shuffle                : dst <- concat(a, b)[indices]
///   VAdd                   : dst <- a + b
///   TLoad/TStore           : dst <- mem / a -> mem, `rows` rows of mem.count
///   TMulfBF16              : dst += a x b
struct Instr {
    Op op = Op::VXorZero;
    Reg dst, a, b;
    std::optional<MemRef> mem;
    ElemType to_type = ElemType::F32;
    std::uint32_t imm = 0;
    std::vector<int> indices;
    int64_t rows = 0;
};

struct Node;

struct Loop {
    std::string iv;
    int64_t lower = 0, upper = 0, step = 1;
    std::vector<Node> body;

    int64_t trip_count() const {
        if (upper <= lower || step <= 0) return 0;
        return (upper - lower + step - 1) / step;
    }
};

struct Node {
    std::variant<Instr, Loop> v;

    bool is_loop() const { return std::holds_alternative<Loop>(v); }
    const Instr &instr() const { return std::get<Instr>(v); }
    const Loop &loop() const { return std::get<Loop>(v); }
    Instr &instr() { return std::get<Instr>(v); }
    Loop &loop() { return std::get<Loop>(v); }
};

enum class BufferRole { A, B, C, Bias, Scratch };

inline const char *to_string(BufferRole r) {
    switch (r) {
        case BufferRole::A: return "A";
        case BufferRole::B: return "B";
        case BufferRole::C: return "C";
        case BufferRole::Bias: return "BIAS";
        case BufferRole::Scratch: return "SCRATCH";
    }
    return "?";
}

struct BufferDecl {
    int id = 0;
    std::string name;
    BufferRole role = BufferRole::A;
    ElemType dtype = ElemType::F32;
    std::vector<int64_t> shape;
    Layout layout = Layout::Flat;

    int64_t size() const {
        int64_t s = 1;
        for (auto d : shape) s *= d;
        return s;
    }
};

struct VirProgram {
    IsaProfile profile;
    std::vector<BufferDecl> buffers;
    std::vector<Node> body;
    // Provenance, set by codegen; hand-built programs may leave these empty.
    std::optional<KernelSpec> spec;
    std::optional<TilingPlan> plan;

    const BufferDecl *find_buffer(BufferRole role) const {
        for (const auto &b : buffers)
            if (b.role == role) return &b;
        return nullptr;
    }
};

namespace vir {

inline std::vector<Reg> reads(const Instr &in) {
    std::vector<Reg> r;
    auto add = [&](Reg x) {
        if (x.valid()) r.push_back(x);
    };
    switch (in.op) {
        case Op::VLoad:
        case Op::VBcastF32:
        case Op::VBcastPairBF16:
        case Op::BcastBF16ToF32:
        case Op::EvenBF16ToF32:
        case Op::OddBF16ToF32:
        case Op::VXorZero:
        case Op::TLoad:
        case Op::TZero: break;
        case Op::VStore:
        case Op::TStore:
        case Op::CvtF32ToBF16:
        case Op::CvtBF16ToF32:
        case Op::Bitcast:
        case Op::Shli:
        case Op::Andi:
        case Op::VMax0: add(in.a); break;
        case Op::InterleaveLo128:
        case Op::InterleaveHi128:
        case Op::Shuffle:
        case Op::VAdd: add(in.a); add(in.b); break;
        case Op::Fma:
        case Op::DotBF16:
        case Op::TMulfBF16: add(in.a); add(in.b); add(in.dst); break;
    }
    return r;
}

inline std::optional<Reg> writes(const Instr &in) {
    if (in.op == Op::VStore || in.op == Op::TStore) return std::nullopt;
    return in.dst;
}

/// Pre-order walk; `fn(instr, static_index, enclosing_loops)`.
template <typename Fn>
void walk(const std::vector<Node> &body, Fn &&fn) {
    std::vector<const Loop *> stack;
    int index = 0;
    std::function<void(const std::vector<Node> &)> rec = [&](const std::vector<Node> &nodes) {
        for (const auto &n : nodes) {
            if (n.is_loop()) {
                stack.push_back(&n.loop());
                rec(n.loop().body);
                stack.pop_back();
            } else {
                fn(n.instr(), index++, stack);
            }
        }
    };
    rec(body);
}

inline const Loop *find_loop(const std::vector<Node> &body, const std::string &iv) {
    for (const auto &n : body) {
        if (!n.is_loop()) continue;
        if (n.loop().iv == iv) return &n.loop();
        if (auto *l = find_loop(n.loop().body, iv)) return l;
    }
    return nullptr;
}

inline constexpr const char *kWholeProgram = "";

/// Static count of instructions matching `pred` inside the first loop named
/// `scope` (pre-order), or the whole program for an empty scope.
inline int64_t count_instructions(const VirProgram &program,
                                  const std::function<bool(const Instr &)> &pred,
                                  const std::string &scope = kWholeProgram) {
    const std::vector<Node> *body = &program.body;
    if (!scope.empty()) {
        const Loop *l = find_loop(program.body, scope);
        if (!l) throw Error(ErrorKind::Config, "unknown loop scope '" + scope + "'");
        body = &l->body;
    }
    int64_t n = 0;
    walk(*body, [&](const Instr &in, int, const auto &) {
        if (pred(in)) ++n;
    });
    return n;
}

inline int64_t count_instructions(const VirProgram &program, std::set<Op> ops,
                                  const std::string &scope = kWholeProgram) {
    return count_instructions(
        program, [&](const Instr &in) { return ops.count(in.op) != 0; }, scope);
}

inline int64_t count_instructions(const VirProgram &program, Op op,
                                  const std::string &scope = kWholeProgram) {
    return count_instructions(program, std::set<Op> {op}, scope);
}

/// Distinct register ids of one class referenced anywhere in the program.
inline std::set<int> registers_used(const VirProgram &program, RegClass cls) {
    std::set<int> ids;
    walk(program.body, [&](const Instr &in, int, const auto &) {
        for (Reg r : reads(in))
            if (r.cls == cls) ids.insert(r.id);
        if (auto w = writes(in); w && w->cls == cls && w->valid()) ids.insert(w->id);
    });
    return ids;
}

} // namespace vir
} // namespace nanoforge
