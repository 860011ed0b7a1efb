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

// Static checks on VirPrograms. Every violation is reported; validation never
// stops at the first problem.

#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nanoforge/vir.hpp"

namespace nanoforge {

struct Diagnostic {
    int instr_index = -1; // pre-order static index, -1 for program-level checks
    char check = '?';     // 'a'..'e'
    std::string reason;
};

namespace vir {

namespace detail {

struct IvRange {
    int64_t lo, hi; // inclusive values the iv takes
};

class Validator {
public:
    explicit Validator(const VirProgram &p) : prog_(p) {
        lanes_ = p.profile.vector_width_bits / 32;
        vbytes_ = p.profile.vector_bytes();
    }

    std::vector<Diagnostic> run() {
        walk(prog_.body, [&](const Instr &in, int idx, const std::vector<const Loop *> &loops) {
            check_instr(in, idx, loops);
        });
        const auto v = registers_used(prog_, RegClass::Vector);
        const auto t = registers_used(prog_, RegClass::Tile);
        if (int(v.size()) > prog_.profile.vector_register_count)
            add(-1, 'e', std::to_string(v.size()) + " distinct vector registers exceed " +
                             std::to_string(prog_.profile.vector_register_count));
        if (int(t.size()) > prog_.profile.tile_register_count)
            add(-1, 'e', std::to_string(t.size()) + " distinct tile registers exceed " +
                             std::to_string(prog_.profile.tile_register_count));
        return std::move(diags_);
    }

private:
    void add(int idx, char check, std::string reason) {
        diags_.push_back({idx, check, std::move(reason)});
    }

    static std::string name(Reg r) {
        return (r.cls == RegClass::Vector ? "v" : "t") + std::to_string(r.id);
    }

    bool check_reg(int idx, Reg r, RegClass want, const char *what) {
        if (!r.valid()) {
            add(idx, 'b', std::string("missing ") + what + " operand");
            return false;
        }
        if (r.cls != want) {
            add(idx, 'b', std::string(what) + " operand " + name(r) + " has the wrong class");
            return false;
        }
        const int limit = want == RegClass::Vector ? prog_.profile.vector_register_count
                                                   : prog_.profile.tile_register_count;
        if (r.id >= limit) {
            add(idx, 'a', name(r) + " out of range (profile has " + std::to_string(limit) + ")");
            return false;
        }
        return true;
    }

    // Read of a register: initialization (d) and type (b).
    void use(int idx, Reg r, RegClass cls, std::optional<ElemType> want, const char *what) {
        if (!check_reg(idx, r, cls, what)) return;
        auto &types = cls == RegClass::Vector ? vtypes_ : ttypes_;
        auto it = types.find(r.id);
        if (it == types.end()) {
            add(idx, 'd', name(r) + " read before it is written");
            return;
        }
        if (want && it->second != *want)
            add(idx, 'b', std::string(what) + " " + name(r) + " holds " +
                              to_string(it->second) + ", expected " + to_string(*want));
    }

    std::optional<ElemType> type_of(Reg r) const {
        const auto &types = r.cls == RegClass::Vector ? vtypes_ : ttypes_;
        auto it = types.find(r.id);
        if (it == types.end()) return std::nullopt;
        return it->second;
    }

    void def(int idx, Reg r, RegClass cls, ElemType t) {
        if (!check_reg(idx, r, cls, "destination")) return;
        (cls == RegClass::Vector ? vtypes_ : ttypes_)[r.id] = t;
    }

    void check_mem(int idx, const Instr &in, const std::vector<const Loop *> &loops,
                   std::optional<ElemType> want) {
        if (!in.mem) {
            add(idx, 'b', "missing memory operand");
            return;
        }
        const MemRef &m = *in.mem;
        if (m.buffer < 0 || m.buffer >= int(prog_.buffers.size())) {
            add(idx, 'c', "unknown buffer id " + std::to_string(m.buffer));
            return;
        }
        const BufferDecl &buf = prog_.buffers[m.buffer];
        if (want && m.elem != *want)
            add(idx, 'b', std::string("memory operand is ") + to_string(m.elem) + ", expected " +
                              to_string(*want));
        if (m.elem != buf.dtype)
            add(idx, 'b', "buffer " + buf.name + " holds " + to_string(buf.dtype) +
                              ", access is " + to_string(m.elem));
        if (m.count <= 0) add(idx, 'b', "empty memory access");

        int64_t extent = m.count;
        if (is_tile_op(in.op)) {
            if (in.rows <= 0 || in.rows > prog_.profile.tile_rows_max)
                add(idx, 'b', "tile access of " + std::to_string(in.rows) + " rows");
            if (m.count * elem_bytes(m.elem) > prog_.profile.tile_row_bytes_max)
                add(idx, 'b', "tile row of " + std::to_string(m.count * elem_bytes(m.elem)) +
                                  " bytes exceeds the tile width");
            extent = (in.rows - 1) * m.row_stride + m.count;
        } else if (m.count * elem_bytes(m.elem) > vbytes_) {
            add(idx, 'b', "access of " + std::to_string(m.count * elem_bytes(m.elem)) +
                              " bytes exceeds the vector width");
        }

        // Range of the affine address over every iteration of the enclosing loops.
        int64_t lo = m.addr.base, hi = m.addr.base;
        for (const auto &t : m.addr.terms) {
            const Loop *l = nullptr;
            for (auto it = loops.rbegin(); it != loops.rend(); ++it)
                if ((*it)->iv == t.iv) {
                    l = *it;
                    break;
                }
            if (!l) {
                add(idx, 'c', "induction variable " + t.iv + " is not bound by an enclosing loop");
                return;
            }
            if (l->trip_count() == 0) return; // never executes
            const int64_t first = l->lower;
            const int64_t last = l->lower + l->step * (l->trip_count() - 1);
            lo += std::min(t.coeff * first, t.coeff * last);
            hi += std::max(t.coeff * first, t.coeff * last);
        }
        for (const Loop *l : loops)
            if (l->trip_count() == 0) return;
        if (lo < 0 || hi + extent > buf.size())
            add(idx, 'c', "access [" + std::to_string(lo) + ", " + std::to_string(hi + extent) +
                              ") leaves buffer " + buf.name + " of " + std::to_string(buf.size()) +
                              " elements");
    }

    void check_instr(const Instr &in, int idx, const std::vector<const Loop *> &loops) {
        constexpr auto V = RegClass::Vector;
        constexpr auto T = RegClass::Tile;
        const auto F = ElemType::F32, H = ElemType::BF16, I = ElemType::I32;
        switch (in.op) {
            case Op::VLoad:
                check_mem(idx, in, loops, std::nullopt);
                if (in.mem) def(idx, in.dst, V, in.mem->elem);
                break;
            case Op::VStore:
                check_mem(idx, in, loops, std::nullopt);
                use(idx, in.a, V, in.mem ? std::optional(in.mem->elem) : std::nullopt, "source");
                break;
            case Op::VBcastF32:
                check_mem(idx, in, loops, F);
                if (in.mem && in.mem->count != 1) add(idx, 'b', "broadcast reads one element");
                def(idx, in.dst, V, F);
                break;
            case Op::VBcastPairBF16:
                check_mem(idx, in, loops, H);
                if (in.mem && in.mem->count != 2) add(idx, 'b', "pair broadcast reads two elements");
                def(idx, in.dst, V, H);
                break;
            case Op::BcastBF16ToF32:
                check_mem(idx, in, loops, H);
                if (in.mem && in.mem->count != 1) add(idx, 'b', "broadcast reads one element");
                def(idx, in.dst, V, F);
                break;
            case Op::EvenBF16ToF32:
            case Op::OddBF16ToF32:
                check_mem(idx, in, loops, H);
                if (in.mem && in.mem->count != 2 * lanes_)
                    add(idx, 'b', "even/odd conversion reads 2*lanes elements");
                def(idx, in.dst, V, F);
                break;
            case Op::Fma:
                use(idx, in.a, V, F, "a");
                use(idx, in.b, V, F, "b");
                use(idx, in.dst, V, F, "accumulator");
                def(idx, in.dst, V, F);
                break;
            case Op::DotBF16:
                use(idx, in.a, V, H, "a");
                use(idx, in.b, V, H, "b");
                use(idx, in.dst, V, F, "accumulator");
                def(idx, in.dst, V, F);
                break;
            case Op::CvtF32ToBF16:
                use(idx, in.a, V, F, "source");
                def(idx, in.dst, V, H);
                break;
            case Op::CvtBF16ToF32:
                use(idx, in.a, V, H, "source");
                def(idx, in.dst, V, F);
                break;
            case Op::InterleaveLo128:
            case Op::InterleaveHi128:
                use(idx, in.a, V, H, "a");
                if (in.mem)
                    check_mem(idx, in, loops, H);
                else
                    use(idx, in.b, V, H, "b");
                def(idx, in.dst, V, H);
                break;
            case Op::Shuffle: {
                use(idx, in.a, V, std::nullopt, "a");
                use(idx, in.b, V, type_of(in.a), "b");
                if (int(in.indices.size()) != lanes_)
                    add(idx, 'b', "shuffle has " + std::to_string(in.indices.size()) +
                                      " indices, expected " + std::to_string(lanes_));
                for (int x : in.indices)
                    if (x < 0 || x >= 2 * lanes_) {
                        add(idx, 'b', "shuffle index " + std::to_string(x) + " out of range");
                        break;
                    }
                def(idx, in.dst, V, type_of(in.a).value_or(F));
                break;
            }
            case Op::Bitcast:
                use(idx, in.a, V, std::nullopt, "source");
                def(idx, in.dst, V, in.to_type);
                break;
            case Op::Shli:
            case Op::Andi:
                use(idx, in.a, V, I, "source");
                def(idx, in.dst, V, I);
                break;
            case Op::VXorZero: def(idx, in.dst, V, F); break;
            case Op::VMax0:
                use(idx, in.a, V, F, "source");
                def(idx, in.dst, V, F);
                break;
            case Op::VAdd:
                use(idx, in.a, V, F, "a");
                use(idx, in.b, V, F, "b");
                def(idx, in.dst, V, F);
                break;
            case Op::TLoad:
                check_mem(idx, in, loops, std::nullopt);
                if (in.mem) def(idx, in.dst, T, in.mem->elem);
                break;
            case Op::TStore:
                check_mem(idx, in, loops, F);
                use(idx, in.a, T, F, "source");
                break;
            case Op::TZero: def(idx, in.dst, T, F); break;
            case Op::TMulfBF16:
                use(idx, in.a, T, H, "a");
                use(idx, in.b, T, H, "b");
                use(idx, in.dst, T, F, "accumulator");
                def(idx, in.dst, T, F);
                break;
        }
    }

    const VirProgram &prog_;
    int lanes_ = 0;
    int vbytes_ = 0;
    std::map<int, ElemType> vtypes_, ttypes_;
    std::vector<Diagnostic> diags_;
};

} // namespace detail

/// (a) register ids within profile bounds, (b) operand classes and types,
/// (c) every memory access in bounds for all iv values, (d) no register read
/// before its first write in program order, (e) distinct register counts fit
/// the profile.
inline std::vector<Diagnostic> validate(const VirProgram &program) {
    return detail::Validator(program).run();
}

inline std::string format_diagnostics(const std::vector<Diagnostic> &diags) {
    std::ostringstream os;
    for (const auto &d : diags)
        os << "  [" << d.check << "] instr " << d.instr_index << ": " << d.reason << "\n";
    return os.str();
}

inline void validate_or_throw(const VirProgram &program) {
    auto diags = validate(program);
    if (!diags.empty())
        throw Error(ErrorKind::Validation,
                    std::to_string(diags.size()) + " diagnostic(s)\n" + format_diagnostics(diags));
}

} // namespace vir
} // namespace nanoforge
