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

// Bit-accurate sequential interpreter for VirPrograms.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "nanoforge/bf16.hpp"
#include "nanoforge/error.hpp"
#include "nanoforge/packing.hpp"
#include "nanoforge/render.hpp"
#include "nanoforge/vir.hpp"

namespace nanoforge {

/// Flat element storage. F32/I32 elements are raw 32-bit patterns; BF16
/// elements are 16-bit patterns.
struct TensorBuffer {
    int id = 0;
    std::string name;
    ElemType dtype = ElemType::F32;
    std::vector<int64_t> shape;
    Layout layout = Layout::Flat;
    std::vector<std::uint32_t> data32;
    std::vector<std::uint16_t> data16;

    int64_t size() const { return dtype == ElemType::BF16 ? int64_t(data16.size()) : int64_t(data32.size()); }

    float get(int64_t i) const {
        return dtype == ElemType::BF16 ? bf16::to_f32(data16[i]) : std::bit_cast<float>(data32[i]);
    }
    /// Stores x, rounding to BF16 for BF16 buffers.
    void set(int64_t i, float x) {
        if (dtype == ElemType::BF16)
            data16[i] = bf16::from_f32(x);
        else
            data32[i] = std::bit_cast<std::uint32_t>(x);
    }
    std::vector<float> values() const {
        std::vector<float> v(size());
        for (int64_t i = 0; i < size(); ++i) v[i] = get(i);
        return v;
    }
    void assign(const std::vector<float> &v) {
        if (int64_t(v.size()) != size())
            throw Error(ErrorKind::Shape, "buffer " + name + " holds " + std::to_string(size()) +
                                              " elements, got " + std::to_string(v.size()));
        for (size_t i = 0; i < v.size(); ++i) set(int64_t(i), v[i]);
    }
};

using Bindings = std::vector<TensorBuffer>;

/// Zero-filled buffers matching the program's declarations, indexed by id.
inline Bindings make_bindings(const VirProgram &p) {
    Bindings b;
    for (const auto &d : p.buffers) {
        TensorBuffer t {d.id, d.name, d.dtype, d.shape, d.layout, {}, {}};
        if (d.dtype == ElemType::BF16)
            t.data16.assign(d.size(), 0);
        else
            t.data32.assign(d.size(), 0);
        b.push_back(std::move(t));
    }
    return b;
}

namespace emu {

inline constexpr int kMaxLanes = 16;
using Lanes = std::array<std::uint32_t, kMaxLanes>;

inline float f(std::uint32_t x) { return std::bit_cast<float>(x); }
inline std::uint32_t u(float x) { return std::bit_cast<std::uint32_t>(x); }

/// acc + lo(a)*lo(b), then + hi(a)*hi(b); every product and sum rounded to F32.
inline std::uint32_t dot_lane(std::uint32_t acc, std::uint32_t a, std::uint32_t b) {
    const float alo = bf16::to_f32(std::uint16_t(a)), ahi = bf16::to_f32(std::uint16_t(a >> 16));
    const float blo = bf16::to_f32(std::uint16_t(b)), bhi = bf16::to_f32(std::uint16_t(b >> 16));
    float r = f(acc);
    const float p0 = alo * blo;
    r = r + p0;
    const float p1 = ahi * bhi;
    r = r + p1;
    return u(r);
}

inline std::vector<std::uint32_t> exec_dot_bf16(const std::vector<std::uint32_t> &acc,
                                                const std::vector<std::uint32_t> &a,
                                                const std::vector<std::uint32_t> &b) {
    if (acc.size() != a.size() || a.size() != b.size())
        throw Error(ErrorKind::Shape, "dot operands differ in lane count");
    std::vector<std::uint32_t> r(acc.size());
    for (size_t i = 0; i < acc.size(); ++i) r[i] = dot_lane(acc[i], a[i], b[i]);
    return r;
}

/// 16x16 cells of 32 bits. BF16 tiles hold two elements per cell.
using TileCells = std::array<std::uint32_t, 16 * 16>;

/// acc[m][n] over pairs p = 0..15: A pair (m, p) with B pair (p, n).
inline TileCells exec_tmulf_bf16(const TileCells &acc, const TileCells &a, const TileCells &b) {
    TileCells r = acc;
    for (int m = 0; m < 16; ++m)
        for (int n = 0; n < 16; ++n) {
            std::uint32_t c = r[m * 16 + n];
            for (int p = 0; p < 16; ++p) c = dot_lane(c, a[m * 16 + p], b[p * 16 + n]);
            r[m * 16 + n] = c;
        }
    return r;
}

/// NaN stays NaN; everything not greater than zero becomes +0.0.
inline std::uint32_t max0_lane(std::uint32_t x) {
    const float v = f(x);
    if (std::isnan(v)) return x;
    return v > 0.0f ? x : 0u;
}

struct VecReg {
    Lanes d {};
    bool init = false;
};

struct TileReg {
    TileCells cells {};
    bool init = false;
};

struct MachineState {
    std::vector<VecReg> v;
    std::vector<TileReg> t;
    int lanes = 0;

    explicit MachineState(const IsaProfile &p)
        : v(p.vector_register_count), t(p.tile_register_count), lanes(p.vector_width_bits / 32) {
        if (lanes > kMaxLanes) throw Error(ErrorKind::Emulation, "vectors wider than 512 bits");
    }
};

namespace detail {

using vir::reg_name;
using vir::render_instr;

struct CTerm {
    int slot;
    int64_t coeff;
};

struct CMem {
    bool present = false;
    int buffer = -1;
    int64_t base = 0;
    std::vector<CTerm> terms;
};

struct CNode {
    bool is_loop = false;
    // loop
    int slot = -1;
    int64_t lower = 0, upper = 0, step = 1;
    std::vector<CNode> body;
    // instruction
    const Instr *in = nullptr;
    int pc = -1;
    CMem mem;
};

struct Compiled {
    std::vector<CNode> body;
    std::vector<std::string> slot_names;
};

inline void compile(const std::vector<Node> &nodes, std::vector<std::pair<std::string, int>> &scope,
                    Compiled &c, std::vector<CNode> &out, int &pc) {
    for (const auto &n : nodes) {
        CNode cn;
        if (n.is_loop()) {
            const Loop &l = n.loop();
            cn.is_loop = true;
            cn.slot = int(c.slot_names.size());
            c.slot_names.push_back(l.iv);
            cn.lower = l.lower;
            cn.upper = l.upper;
            cn.step = l.step;
            scope.push_back({l.iv, cn.slot});
            compile(l.body, scope, c, cn.body, pc);
            scope.pop_back();
        } else {
            cn.in = &n.instr();
            cn.pc = pc++;
            if (cn.in->mem) {
                const MemRef &m = *cn.in->mem;
                cn.mem.present = true;
                cn.mem.buffer = m.buffer;
                cn.mem.base = m.addr.base;
                for (const auto &t : m.addr.terms) {
                    int slot = -1;
                    for (auto it = scope.rbegin(); it != scope.rend(); ++it)
                        if (it->first == t.iv) {
                            slot = it->second;
                            break;
                        }
                    if (slot < 0)
                        throw Error(ErrorKind::Emulation, "induction variable " + t.iv + " is unbound");
                    cn.mem.terms.push_back({slot, t.coeff});
                }
            }
        }
        out.push_back(std::move(cn));
    }
}

class Machine {
public:
    Machine(const VirProgram &p, Bindings &b, std::ostream *trace)
        : p_(p), b_(b), st_(p.profile), trace_(trace) {
        if (b_.size() != p.buffers.size())
            throw Error(ErrorKind::Emulation, std::to_string(b_.size()) + " buffers bound, program declares " +
                                                  std::to_string(p.buffers.size()));
        for (size_t i = 0; i < b_.size(); ++i) {
            const auto &d = p.buffers[i];
            if (b_[i].dtype != d.dtype || b_[i].size() != d.size())
                throw Error(ErrorKind::Emulation, "binding for " + d.name + " does not match its declaration");
        }
        std::vector<std::pair<std::string, int>> scope;
        int pc = 0;
        compile(p.body, scope, c_, c_.body, pc);
        iv_.assign(c_.slot_names.size(), 0);
        live_.assign(c_.slot_names.size(), false);
    }

    void run() { exec(c_.body); }

    const MachineState &state() const { return st_; }

private:
    void exec(const std::vector<CNode> &nodes) {
        for (const auto &n : nodes) {
            if (n.is_loop) {
                live_[n.slot] = true;
                for (int64_t i = n.lower; i < n.upper; i += n.step) {
                    iv_[n.slot] = i;
                    exec(n.body);
                }
                live_[n.slot] = false;
            } else {
                step(n);
            }
        }
    }

    [[noreturn]] void fail(const CNode &n, const std::string &why) const {
        throw Error(ErrorKind::Emulation, "pc " + std::to_string(n.pc) + " (" + render_instr(p_, *n.in) + "): " + why);
    }

    int64_t addr(const CNode &n) const {
        int64_t a = n.mem.base;
        for (const auto &t : n.mem.terms) a += t.coeff * iv_[t.slot];
        return a;
    }

    TensorBuffer &buf(const CNode &n) {
        const MemRef &m = *n.in->mem;
        if (m.buffer < 0 || m.buffer >= int(b_.size())) fail(n, "unknown buffer");
        TensorBuffer &t = b_[m.buffer];
        if (t.dtype != m.elem) fail(n, std::string("access type ") + to_string(m.elem) + " on " + to_string(t.dtype) + " buffer " + t.name);
        return t;
    }

    void bounds(const CNode &n, const TensorBuffer &t, int64_t at, int64_t count) const {
        if (at < 0 || at + count > t.size())
            fail(n, "access [" + std::to_string(at) + ", " + std::to_string(at + count) + ") outside " + t.name + " of " + std::to_string(t.size()));
    }

    // `count` elements starting at `at`, packed little-endian into 32-bit cells.
    void read_cells(const CNode &n, int64_t at, int64_t count, std::uint32_t *out, int cells) {
        TensorBuffer &t = buf(n);
        bounds(n, t, at, count);
        std::fill(out, out + cells, 0u);
        if (t.dtype == ElemType::BF16) {
            for (int64_t i = 0; i < count; ++i)
                out[i / 2] |= std::uint32_t(t.data16[at + i]) << (16 * (i % 2));
        } else {
            for (int64_t i = 0; i < count; ++i) out[i] = t.data32[at + i];
        }
    }

    void write_cells(const CNode &n, int64_t at, int64_t count, const std::uint32_t *in) {
        TensorBuffer &t = buf(n);
        bounds(n, t, at, count);
        if (t.dtype == ElemType::BF16) {
            for (int64_t i = 0; i < count; ++i)
                t.data16[at + i] = std::uint16_t(in[i / 2] >> (16 * (i % 2)));
        } else {
            for (int64_t i = 0; i < count; ++i) t.data32[at + i] = in[i];
        }
    }

    const Lanes &rv(const CNode &n, Reg r) const {
        if (r.cls != RegClass::Vector || r.id < 0 || r.id >= int(st_.v.size())) fail(n, "bad vector register " + reg_name(r));
        if (!st_.v[r.id].init) fail(n, "read of uninitialized " + reg_name(r));
        return st_.v[r.id].d;
    }

    const TileCells &rt(const CNode &n, Reg r) const {
        if (r.cls != RegClass::Tile || r.id < 0 || r.id >= int(st_.t.size())) fail(n, "bad tile register " + reg_name(r));
        if (!st_.t[r.id].init) fail(n, "read of uninitialized " + reg_name(r));
        return st_.t[r.id].cells;
    }

    void wv(const CNode &n, Reg r, const Lanes &x) {
        if (r.cls != RegClass::Vector || r.id < 0 || r.id >= int(st_.v.size())) fail(n, "bad vector register " + reg_name(r));
        st_.v[r.id].d = x;
        st_.v[r.id].init = true;
    }

    void wt(const CNode &n, Reg r, const TileCells &x) {
        if (r.cls != RegClass::Tile || r.id < 0 || r.id >= int(st_.t.size())) fail(n, "bad tile register " + reg_name(r));
        st_.t[r.id].cells = x;
        st_.t[r.id].init = true;
    }

    std::vector<std::uint16_t> words(const Lanes &x) const {
        std::vector<std::uint32_t> d(x.begin(), x.begin() + st_.lanes);
        return packing::dwords_to_words(d);
    }

    Lanes from_words(const std::vector<std::uint16_t> &w) const {
        Lanes r {};
        auto d = packing::words_to_dwords(w);
        std::copy(d.begin(), d.end(), r.begin());
        return r;
    }

    void step(const CNode &n) {
        const Instr &in = *n.in;
        const int L = st_.lanes;
        Lanes r {};
        bool wrote_vec = false;
        switch (in.op) {
            case Op::VLoad:
                read_cells(n, addr(n), in.mem->count, r.data(), kMaxLanes);
                wrote_vec = true;
                break;
            case Op::VStore: {
                const Lanes &a = rv(n, in.a);
                write_cells(n, addr(n), in.mem->count, a.data());
                break;
            }
            case Op::VBcastF32: {
                std::uint32_t x;
                read_cells(n, addr(n), 1, &x, 1);
                for (int i = 0; i < L; ++i) r[i] = x;
                wrote_vec = true;
                break;
            }
            case Op::VBcastPairBF16: {
                std::uint32_t x;
                read_cells(n, addr(n), 2, &x, 1);
                for (int i = 0; i < L; ++i) r[i] = x;
                wrote_vec = true;
                break;
            }
            case Op::BcastBF16ToF32: {
                std::uint32_t x;
                read_cells(n, addr(n), 1, &x, 1);
                for (int i = 0; i < L; ++i) r[i] = x << 16;
                wrote_vec = true;
                break;
            }
            case Op::EvenBF16ToF32:
            case Op::OddBF16ToF32: {
                std::array<std::uint32_t, 2 * kMaxLanes> cells {};
                read_cells(n, addr(n), in.mem->count, cells.data(), int(cells.size()));
                const bool odd = in.op == Op::OddBF16ToF32;
                for (int i = 0; i < L; ++i) r[i] = odd ? cells[i] & 0xFFFF0000u : cells[i] << 16;
                wrote_vec = true;
                break;
            }
            case Op::Fma: {
                const Lanes &a = rv(n, in.a), &b = rv(n, in.b), &c = rv(n, in.dst);
                for (int i = 0; i < L; ++i) r[i] = u(std::fma(f(a[i]), f(b[i]), f(c[i])));
                wrote_vec = true;
                break;
            }
            case Op::DotBF16: {
                const Lanes &a = rv(n, in.a), &b = rv(n, in.b), &c = rv(n, in.dst);
                for (int i = 0; i < L; ++i) r[i] = dot_lane(c[i], a[i], b[i]);
                wrote_vec = true;
                break;
            }
            case Op::CvtF32ToBF16: {
                const Lanes &a = rv(n, in.a);
                for (int i = 0; i < L; ++i)
                    r[i / 2] |= std::uint32_t(bf16::from_f32(f(a[i]))) << (16 * (i % 2));
                wrote_vec = true;
                break;
            }
            case Op::CvtBF16ToF32: {
                const Lanes &a = rv(n, in.a);
                for (int i = 0; i < L; ++i) r[i] = ((a[i / 2] >> (16 * (i % 2))) & 0xFFFFu) << 16;
                wrote_vec = true;
                break;
            }
            case Op::InterleaveLo128:
            case Op::InterleaveHi128: {
                const auto wa = words(rv(n, in.a));
                std::vector<std::uint16_t> wb;
                if (in.mem) {
                    Lanes m {};
                    read_cells(n, addr(n), in.mem->count, m.data(), kMaxLanes);
                    wb = words(m);
                } else {
                    wb = words(rv(n, in.b));
                }
                r = from_words(in.op == Op::InterleaveLo128 ? packing::interleave_lo128(wa, wb)
                                                            : packing::interleave_hi128(wa, wb));
                wrote_vec = true;
                break;
            }
            case Op::Shuffle: {
                const Lanes &a = rv(n, in.a), &b = rv(n, in.b);
                if (int(in.indices.size()) != L) fail(n, "shuffle index count");
                for (int i = 0; i < L; ++i) {
                    const int x = in.indices[i];
                    if (x < 0 || x >= 2 * L) fail(n, "shuffle index out of range");
                    r[i] = x < L ? a[x] : b[x - L];
                }
                wrote_vec = true;
                break;
            }
            case Op::Bitcast: r = rv(n, in.a); wrote_vec = true; break;
            case Op::Shli: {
                const Lanes &a = rv(n, in.a);
                for (int i = 0; i < L; ++i) r[i] = in.imm >= 32 ? 0u : a[i] << in.imm;
                wrote_vec = true;
                break;
            }
            case Op::Andi: {
                const Lanes &a = rv(n, in.a);
                for (int i = 0; i < L; ++i) r[i] = a[i] & in.imm;
                wrote_vec = true;
                break;
            }
            case Op::VXorZero: wrote_vec = true; break;
            case Op::VMax0: {
                const Lanes &a = rv(n, in.a);
                for (int i = 0; i < L; ++i) r[i] = max0_lane(a[i]);
                wrote_vec = true;
                break;
            }
            case Op::VAdd: {
                const Lanes &a = rv(n, in.a), &b = rv(n, in.b);
                for (int i = 0; i < L; ++i) r[i] = u(f(a[i]) + f(b[i]));
                wrote_vec = true;
                break;
            }
            case Op::TLoad: {
                TileCells cells {};
                if (in.rows > 16) fail(n, "tile rows exceed 16");
                const int64_t a0 = addr(n);
                for (int64_t row = 0; row < in.rows; ++row)
                    read_cells(n, a0 + row * in.mem->row_stride, in.mem->count, cells.data() + row * 16, 16);
                wt(n, in.dst, cells);
                break;
            }
            case Op::TStore: {
                const TileCells &cells = rt(n, in.a);
                const int64_t a0 = addr(n);
                for (int64_t row = 0; row < in.rows; ++row)
                    write_cells(n, a0 + row * in.mem->row_stride, in.mem->count, cells.data() + row * 16);
                break;
            }
            case Op::TZero: wt(n, in.dst, TileCells {}); break;
            case Op::TMulfBF16:
                wt(n, in.dst, exec_tmulf_bf16(rt(n, in.dst), rt(n, in.a), rt(n, in.b)));
                break;
        }
        if (wrote_vec) wv(n, in.dst, r);
        if (trace_) emit_trace(n, wrote_vec);
    }

    void emit_trace(const CNode &n, bool vec) {
        const Instr &in = *n.in;
        std::ostringstream os;
        os << n.pc << " ";
        bool first = true;
        for (size_t s = 0; s < iv_.size(); ++s) {
            if (!live_[s]) continue;
            os << (first ? "" : ",") << c_.slot_names[s] << "=" << iv_[s];
            first = false;
        }
        if (first) os << "-";
        os << " " << render_instr(p_, in) << " =>";
        char buf[12];
        if (vec) {
            for (int i = 0; i < st_.lanes; ++i) {
                std::snprintf(buf, sizeof buf, " %08x", st_.v[in.dst.id].d[i]);
                os << buf;
            }
        } else if (in.op == Op::TLoad || in.op == Op::TZero || in.op == Op::TMulfBF16) {
            for (int i = 0; i < 16; ++i) {
                std::snprintf(buf, sizeof buf, " %08x", st_.t[in.dst.id].cells[i]);
                os << buf;
            }
            os << " ...";
        } else {
            os << " (store)";
        }
        *trace_ << os.str() << "\n";
    }

    const VirProgram &p_;
    Bindings &b_;
    MachineState st_;
    std::ostream *trace_;
    Compiled c_;
    std::vector<int64_t> iv_;
    std::vector<bool> live_;
};

} // namespace detail

inline bool trace_from_env() {
    const char *e = std::getenv("NANOFORGE_TRACE");
    return e && std::string(e) == "1";
}

/// Executes the loop nest in order, mutating `buffers`. With `trace`, one
/// line per executed instruction: `<pc> <ivs> <instr> => <dst lanes>`.
inline void run(const VirProgram &program, Bindings &buffers, std::ostream *trace) {
    detail::Machine(program, buffers, trace).run();
}

inline void run(const VirProgram &program, Bindings &buffers, bool trace = false) {
    run(program, buffers, trace ? &std::cerr : nullptr);
}

} // namespace emu
} // namespace nanoforge
