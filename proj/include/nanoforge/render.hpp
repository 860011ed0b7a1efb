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

// Text forms of VirPrograms: a parse-stable IR dump and an AT&T-flavoured
// pseudo-assembly. Neither encodes instructions.

#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "nanoforge/vir.hpp"

namespace nanoforge::vir {

inline const char *mnemonic(Op op) {
    switch (op) {
        case Op::VLoad: return "vload";
        case Op::VStore: return "vstore";
        case Op::VBcastF32: return "vbcast.f32";
        case Op::VBcastPairBF16: return "vbcast.pair.bf16";
        case Op::Fma: return "fma";
        case Op::DotBF16: return "dot.bf16";
        case Op::BcastBF16ToF32: return "bcast.bf16.f32";
        case Op::EvenBF16ToF32: return "even.bf16.f32";
        case Op::OddBF16ToF32: return "odd.bf16.f32";
        case Op::CvtF32ToBF16: return "cvt.f32.bf16";
        case Op::CvtBF16ToF32: return "cvt.bf16.f32";
        case Op::InterleaveLo128: return "ilv.lo128";
        case Op::InterleaveHi128: return "ilv.hi128";
        case Op::Shuffle: return "shuffle";
        case Op::Bitcast: return "bitcast";
        case Op::Shli: return "shli";
        case Op::Andi: return "andi";
        case Op::VXorZero: return "zero";
        case Op::VMax0: return "max0";
        case Op::VAdd: return "add";
        case Op::TLoad: return "tload";
        case Op::TStore: return "tstore";
        case Op::TZero: return "tzero";
        case Op::TMulfBF16: return "tmulf.bf16";
    }
    return "?";
}

inline std::string reg_name(Reg r) {
    return (r.cls == RegClass::Vector ? "v" : "t") + std::to_string(r.id);
}

inline std::string affine_text(const Affine &a, int64_t scale = 1) {
    std::string s;
    for (const auto &t : a.terms) {
        if (!s.empty()) s += " + ";
        const int64_t c = t.coeff * scale;
        if (c != 1) s += std::to_string(c) + "*";
        s += t.iv;
    }
    if (a.base != 0 || s.empty()) {
        if (!s.empty()) s += " + ";
        s += std::to_string(a.base * scale);
    }
    return s;
}

inline std::string hex32(std::uint32_t x) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%08x", x);
    return buf;
}

inline std::string mem_text(const VirProgram &p, const MemRef &m) {
    std::string name = m.buffer >= 0 && m.buffer < int(p.buffers.size())
                           ? p.buffers[m.buffer].name
                           : "buf" + std::to_string(m.buffer);
    return std::string(to_string(m.elem)) + "x" + std::to_string(m.count) + " " + name + "[" +
           affine_text(m.addr) + "]";
}

inline std::string render_instr(const VirProgram &p, const Instr &in) {
    std::ostringstream os;
    const std::string d = reg_name(in.dst), a = reg_name(in.a), b = reg_name(in.b);
    const char *mn = mnemonic(in.op);
    switch (in.op) {
        case Op::VLoad:
        case Op::VBcastF32:
        case Op::VBcastPairBF16:
        case Op::BcastBF16ToF32:
        case Op::EvenBF16ToF32:
        case Op::OddBF16ToF32: os << d << " = " << mn << " " << mem_text(p, *in.mem); break;
        case Op::VStore: os << mn << " " << a << ", " << mem_text(p, *in.mem); break;
        case Op::Fma:
        case Op::DotBF16:
        case Op::TMulfBF16:
            os << d << " = " << mn << " " << a << ", " << b;
            if (in.op == Op::Fma) os << ", " << d;
            break;
        case Op::CvtF32ToBF16:
        case Op::CvtBF16ToF32:
        case Op::VMax0: os << d << " = " << mn << " " << a; break;
        case Op::InterleaveLo128:
        case Op::InterleaveHi128:
            os << d << " = " << mn << " " << a << ", " << (in.mem ? mem_text(p, *in.mem) : b);
            break;
        case Op::Shuffle: {
            os << d << " = " << mn << " " << a << ", " << b << " [";
            for (size_t i = 0; i < in.indices.size(); ++i)
                os << (i ? ", " : "") << in.indices[i];
            os << "]";
            break;
        }
        case Op::Bitcast: os << d << " = " << mn << "." << to_string(in.to_type) << " " << a; break;
        case Op::Shli: os << d << " = " << mn << " " << a << ", " << in.imm; break;
        case Op::Andi: os << d << " = " << mn << " " << a << ", " << hex32(in.imm); break;
        case Op::VXorZero:
        case Op::TZero: os << d << " = " << mn; break;
        case Op::VAdd: os << d << " = " << mn << " " << a << ", " << b; break;
        case Op::TLoad:
            os << d << " = " << mn << " " << in.rows << "x" << mem_text(p, *in.mem) << " stride "
               << in.mem->row_stride;
            break;
        case Op::TStore:
            os << mn << " " << a << ", " << in.rows << "x" << mem_text(p, *in.mem) << " stride "
               << in.mem->row_stride;
            break;
    }
    return os.str();
}

namespace detail {

inline void render_nodes(const VirProgram &p, const std::vector<Node> &nodes, int depth,
                         std::ostringstream &os) {
    const std::string pad(2 * depth, ' ');
    for (const auto &n : nodes) {
        if (n.is_loop()) {
            const Loop &l = n.loop();
            os << pad << "for " << l.iv << " in " << l.lower << ".." << l.upper << " step "
               << l.step << " {\n";
            render_nodes(p, l.body, depth + 1, os);
            os << pad << "}\n";
        } else {
            os << pad << render_instr(p, n.instr()) << "\n";
        }
    }
}

} // namespace detail

/// One instruction per line, loops indented by two spaces, registers as
/// v<N>/t<N>, addresses as affine element offsets.
inline std::string render_text(const VirProgram &p) {
    std::ostringstream os;
    os << "// profile " << p.profile.name;
    if (p.plan) {
        os << " path " << to_string(p.plan->path) << " mb " << p.plan->mb << " nb " << p.plan->nb
           << " kb " << p.plan->kb << " role " << to_string(p.plan->role);
    }
    if (p.spec) os << " layout " << to_string(p.spec->layout);
    os << "\n";
    for (const auto &b : p.buffers) {
        os << "buffer " << b.name << " " << to_string(b.role) << " " << to_string(b.dtype) << " [";
        for (size_t i = 0; i < b.shape.size(); ++i) os << (i ? ", " : "") << b.shape[i];
        os << "] " << to_string(b.layout) << "\n";
    }
    detail::render_nodes(p, p.body, 0, os);
    return os.str();
}

// ---------------------------------------------------------------------------
// pseudo-assembly

namespace detail {

inline std::string xreg(int bytes, int id) {
    const char *prefix = bytes >= 64 ? "zmm" : bytes >= 32 ? "ymm" : "xmm";
    return std::string("%") + prefix + std::to_string(id);
}

inline std::string base_reg(const VirProgram &p, int buffer) {
    static const char *names[] = {"%rdi", "%rsi", "%rdx", "%rcx", "%r8", "%r9", "%r10", "%r11"};
    return buffer >= 0 && buffer < 8 ? names[buffer] : "%rbx";
    (void)p;
}

inline std::string asm_mem(const VirProgram &p, const MemRef &m) {
    const int64_t sz = elem_bytes(m.elem);
    std::string disp;
    Affine scaled = m.addr;
    if (scaled.terms.empty())
        disp = scaled.base ? std::to_string(scaled.base * sz) : "";
    else
        disp = "[" + affine_text(scaled, sz) + "]";
    return disp + "(" + base_reg(p, m.buffer) + ")";
}

class AsmPrinter {
public:
    explicit AsmPrinter(const VirProgram &p) : p_(p), vb_(p.profile.vector_bytes()) {}

    std::string run() {
        os_ << "# " << p_.profile.name << " nanokernel\n";
        nodes(p_.body, 1);
        return os_.str();
    }

private:
    std::string v(Reg r, int bytes = 0) const { return xreg(bytes ? bytes : vb_, r.id); }
    static std::string t(Reg r) { return "%tmm" + std::to_string(r.id); }

    void line(int depth, const std::string &s) { os_ << std::string(4 * depth, ' ') << s << "\n"; }

    [[noreturn]] void no_mnemonic(const Instr &in) const {
        throw Error(ErrorKind::Render, std::string("no ") + std::to_string(vb_ * 8) +
                                           "-bit mnemonic for " + mnemonic(in.op));
    }

    void nodes(const std::vector<Node> &ns, int depth) {
        for (const auto &n : ns) {
            if (n.is_loop()) {
                const Loop &l = n.loop();
                const std::string label = ".L" + l.iv + "_" + std::to_string(label_++);
                line(depth - 1, "movq $" + std::to_string(l.lower) + ", %" + l.iv);
                os_ << label << ":\n";
                nodes(l.body, depth + 1);
                line(depth, "addq $" + std::to_string(l.step) + ", %" + l.iv);
                line(depth, "cmpq $" + std::to_string(l.upper) + ", %" + l.iv);
                line(depth, "jl " + label);
            } else {
                instr(n.instr(), depth);
            }
        }
    }

    std::string move_mnemonic(int64_t bytes, const Instr &in) const {
        if (bytes >= 16) return "vmovups";
        if (bytes == 8) return "vmovq";
        if (bytes == 4) return "vmovd";
        no_mnemonic(in);
    }

    void instr(const Instr &in, int depth) {
        const int64_t bytes = in.mem ? in.mem->count * elem_bytes(in.mem->elem) : vb_;
        switch (in.op) {
            case Op::VLoad:
                line(depth, move_mnemonic(bytes, in) + " " + asm_mem(p_, *in.mem) + ", " +
                                v(in.dst, int(std::max<int64_t>(bytes, 16))));
                break;
            case Op::VStore:
                line(depth, move_mnemonic(bytes, in) + " " + v(in.a, int(std::max<int64_t>(bytes, 16))) +
                                ", " + asm_mem(p_, *in.mem));
                break;
            case Op::VBcastF32:
                line(depth, "vbroadcastss " + asm_mem(p_, *in.mem) + ", " + v(in.dst));
                break;
            case Op::VBcastPairBF16:
                line(depth, "vpbroadcastd " + asm_mem(p_, *in.mem) + ", " + v(in.dst));
                break;
            case Op::Fma:
                line(depth, "vfmadd231ps " + v(in.b) + ", " + v(in.a) + ", " + v(in.dst));
                break;
            case Op::DotBF16:
                line(depth, "vdpbf16ps " + v(in.b) + ", " + v(in.a) + ", " + v(in.dst));
                break;
            case Op::BcastBF16ToF32:
            case Op::EvenBF16ToF32:
            case Op::OddBF16ToF32: {
                if (vb_ > 32) no_mnemonic(in);
                const char *mn = in.op == Op::BcastBF16ToF32  ? "vbcstnebf162ps"
                                 : in.op == Op::EvenBF16ToF32 ? "vcvtneebf162ps"
                                                              : "vcvtneobf162ps";
                line(depth, std::string(mn) + " " + asm_mem(p_, *in.mem) + ", " + v(in.dst));
                break;
            }
            case Op::CvtF32ToBF16:
                line(depth, "vcvtneps2bf16 " + v(in.a) + ", " + v(in.dst, std::max(vb_ / 2, 16)));
                break;
            case Op::CvtBF16ToF32:
                line(depth, "vpmovzxwd " + v(in.a, std::max(vb_ / 2, 16)) + ", " + v(in.dst));
                line(depth, "vpslld $16, " + v(in.dst) + ", " + v(in.dst));
                break;
            case Op::InterleaveLo128:
            case Op::InterleaveHi128: {
                const char *mn = in.op == Op::InterleaveLo128 ? "vpunpcklwd" : "vpunpckhwd";
                const std::string src2 = in.mem ? asm_mem(p_, *in.mem) : v(in.b);
                line(depth, std::string(mn) + " " + src2 + ", " + v(in.a) + ", " + v(in.dst));
                break;
            }
            case Op::Shuffle: {
                std::string idx;
                for (size_t i = 0; i < in.indices.size(); ++i)
                    idx += (i ? "," : "") + std::to_string(in.indices[i]);
                line(depth, "vpermt2ps " + v(in.b) + ", " + v(in.a) + ", " + v(in.dst) +
                                "    # idx=[" + idx + "]");
                break;
            }
            case Op::Bitcast:
                // register reinterpretation, no instruction unless it moves
                if (in.dst != in.a) line(depth, "vmovaps " + v(in.a) + ", " + v(in.dst));
                break;
            case Op::Shli:
                line(depth, "vpslld $" + std::to_string(in.imm) + ", " + v(in.a) + ", " + v(in.dst));
                break;
            case Op::Andi:
                line(depth, std::string(vb_ == 64 ? "vpandd" : "vpand") + " .LCmask(%rip), " +
                                v(in.a) + ", " + v(in.dst) + "    # " + hex32(in.imm));
                break;
            case Op::VXorZero:
                line(depth, "vxorps " + v(in.dst) + ", " + v(in.dst) + ", " + v(in.dst));
                break;
            case Op::VMax0:
                line(depth, "vmaxps .LCzero(%rip), " + v(in.a) + ", " + v(in.dst));
                break;
            case Op::VAdd:
                line(depth, "vaddps " + v(in.b) + ", " + v(in.a) + ", " + v(in.dst));
                break;
            case Op::TLoad:
                line(depth, "tileloadd " + asm_mem(p_, *in.mem) + ", " + t(in.dst) +
                                "    # stride " +
                                std::to_string(in.mem->row_stride * elem_bytes(in.mem->elem)) +
                                "B");
                break;
            case Op::TStore:
                line(depth, "tilestored " + t(in.a) + ", " + asm_mem(p_, *in.mem) +
                                "    # stride " +
                                std::to_string(in.mem->row_stride * elem_bytes(in.mem->elem)) +
                                "B");
                break;
            case Op::TZero: line(depth, "tilezero " + t(in.dst)); break;
            case Op::TMulfBF16:
                line(depth, "tdpbf16ps " + t(in.b) + ", " + t(in.a) + ", " + t(in.dst));
                break;
        }
    }

    const VirProgram &p_;
    int vb_;
    int label_ = 0;
    std::ostringstream os_;
};

} // namespace detail

/// x86-style mnemonics; registers as xmm/ymm/zmm by profile width and tmm.
inline std::string render_pseudo_asm(const VirProgram &p) { return detail::AsmPrinter(p).run(); }

} // namespace nanoforge::vir
