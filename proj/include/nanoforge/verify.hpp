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

// Runs generated programs on sampled inputs and compares them with the
// reference.

#include <cstdint>
#include <ostream>
#include <vector>

#include "nanoforge/emu.hpp"
#include "nanoforge/oracle.hpp"
#include "nanoforge/packing.hpp"

namespace nanoforge::verify {

/// Logical operands: A [batch][m][k], B [batch][k][n] row-major, C0 [m][n],
/// bias [n] (empty without an epilogue).
struct Problem {
    KernelSpec spec;
    std::vector<float> a, b, c0, bias;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline std::uint64_t trial_seed(std::uint64_t seed, int trial) {
    return splitmix64(seed ^ splitmix64(std::uint64_t(trial)));
}

inline Problem make_problem(const KernelSpec &spec, std::uint64_t seed) {
    spec.check();
    Problem p;
    p.spec = spec;
    auto sample = [&](DType t, int stream, int64_t count) {
        const std::uint64_t s = splitmix64(seed + std::uint64_t(stream));
        return t == DType::BF16 ? oracle::bf16_exact_sampler(s, count)
                                : oracle::f32_uniform_sampler(s, count);
    };
    p.a = sample(spec.dtype, 1, spec.batch * spec.m * spec.k);
    p.b = sample(spec.dtype, 2, spec.batch * spec.k * spec.n);
    p.c0 = sample(spec.c_dtype, 3, spec.m * spec.n);
    if (spec.epilogue == Epilogue::BiasRelu) p.bias = sample(DType::F32, 4, spec.n);
    return p;
}

/// Binds the problem to the program's buffers (packing B when the program
/// expects VNNI), runs the emulator, and returns C.
inline std::vector<float> run_program(const VirProgram &prog, const Problem &pr,
                                      std::ostream *trace = nullptr) {
    const KernelSpec &s = pr.spec;
    Bindings b = make_bindings(prog);
    for (auto &t : b) {
        const BufferDecl &d = prog.buffers[t.id];
        switch (d.role) {
            case BufferRole::A: t.assign(pr.a); break;
            case BufferRole::B:
                t.assign(d.layout == Layout::Vnni
                             ? packing::pack_vnni_batched(pr.b, s.batch, s.k, s.n, 2)
                             : pr.b);
                break;
            case BufferRole::C: t.assign(pr.c0); break;
            case BufferRole::Bias: t.assign(pr.bias); break;
            case BufferRole::Scratch: break;
        }
    }
    emu::run(prog, b, trace);
    for (const auto &t : b)
        if (prog.buffers[t.id].role == BufferRole::C) return t.values();
    throw Error(ErrorKind::Emulation, "program declares no C buffer");
}

inline std::vector<double> reference(const Problem &pr) {
    return oracle::ref_brgemm_f64(pr.spec, pr.a, pr.b, Layout::Flat, pr.c0,
                                  pr.spec.epilogue == Epilogue::BiasRelu ? &pr.bias : nullptr);
}

inline ComparisonReport check(const VirProgram &prog, const Problem &pr,
                              std::ostream *trace = nullptr) {
    return oracle::compare(run_program(prog, pr, trace), reference(pr), pr.spec.n,
                           oracle::tolerance_for(pr.spec));
}

} // namespace nanoforge::verify
