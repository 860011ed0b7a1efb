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

// Scalar binary64 reference BRGEMM, error reports, and input samplers.
// Nothing here calls into the emulator.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nanoforge/bf16.hpp"
#include "nanoforge/error.hpp"
#include "nanoforge/tiling.hpp"

namespace nanoforge {

struct ComparisonReport {
    double max_abs_err = 0.0;
    double max_rel_err = 0.0;
    int64_t worst_row = -1, worst_col = -1;
    bool bitwise_equal = true;
    double tolerance = 0.0;

    bool pass() const { return max_rel_err <= tolerance; }
};

namespace oracle {

inline constexpr double kTolerance = 1e-4;
// Arbitrary F32 inputs quantized to BF16.
inline constexpr double kLooseTolerance = 2e-2;
// BF16 output: one rounding of at most half an ulp (2^-9 relative) on top of
// the accumulation tolerance; allow a full ulp.
inline constexpr double kBf16OutputTolerance = 1e-4 + 1.0 / 256.0;

inline double tolerance_for(const KernelSpec &spec) {
    return spec.c_dtype == DType::BF16 ? kBf16OutputTolerance : kTolerance;
}

/// C = beta*C0 + sum_b A_b x B_b in binary64, then max(0, C + bias) when
/// `bias` is given. A is [batch][m][k]; B is [batch][k][n] (flat) or
/// [batch][k/2][n][2] (vnni).
inline std::vector<double> ref_brgemm_f64(const KernelSpec &spec, const std::vector<float> &a,
                                          const std::vector<float> &b, Layout b_layout,
                                          const std::vector<float> &c0,
                                          const std::vector<float> *bias = nullptr) {
    const int64_t m = spec.m, n = spec.n, k = spec.k, nbatch = spec.batch;
    if (int64_t(a.size()) != nbatch * m * k || int64_t(b.size()) != nbatch * k * n ||
        int64_t(c0.size()) != m * n || (bias && int64_t(bias->size()) != n))
        throw Error(ErrorKind::Shape, "reference inputs do not match the kernel shape");
    if (b_layout == Layout::Vnni && k % 2 != 0)
        throw Error(ErrorKind::Shape, "vnni B needs an even K");
    auto b_at = [&](int64_t bi, int64_t kk, int64_t j) -> double {
        if (b_layout == Layout::Flat) return b[(bi * k + kk) * n + j];
        return b[((bi * (k / 2) + kk / 2) * n + j) * 2 + kk % 2];
    };
    std::vector<double> c(m * n);
    for (int64_t i = 0; i < m * n; ++i) c[i] = spec.beta ? double(c0[i]) : 0.0;
    for (int64_t bi = 0; bi < nbatch; ++bi)
        for (int64_t i = 0; i < m; ++i)
            for (int64_t j = 0; j < n; ++j) {
                double s = c[i * n + j];
                for (int64_t kk = 0; kk < k; ++kk) s += double(a[(bi * m + i) * k + kk]) * b_at(bi, kk, j);
                c[i * n + j] = s;
            }
    if (bias)
        for (int64_t i = 0; i < m; ++i)
            for (int64_t j = 0; j < n; ++j) {
                const double v = c[i * n + j] + double((*bias)[j]);
                c[i * n + j] = v > 0.0 ? v : 0.0;
            }
    return c;
}

/// rel = |got - ref| / max(|ref|, 1), maximised over the matrix.
inline ComparisonReport compare(const std::vector<double> &got, const std::vector<double> &ref,
                                int64_t cols, double tolerance = kTolerance) {
    if (got.size() != ref.size() || cols <= 0 || got.size() % cols != 0)
        throw Error(ErrorKind::Shape, "compared buffers differ in shape");
    ComparisonReport r;
    r.tolerance = tolerance;
    for (size_t i = 0; i < got.size(); ++i) {
        std::uint64_t gb, rb;
        std::memcpy(&gb, &got[i], sizeof gb);
        std::memcpy(&rb, &ref[i], sizeof rb);
        if (gb != rb) r.bitwise_equal = false;
        double abs = std::fabs(got[i] - ref[i]);
        if (std::isnan(got[i]) != std::isnan(ref[i])) abs = INFINITY;
        if (std::isnan(abs)) abs = 0.0; // both NaN
        const double rel = abs / std::max(std::fabs(ref[i]), 1.0);
        if (rel > r.max_rel_err || r.worst_row < 0) {
            r.worst_row = int64_t(i) / cols;
            r.worst_col = int64_t(i) % cols;
        }
        r.max_abs_err = std::max(r.max_abs_err, abs);
        r.max_rel_err = std::max(r.max_rel_err, rel);
    }
    return r;
}

inline ComparisonReport compare(const std::vector<float> &got, const std::vector<double> &ref,
                                int64_t cols, double tolerance = kTolerance) {
    return compare(std::vector<double>(got.begin(), got.end()), ref, cols, tolerance);
}

inline ComparisonReport compare(const std::vector<float> &got, const std::vector<float> &ref,
                                int64_t cols, double tolerance = kTolerance) {
    return compare(std::vector<double>(got.begin(), got.end()),
                   std::vector<double>(ref.begin(), ref.end()), cols, tolerance);
}

inline std::string format_report(const ComparisonReport &r) {
    std::ostringstream os;
    os.precision(3);
    os << std::scientific << "max_abs=" << r.max_abs_err << " max_rel=" << r.max_rel_err
       << " worst=(" << r.worst_row << "," << r.worst_col << ")"
       << " bitwise=" << (r.bitwise_equal ? "yes" : "no") << " tol=" << r.tolerance;
    return os.str();
}

/// Uniform F32 values in [lo, hi].
inline std::vector<float> f32_uniform_sampler(std::uint64_t seed, int64_t count, float lo = -1.0f,
                                              float hi = 1.0f) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(lo, hi);
    std::vector<float> v(count);
    for (auto &x : v) x = dist(rng);
    return v;
}

/// Uniform draws in [-1, 1] rounded to the nearest BF16 value.
inline std::vector<float> bf16_exact_sampler(std::uint64_t seed, int64_t count, float lo = -1.0f,
                                             float hi = 1.0f) {
    auto v = f32_uniform_sampler(seed, count, lo, hi);
    for (auto &x : v) x = bf16::round_f32(x);
    return v;
}

} // namespace oracle
} // namespace nanoforge
