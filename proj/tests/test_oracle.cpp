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
#include <numeric>

#include "nanoforge/oracle.hpp"
#include "nanoforge/packing.hpp"

using namespace nanoforge;

namespace {

KernelSpec kspec(int64_t m, int64_t n, int64_t k, int64_t batch = 1) {
    KernelSpec s;
    s.m = m;
    s.n = n;
    s.k = k;
    s.batch = batch;
    s.dtype = DType::BF16;
    return s;
}

} // namespace

TEST(Reference, OneByOne) {
    const auto c = oracle::ref_brgemm_f64(kspec(1, 1, 1), {2.0f}, {3.0f}, Layout::Flat, {0.0f});
    EXPECT_EQ(c, std::vector<double> {6.0});
}

TEST(Reference, BetaAndBatchSum) {
    auto s = kspec(1, 1, 1, 3);
    s.beta = 1;
    const auto c = oracle::ref_brgemm_f64(s, {1, 2, 3}, {4, 5, 6}, Layout::Flat, {10});
    EXPECT_EQ(c[0], 10.0 + 4 + 10 + 18);
    s.beta = 0;
    EXPECT_EQ(oracle::ref_brgemm_f64(s, {1, 2, 3}, {4, 5, 6}, Layout::Flat, {10})[0], 32.0);
}

TEST(Reference, BiasRelu) {
    auto s = kspec(1, 2, 1);
    const std::vector<float> bias {-10.0f, 1.0f};
    const auto c = oracle::ref_brgemm_f64(s, {2}, {3, 4}, Layout::Flat, {0, 0}, &bias);
    EXPECT_EQ(c, (std::vector<double> {0.0, 9.0}));
}

TEST(Reference, SmallMatmul) {
    const auto c = oracle::ref_brgemm_f64(kspec(2, 2, 2), {1, 2, 3, 4}, {5, 6, 7, 8}, Layout::Flat,
                                          {0, 0, 0, 0});
    EXPECT_EQ(c, (std::vector<double> {19, 22, 43, 50}));
}

TEST(Reference, LayoutTransparent) {
    const auto s = kspec(4, 12, 8, 3);
    const auto a = oracle::bf16_exact_sampler(1, s.batch * s.m * s.k);
    const auto b = oracle::bf16_exact_sampler(2, s.batch * s.k * s.n);
    const auto c0 = oracle::bf16_exact_sampler(3, s.m * s.n);
    const auto packed = packing::pack_vnni_batched(b, s.batch, s.k, s.n, 2);
    EXPECT_EQ(oracle::ref_brgemm_f64(s, a, b, Layout::Flat, c0),
              oracle::ref_brgemm_f64(s, a, packed, Layout::Vnni, c0));
}

TEST(Reference, ShapeErrors) {
    EXPECT_THROW(oracle::ref_brgemm_f64(kspec(2, 2, 2), {1}, {1, 2, 3, 4}, Layout::Flat, {0, 0, 0, 0}),
                 Error);
    EXPECT_THROW(oracle::ref_brgemm_f64(kspec(1, 1, 1), {1}, {1}, Layout::Vnni, {0}), Error);
}

TEST(Compare, RelativeErrorFloorsAtOne) {
    const auto r = oracle::compare(std::vector<double> {0.5, 200.02}, std::vector<double> {0.50001, 200.0}, 2);
    EXPECT_NEAR(r.max_abs_err, 0.02, 1e-12);
    EXPECT_NEAR(r.max_rel_err, 1e-4, 1e-12);
    EXPECT_EQ(r.worst_col, 1);
    EXPECT_FALSE(r.bitwise_equal);
}

TEST(Compare, PassIsInclusive) {
    auto r = oracle::compare(std::vector<double> {1.0001}, std::vector<double> {1.0}, 1, 2e-4);
    EXPECT_TRUE(r.pass());
    r = oracle::compare(std::vector<double> {1.001}, std::vector<double> {1.0}, 1);
    EXPECT_FALSE(r.pass());
}

TEST(Compare, BitwiseAndWorstPosition) {
    const std::vector<float> x {1, 2, 3, 4, 5, 6};
    auto r = oracle::compare(x, x, 3);
    EXPECT_TRUE(r.bitwise_equal);
    EXPECT_EQ(r.max_rel_err, 0.0);
    auto y = x;
    y[4] = 5.5f;
    r = oracle::compare(y, x, 3);
    EXPECT_EQ(r.worst_row, 1);
    EXPECT_EQ(r.worst_col, 1);
    EXPECT_FALSE(r.bitwise_equal);
}

TEST(Compare, NaNHandling) {
    const double nan = std::nan("");
    EXPECT_FALSE(oracle::compare(std::vector<double> {nan}, std::vector<double> {1.0}, 1).pass());
    EXPECT_TRUE(oracle::compare(std::vector<double> {nan}, std::vector<double> {nan}, 1).pass());
}

TEST(Compare, ShapeMismatch) {
    EXPECT_THROW(oracle::compare(std::vector<double> {1, 2}, std::vector<double> {1}, 1), Error);
}

TEST(Compare, FormatReport) {
    const auto r = oracle::compare(std::vector<double> {1.5}, std::vector<double> {1.0}, 1);
    EXPECT_EQ(oracle::format_report(r),
              "max_abs=5.000e-01 max_rel=5.000e-01 worst=(0,0) bitwise=no tol=1.000e-04");
}

TEST(Tolerance, DependsOnOutputType) {
    auto s = kspec(1, 1, 2);
    EXPECT_EQ(oracle::tolerance_for(s), 1e-4);
    s.c_dtype = DType::BF16;
    EXPECT_GT(oracle::tolerance_for(s), 1.0 / 256);
}

TEST(Samplers, Bf16ValuesAreExact) {
    for (float x : oracle::bf16_exact_sampler(42, 10000)) {
        ASSERT_EQ(bf16::round_f32(x), x);
        ASSERT_GE(x, -1.0f);
        ASSERT_LE(x, 1.0f);
    }
}

TEST(Samplers, DeterministicPerSeed) {
    EXPECT_EQ(oracle::f32_uniform_sampler(5, 100), oracle::f32_uniform_sampler(5, 100));
    EXPECT_NE(oracle::f32_uniform_sampler(5, 100), oracle::f32_uniform_sampler(6, 100));
    EXPECT_EQ(oracle::bf16_exact_sampler(5, 100), oracle::bf16_exact_sampler(5, 100));
}

TEST(Samplers, UniformMoments) {
    const auto v = oracle::f32_uniform_sampler(8, 200000, 0.0f, 1.0f);
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
    double var = 0;
    for (float x : v) var += (x - mean) * (x - mean);
    var /= double(v.size());
    EXPECT_NEAR(mean, 0.5, 0.005);
    EXPECT_NEAR(var, 1.0 / 12, 0.002);
}
