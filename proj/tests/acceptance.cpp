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
// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <sys/wait.h>

#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "nanoforge.hpp"

using namespace nanoforge;

namespace {

constexpr double kRelTol = 1e-4;
constexpr int kInstancesPerGenerator = 5;
constexpr double kMinZeroFraction = 0.30;
constexpr int kRoundTripShapes = 100;
constexpr int kTieSamples = 10000;

struct Outcome {
    bool ok = true;
    std::string detail;
};

struct Check {
    Outcome &o;
    void expect(bool cond, const std::string &what) {
        if (!cond && o.ok) o.detail = what;
        o.ok &= cond;
    }
};

KernelSpec kspec(int64_t m, int64_t n, int64_t k, DType dt, Layout l, int64_t batch = 1, int beta = 0) {
    KernelSpec s;
    s.m = m;
    s.n = n;
    s.k = k;
    s.batch = batch;
    s.dtype = dt;
    s.layout = l;
    s.vnni_factor = l == Layout::Vnni ? 2 : 1;
    s.beta = beta;
    return s;
}

struct Generator {
    std::string profile;
    LoweringPath path;
    DType dtype;
    Layout layout;
};

// Every path x layout generator, with the builtin profile that selects it.
std::vector<Generator> generators() {
    return {
        {"avx512", LoweringPath::FP32, DType::F32, Layout::Flat},
        {"avx512dot", LoweringPath::BF16_DOT, DType::BF16, Layout::Flat},
        {"avx512dot", LoweringPath::BF16_DOT, DType::BF16, Layout::Vnni},
        {"amx512", LoweringPath::BF16_AMX, DType::BF16, Layout::Flat},
        {"amx512", LoweringPath::BF16_AMX, DType::BF16, Layout::Vnni},
        {"avx2pack", LoweringPath::BF16_AVX2PACK, DType::BF16, Layout::Flat},
        {"avx2pack", LoweringPath::BF16_AVX2PACK, DType::BF16, Layout::Vnni},
        {"generic256", LoweringPath::BF16_FALLBACK, DType::BF16, Layout::Flat},
        {"generic256", LoweringPath::BF16_FALLBACK, DType::BF16, Layout::Vnni},
    };
}

std::string gen_name(const Generator &g) {
    return std::string(to_string(g.path)) + "/" + to_string(g.layout);
}

std::string shape_name(const KernelSpec &s) {
    std::ostringstream os;
    os << s.m << "x" << s.n << "x" << s.k << " batch " << s.batch << " beta " << s.beta;
    return os.str();
}

// ---------------------------------------------------------------------------

Outcome budgets() {
    Outcome o;
    Check c {o};
    using tiling::register_cost;
    const auto A = OperandRole::BroadcastA, B = OperandRole::BroadcastB;
    c.expect(register_cost(LoweringPath::FP32, A, Layout::Flat, 4, 96, 16).total == 29, "(4,96,16) != 29");
    c.expect(register_cost(LoweringPath::FP32, A, Layout::Flat, 3, 32, 8).total == 16, "(3,32,8) != 16");
    c.expect(register_cost(LoweringPath::BF16_AVX2PACK, A, Layout::Vnni, 3, 24, 8).total == 13,
             "(3,24,8) != 13");
    c.expect(register_cost(LoweringPath::BF16_AVX2PACK, A, Layout::Vnni, 4, 24, 8).total == 17,
             "(4,24,8) standard != 17");
    c.expect(register_cost(LoweringPath::BF16_AVX2PACK, B, Layout::Vnni, 4, 24, 8).total == 16,
             "(4,24,8) swapped != 16");
    c.expect(register_cost(LoweringPath::BF16_DOT, A, Layout::Flat, 4, 96, 16).total == 30,
             "flat dot (4,96,16) != 30");
    c.expect(tiling::plan_amx(32, 32, 32, isa::find_profile("amx512")).total() == 8, "AMX (32,32,32) != 8 tiles");
    const auto s = kspec(8, 48, 16, DType::BF16, Layout::Vnni);
    const auto plan = tiling::choose_plan(s, isa::find_profile("avx2pack"), std::pair<int64_t, int64_t> {4, 24});
    c.expect(plan.role == B && plan.budget.total == 16, "choose_plan does not swap roles for (4,24)");
    o.detail = o.ok ? "29 16 13 17/16 30 8" : o.detail;
    return o;
}

Outcome no_spill() {
    Outcome o;
    Check c {o};
    int programs = 0;
    for (const auto &prof : isa::builtin_profiles())
        for (DType dt : {DType::F32, DType::BF16})
            for (Layout layout : {Layout::Flat, Layout::Vnni}) {
                if (dt == DType::F32 && layout == Layout::Vnni) continue;
                const LoweringPath path = isa::select_path(prof, dt);
                const int lanes = tiling::fp32_lanes(prof);
                std::vector<TilingPlan> plans;
                if (path == LoweringPath::BF16_AMX) {
                    for (int64_t mb : {16, 32})
                        for (int64_t nb : {16, 32}) {
                            const auto s = kspec(mb, nb, 64, dt, layout);
                            try {
                                plans.push_back(tiling::detail::make_amx_plan(s, prof, mb, nb));
                            } catch (const Error &) {
                            }
                        }
                } else {
                    for (int64_t mb = 1; mb <= 8; ++mb)
                        for (int j = 1; j <= 8; ++j) {
                            if (tiling::pairs_chunks(path, layout) && j % 2) continue;
                            for (auto role : {OperandRole::BroadcastA, OperandRole::BroadcastB}) {
                                const auto s = kspec(mb, j * lanes, 8, dt, layout);
                                auto p = tiling::detail::make_vector_plan(s, path, role, mb, j * lanes, lanes);
                                if (p.budget.total <= prof.vector_register_count) plans.push_back(p);
                            }
                        }
                }
                for (const auto &plan : plans)
                    for (int beta : {0, 1})
                        for (Epilogue ep : {Epilogue::None, Epilogue::BiasRelu}) {
                            auto s = kspec(plan.mb, plan.nb, path == LoweringPath::BF16_AMX ? 64 : 8, dt,
                                           layout, 2, beta);
                            s.epilogue = ep;
                            auto plan_s = plan;
                            if (path == LoweringPath::BF16_AMX) plan_s.amx_aux_vregs = tiling::amx_aux_vregs(s);
                            const auto prog = codegen::generate(s, prof, plan_s);
                            ++programs;
                            const std::string where = prof.name + " " + to_string(path) + "/" +
                                                      to_string(layout) + " mb=" + std::to_string(plan.mb) +
                                                      " nb=" + std::to_string(plan.nb);
                            c.expect(vir::validate(prog).empty(), where + " fails validation");
                            if (path == LoweringPath::BF16_AMX) {
                                c.expect(int(vir::registers_used(prog, RegClass::Tile).size()) == plan.budget.total,
                                         where + " tile count differs from budget");
                                c.expect(int(vir::registers_used(prog, RegClass::Vector).size()) <=
                                             plan_s.amx_aux_vregs,
                                         where + " uses more auxiliary vector registers than planned");
                            } else {
                                c.expect(int(vir::registers_used(prog, RegClass::Vector).size()) ==
                                             plan.budget.total,
                                         where + " register count differs from budget");
                            }
                        }
            }
    if (o.ok) o.detail = std::to_string(programs) + " programs";
    return o;
}

Outcome oracle_equivalence() {
    Outcome o;
    Check c {o};
    std::mt19937_64 rng(20260101);
    const int64_t dims[] = {16, 32, 64};
    const int64_t batches[] = {1, 2, 4};
    int runs = 0, redraws = 0;
    double worst = 0;
    for (const auto &g : generators()) {
        const auto prof = isa::find_profile(g.profile);
        int done = 0;
        while (done < kInstancesPerGenerator) {
            auto s = kspec(dims[rng() % 3], dims[rng() % 3], dims[rng() % 3], g.dtype, g.layout,
                           batches[rng() % 3], int(rng() % 2));
            TilingPlan plan;
            try {
                plan = tiling::choose_plan(s, prof);
            } catch (const Error &) {
                ++redraws;
                continue;
            }
            const auto prog = codegen::generate(s, prof, plan);
            const auto pr = verify::make_problem(s, rng());
            const auto r = oracle::compare(verify::run_program(prog, pr), verify::reference(pr), s.n, kRelTol);
            worst = std::max(worst, r.max_rel_err);
            c.expect(r.pass(), gen_name(g) + " " + shape_name(s) + " " + oracle::format_report(r));
            ++done;
            ++runs;
        }
    }
    if (o.ok) {
        std::ostringstream os;
        os << runs << " instances over 9 generators, " << redraws << " infeasible draws redrawn, max_rel="
           << worst;
        o.detail = os.str();
    }
    return o;
}

Outcome cross_layout() {
    Outcome o;
    Check c {o};
    int pairs = 0;
    for (const auto &[profile, bitwise] : std::vector<std::pair<std::string, bool>> {
             {"avx512dot", true}, {"amx512", true}, {"avx2pack", false}, {"generic256", false}})
        for (auto [m, n, k, batch, beta] : std::vector<std::array<int64_t, 5>> {
                 {32, 32, 32, 1, 0}, {32, 64, 64, 2, 1}, {64, 32, 64, 4, 0}}) {
            const auto prof = isa::find_profile(profile);
            const auto sf = kspec(m, n, k, DType::BF16, Layout::Flat, batch, int(beta));
            const auto sv = kspec(m, n, k, DType::BF16, Layout::Vnni, batch, int(beta));
            const auto pf = tiling::choose_plan(sf, prof);
            const auto pv = tiling::choose_plan(sv, prof, std::pair {pf.mb, pf.nb});
            const auto gf = codegen::generate(sf, prof, pf);
            const auto gv = codegen::generate(sv, prof, pv);
            for (std::uint64_t seed : {1, 2}) {
                const auto pr = verify::make_problem(sf, seed * 7919 + m + n + k);
                const auto r = oracle::compare(verify::run_program(gf, pr), verify::run_program(gv, pr), n, kRelTol);
                const std::string where = profile + " " + shape_name(sf);
                if (bitwise)
                    c.expect(r.bitwise_equal, where + " not bitwise equal: " + oracle::format_report(r));
                else
                    c.expect(r.pass(), where + " " + oracle::format_report(r));
                ++pairs;
            }
        }
    if (o.ok) o.detail = std::to_string(pairs) + " flat/vnni pairs (DOT, AMX bitwise; AVX2PACK, FALLBACK 1e-4)";
    return o;
}

// Word-gather definition of punpck{l,h}wd on one 128-bit lane at a time.
std::vector<std::uint16_t> gather_interleave(const std::vector<std::uint16_t> &a,
                                             const std::vector<std::uint16_t> &b, bool high) {
    std::vector<std::uint16_t> r(a.size());
    for (size_t i = 0; i < a.size(); ++i) {
        const size_t lane = i / 8, j = i % 8;
        const size_t src = lane * 8 + (high ? 4 : 0) + j / 2;
        r[i] = (j % 2 == 0) ? a[src] : b[src];
    }
    return r;
}

Outcome packing_correctness() {
    Outcome o;
    Check c {o};
    std::vector<std::uint16_t> flat(16);
    for (int i = 0; i < 16; ++i) flat[i] = std::uint16_t(i);
    const auto p = packing::pack_vnni(flat, 4, 4, 2);
    const std::vector<std::uint16_t> want {0, 4, 1, 5, 2, 6, 3, 7, 8, 12, 9, 13, 10, 14, 11, 15};
    c.expect(p.k_outer == 2 && p.n == 4 && p.data == want, "4x4 example differs");

    std::mt19937 rng(99);
    for (int t = 0; t < kRoundTripShapes; ++t) {
        const int64_t k = 2 * (1 + rng() % 32), n = 1 + rng() % 64;
        std::vector<std::uint16_t> m(k * n);
        for (auto &x : m) x = std::uint16_t(rng());
        c.expect(packing::unpack_vnni(packing::pack_vnni(m, k, n, 2)) == m,
                 "round trip fails for " + std::to_string(k) + "x" + std::to_string(n));
    }

    int vectors = 0;
    for (int words : {8, 32}) {
        // Distinct tags in every position cover every output slot's source.
        std::vector<std::uint16_t> a(words), b(words);
        for (int i = 0; i < words; ++i) {
            a[i] = std::uint16_t(i);
            b[i] = std::uint16_t(0x8000 | i);
        }
        for (int t = 0; t < 1000; ++t) {
            if (t > 0)
                for (int i = 0; i < words; ++i) {
                    a[i] = std::uint16_t(rng());
                    b[i] = std::uint16_t(rng());
                }
            c.expect(packing::interleave_lo128(a, b) == gather_interleave(a, b, false),
                     "interleave_lo128 differs at " + std::to_string(words * 16) + " bits");
            c.expect(packing::interleave_hi128(a, b) == gather_interleave(a, b, true),
                     "interleave_hi128 differs at " + std::to_string(words * 16) + " bits");
            ++vectors;
        }
    }
    if (o.ok) o.detail = "4x4 example, " + std::to_string(kRoundTripShapes) + " round trips, " +
                         std::to_string(vectors) + " interleave vector pairs at 128/512 bits";
    return o;
}

Outcome fixup_necessity() {
    Outcome o;
    Check c {o};
    int programs = 0;
    for (const auto &g : generators()) {
        if (g.layout != Layout::Flat || !tiling::pairs_chunks(g.path, g.layout)) continue;
        const auto prof = isa::find_profile(g.profile);
        for (int beta : {0, 1}) {
            const auto s = kspec(32, 64, 32, g.dtype, g.layout, 2, beta);
            const auto plan = tiling::choose_plan(s, prof);
            const auto pr = verify::make_problem(s, 4242 + beta);
            GenerateOptions drop;
            drop.drop_fixup = true;
            const auto with = verify::check(codegen::generate(s, prof, plan), pr);
            const auto without = verify::check(codegen::generate(s, prof, plan, drop), pr);
            c.expect(with.pass(), gen_name(g) + " with shuffle: " + oracle::format_report(with));
            c.expect(!without.pass(), gen_name(g) + " still passes without the shuffle");
            ++programs;
        }
    }
    if (o.ok) o.detail = std::to_string(programs) + " flat vector-path programs: pass with shuffle, fail without";
    return o;
}

std::uint16_t rne_oracle(float x) {
    // Nearest of the two bracketing BF16 values in binary64, ties to the even one.
    const std::uint32_t bits = std::bit_cast<std::uint32_t>(x);
    const std::uint16_t down = std::uint16_t(bits >> 16), up = std::uint16_t(down + 1);
    if ((bits & 0xFFFF) == 0) return down;
    // past the largest finite value the upper neighbour is infinity
    if ((up & 0x7F80) == 0x7F80) return (bits & 0xFFFF) > 0x8000 || ((bits & 0xFFFF) == 0x8000 && (down & 1)) ? up : down;
    const double v = x, dd = std::fabs(v - double(bf16::to_f32(down))),
                 du = std::fabs(double(bf16::to_f32(up)) - v);
    if (dd != du) return dd < du ? down : up;
    return (down & 1) ? up : down;
}

Outcome bf16_numerics() {
    Outcome o;
    Check c {o};
    int patterns = 0;
    for (std::uint32_t b = 0; b <= 0xFFFF; ++b) {
        const auto h = std::uint16_t(b);
        const bool signaling = bf16::is_nan(h) && !(h & 0x0040);
        if (signaling) continue;
        c.expect(bf16::from_f32(bf16::to_f32(h)) == h, "round trip fails for pattern " + std::to_string(b));
        ++patterns;
    }
    std::mt19937 rng(7);
    int ties = 0;
    while (ties < kTieSamples) {
        const std::uint32_t hi = rng() & 0xFFFF;
        if ((hi & 0x7F80) == 0x7F80) continue;
        const float x = std::bit_cast<float>(hi << 16 | 0x8000);
        const auto want = rne_oracle(x);
        if ((want & 0x7F80) == 0x7F80) continue;
        c.expect(bf16::from_f32(x) == want, "tie rounding differs for " + std::to_string(hi));
        ++ties;
    }
    if (o.ok) o.detail = std::to_string(patterns) + " patterns round-trip, " + std::to_string(ties) + " ties";
    return o;
}

Outcome structure() {
    Outcome o;
    Check c {o};
    {
        const auto s = kspec(32, 32, 32, DType::BF16, Layout::Vnni, 3);
        const auto prof = isa::find_profile("amx512");
        const auto p = codegen::generate(s, prof, tiling::choose_plan(s, prof));
        const Loop *br = vir::find_loop(p.body, "i_br");
        c.expect(br && br->trip_count() == 3, "AMX batch loop missing");
        const int64_t tload = vir::count_instructions(p, Op::TLoad, "i_br");
        const int64_t tmulf = vir::count_instructions(p, Op::TMulfBF16, "i_br");
        c.expect(tload == 4 && tmulf == 4, "AMX batch body has " + std::to_string(tload) + " TLOAD, " +
                                                std::to_string(tmulf) + " TMULF");
    }
    for (auto [mb, nb] : std::vector<std::pair<int64_t, int64_t>> {{4, 64}, {2, 96}, {8, 32}}) {
        const auto s = kspec(16, 192, 32, DType::BF16, Layout::Vnni);
        const auto prof = isa::find_profile("avx512dot");
        const auto plan = tiling::choose_plan(s, prof, std::pair {mb, nb});
        const auto p = codegen::generate(s, prof, plan);
        const int64_t cc = nb / plan.lanes;
        const bool ok = vir::count_instructions(p, Op::VBcastPairBF16, "i_k") == mb &&
                        vir::count_instructions(p, Op::VLoad, "i_k") == cc &&
                        vir::count_instructions(p, Op::DotBF16, "i_k") == mb * cc &&
                        vir::find_loop(p.body, "i_k")->step == 2;
        c.expect(ok, "dot VNNI body shape wrong for mb=" + std::to_string(mb) + " nb=" + std::to_string(nb));
    }
    {
        const auto s = kspec(8, 48, 32, DType::BF16, Layout::Vnni);
        const auto prof = isa::find_profile("avx2pack");
        const auto p = codegen::generate(s, prof, tiling::choose_plan(s, prof, std::pair<int64_t, int64_t> {4, 24}));
        std::vector<int> dsts;
        vir::walk(vir::find_loop(p.body, "i_k")->body, [&](const Instr &in, int, const auto &) {
            if (in.op == Op::Fma) dsts.push_back(in.dst.id);
        });
        const std::set<int> first(dsts.begin(), dsts.begin() + std::min<size_t>(12, dsts.size()));
        const std::set<int> second(dsts.begin() + std::min<size_t>(12, dsts.size()), dsts.end());
        const std::set<int> v0_11 {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
        c.expect(dsts.size() == 24 && first == v0_11 && second == v0_11,
                 "AVX2 packed body does not run two FMA rounds over v0-v11");
        c.expect(vir::registers_used(p, RegClass::Vector).size() == 16, "AVX2 packed program not at 16 registers");
    }
    if (o.ok) o.detail = "AMX 4 TLOAD + 4 TMULF, dot mb/c/mb*c, AVX2 two rounds over v0-v11";
    return o;
}

Outcome epilogue_fusion() {
    Outcome o;
    Check c {o};
    double worst = 0, zero_frac = 0;
    for (const auto &g : generators()) {
        const auto prof = isa::find_profile(g.profile);
        for (int beta : {0, 1}) {
            auto s = kspec(32, 64, 32, g.dtype, g.layout, 2, beta);
            s.epilogue = Epilogue::BiasRelu;
            const auto prog = codegen::generate(s, prof, tiling::choose_plan(s, prof));
            const auto pr = verify::make_problem(s, 77 + beta);
            const auto r = verify::check(prog, pr);
            worst = std::max(worst, r.max_rel_err);
            c.expect(r.pass() && r.tolerance == kRelTol, gen_name(g) + " bias+relu: " + oracle::format_report(r));
        }
    }
    {
        auto s = kspec(32, 64, 32, DType::BF16, Layout::Vnni, 2);
        s.epilogue = Epilogue::BiasRelu;
        const auto prof = isa::find_profile("avx512dot");
        const auto prog = codegen::generate(s, prof, tiling::choose_plan(s, prof));
        auto pr = verify::make_problem(s, 2026);
        pr.bias = oracle::f32_uniform_sampler(5150, s.n, -8.0f, 2.0f);
        const auto got = verify::run_program(prog, pr);
        const auto r = oracle::compare(got, verify::reference(pr), s.n, kRelTol);
        int zeros = 0;
        for (float x : got) zeros += x == 0.0f && !std::signbit(x);
        zero_frac = double(zeros) / double(got.size());
        c.expect(r.pass(), "negative-heavy instance: " + oracle::format_report(r));
        c.expect(zero_frac >= kMinZeroFraction && zero_frac < 1.0,
                 "zero fraction " + std::to_string(zero_frac) + " outside [0.30, 1)");
    }
    if (o.ok) {
        std::ostringstream os;
        os << "18 programs max_rel=" << worst << ", negative-heavy zeros=" << zero_frac;
        o.detail = os.str();
    }
    return o;
}

int sh(const std::string &args) {
    const std::string cmd = std::string(NANOFORGE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome cli_contract() {
    Outcome o;
    Check c {o};
    const std::string dir = NANOFORGE_CONFIG_DIR;
    const int pass = sh("verify --config " + dir + "/fp32_avx512.json");
    const int corrupt = sh("verify --inject-fault drop-fixup --config " + dir + "/bf16_flat_dot.json");
    const int nondiv = sh("plan --config " + dir + "/nondivisible.json");
    c.expect(pass == 0, "pass case exited " + std::to_string(pass));
    c.expect(corrupt == 1, "corrupted program exited " + std::to_string(corrupt));
    c.expect(nondiv == 2, "NonDivisible case exited " + std::to_string(nondiv));
    const auto tmp = std::filesystem::temp_directory_path();
    const std::string e1 = (tmp / "nanoforge_accept_emit1.txt").string();
    const std::string e2 = (tmp / "nanoforge_accept_emit2.txt").string();
    for (const char *cfg : {"bf16_vnni_amx.json", "bf16_flat_dot.json"}) {
        c.expect(sh("emit --config " + dir + "/" + cfg + " --out " + e1) == 0, "emit failed");
        c.expect(sh("emit --config " + dir + "/" + cfg + " --out " + e2) == 0, "emit failed");
        const auto a = slurp(e1), b = slurp(e2);
        c.expect(!a.empty() && a == b, std::string("emit output differs across runs for ") + cfg);
    }
    if (o.ok) o.detail = "exit 0/1/2, emit byte-identical";
    return o;
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria {
        {"register budget table", budgets},
        {"no-spill soundness", no_spill},
        {"oracle equivalence", oracle_equivalence},
        {"cross-layout equality", cross_layout},
        {"packing correctness", packing_correctness},
        {"fixup necessity", fixup_necessity},
        {"bf16 numerics", bf16_numerics},
        {"kernel body structure", structure},
        {"epilogue fusion", epilogue_fusion},
        {"cli contract", cli_contract},
    };
    int failed = 0;
    for (size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception &e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failed += !o.ok;
        std::printf("%s %2zu %-24s %6.2fs  %s\n", o.ok ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), secs,
                    o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
