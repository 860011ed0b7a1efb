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

// Command implementations behind the nanoforge tool. JSON job configs in,
// text reports and exit codes out (0 pass, 1 verification failure, 2 bad or
// infeasible configuration).

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "nanoforge/codegen.hpp"
#include "nanoforge/render.hpp"
#include "nanoforge/verify.hpp"

namespace nanoforge {

struct JobConfig {
    KernelSpec spec;
    IsaProfile profile;
    bool has_profile = false;
    std::optional<std::pair<int64_t, int64_t>> tiles;
    std::uint64_t seed = 0;
    int trials = 5;
};

namespace cli {

enum Exit { kPass = 0, kVerifyFail = 1, kConfigError = 2 };

using json = nlohmann::json;

namespace detail {

[[noreturn]] inline void bad(const std::string &where, const std::string &why) {
    throw Error(ErrorKind::Config, where + ": " + why);
}

inline int64_t get_int(const json &j, const std::string &key, const std::string &where) {
    const json &v = j.at(key);
    if (!v.is_number_integer()) bad(where + "." + key, "expected an integer, got " + v.dump());
    return v.get<int64_t>();
}

inline std::string get_str(const json &j, const std::string &key, const std::string &where) {
    const json &v = j.at(key);
    if (!v.is_string()) bad(where + "." + key, "expected a string, got " + v.dump());
    return v.get<std::string>();
}

template <typename E>
E get_enum(const json &j, const std::string &key, const std::string &where,
           const std::map<std::string, E> &names) {
    const std::string s = get_str(j, key, where);
    auto it = names.find(s);
    if (it == names.end()) {
        std::string opts;
        for (const auto &[k, v] : names) opts += (opts.empty() ? "" : ", ") + k;
        bad(where + "." + key, "'" + s + "' is not one of " + opts);
    }
    return it->second;
}

inline IsaProfile parse_profile(const json &j, const std::string &where) {
    if (j.is_string()) return isa::find_profile(j.get<std::string>());
    if (!j.is_object()) bad(where, "expected a profile name or object");
    static const char *keys[] = {"name", "vector_width_bits", "vector_register_count", "features",
                                 "tile_register_count", "tile_rows_max", "tile_row_bytes_max"};
    for (const auto &[k, v] : j.items()) {
        bool known = false;
        for (const char *x : keys) known |= k == x;
        if (!known) bad(where + "." + k, "unknown key");
    }
    IsaProfile p;
    p.name = j.contains("name") ? get_str(j, "name", where) : "custom";
    if (!j.contains("vector_width_bits")) bad(where, "missing vector_width_bits");
    if (!j.contains("vector_register_count")) bad(where, "missing vector_register_count");
    p.vector_width_bits = int(get_int(j, "vector_width_bits", where));
    p.vector_register_count = int(get_int(j, "vector_register_count", where));
    if (j.contains("features")) {
        const json &f = j.at("features");
        if (!f.is_array()) bad(where + ".features", "expected an array");
        for (size_t i = 0; i < f.size(); ++i) {
            const std::string at = where + ".features[" + std::to_string(i) + "]";
            if (!f[i].is_string()) bad(at, "expected a string");
            auto feat = parse_feature(f[i].get<std::string>());
            if (!feat) bad(at, "unknown feature '" + f[i].get<std::string>() + "'");
            p.features.insert(*feat);
        }
    }
    if (j.contains("tile_register_count"))
        p.tile_register_count = int(get_int(j, "tile_register_count", where));
    if (j.contains("tile_rows_max")) p.tile_rows_max = int(get_int(j, "tile_rows_max", where));
    if (j.contains("tile_row_bytes_max"))
        p.tile_row_bytes_max = int(get_int(j, "tile_row_bytes_max", where));
    p.check();
    return p;
}

} // namespace detail

/// Parses a job config document. `where` prefixes error locations.
inline JobConfig parse_config(const std::string &text, const std::string &where = "config") {
    using namespace detail;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error &e) {
        bad(where, std::string("invalid JSON (") + e.what() + ")");
    }
    if (!j.is_object()) bad(where, "top level must be an object");
    static const char *keys[] = {"m",       "n",        "k",       "batch",   "dtype",
                                 "layout",  "vnni_factor", "beta", "epilogue", "c_dtype",
                                 "profile", "tiles",    "seed",    "trials"};
    for (const auto &[k, v] : j.items()) {
        bool known = false;
        for (const char *x : keys) known |= k == x;
        if (!known) bad(where + "." + k, "unknown key");
    }
    JobConfig c;
    KernelSpec &s = c.spec;
    for (const char *req : {"m", "n", "k"})
        if (!j.contains(req)) bad(where, std::string("missing required key '") + req + "'");
    s.m = get_int(j, "m", where);
    s.n = get_int(j, "n", where);
    s.k = get_int(j, "k", where);
    if (j.contains("batch")) s.batch = get_int(j, "batch", where);
    const std::map<std::string, DType> dtypes {{"f32", DType::F32}, {"bf16", DType::BF16}};
    if (j.contains("dtype")) s.dtype = get_enum(j, "dtype", where, dtypes);
    if (j.contains("layout"))
        s.layout = get_enum(j, "layout", where,
                            std::map<std::string, Layout> {{"flat", Layout::Flat}, {"vnni", Layout::Vnni}});
    s.vnni_factor = s.layout == Layout::Vnni ? 2 : 1;
    if (j.contains("vnni_factor")) s.vnni_factor = int(get_int(j, "vnni_factor", where));
    if (j.contains("beta")) s.beta = int(get_int(j, "beta", where));
    if (j.contains("epilogue"))
        s.epilogue = get_enum(j, "epilogue", where,
                              std::map<std::string, Epilogue> {{"none", Epilogue::None},
                                                               {"bias_relu", Epilogue::BiasRelu}});
    s.c_dtype = DType::F32;
    if (j.contains("c_dtype")) s.c_dtype = get_enum(j, "c_dtype", where, dtypes);
    try {
        s.check();
    } catch (const Error &e) {
        // "<field>: <reason>" after the kind prefix
        const std::string msg = e.what();
        bad(where, msg.substr(msg.find(": ") + 2));
    }
    if (j.contains("profile")) {
        c.profile = parse_profile(j.at("profile"), where + ".profile");
        c.has_profile = true;
    }
    if (j.contains("tiles")) {
        const json &t = j.at("tiles");
        if (!t.is_array() || t.size() != 2 || !t[0].is_number_integer() || !t[1].is_number_integer())
            bad(where + ".tiles", "expected [mb, nb]");
        c.tiles = std::pair {t[0].get<int64_t>(), t[1].get<int64_t>()};
    }
    if (j.contains("seed")) {
        const int64_t seed = get_int(j, "seed", where);
        if (seed < 0) bad(where + ".seed", "must be non-negative");
        c.seed = std::uint64_t(seed);
    }
    if (j.contains("trials")) {
        c.trials = int(get_int(j, "trials", where));
        if (c.trials <= 0) bad(where + ".trials", "must be positive");
    }
    return c;
}

inline JobConfig load_config(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Config, path + ": cannot open");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

struct Options {
    std::string command;
    std::string config_path;
    std::optional<std::string> profile;
    std::string format = "vir";
    std::optional<std::uint64_t> seed;
    std::optional<int> trials;
    std::optional<std::string> out;
    bool cross_layout = false;
    std::string inject_fault;
};

struct Job {
    JobConfig cfg;
    TilingPlan plan;
    GenerateOptions gen;
};

inline Job prepare(const Options &o, const JobConfig &cfg_in) {
    Job j {cfg_in, {}, {}};
    if (o.profile) {
        j.cfg.profile = isa::find_profile(*o.profile);
        j.cfg.has_profile = true;
    }
    if (!j.cfg.has_profile) throw Error(ErrorKind::Config, "no profile: set \"profile\" or pass --profile");
    if (o.seed) j.cfg.seed = *o.seed;
    if (o.trials) {
        if (*o.trials <= 0) throw Error(ErrorKind::Config, "--trials must be positive");
        j.cfg.trials = *o.trials;
    }
    if (o.inject_fault == "drop-fixup")
        j.gen.drop_fixup = true;
    else if (o.inject_fault == "drop-accumulate")
        j.gen.drop_accumulate = true;
    else if (!o.inject_fault.empty())
        throw Error(ErrorKind::Config, "unknown fault '" + o.inject_fault + "'");
    j.plan = tiling::choose_plan(j.cfg.spec, j.cfg.profile, j.cfg.tiles);
    return j;
}

inline std::string fmt_sci(double x) {
    std::ostringstream os;
    os << std::scientific << std::setprecision(3) << x;
    return os.str();
}

inline int cmd_plan(const Job &j, std::ostream &out) {
    out << tiling::format_plan(j.plan, j.cfg.profile);
    return kPass;
}

inline int cmd_emit(const Job &j, const std::string &format, std::ostream &out) {
    const VirProgram p = codegen::generate(j.cfg.spec, j.cfg.profile, j.plan, j.gen);
    if (format == "vir")
        out << vir::render_text(p);
    else if (format == "asm")
        out << vir::render_pseudo_asm(p);
    else
        throw Error(ErrorKind::Config, "unknown format '" + format + "' (vir or asm)");
    return kPass;
}

inline int cmd_verify(const Job &j, bool cross_layout, std::ostream &out) {
    const KernelSpec &s = j.cfg.spec;
    const VirProgram p = codegen::generate(s, j.cfg.profile, j.plan, j.gen);
    std::optional<VirProgram> other;
    bool need_bitwise = false;
    if (cross_layout) {
        if (s.dtype != DType::BF16) throw Error(ErrorKind::Config, "--cross-layout needs dtype bf16");
        KernelSpec t = s;
        t.layout = s.layout == Layout::Flat ? Layout::Vnni : Layout::Flat;
        t.vnni_factor = t.layout == Layout::Vnni ? 2 : 1;
        const TilingPlan tp = tiling::choose_plan(t, j.cfg.profile, std::pair {j.plan.mb, j.plan.nb});
        other = codegen::generate(t, j.cfg.profile, tp);
        need_bitwise = j.plan.path == LoweringPath::BF16_DOT || j.plan.path == LoweringPath::BF16_AMX;
    }
    std::ostream *trace = emu::trace_from_env() ? &std::cerr : nullptr;
    bool ok = true;
    double worst = 0.0;
    for (int t = 0; t < j.cfg.trials; ++t) {
        const std::uint64_t seed = verify::trial_seed(j.cfg.seed, t);
        const auto pr = verify::make_problem(s, seed);
        const auto got = verify::run_program(p, pr, trace);
        const auto r = oracle::compare(got, verify::reference(pr), s.n, oracle::tolerance_for(s));
        worst = std::max(worst, r.max_rel_err);
        ok &= r.pass();
        out << "trial " << t << " seed=" << seed << " " << oracle::format_report(r) << " "
            << (r.pass() ? "pass" : "fail") << "\n";
        if (other) {
            const auto got2 = verify::run_program(*other, pr, nullptr);
            const auto x = oracle::compare(got2, got, s.n, oracle::tolerance_for(s));
            const bool xok = need_bitwise ? x.bitwise_equal : x.pass();
            ok &= xok;
            out << "cross " << t << " " << to_string(other->spec->layout) << " vs "
                << to_string(s.layout) << " bitwise_equal=" << (x.bitwise_equal ? "true" : "false")
                << " max_rel=" << fmt_sci(x.max_rel_err) << " " << (xok ? "pass" : "fail") << "\n";
        }
    }
    out << "VERIFY " << (ok ? "pass" : "fail") << " max_rel=" << fmt_sci(worst)
        << " trials=" << j.cfg.trials << " path=" << to_string(j.plan.path) << "\n";
    return ok ? kPass : kVerifyFail;
}

struct CostCounts {
    int64_t compute = 0, loads = 0, stores = 0, packs = 0, shuffles = 0, converts = 0, other = 0;
    int64_t fma = 0, dot = 0, tmulf = 0;
    int64_t bytes = 0; // moved between memory and registers
};

inline void tally(CostCounts &c, const Instr &in, int64_t times) {
    const int64_t bytes = in.mem ? in.mem->count * elem_bytes(in.mem->elem) * (in.rows ? in.rows : 1) : 0;
    switch (in.op) {
        case Op::Fma: c.fma += times; c.compute += times; break;
        case Op::DotBF16: c.dot += times; c.compute += times; break;
        case Op::TMulfBF16: c.tmulf += times; c.compute += times; break;
        case Op::VLoad:
        case Op::VBcastF32:
        case Op::VBcastPairBF16:
        case Op::BcastBF16ToF32:
        case Op::EvenBF16ToF32:
        case Op::OddBF16ToF32:
        case Op::TLoad: c.loads += times; c.bytes += bytes * times; break;
        case Op::VStore:
        case Op::TStore: c.stores += times; c.bytes += bytes * times; break;
        case Op::InterleaveLo128:
        case Op::InterleaveHi128: c.packs += times; c.bytes += bytes * times; break;
        case Op::Shuffle: c.shuffles += times; break;
        case Op::CvtF32ToBF16:
        case Op::CvtBF16ToF32: c.converts += times; break;
        default: c.other += times; break;
    }
}

inline int cmd_report(const Job &j, std::ostream &out) {
    const KernelSpec &s = j.cfg.spec;
    const VirProgram p = codegen::generate(s, j.cfg.profile, j.plan, j.gen);
    CostCounts st, dy;
    vir::walk(p.body, [&](const Instr &in, int, const std::vector<const Loop *> &loops) {
        int64_t trips = 1;
        for (const Loop *l : loops) trips *= l->trip_count();
        tally(st, in, 1);
        tally(dy, in, trips);
    });
    auto row = [&](const char *name, int64_t a, int64_t b) {
        out << std::left << std::setw(12) << name << std::right << std::setw(10) << a
            << std::setw(22) << b << "\n";
    };
    out << "kernel       m=" << s.m << " n=" << s.n << " k=" << s.k << " batch=" << s.batch << " "
        << to_string(s.dtype) << " " << to_string(s.layout) << "\n";
    out << "plan         " << to_string(j.plan.path) << " mb=" << j.plan.mb << " nb=" << j.plan.nb
        << " kb=" << j.plan.kb << " " << to_string(j.plan.role) << "\n";
    out << std::left << std::setw(12) << "op" << std::right << std::setw(10) << "static"
        << std::setw(22) << "dynamic" << "\n";
    row("fma", st.fma, dy.fma);
    row("dot", st.dot, dy.dot);
    row("tmulf", st.tmulf, dy.tmulf);
    row("loads", st.loads, dy.loads);
    row("stores", st.stores, dy.stores);
    row("packs", st.packs, dy.packs);
    row("shuffles", st.shuffles, dy.shuffles);
    row("converts", st.converts, dy.converts);
    row("other", st.other, dy.other);
    const double flops = 2.0 * double(s.m) * double(s.n) * double(s.k) * double(s.batch);
    const double intensity = dy.bytes ? flops / double(dy.bytes) : 0.0;
    out << "flops        " << std::setprecision(6) << flops << "\n";
    out << "bytes        " << dy.bytes << "\n";
    out << "REPORT path=" << to_string(j.plan.path) << " fma=" << dy.fma << " dot=" << dy.dot
        << " tmulf=" << dy.tmulf << " loads=" << dy.loads << " stores=" << dy.stores
        << " packs=" << dy.packs << " shuffles=" << dy.shuffles << " bytes=" << dy.bytes
        << " intensity=" << std::fixed << std::setprecision(3) << intensity << "\n";
    out.unsetf(std::ios::floatfield);
    return kPass;
}

inline int exit_code_for(ErrorKind k) {
    return k == ErrorKind::Validation || k == ErrorKind::Emulation ? kVerifyFail : kConfigError;
}

/// Runs one command; diagnostics go to `err`.
inline int run(const Options &o, std::ostream &out, std::ostream &err) {
    try {
        const Job j = prepare(o, load_config(o.config_path));
        std::ofstream file;
        std::ostream *dst = &out;
        if (o.out) {
            file.open(*o.out);
            if (!file) throw Error(ErrorKind::Config, *o.out + ": cannot write");
            dst = &file;
        }
        if (o.command == "plan") return cmd_plan(j, *dst);
        if (o.command == "emit") return cmd_emit(j, o.format, *dst);
        if (o.command == "verify") return cmd_verify(j, o.cross_layout, *dst);
        if (o.command == "report") return cmd_report(j, *dst);
        throw Error(ErrorKind::Config, "unknown command '" + o.command + "'");
    } catch (const Error &e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::exception &e) {
        err << "error: " << e.what() << "\n";
        return kConfigError;
    }
}

} // namespace cli
} // namespace nanoforge
