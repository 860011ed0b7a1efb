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
#include <iostream>

#include <CLI11.hpp>

#include "nanoforge/cli.hpp"

int main(int argc, char **argv) {
    namespace cli = nanoforge::cli;
    CLI::App app {"nanoforge: BRGEMM nanokernel generator, emulator and checker"};
    app.require_subcommand(1);

    cli::Options o;
    std::string profile, out;
    std::uint64_t seed = 0;
    int trials = 0;
    bool asm_flag = false;

    auto add_common = [&](CLI::App *sub) {
        sub->add_option("--config", o.config_path, "kernel config (JSON)")->required();
        sub->add_option("--profile", profile, "builtin ISA profile name");
        sub->add_option("--out", out, "write output to FILE");
        sub->add_option("--inject-fault", o.inject_fault, "test hook: drop-fixup | drop-accumulate");
    };
    auto *plan = app.add_subcommand("plan", "print the tiling plan");
    auto *emit = app.add_subcommand("emit", "print the generated program");
    auto *verify = app.add_subcommand("verify", "emulate and compare with the f64 reference");
    auto *report = app.add_subcommand("report", "static and dynamic instruction counts");
    for (auto *s : {plan, emit, verify, report}) add_common(s);
    emit->add_option("--format", o.format, "vir | asm")->check(CLI::IsMember({"vir", "asm"}));
    emit->add_flag("--asm", asm_flag, "same as --format asm");
    verify->add_option("--seed", seed, "base seed");
    verify->add_option("--trials", trials, "number of seeded trials");
    verify->add_flag("--cross-layout", o.cross_layout, "also run the other B layout and compare");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : cli::kConfigError;
    }

    o.command = app.get_subcommands().front()->get_name();
    if (!profile.empty()) o.profile = profile;
    if (!out.empty()) o.out = out;
    if (asm_flag) o.format = "asm";
    if (verify->count("--seed")) o.seed = seed;
    if (verify->count("--trials")) o.trials = trials;
    return cli::run(o, std::cout, std::cerr);
}
