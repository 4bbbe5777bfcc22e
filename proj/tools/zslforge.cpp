// SPDX-License-Identifier: Apache-2.0
//
// zslforge: experiment runner for story-conditioned zero-shot feature
// generation. One verb per invocation; every artifact lands under --out.

#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "zslforge/cli.hpp"

int main(int argc, char** argv) {
    using namespace zslforge;

    CLI::App app{"zslforge: zero-shot feature generation experiments"};
    app.require_subcommand(1, 1);

    std::string config;
    std::uint64_t seed = 0;
    std::string out;
    std::size_t runs = 0;
    bool quiet = false;
    std::string study = "world";

    app.add_option("--config", config, "JSON config file (defaults apply to missing keys)");
    auto* seed_opt = app.add_option("--seed", seed, "master seed (overrides the config)");
    auto* out_opt = app.add_option("--out", out, "output directory (overrides the config)");
    auto* runs_opt = app.add_option("--runs", runs, "repeated runs (overrides the config; default 10)")->check(CLI::PositiveNumber);
    app.add_flag("--quiet", quiet, "print nothing on success");

    for (const auto& verb : cli::verbs()) {
        auto* sub = app.add_subcommand(verb);
        sub->fallthrough();
        if (verb == "synthbench") {
            sub->add_option("--study", study, "world | generators | richness | convergence")->check(CLI::IsMember(cli::studies()));
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        nlohmann::json rec{{"tool", "zslforge"}, {"status", "error"}, {"error", "UsageError"}, {"message", e.what()}};
        std::cerr << rec.dump() << "\n";
        return 2;
    }
    const std::string verb = app.get_subcommands().front()->get_name();

    try {
        cli::Overrides o;
        if (!config.empty()) o.config_path = config;
        if (seed_opt->count()) o.seed = seed;
        if (out_opt->count()) o.out = out;
        if (runs_opt->count()) o.runs = runs;
        const io::ExperimentConfig cfg = cli::resolve_config(o);
        const cli::CommandResult r = cli::run_command(verb, cfg, study);
        if (!quiet) {
            std::cout << verb << ": " << r.summary << "\n";
            for (const auto& a : r.artifacts) std::cout << "  " << a.string() << "\n";
        }
        return EXIT_SUCCESS;
    } catch (const std::exception& e) {
        std::cerr << cli::error_record(verb, e).dump() << "\n";
        return 2;
    }
}
