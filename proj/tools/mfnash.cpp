// Command-line entry point for the mfnash subcommands.

#include "cli/commands.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

int main(int argc, char** argv) {
    CLI::App app{"Mean-field Nash prediction experiments"};
    app.require_subcommand(1);
    app.fallthrough();

    mfnash::cli::CliOptions opts;
    std::string out;
    std::uint64_t seed = 0;
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "Only log warnings and errors");

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        auto* c = cmd->add_option("--config", opts.config_path, "Experiment configuration (JSON)");
        if (needs_config) c->required()->check(CLI::ExistingFile);
        cmd->add_option("--out", out, "Output directory (overrides output_dir)");
        cmd->add_option("--seed-override", seed, "Run a single seed instead of the configured list");
        cmd->add_option("--threads", opts.threads, "Worker threads for the cell grid")->check(CLI::PositiveNumber);
        cmd->add_flag("--dry-run", opts.dry_run, "Validate the configuration and print the work grid");
    };
    auto* run = app.add_subcommand("run", "Run every (policy, N, seed) cell");
    auto* conv = app.add_subcommand("convergence", "Tabulate finite-N versus mean-field gaps");
    auto* verify = app.add_subcommand("verify", "Run the built-in invariant and oracle suites");
    add_common(run, true);
    add_common(conv, true);
    add_common(verify, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : mfnash::cli::kExitConfig;
    }

    spdlog::set_level(quiet ? spdlog::level::warn : spdlog::level::info);
    for (auto* cmd : {run, conv, verify}) {
        if (cmd->count("--out")) opts.out_dir = out;
        if (cmd->count("--seed-override")) opts.seed_override = seed;
    }

    if (*run) return mfnash::cli::cmd_run(opts);
    if (*conv) return mfnash::cli::cmd_convergence(opts);
    return mfnash::cli::cmd_verify(opts);
}
