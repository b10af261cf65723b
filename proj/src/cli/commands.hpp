// Subcommands of the mfnash command-line tool.

#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace mfnash::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitSolver = 3;

struct CliOptions {
    std::string config_path;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed_override;
    int threads{1};
    bool dry_run{false};
};

/// Runs every (policy, N, seed) cell and writes results.csv, coeffs/ and report.json.
int cmd_run(const CliOptions& opts);

/// Writes convergence.csv with the finite-N versus mean-field gaps.
int cmd_convergence(const CliOptions& opts);

/// Runs every self-check suite and prints one row per check.
int cmd_verify(const CliOptions& opts);

}  // namespace mfnash::cli
