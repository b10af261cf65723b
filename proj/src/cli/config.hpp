// Experiment configuration for the command-line tool.

#pragma once

#include "mfnash/datasets.hpp"
#include "mfnash/diagnostics.hpp"
#include "mfnash/io.hpp"
#include "mfnash/sim.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mfnash::cli {

/// Raised for malformed or inconsistent configuration files.
class ConfigError : public Error {
public:
    using Error::Error;
};

struct ConvergenceSettings {
    std::vector<int> n_grid{4, 16, 64, 256};
    int paths{100};
    std::uint64_t seed{0};
    std::vector<Mat> support;  ///< two-point {0.5, 1.5} when empty
};

struct ExperimentConfig {
    GameParams game;  ///< population_N is set per cell
    DatasetSpec dataset;
    LatentSpec encoder;
    Mode mode{Mode::Game};
    int steps{0};
    std::vector<Policy> policies{Policy::Reduced};
    std::vector<int> n_grid{4};
    std::vector<std::uint64_t> seeds{0};
    AggregationConfig aggregation;
    RidgeConfig greedy;
    SpawnerConfig spawner;
    ConvergenceSettings convergence;
    std::string output_dir{"out"};
    bool dump_coeffs{true};
    bool write_runs{true};
    bool timing{false};  ///< write wall-clock runtimes into results.csv
};

/// Parses and validates a configuration document; unknown keys are rejected.
ExperimentConfig parse_config(const Json& doc);

/// Reads and parses a configuration file.
ExperimentConfig load_config(const std::string& path);

/// Scenario for one (N, dataset) cell; the dataset is generated once per config.
Scenario make_scenario(const ExperimentConfig& cfg, const Dataset& data, int N);

/// Convergence settings resolved against the game parameters and dataset.
ConvergenceConfig make_convergence(const ExperimentConfig& cfg, const Dataset& data);

}  // namespace mfnash::cli
