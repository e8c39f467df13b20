#pragma once

// The generate / train / compare / report commands behind the `sud` executable.
// Each writes its artifacts plus a manifest.json with SHA-256 checksums.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sud/synth.hpp"
#include "sud/training.hpp"

namespace sud {

enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitConfig = 2,
    kExitIo = 3,
    kExitDiverged = 4,
    kExitMissingLog = 5,
};

/// Maps the library's exception types onto the documented exit codes.
int exit_code_for(const std::exception& e) noexcept;

/// Top-level config: {"seed", "dataset" | "dataset_dir", "train", "strategies"}.
/// A top-level seed (or the command-line override) replaces the section seeds.
struct ExperimentConfig {
    std::optional<std::uint64_t> seed;
    DatasetSpec dataset;
    std::optional<std::filesystem::path> dataset_dir;  ///< resolved against the config's folder
    TrainConfig train;
    std::vector<Strategy> strategies;  ///< compare only; defaults to all four

    /// Resolved snapshot; parsing it again yields the same experiment.
    nlohmann::json to_json() const;
};

/// Throws ConfigError on unknown keys, wrong types or invalid values.
ExperimentConfig parse_experiment_config(const nlohmann::json& j,
                                         const std::filesystem::path& base_dir,
                                         std::optional<std::uint64_t> seed_override);

struct CommandOptions {
    std::optional<std::filesystem::path> config;  ///< absent means all defaults
    std::filesystem::path out = "out";
    std::optional<std::uint64_t> seed;
    bool per_sample_log = false;
    std::filesystem::path run_dir;  ///< report only
};

struct CommandOutput {
    std::filesystem::path manifest;
    std::string summary;  ///< human-readable, for stderr
};

CommandOutput cmd_generate(const CommandOptions& opts);
/// RunDiverged propagates after the last good checkpoint is written to best_model.json.
CommandOutput cmd_train(const CommandOptions& opts);
CommandOutput cmd_compare(const CommandOptions& opts);
/// Writes into opts.out unless it is empty, else into <run_dir>/report.
CommandOutput cmd_report(const CommandOptions& opts);

}  // namespace sud
