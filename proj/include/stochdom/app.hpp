#pragma once

#include "stochdom/config.hpp"

#include <exception>
#include <filesystem>
#include <string>
#include <vector>

namespace stochdom {

struct RunOutcome {
    /// Emitted files relative to the output directory, manifest excluded.
    std::vector<std::string> files;
    std::vector<std::string> warnings;
};

/// Dispatches on config.mode, writes the mode's outputs and manifest.json into `out_dir`.
RunOutcome run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir);

/// Structured description of an error: {"error": kind, "message": ..., "key"/"sample_index" when known}.
std::string error_json(const std::exception& e);

/// Writes error.json plus a manifest naming it.
void write_error(const std::filesystem::path& out_dir, const std::exception& e);

/// Key of the reference run a config refers to, stable across processes.
std::string reference_cache_key(const ExperimentConfig& config);

} // namespace stochdom
