#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

#include <json.hpp>

namespace ckspectra {

inline constexpr const char* kVersion = "0.1.0";

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

enum class Mode { PredictDeep, SimulateDeep, PredictTrained, SimulateTrained, Density };

Mode mode_from_string(const std::string& s);
std::string mode_to_string(Mode m);

struct ExperimentConfig {
    Mode mode = Mode::Density;
    nlohmann::json block;      // the mode-specific parameter block
    std::string output = "out";
    int workers = 1;
    uint64_t seed = 1;
    nlohmann::json raw;        // canonical config (after seed override)
};

/// Parses and validates; throws ConfigError on any problem, before any
/// artifact is written.
ExperimentConfig parse_config(const nlohmann::json& j);

struct RunOverrides {
    std::optional<std::string> output;
    std::optional<int> workers;
    std::optional<uint64_t> seed;
};

/// Executes the configured experiment and writes report.json, CSV artifacts
/// and manifest.json into the output directory. Computation happens fully
/// before the first file is created.
void run_experiment(const ExperimentConfig& cfg, std::ostream& log);

/// Convenience wrapper: load file, apply overrides, run. Returns the exit
/// code contract of the CLI: 0 ok, 2 validation error, 3 solver failure.
int run_from_file(const std::string& config_path, const RunOverrides& overrides,
                  std::ostream& log, std::ostream& err);

}  // namespace ckspectra
