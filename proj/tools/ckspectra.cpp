#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "ckspectra/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"ckspectra: spike/bulk spectral predictions for conjugate kernels and "
                 "the Monte Carlo harness that verifies them"};
    app.require_subcommand(1);

    std::string config_path;
    std::string output;
    int workers = 0;
    uint64_t seed_override = 0;
    bool have_seed = false;

    CLI::App* run = app.add_subcommand("run", "execute an experiment config");
    run->add_option("--config", config_path, "JSON experiment config")
        ->required()
        ->check(CLI::ExistingFile);
    run->add_option("--output", output, "output directory (overrides config)");
    run->add_option("--workers", workers, "worker pool size (overrides config)");
    run->add_option("--seed-override", seed_override, "replace the config seed")
        ->each([&](const std::string&) { have_seed = true; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    const char* log_env = std::getenv("CKSPECTRA_LOG");
    const std::string log_level = log_env ? log_env : "info";
    std::ofstream devnull("/dev/null");
    std::ostream& log = (log_level == "quiet") ? devnull : std::cout;

    ckspectra::RunOverrides overrides;
    if (!output.empty()) overrides.output = output;
    if (workers > 0) overrides.workers = workers;
    if (have_seed) overrides.seed = seed_override;

    return ckspectra::run_from_file(config_path, overrides, log, std::cerr);
}
