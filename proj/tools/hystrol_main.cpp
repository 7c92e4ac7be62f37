// Experiment runner: binds a key = value config file to one of the solver
// pipelines and writes deterministic CSV/JSON artifacts plus a manifest.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "hystrol/pipelines.hpp"

namespace {

const std::vector<std::string> kModes = {
    "solve-forward",    "solve-regularized", "adjoint-check", "gradient-check",
    "optimize",         "continuation",      "limit-diagnostics", "value-scan"};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hystrol - optimal control of reaction-diffusion systems with a scalar stop"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;

    for (const std::string& mode : kModes) {
        CLI::App* sub = app.add_subcommand(mode);
        sub->add_option("--config", config_path, "experiment config file")->required();
        sub->add_option("--out", out_dir, "output directory (default: config output.dir)");
        sub->add_option("--seed", seed, "override run.seed")->each([&](const std::string&) {
            seed_set = true;
        });
    }

    CLI11_PARSE(app, argc, argv);
    const std::string mode = app.get_subcommands().front()->get_name();

    hystrol::ExperimentConfig cfg;
    try {
        cfg = hystrol::parse_config(hystrol::read_text_file(config_path));
    } catch (const hystrol::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return hystrol::exit_config_parse;
    } catch (const hystrol::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return hystrol::exit_io_error;
    }
    if (seed_set) cfg.seed = seed;
    const std::filesystem::path out = out_dir.empty() ? cfg.output_dir : out_dir;

    try {
        return hystrol::run_pipeline(mode, cfg, out);
    } catch (const hystrol::NumericalFailure& e) {
        std::cerr << "error: " << e.what() << "\n";
        hystrol::write_failure(out, {"numerical-failure", e.what(),
                                     hystrol::exit_numerical_failure});
        return hystrol::exit_numerical_failure;
    } catch (const hystrol::InvalidInput& e) {
        std::cerr << "error: " << e.what() << "\n";
        hystrol::write_failure(out, {"registry-miss", e.what(), hystrol::exit_registry_miss});
        return hystrol::exit_registry_miss;
    } catch (const hystrol::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return hystrol::exit_io_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        hystrol::write_failure(out, {"internal", e.what(), hystrol::exit_usage});
        return hystrol::exit_usage;
    }
}
