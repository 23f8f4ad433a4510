#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <iostream>
#include <json.hpp>
#include <string>

#include "fiberspec/runner.hpp"

namespace {

int dispatch(const std::string& subcommand, const std::string& config_path) {
    fiberspec::RunConfig cfg = fiberspec::parse_config(config_path);
    for (const auto& line : cfg.defaults_applied) {
        std::cout << "default applied: " << line << "\n";
    }
    fiberspec::Runner runner(std::move(cfg));
    const fiberspec::RunArtifacts out = runner.run(subcommand);
    std::cout << out.summary << "\n";
    for (const auto& file : out.files) {
        std::cout << "wrote " << file.string() << "\n";
    }
    if (!out.failures.empty()) {
        nlohmann::ordered_json j;
        j["config_hash"] = runner.config_hash();
        j["failures"] = out.failures;
        std::cout << j.dump() << "\n";
    }
    return out.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spectral laboratory for the fixed-momentum fiber Hamiltonian of an electron "
                 "coupled to a discretized transverse photon field"};
    app.require_subcommand(1);

    std::string config_path;
    const std::pair<const char*, const char*> commands[] = {
        {"ground", "solve one momentum point and run its identity reports"},
        {"dispersion", "tabulate E(xi) over the configured momentum grid"},
        {"ir-sweep", "lower the infrared cutoff and fit the soft-photon growth"},
        {"check", "run the full identity suite and emit a pass/fail report"},
        {"dump-modes", "write the discretized mode table for grid audits"},
    };
    for (const auto& [name, description] : commands) {
        auto* sub = app.add_subcommand(name, description);
        sub->add_option("config", config_path, "run configuration file")
            ->required()
            ->check(CLI::ExistingFile);
    }

    CLI11_PARSE(app, argc, argv);

    const std::string subcommand = app.get_subcommands().front()->get_name();
    try {
        return dispatch(subcommand, config_path);
    } catch (const fiberspec::ConfigError& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 3;
    }
}
