#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "nvcool/commands.hpp"
#include "nvcool/config.hpp"
#include "nvcool/errors.hpp"
#include "nvcool/version.hpp"

namespace {

constexpr const char* kSubcommands[] = {"analytic-sweep",  "gamma-sweep",      "evolve-full",
                                        "evolve-reduced",  "evolve-meanfield", "compare",
                                        "derive-params"};

constexpr const char* kDescriptions[] = {
    "stationary occupations vs drive occupation (analytic quadratic)",
    "stationary occupation vs spin damping, with the optimal-damping summary",
    "propagate the full spin (x) a (x) b master equation",
    "propagate the adiabatically eliminated spin (x) b master equation",
    "integrate the factorized number-operator rate equations",
    "full-model vs analytic stationary occupations over an (nbar_a, Gamma) grid",
    "derive system rates/couplings from physical device parameters",
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{std::string("nvcool ") + nvcool::kVersion +
                 " - cooling a mechanical mode by heating its partner through a dissipative spin"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;
    std::string profile;
    int threads = 1;

    for (std::size_t i = 0; i < std::size(kSubcommands); ++i) {
        CLI::App* sub = app.add_subcommand(kSubcommands[i], kDescriptions[i]);
        sub->add_option("--config", config_path, "JSON run configuration")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_option("--out", out_override, "output CSV path (overrides config; default stdout)");
        sub->add_option("--threads", threads, "worker threads for sweep points")
            ->check(CLI::PositiveNumber);
        sub->add_option("--profile", profile, "fill truncation defaults: ci or paper")
            ->check(CLI::IsMember({"ci", "paper"}));
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;  // 0: --help/--version; anything else is a usage error
    }

    try {
        nvcool::config::RunSpec spec = nvcool::config::load_config(config_path);
        const std::string sub = app.get_subcommands().front()->get_name();
        if (spec.mode != sub)
            throw nvcool::ConfigError("config mode '" + spec.mode + "' does not match subcommand '" +
                                      sub + "'");
        if (!out_override.empty()) spec.output = out_override;
        if (!profile.empty()) spec.profile = profile;
        spec.threads = threads;
        nvcool::config::resolve(spec);
        for (const auto& w : spec.warnings) std::cerr << "warning: " << w << "\n";

        const nvcool::table::Table t = nvcool::commands::run_command(spec);
        if (spec.output.empty())
            std::cout << t.to_csv();
        else
            std::cerr << "wrote " << spec.output << " (" << t.rows.size() << " rows)\n";
        return 0;
    } catch (const nvcool::CheckError& e) {
        std::cerr << "check failed: " << e.what() << "\n";
        return 3;
    } catch (const nvcool::NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const nvcool::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
