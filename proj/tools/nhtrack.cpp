// nhtrack <simulate|analytic|track|check> --config PATH [--out DIR] [--T x] [--epsilon x] [--omega x] [--steps n]

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "nhtrack/cli/commands.hpp"
#include "nhtrack/cli/config.hpp"
#include "nhtrack/cli/csv.hpp"

namespace {

constexpr const char* description =
    "Optimal trajectory tracking for the nonholonomic particle by indirect single shooting.\n"
    "\n"
    "Commands:\n"
    "  simulate   uncontrolled reduced flow (RK4)        -> simulate.csv\n"
    "  analytic   closed-form uncontrolled flow           -> analytic.csv\n"
    "  track      solve the tracking problem from alpha=0 -> track.csv, report.txt, plot.gp\n"
    "  check      run the built-in invariant suite\n"
    "\n"
    "The config file holds 'key = value' lines ('#' comments). Omitted keys default to the\n"
    "particle experiment: initial_state = 0.5 0.2 0.7 0.5 0.4, reference = constant-z-line\n"
    "(x_r = 1, z = t + 1, v = (0, 1)), T = 4, steps = 4000, epsilon = 7, and omega = 1.\n"
    "NOTE: the terminal weight omega defaults to 1. The terminal costate conditions default to\n"
    "lambda(T) = omega (q - q_r), mu(T) = 2 omega (v - v_r); set full_transversality = false for mu(T) = 0.\n"
    "\n"
    "Exit status: 0 success, 1 config error, 2 no convergence (or failed checks), 3 internal error.\n"
    "NHTRACK_SEEDLESS is accepted and ignored; nothing here uses random numbers.";

} // namespace

int main(int argc, char** argv)
{
    using namespace nhtrack::cli;

    CLI::App app{description, "nhtrack"};
    std::string command;
    std::string config_path;
    std::optional<std::string> out_dir, T, epsilon, omega, steps;
    app.add_option("command", command, "simulate | analytic | track | check")->required();
    app.add_option("--config", config_path, "configuration file")->required();
    app.add_option("--out", out_dir, "output directory (overrides output_dir)");
    app.add_option("--T", T, "horizon (overrides T)");
    app.add_option("--epsilon", epsilon, "control regularization, > 0 (overrides epsilon)");
    app.add_option("--omega", omega, "terminal weight, default 1 (overrides omega)");
    app.add_option("--steps", steps, "RK4 steps (overrides steps)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_success : exit_config_error;
    }

    try {
        const Command cmd = parse_command(command);
        ExperimentConfig cfg = load_config(config_path);
        const std::pair<const char*, const std::optional<std::string>&> overrides[] = {
            {"output_dir", out_dir}, {"T", T}, {"epsilon", epsilon}, {"omega", omega}, {"steps", steps}};
        for (const auto& [key, value] : overrides)
            if (value)
                apply_setting(cfg, key, *value);
        return run(cmd, cfg, std::cout, std::cerr);
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_internal_error;
    }
}
