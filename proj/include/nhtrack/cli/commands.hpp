#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "nhtrack/cli/config.hpp"

namespace nhtrack::cli {

enum ExitCode : int {
    exit_success = 0,
    exit_config_error = 1,
    exit_not_converged = 2,
    exit_internal_error = 3,
};

enum class Command { simulate, analytic, track, check };

Command parse_command(const std::string& name);

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Every module invariant, evaluated on the particle.
std::vector<CheckResult> run_checks();

/// Writes output files into cfg.output_dir and returns the exit status.
/// `out` receives the human-readable summary, `err` warnings and diagnostics.
int run(Command command, const ExperimentConfig& cfg, std::ostream& out, std::ostream& err);

} // namespace nhtrack::cli
