#pragma once

#include <array>
#include <set>
#include <stdexcept>
#include <string>

#include "nhtrack/shooting.hpp"
#include "nhtrack/tracking.hpp"

namespace nhtrack::cli {

/// Bad configuration. `line` is 0 for command-line overrides.
class config_error : public std::runtime_error {
public:
    config_error(const std::string& key, int line, const std::string& message);

    const std::string& key() const { return key_; }
    int line() const { return line_; }

private:
    std::string key_;
    int line_;
};

struct ExperimentConfig {
    std::string system = particle::system_name;
    std::array<double, 5> initial_state{0.5, 0.2, 0.7, 0.5, 0.4}; // x, y, z, v1, v2

    ReferenceKind reference = ReferenceKind::constant_z_line;
    double reference_x = 1.0;
    double reference_z_offset = 1.0;
    double reference_speed = 1.0;
    std::string reference_file; // tabulated: CSV with columns t,x,y,z,v1,v2

    double T = 4.0;
    long steps = 4000;
    double epsilon = 7.0;
    double omega = 1.0;
    AdjointMode adjoint_mode = AdjointMode::derived;
    ResidualConvention residual_convention = ResidualConvention::consistent;
    bool full_transversality = true;
    NewtonConfig newton;
    std::string output_dir = ".";

    // Keys given explicitly in the file or on the command line.
    std::set<std::string> explicit_keys;
};

/// Line-oriented `key = value` text; '#' starts a comment. Unknown keys,
/// malformed values, and violated invariants throw config_error naming the
/// key and line. Omitted keys keep their defaults (the particle experiment).
ExperimentConfig parse_config(const std::string& text);

ExperimentConfig load_config(const std::string& path);

/// Sets one key as if it appeared on `line`; used for command-line flags.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value, int line = 0);

/// Cross-key invariants (epsilon > 0, T > 0, steps >= 1, ...).
void validate(const ExperimentConfig& cfg);

std::string to_string(ReferenceKind kind);
std::string to_string(AdjointMode mode);
std::string to_string(ResidualConvention convention);

/// Echo of every key in parseable form.
std::string describe(const ExperimentConfig& cfg);

AdaptedState<double> initial_state(const ExperimentConfig& cfg);
ReferenceTrajectory<double> make_reference(const ExperimentConfig& cfg);
TrackingProblem<double> make_problem(const ExperimentConfig& cfg);

} // namespace nhtrack::cli
