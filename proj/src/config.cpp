#include "nhtrack/cli/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "nhtrack/cli/csv.hpp"

namespace nhtrack::cli {

config_error::config_error(const std::string& key, int line, const std::string& message)
    : std::runtime_error((line > 0 ? "line " + std::to_string(line) + ": " : std::string("command line: ")) +
                         (key.empty() ? "" : "'" + key + "': ") + message),
      key_(key),
      line_(line)
{
}

namespace {

std::string trim(const std::string& s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double parse_double(const std::string& key, const std::string& text, int line)
{
    const std::string t = trim(text);
    double value = 0.0;
    const char* begin = t.data();
    const char* end = t.data() + t.size();
    if (!t.empty() && *begin == '+')
        ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (t.empty() || ec != std::errc() || ptr != end)
        throw config_error(key, line, "malformed number '" + t + "'");
    if (!std::isfinite(value))
        throw config_error(key, line, "value must be finite");
    return value;
}

long parse_long(const std::string& key, const std::string& text, int line)
{
    const std::string t = trim(text);
    long value = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
        throw config_error(key, line, "malformed integer '" + t + "'");
    return value;
}

bool parse_bool(const std::string& key, const std::string& text, int line)
{
    const std::string t = trim(text);
    if (t == "true" || t == "1" || t == "yes")
        return true;
    if (t == "false" || t == "0" || t == "no")
        return false;
    throw config_error(key, line, "expected true or false, got '" + t + "'");
}

double positive(const std::string& key, double value, int line)
{
    if (!(value > 0))
        throw config_error(key, line, "must be > 0");
    return value;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, int)>;

const std::map<std::string, Setter>& setters()
{
    static const std::map<std::string, Setter> table = {
        {"system",
         [](ExperimentConfig& c, const std::string& v, int line) {
             if (trim(v) != particle::system_name)
                 throw config_error("system", line, "unknown system '" + trim(v) + "' (available: " +
                                                        particle::system_name + ")");
             c.system = trim(v);
         }},
        {"initial_state",
         [](ExperimentConfig& c, const std::string& v, int line) {
             std::string text = v;
             for (char& ch : text)
                 if (ch == ',' || ch == ';')
                     ch = ' ';
             std::istringstream is(text);
             std::string token;
             std::vector<double> values;
             while (is >> token)
                 values.push_back(parse_double("initial_state", token, line));
             if (values.size() != 5)
                 throw config_error("initial_state", line,
                                    "expected 5 values (x y z v1 v2), got " + std::to_string(values.size()));
             std::copy(values.begin(), values.end(), c.initial_state.begin());
         }},
        {"reference",
         [](ExperimentConfig& c, const std::string& v, int line) {
             const std::string t = trim(v);
             if (t == "constant-z-line")
                 c.reference = ReferenceKind::constant_z_line;
             else if (t == "free-flow")
                 c.reference = ReferenceKind::free_flow;
             else if (t == "tabulated")
                 c.reference = ReferenceKind::tabulated;
             else
                 throw config_error("reference", line,
                                    "unknown reference kind '" + t + "' (constant-z-line, free-flow, tabulated)");
         }},
        {"reference_x",
         [](ExperimentConfig& c, const std::string& v, int line) { c.reference_x = parse_double("reference_x", v, line); }},
        {"reference_z_offset",
         [](ExperimentConfig& c, const std::string& v, int line) {
             c.reference_z_offset = parse_double("reference_z_offset", v, line);
         }},
        {"reference_speed",
         [](ExperimentConfig& c, const std::string& v, int line) {
             c.reference_speed = parse_double("reference_speed", v, line);
         }},
        {"reference_file", [](ExperimentConfig& c, const std::string& v, int) { c.reference_file = trim(v); }},
        {"T", [](ExperimentConfig& c, const std::string& v, int line) { c.T = positive("T", parse_double("T", v, line), line); }},
        {"steps",
         [](ExperimentConfig& c, const std::string& v, int line) {
             c.steps = parse_long("steps", v, line);
             if (c.steps < 1)
                 throw config_error("steps", line, "must be >= 1");
         }},
        {"epsilon",
         [](ExperimentConfig& c, const std::string& v, int line) {
             c.epsilon = parse_double("epsilon", v, line);
             if (!(c.epsilon > 0))
                 throw config_error("epsilon", line,
                                    "must be > 0; epsilon = 0 makes the optimal control problem singular");
         }},
        {"omega",
         [](ExperimentConfig& c, const std::string& v, int line) {
             c.omega = positive("omega", parse_double("omega", v, line), line);
         }},
        {"adjoint_mode",
         [](ExperimentConfig& c, const std::string& v, int line) {
             const std::string t = trim(v);
             if (t == "derived")
                 c.adjoint_mode = AdjointMode::derived;
             else if (t == "paper-literal")
                 c.adjoint_mode = AdjointMode::paper_literal;
             else
                 throw config_error("adjoint_mode", line, "expected derived or paper-literal, got '" + t + "'");
         }},
        {"residual_convention",
         [](ExperimentConfig& c, const std::string& v, int line) {
             const std::string t = trim(v);
             if (t == "consistent")
                 c.residual_convention = ResidualConvention::consistent;
             else if (t == "printed")
                 c.residual_convention = ResidualConvention::printed;
             else
                 throw config_error("residual_convention", line, "expected consistent or printed, got '" + t + "'");
         }},
        {"full_transversality",
         [](ExperimentConfig& c, const std::string& v, int line) {
             c.full_transversality = parse_bool("full_transversality", v, line);
         }},
        {"newton_tol",
         [](ExperimentConfig& c, const std::string& v, int line) {
             c.newton.tol_residual = positive("newton_tol", parse_double("newton_tol", v, line), line);
         }},
        {"newton_max_iters",
         [](ExperimentConfig& c, const std::string& v, int line) {
             const long n = parse_long("newton_max_iters", v, line);
             if (n < 1 || n > 1000000)
                 throw config_error("newton_max_iters", line, "must lie in [1, 1000000]");
             c.newton.max_iters = static_cast<int>(n);
         }},
        {"newton_fd_step",
         [](ExperimentConfig& c, const std::string& v, int line) {
             c.newton.fd_step = positive("newton_fd_step", parse_double("newton_fd_step", v, line), line);
         }},
        {"output_dir", [](ExperimentConfig& c, const std::string& v, int) { c.output_dir = trim(v); }},
    };
    return table;
}

} // namespace

void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value, int line)
{
    const auto& table = setters();
    const auto it = table.find(key);
    if (it == table.end())
        throw config_error(key, line, "unknown key");
    it->second(cfg, value, line);
    cfg.explicit_keys.insert(key);
}

ExperimentConfig parse_config(const std::string& text)
{
    ExperimentConfig cfg;
    std::istringstream is(text);
    std::string raw;
    int line = 0;
    while (std::getline(is, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (body.empty())
            continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw config_error("", line, "expected 'key = value', got '" + body + "'");
        const std::string key = trim(body.substr(0, eq));
        if (key.empty())
            throw config_error("", line, "missing key before '='");
        if (cfg.explicit_keys.count(key))
            throw config_error(key, line, "duplicate key");
        apply_setting(cfg, key, body.substr(eq + 1), line);
    }
    validate(cfg);
    return cfg;
}

ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw config_error("", 0, "cannot read config file '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return parse_config(os.str());
}

void validate(const ExperimentConfig& cfg)
{
    if (!(cfg.epsilon > 0))
        throw config_error("epsilon", 0, "must be > 0; epsilon = 0 makes the optimal control problem singular");
    if (!(cfg.T > 0) || !std::isfinite(cfg.T))
        throw config_error("T", 0, "must be finite and > 0");
    if (cfg.steps < 1)
        throw config_error("steps", 0, "must be >= 1");
    if (!(cfg.omega > 0) || !std::isfinite(cfg.omega))
        throw config_error("omega", 0, "must be finite and > 0");
    for (double x : cfg.initial_state)
        if (!std::isfinite(x))
            throw config_error("initial_state", 0, "values must be finite");
    if (cfg.reference == ReferenceKind::tabulated && cfg.reference_file.empty())
        throw config_error("reference_file", 0, "tabulated reference needs reference_file");
}

std::string to_string(ReferenceKind kind)
{
    switch (kind) {
    case ReferenceKind::constant_z_line: return "constant-z-line";
    case ReferenceKind::free_flow: return "free-flow";
    case ReferenceKind::tabulated: return "tabulated";
    }
    return "?";
}

std::string to_string(AdjointMode mode)
{
    return mode == AdjointMode::derived ? "derived" : "paper-literal";
}

std::string to_string(ResidualConvention convention)
{
    return convention == ResidualConvention::consistent ? "consistent" : "printed";
}

std::string describe(const ExperimentConfig& cfg)
{
    std::ostringstream os;
    os << "system = " << cfg.system << "\n";
    os << "initial_state =";
    for (double x : cfg.initial_state)
        os << " " << format_double(x);
    os << "\n";
    os << "reference = " << to_string(cfg.reference) << "\n";
    if (cfg.reference == ReferenceKind::constant_z_line) {
        os << "reference_x = " << format_double(cfg.reference_x) << "\n";
        os << "reference_z_offset = " << format_double(cfg.reference_z_offset) << "\n";
        os << "reference_speed = " << format_double(cfg.reference_speed) << "\n";
    }
    if (cfg.reference == ReferenceKind::tabulated)
        os << "reference_file = " << cfg.reference_file << "\n";
    os << "T = " << format_double(cfg.T) << "\n";
    os << "steps = " << cfg.steps << "\n";
    os << "epsilon = " << format_double(cfg.epsilon) << "\n";
    os << "omega = " << format_double(cfg.omega) << "\n";
    os << "adjoint_mode = " << to_string(cfg.adjoint_mode) << "\n";
    os << "residual_convention = " << to_string(cfg.residual_convention) << "\n";
    os << "full_transversality = " << (cfg.full_transversality ? "true" : "false") << "\n";
    os << "newton_tol = " << format_double(cfg.newton.tol_residual) << "\n";
    os << "newton_max_iters = " << cfg.newton.max_iters << "\n";
    os << "newton_fd_step = " << format_double(cfg.newton.fd_step) << "\n";
    return os.str();
}

AdaptedState<double> initial_state(const ExperimentConfig& cfg)
{
    AdaptedState<double> s{Vec<double>(3), Vec<double>(2)};
    const auto& x = cfg.initial_state;
    s.q << x[0], x[1], x[2];
    s.v << x[3], x[4];
    return s;
}

ReferenceTrajectory<double> make_reference(const ExperimentConfig& cfg)
{
    switch (cfg.reference) {
    case ReferenceKind::constant_z_line:
        return constant_z_line_reference(cfg.reference_x, cfg.reference_z_offset, cfg.reference_speed);
    case ReferenceKind::free_flow:
        return free_flow_reference(particle::particle_system<double>(), initial_state(cfg), cfg.T, 2 * cfg.steps);
    case ReferenceKind::tabulated: {
        Mat<double> table;
        try {
            table = read_numeric_csv(cfg.reference_file, 6);
        } catch (const io_error& e) {
            throw config_error("reference_file", 0, e.what());
        }
        try {
            return tabulated_reference<double>(table.col(0), table.rightCols(5), 3);
        } catch (const contract_error& e) {
            throw config_error("reference_file", 0, e.what());
        }
    }
    }
    throw config_error("reference", 0, "unsupported reference kind");
}

TrackingProblem<double> make_problem(const ExperimentConfig& cfg)
{
    TrackingProblem<double> prob;
    prob.sys = particle::particle_system<double>();
    prob.ref = make_reference(cfg);
    prob.epsilon = cfg.epsilon;
    prob.omega = cfg.omega;
    prob.T = cfg.T;
    prob.s0 = initial_state(cfg);
    prob.N = cfg.steps;
    prob.adjoint_mode = cfg.adjoint_mode;
    prob.residual_convention = cfg.residual_convention;
    prob.full_transversality = cfg.full_transversality;
    return prob;
}

} // namespace nhtrack::cli
