#include "nhtrack/cli/commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "nhtrack/cli/csv.hpp"
#include "nhtrack/particle.hpp"
#include "nhtrack/shooting.hpp"

namespace nhtrack::cli {

namespace fs = std::filesystem;

Command parse_command(const std::string& name)
{
    if (name == "simulate")
        return Command::simulate;
    if (name == "analytic")
        return Command::analytic;
    if (name == "track")
        return Command::track;
    if (name == "check")
        return Command::check;
    throw config_error("", 0, "unknown command '" + name + "' (simulate, analytic, track, check)");
}

namespace {

Mat<double> reference_columns(const ReferenceTrajectory<double>& ref, const Vec<double>& times)
{
    Mat<double> out(times.size(), 5);
    for (Index i = 0; i < times.size(); ++i) {
        const ReferenceSample<double> r = ref(times(i));
        out.row(i) << r.q.transpose(), r.v.transpose();
    }
    return out;
}

CsvTable state_table(const Vec<double>& times, const Mat<double>& states, const ReferenceTrajectory<double>& ref)
{
    CsvTable t;
    t.times = times;
    t.state = states;
    t.controls = Mat<double>::Zero(times.size(), 2);
    t.costates = Mat<double>::Zero(times.size(), 5);
    t.reference = reference_columns(ref, times);
    return t;
}

fs::path prepare_output_dir(const ExperimentConfig& cfg)
{
    const fs::path dir = cfg.output_dir.empty() ? fs::path(".") : fs::path(cfg.output_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw io_error("cannot create output directory '" + dir.string() + "': " + ec.message());
    return dir;
}

void warn_ignored_keys(Command command, const ExperimentConfig& cfg, std::ostream& err)
{
    if (command == Command::track)
        return;
    for (const char* key : {"epsilon", "omega", "adjoint_mode", "residual_convention", "full_transversality",
                            "newton_tol", "newton_max_iters", "newton_fd_step"})
        if (cfg.explicit_keys.count(key))
            err << "warning: '" << key << "' has no effect on this command\n";
}

int run_simulate(const ExperimentConfig& cfg, std::ostream& out)
{
    const auto sys = particle::particle_system<double>();
    const AdaptedState<double> s0 = initial_state(cfg);
    Vec<double> x0(5);
    x0 << s0.q, s0.v;
    const Trajectory<double> traj = integrate(free_vector_field(sys), 0.0, x0, cfg.T, cfg.steps);
    const fs::path path = prepare_output_dir(cfg) / "simulate.csv";
    write_csv(state_table(traj.times, traj.states, make_reference(cfg)), path.string());
    out << "simulate: " << traj.steps() << " RK4 steps over [0, " << format_double(cfg.T) << "] -> " << path.string()
        << "\n";
    return exit_success;
}

int run_analytic(const ExperimentConfig& cfg, std::ostream& out)
{
    const auto params = particle::analytic_constants(initial_state(cfg));
    const double h = cfg.T / static_cast<double>(cfg.steps);
    Vec<double> times(cfg.steps + 1);
    Mat<double> states(cfg.steps + 1, 5);
    for (Index i = 0; i <= cfg.steps; ++i) {
        times(i) = i == cfg.steps ? cfg.T : static_cast<double>(i) * h;
        const AdaptedState<double> s = particle::analytic_flow(params, times(i));
        states.row(i) << s.q.transpose(), s.v.transpose();
    }
    const fs::path path = prepare_output_dir(cfg) / "analytic.csv";
    write_csv(state_table(times, states, make_reference(cfg)), path.string());
    out << "analytic: closed-form flow with c1 = " << format_double(params.c1) << ", c2 = " << format_double(params.c2)
        << " -> " << path.string() << "\n";
    return exit_success;
}

void write_plot_script(const fs::path& path)
{
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os)
        throw io_error("cannot open '" + path.string() + "' for writing");
    os << "# gnuplot -persist plot.gp\n"
          "set datafile separator ','\n"
          "set key autotitle columnhead\n"
          "set xlabel 't'\n"
          "set multiplot layout 3,3\n";
    const char* names[] = {"x", "y", "z", "v1", "v2"};
    for (int i = 0; i < 5; ++i)
        os << "set title '" << names[i] << "'\nplot 'track.csv' using 1:" << (i + 2) << " with lines, '' using 1:"
           << (i + 14) << " with lines dt 2\n";
    os << "set title 'u1'\nplot 'track.csv' using 1:7 with lines\n";
    os << "set title 'u2'\nplot 'track.csv' using 1:8 with lines\n";
    os << "unset multiplot\n";
    if (!os)
        throw io_error("write to '" + path.string() + "' failed");
}

int run_track(const ExperimentConfig& cfg, std::ostream& out)
{
    const TrackingProblem<double> prob = make_problem(cfg);
    const ShootingReport rep = solve_tracking(prob, Vec<double>::Zero(5), cfg.newton);
    const fs::path dir = prepare_output_dir(cfg);

    const Trajectory<double>& traj = rep.trajectory;
    CsvTable table;
    table.times = traj.times;
    table.state = traj.states.leftCols(5);
    table.controls = rep.controls;
    table.costates = traj.states.rightCols(5);
    table.reference = reference_columns(prob.ref, traj.times);
    write_csv(table, (dir / "track.csv").string());
    write_plot_script(dir / "plot.gp");

    const Vec<double> start_err = (table.state.row(0) - table.reference.row(0)).transpose().cwiseAbs();
    const Index last = traj.times.size() - 1;
    const Vec<double> end_err = (table.state.row(last) - table.reference.row(last)).transpose().cwiseAbs();
    const double free_cost = uncontrolled_cost(prob);
    const double final_residual = rep.residual_norms.back();

    std::ostringstream rpt;
    rpt << "# nhtrack track report\n\n[config]\n" << describe(cfg) << "\n[convergence]\n";
    rpt << "converged = " << (rep.converged ? "true" : "false") << "\n";
    if (rep.stalled)
        rpt << "stalled = true\n";
    rpt << "iterations = " << rep.iterations << "\n";
    rpt << "final_residual_inf = " << format_double(final_residual) << "\n";
    rpt << "alpha_star =";
    for (Index i = 0; i < rep.alpha_star.size(); ++i)
        rpt << " " << format_double(rep.alpha_star(i));
    rpt << "\nresidual_history =";
    for (double r : rep.residual_norms)
        rpt << " " << format_double(r);
    rpt << "\n\n[cost]\n";
    rpt << "J = " << format_double(rep.cost) << "\n";
    rpt << "J_uncontrolled = " << format_double(free_cost) << "\n";
    rpt << "terminal_constraint_r = " << format_double(end_err.squaredNorm()) << "\n\n[errors]\n";
    const char* names[] = {"x", "y", "z", "v1", "v2"};
    for (int i = 0; i < 5; ++i)
        rpt << names[i] << ": initial = " << format_double(start_err(i)) << ", terminal = " << format_double(end_err(i))
            << "\n";
    rpt << "max_abs_control = " << format_double(rep.controls.cwiseAbs().maxCoeff()) << "\n";

    const fs::path report_path = dir / "report.txt";
    std::ofstream os(report_path, std::ios::binary | std::ios::trunc);
    if (!os || !(os << rpt.str()))
        throw io_error("cannot write '" + report_path.string() + "'");

    out << "track: converged=" << (rep.converged ? "true" : "false") << " iterations=" << rep.iterations
        << " residual=" << format_double(final_residual) << " J=" << format_double(rep.cost) << "\n";
    out << "wrote " << (dir / "track.csv").string() << ", " << report_path.string() << ", " << (dir / "plot.gp").string()
        << "\n";
    return rep.converged ? exit_success : exit_not_converged;
}

int run_check(std::ostream& out)
{
    const std::vector<CheckResult> results = run_checks();
    std::size_t width = 0;
    for (const auto& r : results)
        width = std::max(width, r.name.size());
    int failed = 0;
    for (const auto& r : results) {
        out << (r.passed ? "PASS  " : "FAIL  ") << std::left << std::setw(static_cast<int>(width)) << r.name << "  "
            << r.detail << "\n";
        failed += r.passed ? 0 : 1;
    }
    out << results.size() - static_cast<std::size_t>(failed) << "/" << results.size() << " checks passed\n";
    return failed == 0 ? exit_success : exit_not_converged;
}

} // namespace

int run(Command command, const ExperimentConfig& cfg, std::ostream& out, std::ostream& err)
{
    try {
        validate(cfg);
        warn_ignored_keys(command, cfg, err);
        switch (command) {
        case Command::simulate: return run_simulate(cfg, out);
        case Command::analytic: return run_analytic(cfg, out);
        case Command::track: return run_track(cfg, out);
        case Command::check: return run_check(out);
        }
    } catch (const config_error& e) {
        err << "config error: " << e.what() << "\n";
        return exit_config_error;
    } catch (const singular_problem_error& e) {
        err << "config error: " << e.what() << "\n";
        return exit_config_error;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_internal_error;
    }
    return exit_internal_error;
}

} // namespace nhtrack::cli
