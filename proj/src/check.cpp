// Runtime invariant suite behind `nhtrack check`. Sample points come from a
// Halton sequence, so the suite is deterministic without any RNG.

#include <cmath>
#include <filesystem>
#include <sstream>

#include "nhtrack/cli/commands.hpp"
#include "nhtrack/cli/csv.hpp"
#include "nhtrack/particle.hpp"
#include "nhtrack/shooting.hpp"

namespace nhtrack::cli {

namespace {

using particle::particle_system;

double halton(int index, int base)
{
    double f = 1.0, r = 0.0;
    for (int i = index; i > 0; i /= base) {
        f /= base;
        r += f * (i % base);
    }
    return r;
}

/// Point i of a 5 or 10 dimensional Halton sequence mapped to [-half, half]^dim.
Vec<double> sample_box(int i, Index dim, double half)
{
    static const int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
    Vec<double> x(dim);
    for (Index d = 0; d < dim; ++d)
        x(d) = half * (2.0 * halton(i + 1, primes[d]) - 1.0);
    return x;
}

std::string sci(double x)
{
    std::ostringstream os;
    os.precision(3);
    os << std::scientific << x;
    return os.str();
}

class Suite {
public:
    void add(const std::string& name, bool ok, const std::string& detail) { results_.push_back({name, ok, detail}); }

    void bound(const std::string& name, double value, double limit)
    {
        add(name, value <= limit, sci(value) + " <= " + sci(limit));
    }

    template <typename F>
    void guarded(const std::string& name, F&& body)
    {
        try {
            body();
        } catch (const std::exception& e) {
            add(name, false, std::string("threw: ") + e.what());
        }
    }

    std::vector<CheckResult> take() { return std::move(results_); }

private:
    std::vector<CheckResult> results_;
};

Vec<double> flat(const AdaptedState<double>& s)
{
    Vec<double> x(5);
    x << s.q, s.v;
    return x;
}

AdaptedState<double> start_state()
{
    AdaptedState<double> s{Vec<double>(3), Vec<double>(2)};
    s.q << 0.5, 0.2, 0.7;
    s.v << 0.5, 0.4;
    return s;
}

TrackingProblem<double> particle_problem()
{
    TrackingProblem<double> prob;
    prob.sys = particle_system<double>();
    prob.ref = constant_z_line_reference(1.0, 1.0, 1.0);
    prob.s0 = start_state();
    return prob;
}

void geometry_checks(Suite& suite)
{
    const auto sys = particle_system<double>();
    suite.guarded("geom: frame annihilation", [&] {
        double worst = 0;
        for (int i = 0; i < 200; ++i) {
            const Vec<double> x = sample_box(i, 5, 3.0);
            const AdaptedState<double> s{x.head(3), x.tail(2)};
            worst = std::max(worst, constraint_residual(sys, s.q, admissible_velocity(sys, s)).cwiseAbs().maxCoeff());
        }
        suite.bound("geom: frame annihilation", worst, 1e-12);
    });
    suite.guarded("geom: quadratic in v", [&] {
        double worst = 0;
        for (int i = 0; i < 200; ++i) {
            const Vec<double> x = sample_box(i, 5, 3.0);
            const AdaptedState<double> s{x.head(3), x.tail(2)};
            const AdaptedState<double> s2{x.head(3), 2.0 * x.tail(2)};
            worst = std::max(worst, (nh_acceleration(sys, s2) - 4.0 * nh_acceleration(sys, s)).cwiseAbs().maxCoeff());
        }
        suite.add("geom: quadratic in v", worst == 0.0, "max |a(2v) - 4 a(v)| = " + sci(worst));
    });
    suite.guarded("geom: additive control", [&] {
        double worst = 0;
        for (int i = 0; i < 200; ++i) {
            const Vec<double> x = sample_box(i, 7, 3.0);
            const AdaptedState<double> s{x.head(3), x.segment(3, 2)};
            const Control<double> u{x.tail(2)};
            const Vec<double> diff =
                controlled_acceleration(sys, s, u) - controlled_acceleration(sys, s, Control<double>{Vec<double>::Zero(2)});
            worst = std::max(worst, (diff - u.u).cwiseAbs().maxCoeff());
        }
        suite.bound("geom: additive control", worst, 1e-15);
    });
    suite.guarded("geom: abelian structure", [&] {
        const SymbolArray<double> zero(2, Mat<double>::Zero(2, 2));
        double worst = 0;
        for (const auto& g : christoffel_from_structure(zero))
            worst = std::max(worst, g.cwiseAbs().maxCoeff());
        suite.add("geom: abelian structure", worst == 0.0, "Gamma(C = 0) max = " + sci(worst));
    });
    suite.guarded("geom: metric inverse", [&] {
        double worst = 0;
        for (int i = 0; i < 200; ++i) {
            const Vec<double> q = sample_box(i, 3, 5.0);
            const Mat<double> g = sys.metric.g(q);
            worst = std::max(worst, (g * sys.metric.g_inv(q) - Mat<double>::Identity(2, 2)).cwiseAbs().maxCoeff());
            worst = std::max(worst, (g - g.transpose()).cwiseAbs().maxCoeff());
        }
        suite.bound("geom: metric inverse", worst, 1e-12);
    });
}

void particle_checks(Suite& suite)
{
    const auto sys = particle_system<double>();
    const AdaptedState<double> s0 = start_state();
    const VectorField<double> field = free_vector_field(sys);

    suite.guarded("particle: first integrals", [&] {
        const Trajectory<double> traj = integrate(field, 0.0, flat(s0), 4.0, 4000);
        const double e0 = particle::restricted_energy(s0);
        double v1_drift = 0, e_drift = 0;
        for (Index i = 0; i < traj.states.rows(); ++i) {
            const Vec<double> x = traj.state(i);
            v1_drift = std::max(v1_drift, std::abs(x(3) - s0.v(0)));
            e_drift = std::max(e_drift, std::abs(particle::restricted_energy<double>({x.head(3), x.tail(2)}) - e0) / e0);
        }
        suite.bound("particle: v1 conserved", v1_drift, 1e-12);
        suite.bound("particle: energy conserved (relative)", e_drift, 1e-10);
    });

    suite.guarded("particle: reduced vs unreduced", [&] {
        const Trajectory<double> reduced = integrate(field, 0.0, flat(s0), 4.0, 40000);
        const VectorField<double> ambient{6, [](double, const Vec<double>& x) {
                                              return particle::flatten(
                                                  particle::unreduced_field(particle::unflatten_ambient(x)));
                                          }};
        const Trajectory<double> full = integrate(ambient, 0.0, particle::flatten(particle::embed(s0)), 4.0, 40000);
        double gap = 0, drift = 0;
        for (Index i = 0; i < full.states.rows(); ++i) {
            const auto a = particle::unflatten_ambient<double>(full.state(i));
            drift = std::max(drift, std::abs(particle::ambient_constraint_residual(a)));
            gap = std::max(gap, (flat(particle::project(a)) - reduced.state(i)).cwiseAbs().maxCoeff());
        }
        suite.bound("particle: reduced vs unreduced", gap, 1e-6);
        suite.bound("particle: ambient constraint drift", drift, 1e-10);
    });

    suite.guarded("particle: singular branch continuity", [&] {
        auto near = particle::analytic_constants(s0);
        near.c1 = 1e-8;
        auto singular = near;
        singular.c1 = 0.0;
        double gap = 0;
        for (int i = 0; i <= 400; ++i) {
            const double t = 0.01 * i;
            gap = std::max(gap, (flat(particle::analytic_flow(near, t)) - flat(particle::analytic_flow(singular, t)))
                                    .cwiseAbs()
                                    .maxCoeff());
        }
        suite.bound("particle: singular branch continuity", gap, 1e-5);
    });

    suite.guarded("particle: closed form solves the ODE", [&] {
        const auto p = particle::analytic_constants(s0);
        const double h = 1e-6;
        double worst = 0;
        for (int i = 1; i < 400; ++i) {
            const double t = 0.01 * i;
            const Vec<double> d =
                (flat(particle::analytic_flow(p, t + h)) - flat(particle::analytic_flow(p, t - h))) / (2 * h);
            worst = std::max(worst,
                             (d - particle::reduced_field<double>(flat(particle::analytic_flow(p, t)))).cwiseAbs().maxCoeff());
        }
        suite.bound("particle: closed form solves the ODE", worst, 1e-6);
    });

    suite.guarded("particle: embed/project round trip", [&] {
        double worst = 0;
        for (int i = 0; i < 200; ++i) {
            const Vec<double> x = sample_box(i, 5, 3.0);
            const AdaptedState<double> s{x.head(3), x.tail(2)};
            worst = std::max(worst, (flat(particle::project(particle::embed(s))) - x).cwiseAbs().maxCoeff());
        }
        suite.add("particle: embed/project round trip", worst == 0.0, "max deviation " + sci(worst));
    });
}

void integrate_checks(Suite& suite)
{
    const auto sys = particle_system<double>();
    const AdaptedState<double> s0 = start_state();
    const VectorField<double> field = free_vector_field(sys);
    const auto params = particle::analytic_constants(s0);
    const std::function<Vec<double>(double)> oracle = [&](double t) { return flat(particle::analytic_flow(params, t)); };

    suite.guarded("integrate: closed-form agreement", [&] {
        const Trajectory<double> traj = integrate(field, 0.0, flat(s0), 4.0, 4000);
        double err = 0;
        for (Index i = 0; i < traj.states.rows(); ++i)
            err = std::max(err, (traj.state(i) - oracle(traj.times(i))).cwiseAbs().maxCoeff());
        suite.bound("integrate: closed-form agreement", err, 1e-9);
        // In double the error is already at roundoff by N = 1000, so the slope is taken in long double.
        const auto sys_ld = particle_system<long double>();
        AdaptedState<long double> s0_ld{s0.q.cast<long double>(), s0.v.cast<long double>()};
        const auto params_ld = particle::analytic_constants(s0_ld);
        Vec<long double> x0_ld(5);
        x0_ld << s0_ld.q, s0_ld.v;
        const long double order = convergence_order(
            free_vector_field(sys_ld),
            [&](long double t) {
                const auto s = particle::analytic_flow(params_ld, t);
                Vec<long double> x(5);
                x << s.q, s.v;
                return x;
            },
            0.0L, x0_ld, 4.0L, {500, 1000, 2000, 4000});
        suite.add("integrate: convergence order", order >= 3.8L && order <= 4.2L,
                  "order " + sci(static_cast<double>(order)) + " (long double)");
    });

    suite.guarded("integrate: cubic exactness", [&] {
        const VectorField<double> cubic{1, [](double t, const Vec<double>&) {
                                            return Vec<double>::Constant(1, 3 * t * t - 2 * t + 0.5);
                                        }};
        const Trajectory<double> traj = integrate(cubic, 0.0, Vec<double>::Constant(1, 1.0), 4.0, 4000);
        double err = 0;
        for (Index i = 0; i < traj.states.rows(); ++i) {
            const double t = traj.times(i);
            err = std::max(err, std::abs(traj.states(i, 0) - (1.0 + t * t * t - t * t + 0.5 * t)));
        }
        suite.bound("integrate: cubic exactness", err, 1e-12);
        suite.add("integrate: grid endpoint", traj.times(4000) == 4.0, "t_N = " + format_double(traj.times(4000)));
    });

    suite.guarded("integrate: determinism", [&] {
        const Trajectory<double> a = integrate(field, 0.0, flat(s0), 4.0, 1000);
        const Trajectory<double> b = integrate(field, 0.0, flat(s0), 4.0, 1000);
        suite.add("integrate: determinism", a.states == b.states && a.times == b.times, "bitwise comparison");
    });
}

void tracking_checks(Suite& suite)
{
    const auto sys = particle_system<double>();
    const double eps = 7.0;

    suite.guarded("pmp: stationarity", [&] {
        double worst = 0;
        for (int i = 0; i < 200; ++i) {
            const Vec<double> mu = sample_box(i, 2, 1.0);
            const Costate<double> p{Vec<double>::Zero(3), mu};
            worst = std::max(worst, hamiltonian_control_gradient(p, stationary_control(p, eps), eps).cwiseAbs().maxCoeff());
        }
        suite.bound("pmp: stationarity", worst, 1e-15);
    });

    suite.guarded("pmp: adjoint = -grad H", [&] {
        double worst = 0;
        const double h = 1e-6;
        for (int i = 0; i < 100; ++i) {
            const Vec<double> z = sample_box(i, 10, 2.0);
            const Vec<double> rv = sample_box(i + 500, 5, 2.0);
            const AdaptedState<double> s{z.head(3), z.segment(3, 2)};
            const Costate<double> p{z.segment(5, 3), z.tail(2)};
            const ReferenceSample<double> r{rv.head(3), rv.tail(2)};
            const Control<double> u = stationary_control(p, eps);
            Vec<double> grad(5);
            for (Index j = 0; j < 5; ++j) {
                Vec<double> plus = flat(s), minus = flat(s);
                plus(j) += h;
                minus(j) -= h;
                grad(j) = (hamiltonian<double>(sys, {plus.head(3), plus.tail(2)}, p, u, r, eps) -
                           hamiltonian<double>(sys, {minus.head(3), minus.tail(2)}, p, u, r, eps)) /
                          (2 * h);
            }
            const Costate<double> d = adjoint_field(sys, s, p, r, eps, AdjointMode::derived);
            Vec<double> adj(5);
            adj << d.lambda, d.mu;
            worst = std::max(worst, (adj + grad).cwiseAbs().maxCoeff() / grad.cwiseAbs().maxCoeff());
        }
        suite.bound("pmp: adjoint = -grad H", worst, 1e-5);
    });

    suite.guarded("pmp: constraint invariance", [&] {
        const TrackingProblem<double> prob = particle_problem();
        Vec<double> alpha(5);
        alpha << 0.3, -0.2, 0.1, 0.5, -0.4;
        const Trajectory<double> traj = rollout(prob, alpha);
        double worst = 0;
        for (Index i = 0; i < traj.states.rows(); ++i) {
            const Vec<double> x = traj.state(i);
            const auto a = particle::embed<double>({x.head(3), x.segment(3, 2)});
            worst = std::max(worst, std::abs(particle::ambient_constraint_residual(a)));
        }
        suite.bound("pmp: constraint invariance", worst, 1e-12);
    });

    suite.guarded("pmp: residual smoothness", [&] {
        TrackingProblem<double> prob = particle_problem();
        prob.N = 1000;
        const ResidualFunction<double> res = [&](const Vec<double>& a) { return shooting_residual(a, prob); };
        Vec<double> alpha(5);
        alpha << 0.1, 0.2, -0.1, 0.3, 0.2;
        const Mat<double> j5 = fd_jacobian(res, alpha, 1e-5);
        const Mat<double> j6 = fd_jacobian(res, alpha, 1e-6);
        const double rel = (j5 - j6).cwiseAbs().maxCoeff() / j6.cwiseAbs().maxCoeff();
        suite.bound("pmp: residual smoothness", rel, 1e-3);
    });

    suite.guarded("pmp: zero-error fixed point", [&] {
        TrackingProblem<double> prob = particle_problem();
        prob.ref = free_flow_reference(prob.sys, prob.s0, prob.T, 2 * prob.N);
        const Vec<double> res = shooting_residual(Vec<double>(Vec<double>::Zero(5)), prob);
        suite.bound("pmp: zero-error fixed point", res.cwiseAbs().maxCoeff(), 1e-9);
    });
}

void shooting_checks(Suite& suite)
{
    suite.guarded("shoot: particle experiment", [&] {
        const TrackingProblem<double> prob = particle_problem();
        const ShootingReport rep = solve_tracking(prob, Vec<double>::Zero(5));
        suite.add("shoot: particle experiment converges", rep.converged,
                  std::to_string(rep.iterations) + " iterations, residual " + sci(rep.residual_norms.back()));
        bool monotone = true;
        for (std::size_t i = 1; i < rep.residual_norms.size(); ++i)
            monotone = monotone && rep.residual_norms[i] < rep.residual_norms[i - 1];
        suite.add("shoot: monotone residual", monotone, std::to_string(rep.residual_norms.size()) + " norms");
        const double again = shooting_residual(rep.alpha_star, prob).cwiseAbs().maxCoeff();
        suite.bound("shoot: solution re-verifies", again, NewtonConfig{}.tol_residual);
    });
}

void csv_checks(Suite& suite)
{
    suite.guarded("cli: csv round trip", [&] {
        CsvTable t;
        const Index rows = 7;
        t.times = Vec<double>::LinSpaced(rows, 0.0, 1.0 / 3.0);
        t.state = Mat<double>(rows, 5);
        t.controls = Mat<double>(rows, 2);
        t.costates = Mat<double>(rows, 5);
        t.reference = Mat<double>(rows, 5);
        for (Index i = 0; i < rows; ++i) {
            t.state.row(i) = sample_box(static_cast<int>(i), 5, 1e3).transpose();
            t.controls.row(i) = sample_box(static_cast<int>(i) + 50, 2, 1e-7).transpose();
            t.costates.row(i) = sample_box(static_cast<int>(i) + 100, 5, 17.0).transpose();
            t.reference.row(i) = sample_box(static_cast<int>(i) + 150, 5, 0.1).transpose();
        }
        const auto path = std::filesystem::temp_directory_path() / "nhtrack_check_roundtrip.csv";
        write_csv(t, path.string());
        const CsvTable back = read_csv(path.string());
        std::filesystem::remove(path);
        const bool exact = back.times == t.times && back.state == t.state && back.controls == t.controls &&
                           back.costates == t.costates && back.reference == t.reference;
        suite.add("cli: csv round trip", exact, "bitwise comparison");
    });
}

} // namespace

std::vector<CheckResult> run_checks()
{
    Suite suite;
    geometry_checks(suite);
    particle_checks(suite);
    integrate_checks(suite);
    tracking_checks(suite);
    shooting_checks(suite);
    csv_checks(suite);
    return suite.take();
}

} // namespace nhtrack::cli
