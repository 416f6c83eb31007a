#include "doctest.h"

#include <cmath>
#include <random>

#include "nhtrack/particle.hpp"
#include "nhtrack/tracking.hpp"

using namespace nhtrack;
namespace pt = nhtrack::particle;

namespace {

AdaptedState<double> state(double x, double y, double z, double v1, double v2)
{
    AdaptedState<double> s{Vec<double>(3), Vec<double>(2)};
    s.q << x, y, z;
    s.v << v1, v2;
    return s;
}

Vec<double> vec(std::initializer_list<double> xs)
{
    Vec<double> v(static_cast<Index>(xs.size()));
    Index i = 0;
    for (double x : xs)
        v(i++) = x;
    return v;
}

TrackingProblem<double> particle_problem()
{
    TrackingProblem<double> prob;
    prob.sys = pt::particle_system<double>();
    prob.ref = constant_z_line_reference(1.0, 1.0, 1.0);
    prob.s0 = state(0.5, 0.2, 0.7, 0.5, 0.4);
    return prob;
}

// -dH/d(q, v) by central differences with u held fixed.
Costate<double> fd_costate_rate(const NonholonomicSystem<double>& sys,
                                const AdaptedState<double>& s,
                                const Costate<double>& p,
                                const Control<double>& u,
                                const ReferenceSample<double>& r,
                                double eps)
{
    const double h = 1e-6;
    Costate<double> d{Vec<double>(3), Vec<double>(2)};
    for (Index j = 0; j < 5; ++j) {
        auto plus = s, minus = s;
        (j < 3 ? plus.q(j) : plus.v(j - 3)) += h;
        (j < 3 ? minus.q(j) : minus.v(j - 3)) -= h;
        const double g = -(hamiltonian(sys, plus, p, u, r, eps) - hamiltonian(sys, minus, p, u, r, eps)) / (2 * h);
        (j < 3 ? d.lambda(j) : d.mu(j - 3)) = g;
    }
    return d;
}

double relative_gap(const Costate<double>& a, const Costate<double>& b)
{
    Vec<double> va(5), vb(5);
    va << a.lambda, a.mu;
    vb << b.lambda, b.mu;
    return (va - vb).cwiseAbs().maxCoeff() / std::max(1.0, vb.cwiseAbs().maxCoeff());
}

} // namespace

TEST_CASE("running and terminal cost")
{
    const auto s = state(1, 2, 3, 4, 5);
    const ReferenceSample<double> r{vec({1, 2, 3}), vec({4, 5})};
    CHECK(running_cost(s, r, Control<double>{vec({1, 2})}, 7.0) == doctest::Approx(17.5));
    CHECK(running_cost(state(1, 2, 3, 4, 6), r, Control<double>{vec({0, 0})}, 7.0) == doctest::Approx(0.5));
    CHECK(running_cost(s, r, Control<double>{vec({0.1, 0})}, 10.0) == doctest::Approx(0.05));
    CHECK(terminal_cost(state(1.1, 2, 3, 4, 5.3), r) == doctest::Approx(0.1));
    CHECK_THROWS_AS(running_cost(s, r, Control<double>{vec({0, 0})}, 0.0), contract_error);
}

TEST_CASE("Hamiltonian at a hand-computed point")
{
    const auto sys = pt::particle_system<double>();
    const auto s = state(0, 0.2, 0, 0.5, 0.4);
    const Costate<double> p{vec({1, 1, 1}), vec({1, 1})};
    const ReferenceSample<double> r{vec({0, 0.2, 0}), vec({0.5, 0.4})};
    const Control<double> u{vec({0, 0})};
    // lambda . qdot = -0.08 + 0.5 + 0.4; mu . vdot = -0.2/1.04 * 0.2
    const double expected = 0.82 - 0.2 / 1.04 * 0.2;
    CHECK(hamiltonian(sys, s, p, u, r, 7.0) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("stationary control")
{
    const Costate<double> p{vec({0, 0, 0}), vec({-7, 14})};
    const auto u = stationary_control(p, 7.0);
    CHECK(u.u == vec({1, -2}));
    CHECK(hamiltonian_control_gradient(p, u, 7.0).isZero(0.0));
    CHECK_THROWS_AS(stationary_control(p, 0.0), singular_problem_error);
    CHECK_THROWS_AS(stationary_control(p, -1.0), singular_problem_error);

    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> unit(-1, 1);
    for (int i = 0; i < 1000; ++i) {
        const Costate<double> q{vec({0, 0, 0}), vec({unit(rng), unit(rng)})};
        const double eps = 7.0;
        CHECK(hamiltonian_control_gradient(q, stationary_control(q, eps), eps).cwiseAbs().maxCoeff() <= 1e-15);
    }
}

TEST_CASE("derived adjoint is minus the Hamiltonian gradient")
{
    const auto sys = pt::particle_system<double>();
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> box(-2, 2);
    double worst = 0;
    for (int i = 0; i < 100; ++i) {
        const auto s = state(box(rng), box(rng), box(rng), box(rng), box(rng));
        const Costate<double> p{vec({box(rng), box(rng), box(rng)}), vec({box(rng), box(rng)})};
        const ReferenceSample<double> r{vec({box(rng), box(rng), box(rng)}), vec({box(rng), box(rng)})};
        const double eps = 7.0;
        const auto u = stationary_control(p, eps);
        const auto derived = adjoint_field(sys, s, p, r, eps, AdjointMode::derived);
        worst = std::max(worst, relative_gap(derived, fd_costate_rate(sys, s, p, u, r, eps)));
    }
    CHECK(worst <= 1e-5);
}

TEST_CASE("paper-literal adjoint fails the gradient check")
{
    const auto sys = pt::particle_system<double>();
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> box(-2, 2);
    int failures = 0;
    for (int i = 0; i < 100; ++i) {
        const auto s = state(box(rng), box(rng), box(rng), box(rng), box(rng));
        const Costate<double> p{vec({box(rng), box(rng), box(rng)}), vec({box(rng), box(rng)})};
        const ReferenceSample<double> r{vec({box(rng), box(rng), box(rng)}), vec({box(rng), box(rng)})};
        const auto u = stationary_control(p, 7.0);
        const auto literal = adjoint_field(sys, s, p, r, 7.0, AdjointMode::paper_literal);
        if (relative_gap(literal, fd_costate_rate(sys, s, p, u, r, 7.0)) > 1e-5)
            ++failures;
    }
    CHECK(failures > 90);

    // The failing terms, one at a time, at y = 0.5, v = (1, 1), lambda = 0, mu = (0, 1), r = s.
    const auto s = state(0, 0.5, 0, 1, 1);
    const Costate<double> p{vec({0, 0, 0}), vec({0, 1})};
    const ReferenceSample<double> r{s.q, s.v};
    const auto literal = adjoint_field(sys, s, p, r, 7.0, AdjointMode::paper_literal);
    const auto derived = adjoint_field(sys, s, p, r, 7.0, AdjointMode::derived);
    const double gp = pt::coupling_derivative(0.5); // (1 - y^2)/(1 + y^2)^2 = 0.48
    const double g = pt::coupling(0.5);             // 0.4
    // lambda2dot: derived +mu2 v1 v2 g'; literal -eps mu2 v1 v2 g'
    CHECK(derived.lambda(1) == doctest::Approx(gp));
    CHECK(literal.lambda(1) == doctest::Approx(-7.0 * gp));
    // mu1dot: derived +mu2 g v2; literal -mu2 g v2
    CHECK(derived.mu(0) == doctest::Approx(g));
    CHECK(literal.mu(0) == doctest::Approx(-g));
    // mu2dot: derived +mu2 g v1; literal -mu2 g v1
    CHECK(derived.mu(1) == doctest::Approx(g));
    CHECK(literal.mu(1) == doctest::Approx(-g));
    // lambda1, lambda3 agree.
    CHECK(derived.lambda(0) == literal.lambda(0));
    CHECK(derived.lambda(2) == literal.lambda(2));
}

TEST_CASE("coupled field slope at the experiment start")
{
    const auto prob = particle_problem();
    Vec<double> z0(10);
    z0 << 0.5, 0.2, 0.7, 0.5, 0.4, 0, 0, 0, 0, 0;
    const Vec<double> k1 = coupled_field(0.0, z0, prob);
    Vec<double> expected(10);
    expected << -0.08, 0.5, 0.4, 0, -0.038461538461538464, 0.5, -0.2, 0.3, -0.5, 0.6;
    CHECK((k1 - expected).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("frozen shooting residual at alpha = 0")
{
    // Frozen from tests/oracles/oracles.py (independent numpy RK4, N = 4000).
    auto prob = particle_problem();
    const Vec<double> zero = Vec<double>::Zero(5);

    Vec<double> full(5);
    full << 2.655883212945411, -7.868193886274677, 11.752460419935462, 4.078987517321088, 7.076932217818834;
    CHECK(prob.full_transversality);
    CHECK((shooting_residual(zero, prob) - full).cwiseAbs().maxCoeff() <= 1e-10);

    prob.full_transversality = false;
    Vec<double> consistent(5);
    consistent << 2.655883212945411, -7.868193886274677, 11.752460419935462, 4.364646236819338, 3.8455347471153365;
    CHECK((shooting_residual(zero, prob) - consistent).cwiseAbs().maxCoeff() <= 1e-10);

    prob.residual_convention = ResidualConvention::printed;
    Vec<double> printed(5);
    printed << 2.6604944783965445, -3.5172308081219272, 3.4432657539205156, 4.364646236819338, 3.8455347471153365;
    CHECK((shooting_residual(zero, prob) - printed).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("full transversality adds the velocity rows")
{
    auto prob = particle_problem();
    prob.N = 400;
    prob.full_transversality = false;
    const Vec<double> alpha = vec({0.1, -0.2, 0.3, -0.4, 0.5});
    const auto traj = rollout(prob, alpha);
    const auto zT = unflatten(traj.final_state(), 3, 2);
    const auto rT = prob.ref(prob.T);
    const Vec<double> base = shooting_residual(alpha, prob);
    prob.full_transversality = true;
    const Vec<double> full = shooting_residual(alpha, prob);
    CHECK(full.head(3) == base.head(3));
    CHECK((full.tail(2) - (base.tail(2) - 2.0 * (zT.s.v - rT.v))).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("zero tracking error is a fixed point")
{
    // Reference equal to the free flow from s0: alpha = 0 gives mu = 0, u = 0, lambda = 0 throughout.
    auto prob = particle_problem();
    prob.N = 1000;
    prob.ref = free_flow_reference(prob.sys, prob.s0, prob.T, 2000);
    const Vec<double> res = shooting_residual(Vec<double>::Zero(5), prob);
    CHECK(res.cwiseAbs().maxCoeff() <= 1e-9);
    const auto traj = rollout(prob, Vec<double>::Zero(5));
    CHECK(controls_along(traj, prob).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("shooting residual is smooth in alpha")
{
    auto prob = particle_problem();
    prob.N = 1000;
    const Vec<double> a = vec({0.3, -0.1, 0.2, 0.4, -0.2});
    const Vec<double> dir = vec({1, -1, 0.5, 0.2, 0.7});
    // Second differences shrink like h^2.
    auto second = [&](double h) {
        return (shooting_residual(a + h * dir, prob) - 2 * shooting_residual(a, prob) +
                shooting_residual(a - h * dir, prob))
            .cwiseAbs()
            .maxCoeff();
    };
    const double d1 = second(1e-2), d2 = second(5e-3);
    CHECK(d1 / d2 == doctest::Approx(4.0).epsilon(0.05));

    // Central-difference Jacobians at two step sizes agree entrywise.
    auto jacobian = [&](double step) {
        Mat<double> jac(5, 5);
        for (Index j = 0; j < 5; ++j) {
            Vec<double> e = Vec<double>::Zero(5);
            e(j) = step;
            jac.col(j) = (shooting_residual(a + e, prob) - shooting_residual(a - e, prob)) / (2 * step);
        }
        return jac;
    };
    const Mat<double> j5 = jacobian(1e-5), j6 = jacobian(1e-6);
    CHECK(((j5 - j6).cwiseAbs().array() / j6.cwiseAbs().array().max(1e-12)).maxCoeff() <= 1e-3);
}

TEST_CASE("references")
{
    const auto line = constant_z_line_reference(1.0, 1.0, 1.0);
    const auto r = line(2.5);
    CHECK(r.q == vec({1, 0, 3.5}));
    CHECK(r.v == vec({0, 1}));

    const auto sys = pt::particle_system<double>();
    const auto s0 = state(0.5, 0.2, 0.7, 0.5, 0.4);
    const auto flow = free_flow_reference(sys, s0, 4.0, 8000);
    const auto p = pt::analytic_constants(s0);
    for (double t : {0.0, 0.37, 1.0, 2.2229, 4.0}) {
        const auto exact = pt::analytic_flow(p, t);
        const auto sample = flow(t);
        CHECK((sample.q - exact.q).cwiseAbs().maxCoeff() <= 1e-9);
        CHECK((sample.v - exact.v).cwiseAbs().maxCoeff() <= 1e-9);
    }

    Vec<double> times(3);
    times << 0, 1, 2;
    Mat<double> rows(3, 5);
    rows << 0, 0, 0, 0, 0, 1, 2, 3, 4, 5, 3, 2, 1, 0, -1;
    const auto tab = tabulated_reference(times, rows, 3);
    CHECK(tab(0.5).q == vec({0.5, 1, 1.5}));
    CHECK(tab(1.5).v == vec({2, 2}));
    CHECK(tab(-1.0).q == vec({0, 0, 0}));
    CHECK(tab(9.0).v == vec({0, -1}));
}

TEST_CASE("problem validation")
{
    auto prob = particle_problem();
    CHECK_NOTHROW(prob.validate());
    prob.epsilon = 0.0;
    CHECK_THROWS_AS(prob.validate(), singular_problem_error);
    prob.epsilon = 7.0;
    prob.T = 0.0;
    CHECK_THROWS_AS(prob.validate(), contract_error);
    prob.T = 4.0;
    prob.omega = -1.0;
    CHECK_THROWS_AS(prob.validate(), contract_error);
    prob.omega = 1.0;
    prob.sys.name = "other";
    prob.adjoint_mode = AdjointMode::paper_literal;
    CHECK_THROWS_AS(prob.validate(), contract_error);
}

TEST_CASE("cost of the uncontrolled rollout")
{
    const auto prob = particle_problem();
    const double j0 = uncontrolled_cost(prob);
    CHECK(j0 == doctest::Approx(33.13).epsilon(1e-3));
    // alpha = 0 has mu(0) = 0 but mu grows, so the controlled cost differs.
    const auto traj = rollout(prob, Vec<double>::Zero(5));
    CHECK(std::isfinite(total_cost(traj, prob)));
}
