#include "doctest.h"

#include <random>

#include "nhtrack/geometry.hpp"
#include "nhtrack/particle.hpp"

using namespace nhtrack;
using nhtrack::particle::particle_system;

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

} // namespace

TEST_CASE("admissible velocity of the particle")
{
    const auto sys = particle_system<double>();
    // xdot = -y v2, ydot = v1, zdot = v2
    const Vec<double> qdot = admissible_velocity(sys, state(0, 0.2, 0, 0.5, 0.4));
    CHECK(qdot(0) == doctest::Approx(-0.08).epsilon(1e-15));
    CHECK(qdot(1) == 0.5);
    CHECK(qdot(2) == 0.4);

    CHECK(admissible_velocity(sys, state(1, 0.3, -2, 0, 0)).isZero(0.0));
    CHECK(admissible_velocity(sys, state(1, 0, 2, 0, 1)) == vec({0, 0, 1}));
}

TEST_CASE("dimension mismatch is a contract violation")
{
    const auto sys = particle_system<double>();
    AdaptedState<double> bad{Vec<double>::Zero(2), Vec<double>::Zero(2)};
    CHECK_THROWS_AS(admissible_velocity(sys, bad), contract_error);
    CHECK_THROWS_AS(nh_acceleration(sys, bad), contract_error);
    CHECK_THROWS_AS(constraint_residual(sys, Vec<double>(Vec<double>::Zero(3)), Vec<double>(Vec<double>::Zero(2))), contract_error);
    CHECK_THROWS_AS(controlled_acceleration(sys, state(0, 0, 0, 0, 0), Control<double>{Vec<double>::Zero(3)}),
                    contract_error);
}

TEST_CASE("reduced acceleration")
{
    const auto sys = particle_system<double>();
    const Vec<double> a = nh_acceleration(sys, state(0, 0.2, 0, 0.5, 0.4));
    CHECK(a(0) == 0.0);
    CHECK(a(1) == doctest::Approx(-0.038461538461538464).epsilon(1e-14));

    CHECK(nh_acceleration(sys, state(0.3, 1.7, -1, 2.5, 0)).isZero(0.0));
    CHECK(nh_acceleration(sys, state(0.3, 0.0, -1, 2.5, 1.5)).isZero(0.0));
}

TEST_CASE("controlled acceleration adds the input")
{
    const auto sys = particle_system<double>();
    const auto s = state(0, 0.2, 0, 0.5, 0.4);
    CHECK(controlled_acceleration(sys, s, Control<double>{Vec<double>::Zero(2)}) == nh_acceleration(sys, s));
    CHECK(controlled_acceleration(sys, state(4, 0, 1, 0, 1), Control<double>{vec({1, -2})}) == vec({1, -2}));

    const Vec<double> a = controlled_acceleration(sys, s, Control<double>{vec({0.1, 0.1})});
    CHECK(a(0) == doctest::Approx(0.1));
    CHECK(a(1) == doctest::Approx(0.1 - 0.038461538461538464).epsilon(1e-14));
}

TEST_CASE("potential gradient enters through the inverse metric")
{
    // Flat plane, frame = identity, V = 1/2 |q|^2: vdot = -q.
    NonholonomicSystem<double> sys;
    sys.name = "harmonic-plane";
    sys.frame = {2, 2, [](const Vec<double>&) { return Mat<double>::Identity(2, 2); }};
    sys.christoffel.gamma = [](const Vec<double>&) { return SymbolArray<double>(2, Mat<double>::Zero(2, 2)); };
    sys.metric.g = [](const Vec<double>&) { return Mat<double>::Identity(2, 2); };
    sys.metric.g_inv = sys.metric.g;
    sys.potential.dV = [](const Vec<double>& q) { return q; };
    sys.constraint_annihilator = [](const Vec<double>&) { return Mat<double>(0, 2); };
    AdaptedState<double> s{vec({0.3, -2}), vec({1, 1})};
    CHECK(nh_acceleration(sys, s) == vec({-0.3, 2}));
}

TEST_CASE("domain predicate guards the Christoffel field")
{
    auto sys = particle_system<double>();
    sys.in_domain = [](const Vec<double>& q) { return q(1) < 1.0; };
    CHECK_NOTHROW(nh_acceleration(sys, state(0, 0.5, 0, 1, 1)));
    CHECK_THROWS_AS(nh_acceleration(sys, state(0, 1.5, 0, 1, 1)), model_domain_error);
}

TEST_CASE("constraint residual")
{
    const auto sys = particle_system<double>();
    CHECK(constraint_residual(sys, vec({9, 0.2, -3}), vec({-0.08, 0.5, 0.4}))(0) == doctest::Approx(0).epsilon(1e-16));
    CHECK(constraint_residual(sys, vec({2, 5, 1}), vec({1, 0, 0}))(0) == 1.0);
    CHECK(constraint_residual(sys, vec({0, 1, 0}), vec({-1, 0, 1}))(0) == 0.0);
}

TEST_CASE("frame annihilation and metric properties on random points")
{
    const auto sys = particle_system<double>();
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> box(-5, 5);
    for (int i = 0; i < 500; ++i) {
        const auto s = state(box(rng), box(rng), box(rng), box(rng), box(rng));
        CHECK(std::abs(constraint_residual(sys, s.q, admissible_velocity(sys, s))(0)) <= 1e-12);
        CHECK((sys.constraint_annihilator(s.q) * sys.frame.rho(s.q).transpose()).cwiseAbs().maxCoeff() <= 1e-12);

        const Mat<double> g = sys.metric.g(s.q);
        CHECK(g == g.transpose());
        CHECK((g * sys.metric.g_inv(s.q) - Mat<double>::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-12);

        Eigen::FullPivLU<Mat<double>> lu(sys.frame.rho(s.q));
        CHECK(lu.rank() == 2);

        // Gamma term is quadratic in v (V = 0 for the particle).
        const auto s2 = state(s.q(0), s.q(1), s.q(2), 2 * s.v(0), 2 * s.v(1));
        CHECK(nh_acceleration(sys, s2) == 4.0 * nh_acceleration(sys, s));

        const Control<double> u{vec({box(rng), box(rng)})};
        const Vec<double> diff =
            controlled_acceleration(sys, s, u) - controlled_acceleration(sys, s, Control<double>{Vec<double>::Zero(2)});
        CHECK((diff - u.u).cwiseAbs().maxCoeff() <= 1e-15);
    }
}

TEST_CASE("particle restricted metric and Christoffel symbols")
{
    const auto sys = particle_system<double>();
    const Mat<double> g = sys.metric.g(vec({0, 0.2, 0}));
    CHECK(g(0, 0) == 1.0);
    CHECK(g(1, 1) == doctest::Approx(1.04).epsilon(1e-15));
    CHECK(g(0, 1) == 0.0);

    const auto gamma0 = sys.christoffel.gamma(vec({0, 0, 0}));
    for (const auto& slice : gamma0)
        CHECK(slice.isZero(0.0));
    const auto gamma = sys.christoffel.gamma(vec({0, 0.5, 0}));
    CHECK(gamma[1](0, 1) == doctest::Approx(0.4));
    CHECK(gamma[1](1, 0) == 0.0);
    CHECK(gamma[0].isZero(0.0));
}

TEST_CASE("acceleration v-Jacobian matches the quadratic form")
{
    const auto sys = particle_system<double>();
    const auto s = state(0, 0.7, 0, -0.3, 1.2);
    const Mat<double> jac = acceleration_v_jacobian(sys, s);
    const double h = 1e-6;
    for (Index j = 0; j < 2; ++j) {
        auto plus = s, minus = s;
        plus.v(j) += h;
        minus.v(j) -= h;
        const Vec<double> col = (nh_acceleration(sys, plus) - nh_acceleration(sys, minus)) / (2 * h);
        CHECK((jac.col(j) - col).cwiseAbs().maxCoeff() <= 1e-9);
    }
}

TEST_CASE("Christoffel symbols from structure constants")
{
    SUBCASE("abelian bracket gives zero")
    {
        const SymbolArray<double> zero(3, Mat<double>::Zero(3, 3));
        for (const auto& slice : christoffel_from_structure(zero))
            CHECK(slice.isZero(0.0));
    }
    SUBCASE("single bracket, k = 2")
    {
        // C^2_12 = 0.7 = -C^2_21. Frozen from tests/oracles/oracles.py:
        // Gamma^1_22 = 0.7, Gamma^2_21 = -0.7, everything else zero (so Gamma^2_12 = 0).
        SymbolArray<double> c(2, Mat<double>::Zero(2, 2));
        c[1](0, 1) = 0.7;
        c[1](1, 0) = -0.7;
        const auto gamma = christoffel_from_structure(c);
        Mat<double> expect0 = Mat<double>::Zero(2, 2), expect1 = Mat<double>::Zero(2, 2);
        expect0(1, 1) = 0.7;
        expect1(1, 0) = -0.7;
        CHECK(gamma[0] == expect0);
        CHECK(gamma[1] == expect1);
    }
    SUBCASE("non-antisymmetric input is rejected")
    {
        SymbolArray<double> c(2, Mat<double>::Zero(2, 2));
        c[1](0, 1) = 0.7;
        CHECK_THROWS_AS(christoffel_from_structure(c), contract_error);
    }
}

TEST_CASE("long double instantiation")
{
    const auto sys = particle_system<long double>();
    AdaptedState<long double> s{Vec<long double>(3), Vec<long double>(2)};
    s.q << 0, 0.2L, 0;
    s.v << 0.5L, 0.4L;
    const long double expected = -(0.2L / 1.04L) * 0.5L * 0.4L;
    CHECK(std::abs(static_cast<double>(nh_acceleration(sys, s)(1) - expected)) <= 1e-18);
}
