#pragma once

// The nonholonomic particle: unit mass in R^3 with L = 1/2 |qdot|^2 and the
// constraint xdot + y zdot = 0. Adapted frame Y1 = d/dy, Y2 = d/dz - y d/dx,
// so (x, y, z; v1, v2) are coordinates on D with xdot = -y v2, ydot = v1,
// zdot = v2.

#include <cmath>
#include <string>

#include "nhtrack/geometry.hpp"

namespace nhtrack::particle {

inline const std::string system_name = "nonholonomic-particle";

/// |c1| at or below this switches the closed-form flow to the c1 = 0 branch.
inline constexpr double c1_switch = 1e-10;

/// Default tolerance on |v_x + y v_z| accepted by project().
inline constexpr double drift_tolerance = 1e-8;

template <typename Scalar>
Scalar coupling(Scalar y)
{
    return y / (Scalar(1) + y * y);
}

template <typename Scalar>
Scalar coupling_derivative(Scalar y)
{
    const Scalar s = Scalar(1) + y * y;
    return (Scalar(1) - y * y) / (s * s);
}

template <typename Scalar = double>
NonholonomicSystem<Scalar> particle_system()
{
    using V = Vec<Scalar>;
    using M = Mat<Scalar>;
    NonholonomicSystem<Scalar> sys;
    sys.name = system_name;
    sys.frame.n = 3;
    sys.frame.k = 2;
    sys.frame.rho = [](const V& q) {
        M rho(2, 3);
        rho << 0, 1, 0,
            -q(1), 0, 1;
        return rho;
    };
    sys.christoffel.gamma = [](const V& q) {
        SymbolArray<Scalar> gamma(2, M::Zero(2, 2));
        gamma[1](0, 1) = coupling(q(1));
        return gamma;
    };
    sys.metric.g = [](const V& q) {
        M g = M::Identity(2, 2);
        g(1, 1) = Scalar(1) + q(1) * q(1);
        return g;
    };
    sys.metric.g_inv = [](const V& q) {
        M g = M::Identity(2, 2);
        g(1, 1) = Scalar(1) / (Scalar(1) + q(1) * q(1));
        return g;
    };
    sys.potential.dV = [](const V&) { return V::Zero(3); };
    sys.constraint_annihilator = [](const V& q) {
        M mu(1, 3);
        mu << 1, 0, q(1);
        return mu;
    };
    // All of R^3 is valid; in_domain stays empty.
    sys.drift_q_jacobian = [](const V& q, const V& v) {
        M jac = M::Zero(5, 3);
        jac(0, 1) = -v(1);
        jac(4, 1) = -coupling_derivative(q(1)) * v(0) * v(1);
        return jac;
    };
    return sys;
}

/// Restricted Lagrangian (kinetic energy on D): 1/2 ((v1)^2 + (1 + y^2)(v2)^2).
template <typename Scalar>
Scalar restricted_energy(const AdaptedState<Scalar>& s)
{
    return Scalar(0.5) * (s.v(0) * s.v(0) + (Scalar(1) + s.q(1) * s.q(1)) * s.v(1) * s.v(1));
}

template <typename Scalar = double>
struct AnalyticParams {
    Scalar c1{};
    Scalar c2{};
    Scalar x0{};
    Scalar y0{};
    Scalar z0{};
};

template <typename Scalar>
AnalyticParams<Scalar> analytic_constants(const AdaptedState<Scalar>& s0)
{
    detail::require(s0.q.size() == 3 && s0.v.size() == 2, "particle state must be (3, 2)");
    using std::sqrt;
    const Scalar y0 = s0.q(1);
    return {s0.v(0), s0.v(1) * sqrt(y0 * y0 + Scalar(1)), s0.q(0), y0, s0.q(2)};
}

/// Closed-form uncontrolled flow. v2 (y^2 + 1)^(1/2) and v1 are first integrals;
/// x and z follow by quadrature of xdot = -y v2 and zdot = v2.
template <typename Scalar>
AdaptedState<Scalar> analytic_flow(const AnalyticParams<Scalar>& p, Scalar t)
{
    using std::asinh;
    using std::abs;
    using std::sqrt;
    AdaptedState<Scalar> s{Vec<Scalar>(3), Vec<Scalar>(2)};
    const Scalar root0 = sqrt(p.y0 * p.y0 + Scalar(1));
    if (abs(p.c1) <= Scalar(c1_switch)) {
        const Scalar v2 = p.c2 / root0;
        s.q << p.x0 - p.y0 * v2 * t, p.y0, p.z0 + v2 * t;
        s.v << p.c1, v2;
        return s;
    }
    const Scalar y = p.y0 + p.c1 * t;
    const Scalar root = sqrt(y * y + Scalar(1));
    // (c2/c1)(root0 - root), rewritten without the 1/c1 cancellation.
    const Scalar x = p.x0 - p.c2 * t * (Scalar(2) * p.y0 + p.c1 * t) / (root0 + root);
    const Scalar z = p.z0 + (p.c2 / p.c1) * (asinh(y) - asinh(p.y0));
    s.q << x, y, z;
    s.v << p.c1, p.c2 / root;
    return s;
}

/// Uncontrolled reduced vector field on the flat state (x, y, z, v1, v2).
template <typename Scalar>
Vec<Scalar> reduced_field(const Vec<Scalar>& state)
{
    const Scalar y = state(1), v1 = state(3), v2 = state(4);
    Vec<Scalar> d(5);
    d << -y * v2, v1, v2, Scalar(0), -coupling(y) * v1 * v2;
    return d;
}

template <typename Scalar = double>
struct AmbientState {
    Vec<Scalar> q;  // x, y, z
    Vec<Scalar> vq; // v_x, v_y, v_z
};

/// Multiplier enforcing v_x + y v_z = 0 in the Lagrange-d'Alembert equations.
template <typename Scalar>
Scalar constraint_multiplier(const AmbientState<Scalar>& a)
{
    return -a.vq(2) * a.vq(1) / (Scalar(1) + a.q(1) * a.q(1));
}

/// Unreduced Lagrange-d'Alembert dynamics:
/// qdot = vq, vdot_x = lambda, vdot_y = 0, vdot_z = y lambda.
template <typename Scalar>
AmbientState<Scalar> unreduced_field(const AmbientState<Scalar>& a)
{
    const Scalar lambda = constraint_multiplier(a);
    AmbientState<Scalar> d{a.vq, Vec<Scalar>(3)};
    d.vq << lambda, Scalar(0), a.q(1) * lambda;
    return d;
}

template <typename Scalar>
Scalar ambient_constraint_residual(const AmbientState<Scalar>& a)
{
    return a.vq(0) + a.q(1) * a.vq(2);
}

template <typename Scalar>
AmbientState<Scalar> embed(const AdaptedState<Scalar>& s)
{
    AmbientState<Scalar> a{s.q, Vec<Scalar>(3)};
    a.vq << -s.q(1) * s.v(1), s.v(0), s.v(1);
    return a;
}

template <typename Scalar>
AdaptedState<Scalar> project(const AmbientState<Scalar>& a, Scalar tol = Scalar(drift_tolerance))
{
    using std::abs;
    const Scalar drift = ambient_constraint_residual(a);
    if (!(abs(drift) <= tol))
        throw constraint_violation("ambient velocity is off the constraint surface: |v_x + y v_z| = " +
                                   std::to_string(static_cast<double>(abs(drift))));
    AdaptedState<Scalar> s{a.q, Vec<Scalar>(2)};
    s.v << a.vq(1), a.vq(2);
    return s;
}

template <typename Scalar>
Vec<Scalar> flatten(const AmbientState<Scalar>& a)
{
    Vec<Scalar> x(6);
    x << a.q, a.vq;
    return x;
}

template <typename Scalar>
AmbientState<Scalar> unflatten_ambient(const Vec<Scalar>& x)
{
    return {x.head(3), x.tail(3)};
}

} // namespace nhtrack::particle
