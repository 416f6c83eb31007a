#pragma once

// Frame-based description of a nonholonomic mechanical system and its
// reduced equations of motion on the constraint distribution D.
//
// Base coordinates q live in R^n, fiber velocities v in R^k (k = n - m)
// relative to an adapted frame e_A = rho_A^i(q) d/dq^i spanning D. The frame
// coefficients are stored as a k x n matrix, row A = e_A.

#include <cmath>
#include <functional>
#include <string>
#include <utility>

#include "nhtrack/types.hpp"

namespace nhtrack {

template <typename Scalar = double>
struct AdaptedFrame {
    Index n = 0;
    Index k = 0;
    std::function<Mat<Scalar>(const Vec<Scalar>&)> rho; // k x n
};

template <typename Scalar = double>
struct ChristoffelField {
    std::function<SymbolArray<Scalar>(const Vec<Scalar>&)> gamma; // gamma[c](a, b)
};

template <typename Scalar = double>
struct RestrictedMetricField {
    std::function<Mat<Scalar>(const Vec<Scalar>&)> g;     // k x k, SPD
    std::function<Mat<Scalar>(const Vec<Scalar>&)> g_inv; // its inverse
};

template <typename Scalar = double>
struct PotentialGradient {
    std::function<Vec<Scalar>(const Vec<Scalar>&)> dV; // n
};

template <typename Scalar = double>
struct NonholonomicSystem {
    std::string name;
    AdaptedFrame<Scalar> frame;
    ChristoffelField<Scalar> christoffel;
    RestrictedMetricField<Scalar> metric;
    PotentialGradient<Scalar> potential;
    std::function<Mat<Scalar>(const Vec<Scalar>&)> constraint_annihilator; // m x n

    // Points where Gamma and the metric are finite. Empty means all of R^n.
    std::function<bool(const Vec<Scalar>&)> in_domain;

    // Optional closed-form d/dq of the reduced drift [rho^T v; vdot(q, v)],
    // an (n + k) x n matrix. Needed by the derived costate equations.
    std::function<Mat<Scalar>(const Vec<Scalar>&, const Vec<Scalar>&)> drift_q_jacobian;

    Index n() const { return frame.n; }
    Index k() const { return frame.k; }
    Index m() const { return frame.n - frame.k; }

    bool contains(const Vec<Scalar>& q) const { return !in_domain || in_domain(q); }
};

template <typename Scalar = double>
struct AdaptedState {
    Vec<Scalar> q;
    Vec<Scalar> v;
};

template <typename Scalar = double>
struct Control {
    Vec<Scalar> u;
};

namespace detail {

template <typename Scalar>
void check_state(const NonholonomicSystem<Scalar>& sys, const AdaptedState<Scalar>& s)
{
    require(s.q.size() == sys.n() && s.v.size() == sys.k(),
            "adapted state has dimensions (" + std::to_string(s.q.size()) + ", " +
                std::to_string(s.v.size()) + "), system '" + sys.name + "' expects (" +
                std::to_string(sys.n()) + ", " + std::to_string(sys.k()) + ")");
}

template <typename Scalar>
void check_domain(const NonholonomicSystem<Scalar>& sys, const Vec<Scalar>& q)
{
    if (!sys.contains(q))
        throw model_domain_error("q = " + format_vector(q) + " is outside the domain of system '" +
                                 sys.name + "'");
}

} // namespace detail

/// qdot^i = rho_A^i(q) v^A.
template <typename Scalar>
Vec<Scalar> admissible_velocity(const NonholonomicSystem<Scalar>& sys, const AdaptedState<Scalar>& s)
{
    detail::check_state(sys, s);
    return sys.frame.rho(s.q).transpose() * s.v;
}

/// Quadratic form -Gamma^c_ab v^a v^b, one entry per upper index.
template <typename Scalar>
Vec<Scalar> christoffel_contraction(const SymbolArray<Scalar>& gamma, const Vec<Scalar>& v)
{
    Vec<Scalar> out(static_cast<Index>(gamma.size()));
    for (Index c = 0; c < out.size(); ++c)
        out(c) = -v.dot(gamma[static_cast<std::size_t>(c)] * v);
    return out;
}

/// Reduced nonholonomic acceleration:
/// vdot^C = -Gamma^C_AB v^A v^B - (G^D)^CB rho_B^i dV/dq^i.
template <typename Scalar>
Vec<Scalar> nh_acceleration(const NonholonomicSystem<Scalar>& sys, const AdaptedState<Scalar>& s)
{
    detail::check_state(sys, s);
    detail::check_domain(sys, s.q);
    Vec<Scalar> acc = christoffel_contraction(sys.christoffel.gamma(s.q), s.v);
    if (sys.potential.dV) {
        const Vec<Scalar> force = sys.frame.rho(s.q) * sys.potential.dV(s.q);
        acc.noalias() -= sys.metric.g_inv(s.q) * force;
    }
    return acc;
}

/// Fully actuated reduced dynamics: one input per fiber coordinate.
template <typename Scalar>
Vec<Scalar> controlled_acceleration(const NonholonomicSystem<Scalar>& sys,
                                    const AdaptedState<Scalar>& s,
                                    const Control<Scalar>& u)
{
    detail::require(u.u.size() == sys.k(), "control has dimension " + std::to_string(u.u.size()) +
                                               ", expected " + std::to_string(sys.k()));
    return nh_acceleration(sys, s) + u.u;
}

/// d(vdot)/dv, k x k. Row c is -(Gamma^c + Gamma^c^T) v; the potential term does not depend on v.
template <typename Scalar>
Mat<Scalar> acceleration_v_jacobian(const NonholonomicSystem<Scalar>& sys, const AdaptedState<Scalar>& s)
{
    detail::check_state(sys, s);
    detail::check_domain(sys, s.q);
    const SymbolArray<Scalar> gamma = sys.christoffel.gamma(s.q);
    Mat<Scalar> jac(sys.k(), sys.k());
    for (Index c = 0; c < sys.k(); ++c) {
        const Mat<Scalar>& gc = gamma[static_cast<std::size_t>(c)];
        jac.row(c) = -((gc + gc.transpose()) * s.v).transpose();
    }
    return jac;
}

/// mu^a_i(q) qdot^i for each constraint a. Zero iff qdot lies in D_q.
template <typename Scalar>
Vec<Scalar> constraint_residual(const NonholonomicSystem<Scalar>& sys,
                                const Vec<Scalar>& q,
                                const Vec<Scalar>& qdot)
{
    detail::require(q.size() == sys.n() && qdot.size() == sys.n(),
                    "constraint_residual expects q and qdot of dimension " + std::to_string(sys.n()));
    return sys.constraint_annihilator(q) * qdot;
}

/// Christoffel symbols of the constrained connection from the structure
/// constants of the nonholonomic bracket [[e_A, e_B]] = C^C_AB e_C:
///
///   Gamma^C_AB = 1/2 (C^B_CA + C^A_CB + C^C_AB)
///
/// The formula holds when the restricted metric coefficients are constant
/// in the frame. With a q-dependent metric (the nonholonomic particle, for
/// one) it does not reproduce the connection, so such systems should supply
/// Gamma directly.
template <typename Scalar>
SymbolArray<Scalar> christoffel_from_structure(const SymbolArray<Scalar>& structure, Scalar tol = Scalar(0))
{
    const auto k = static_cast<Index>(structure.size());
    for (const auto& slice : structure)
        detail::require(slice.rows() == k && slice.cols() == k,
                        "structure constants must be a k x k x k array");
    for (Index c = 0; c < k; ++c) {
        const Mat<Scalar>& s = structure[static_cast<std::size_t>(c)];
        const Scalar asym = (s + s.transpose()).cwiseAbs().maxCoeff();
        detail::require(asym <= tol, "structure constants are not antisymmetric in the lower indices (upper index " +
                                         std::to_string(c) + ")");
    }
    auto at = [&](Index up, Index a, Index b) { return structure[static_cast<std::size_t>(up)](a, b); };
    SymbolArray<Scalar> gamma(static_cast<std::size_t>(k), Mat<Scalar>::Zero(k, k));
    for (Index c = 0; c < k; ++c)
        for (Index a = 0; a < k; ++a)
            for (Index b = 0; b < k; ++b)
                gamma[static_cast<std::size_t>(c)](a, b) = Scalar(0.5) * (at(b, c, a) + at(a, c, b) + at(c, a, b));
    return gamma;
}

} // namespace nhtrack
