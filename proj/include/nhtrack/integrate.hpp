#pragma once

// Fixed-step classical Runge-Kutta (RK4) integration on a uniform grid.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <type_traits>
#include <vector>

#include "nhtrack/types.hpp"

namespace nhtrack {

template <typename Scalar = double>
struct VectorField {
    Index dim = 0;
    std::function<Vec<Scalar>(Scalar, const Vec<Scalar>&)> f;

    Vec<Scalar> operator()(Scalar t, const Vec<Scalar>& x) const { return f(t, x); }
};

template <typename Scalar = double>
struct Trajectory {
    Vec<Scalar> times;  // N + 1
    Mat<Scalar> states; // (N + 1) x dim

    Index steps() const { return times.size() - 1; }
    Vec<Scalar> state(Index i) const { return states.row(i).transpose(); }
    Vec<Scalar> final_state() const { return state(states.rows() - 1); }
};

namespace detail {

template <typename Scalar>
Vec<Scalar> checked_stage(const VectorField<Scalar>& vf, Scalar t, const Vec<Scalar>& x)
{
    Vec<Scalar> k = vf(t, x);
    if (k.size() != vf.dim)
        throw contract_error("vector field returned dimension " + std::to_string(k.size()) + ", expected " +
                             std::to_string(vf.dim));
    if (!k.allFinite())
        throw model_domain_error("non-finite vector field value at t = " + std::to_string(static_cast<double>(t)) +
                                 ", x = " + format_vector(x));
    return k;
}

} // namespace detail

template <typename Scalar>
Vec<Scalar> rk4_step(const VectorField<Scalar>& vf, std::type_identity_t<Scalar> t, const std::type_identity_t<Vec<Scalar>>& x, std::type_identity_t<Scalar> h)
{
    detail::require(h > Scalar(0), "rk4_step requires h > 0");
    detail::require(x.size() == vf.dim, "rk4_step: state dimension does not match the vector field");
    const Scalar half = h / Scalar(2);
    const Vec<Scalar> k1 = detail::checked_stage(vf, t, x);
    const Vec<Scalar> k2 = detail::checked_stage<Scalar>(vf, t + half, x + half * k1);
    const Vec<Scalar> k3 = detail::checked_stage<Scalar>(vf, t + half, x + half * k2);
    const Vec<Scalar> k4 = detail::checked_stage<Scalar>(vf, t + h, x + h * k3);
    return x + h * ((k1 + Scalar(2) * k2 + Scalar(2) * k3 + k4) / Scalar(6));
}

/// N steps of size h = T/N starting at (t0, x0). Grid times are t0 + i h, with
/// the last one pinned to t0 + T.
template <typename Scalar>
Trajectory<Scalar> integrate(const VectorField<Scalar>& vf, std::type_identity_t<Scalar> t0, const std::type_identity_t<Vec<Scalar>>& x0, std::type_identity_t<Scalar> T, Index N)
{
    detail::require(N >= 1, "integrate requires N >= 1");
    detail::require(T > Scalar(0), "integrate requires T > 0");
    detail::require(x0.size() == vf.dim, "integrate: initial state dimension does not match the vector field");

    const Scalar h = T / static_cast<Scalar>(N);
    Trajectory<Scalar> traj;
    traj.times.resize(N + 1);
    traj.states.resize(N + 1, vf.dim);
    for (Index i = 0; i < N; ++i)
        traj.times(i) = t0 + static_cast<Scalar>(i) * h;
    traj.times(N) = t0 + T;

    Vec<Scalar> x = x0;
    traj.states.row(0) = x.transpose();
    for (Index i = 0; i < N; ++i) {
        try {
            x = rk4_step(vf, traj.times(i), x, h);
        } catch (const model_domain_error& e) {
            throw model_domain_error("step " + std::to_string(i) + ": " + e.what());
        }
        traj.states.row(i + 1) = x.transpose();
    }
    return traj;
}

class degenerate_fit_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Empirical order of accuracy: least-squares slope of log(error) against
/// log(h), where error is the max-norm deviation from `oracle` over the grid.
template <typename Scalar>
Scalar convergence_order(const VectorField<Scalar>& vf,
                         const std::type_identity_t<std::function<Vec<Scalar>(Scalar)>>& oracle,
                         std::type_identity_t<Scalar> t0,
                         const std::type_identity_t<Vec<Scalar>>& x0,
                         std::type_identity_t<Scalar> T,
                         const std::vector<Index>& steps)
{
    detail::require(steps.size() >= 3, "convergence_order needs at least three step counts");
    for (std::size_t i = 1; i < steps.size(); ++i)
        detail::require(steps[i] == 2 * steps[i - 1], "convergence_order step counts must double");

    using std::log;
    std::vector<Scalar> log_h, log_err;
    for (Index N : steps) {
        const Trajectory<Scalar> traj = integrate(vf, t0, x0, T, N);
        Scalar err(0);
        for (Index i = 0; i <= N; ++i)
            err = std::max(err, (traj.state(i) - oracle(traj.times(i))).cwiseAbs().maxCoeff());
        if (!(err > Scalar(0)))
            throw degenerate_fit_error("integration error is exactly zero at N = " + std::to_string(N) +
                                       "; order is undefined");
        log_h.push_back(log(T / static_cast<Scalar>(N)));
        log_err.push_back(log(err));
    }
    const auto n = static_cast<Scalar>(log_h.size());
    Scalar mh(0), me(0);
    for (std::size_t i = 0; i < log_h.size(); ++i) {
        mh += log_h[i];
        me += log_err[i];
    }
    mh /= n;
    me /= n;
    Scalar sxy(0), sxx(0);
    for (std::size_t i = 0; i < log_h.size(); ++i) {
        sxy += (log_h[i] - mh) * (log_err[i] - me);
        sxx += (log_h[i] - mh) * (log_h[i] - mh);
    }
    return sxy / sxx;
}

} // namespace nhtrack
