#pragma once

// Optimal tracking on the constraint distribution, and the first-order
// optimality system that the minimum principle attaches to it.
//
// Cost:  J = 1/2 int_0^T (|q - q_r|^2 + |v - v_r|^2 + eps |u|^2) dt + omega Phi
//        Phi = |q(T) - q_r(T)|^2 + |v(T) - v_r(T)|^2
// H(q, v, lambda, mu, u) = running cost + lambda . rho^T v + mu . (vdot_nh + u)
// Minimizing H over u gives u* = -mu / eps.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "nhtrack/geometry.hpp"
#include "nhtrack/integrate.hpp"
#include "nhtrack/particle.hpp"

namespace nhtrack {

enum class AdjointMode {
    derived,       // -dH/d(q, v) of the Hamiltonian above
    paper_literal, // alternative particle costate equations, kept for comparison
};

enum class ResidualConvention {
    consistent, // lambda(T) - omega (q(T) - q_r(T)): sign of the transversality condition
    printed,    // lambda(T) + omega (q(T) - q_r(T))
};

enum class ReferenceKind { constant_z_line, free_flow, tabulated };

template <typename Scalar = double>
struct ReferenceSample {
    Vec<Scalar> q;
    Vec<Scalar> v;
};

template <typename Scalar = double>
struct ReferenceTrajectory {
    ReferenceKind kind = ReferenceKind::constant_z_line;
    std::function<ReferenceSample<Scalar>(Scalar)> sample;

    ReferenceSample<Scalar> operator()(Scalar t) const { return sample(t); }
};

/// Particle reference moving along z at constant speed:
/// q_r = (x_r, 0, z_offset + speed t), v_r = (0, speed).
template <typename Scalar = double>
ReferenceTrajectory<Scalar> constant_z_line_reference(Scalar x_r, Scalar z_offset, Scalar speed)
{
    ReferenceTrajectory<Scalar> ref;
    ref.kind = ReferenceKind::constant_z_line;
    ref.sample = [=](Scalar t) {
        ReferenceSample<Scalar> r{Vec<Scalar>(3), Vec<Scalar>(2)};
        r.q << x_r, Scalar(0), z_offset + speed * t;
        r.v << Scalar(0), speed;
        return r;
    };
    return ref;
}

/// Uncontrolled reduced dynamics of `sys` on the flat state [q; v].
template <typename Scalar>
VectorField<Scalar> free_vector_field(const NonholonomicSystem<Scalar>& sys)
{
    const Index n = sys.n(), k = sys.k();
    return {n + k, [sys, n, k](Scalar, const Vec<Scalar>& x) {
                const AdaptedState<Scalar> s{x.head(n), x.tail(k)};
                Vec<Scalar> d(n + k);
                d << admissible_velocity(sys, s), nh_acceleration(sys, s);
                return d;
            }};
}

/// Reference generated by the uncontrolled flow from `s0`. The flow is
/// integrated on `nodes` uniform steps over [0, T] and sampled by cubic
/// Hermite interpolation with node slopes taken from the vector field.
template <typename Scalar>
ReferenceTrajectory<Scalar> free_flow_reference(const NonholonomicSystem<Scalar>& sys,
                                                const AdaptedState<Scalar>& s0,
                                                Scalar T,
                                                Index nodes)
{
    detail::check_state(sys, s0);
    const VectorField<Scalar> field = free_vector_field(sys);
    Vec<Scalar> x0(sys.n() + sys.k());
    x0 << s0.q, s0.v;
    const Trajectory<Scalar> traj = integrate(field, Scalar(0), x0, T, nodes);
    Mat<Scalar> slopes(traj.states.rows(), traj.states.cols());
    for (Index i = 0; i < slopes.rows(); ++i)
        slopes.row(i) = field(traj.times(i), traj.state(i)).transpose();

    const Index n = sys.n(), k = sys.k();
    const Scalar h = T / static_cast<Scalar>(nodes);
    ReferenceTrajectory<Scalar> ref;
    ref.kind = ReferenceKind::free_flow;
    ref.sample = [traj, slopes, h, nodes, n, k](Scalar t) {
        using std::floor;
        Index i = static_cast<Index>(floor(t / h));
        i = std::clamp<Index>(i, 0, nodes - 1);
        const Scalar s = std::clamp((t - traj.times(i)) / h, Scalar(0), Scalar(1));
        const Scalar s2 = s * s, s3 = s2 * s;
        const Scalar h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
        const Scalar h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
        const Vec<Scalar> x = h00 * traj.state(i) + h10 * h * slopes.row(i).transpose() +
                              h01 * traj.state(i + 1) + h11 * h * slopes.row(i + 1).transpose();
        return ReferenceSample<Scalar>{x.head(n), x.tail(k)};
    };
    return ref;
}

/// Tabulated reference: `rows` holds [q_r, v_r] per time in `times` (strictly
/// increasing). Linear interpolation inside, clamped to the end rows outside.
template <typename Scalar>
ReferenceTrajectory<Scalar> tabulated_reference(Vec<Scalar> times, Mat<Scalar> rows, Index n)
{
    detail::require(times.size() >= 2 && rows.rows() == times.size(),
                    "tabulated reference needs at least two rows matching the time grid");
    detail::require(n >= 1 && n < rows.cols(), "tabulated reference: base dimension out of range");
    for (Index i = 1; i < times.size(); ++i)
        detail::require(times(i) > times(i - 1), "tabulated reference times must be strictly increasing");

    ReferenceTrajectory<Scalar> ref;
    ref.kind = ReferenceKind::tabulated;
    ref.sample = [times = std::move(times), rows = std::move(rows), n](Scalar t) {
        const Index last = times.size() - 1;
        Vec<Scalar> x;
        if (t <= times(0)) {
            x = rows.row(0).transpose();
        } else if (t >= times(last)) {
            x = rows.row(last).transpose();
        } else {
            const auto it = std::upper_bound(times.data(), times.data() + times.size(), t);
            const Index j = static_cast<Index>(it - times.data());
            const Scalar w = (t - times(j - 1)) / (times(j) - times(j - 1));
            x = ((Scalar(1) - w) * rows.row(j - 1) + w * rows.row(j)).transpose();
        }
        return ReferenceSample<Scalar>{x.head(n), x.tail(x.size() - n)};
    };
    return ref;
}

template <typename Scalar = double>
struct Costate {
    Vec<Scalar> lambda; // n, paired with q
    Vec<Scalar> mu;     // k, paired with v
};

template <typename Scalar = double>
struct CoupledState {
    AdaptedState<Scalar> s;
    Costate<Scalar> p;
};

template <typename Scalar>
Vec<Scalar> flatten(const CoupledState<Scalar>& z)
{
    Vec<Scalar> x(z.s.q.size() + z.s.v.size() + z.p.lambda.size() + z.p.mu.size());
    x << z.s.q, z.s.v, z.p.lambda, z.p.mu;
    return x;
}

template <typename Scalar>
CoupledState<Scalar> unflatten(const Vec<Scalar>& x, Index n, Index k)
{
    detail::require(x.size() == 2 * (n + k), "coupled state has dimension " + std::to_string(x.size()) +
                                                 ", expected " + std::to_string(2 * (n + k)));
    return {{x.segment(0, n), x.segment(n, k)}, {x.segment(n + k, n), x.segment(2 * n + k, k)}};
}

template <typename Scalar = double>
struct TrackingProblem {
    NonholonomicSystem<Scalar> sys;
    ReferenceTrajectory<Scalar> ref;
    Scalar epsilon = Scalar(7);
    Scalar omega = Scalar(1);
    Scalar T = Scalar(4);
    AdaptedState<Scalar> s0;
    Index N = 4000;
    AdjointMode adjoint_mode = AdjointMode::derived;
    ResidualConvention residual_convention = ResidualConvention::consistent;
    bool full_transversality = true; // mu(T) rows carry the velocity part of the terminal gradient

    Index n() const { return sys.n(); }
    Index k() const { return sys.k(); }

    void validate() const
    {
        using std::isfinite;
        if (!(epsilon > Scalar(0)))
            throw singular_problem_error("epsilon must be > 0: at epsilon = 0 the control drops out of the "
                                         "stationary condition and the problem becomes singular");
        detail::require(isfinite(epsilon), "epsilon must be finite");
        detail::require(omega > Scalar(0) && isfinite(omega), "omega must be finite and > 0");
        detail::require(T > Scalar(0) && isfinite(T), "T must be finite and > 0");
        detail::require(N >= 1, "steps must be >= 1");
        detail::require(static_cast<bool>(ref.sample), "tracking problem has no reference");
        detail::check_state(sys, s0);
        detail::require(s0.q.allFinite() && s0.v.allFinite(), "initial state must be finite");
        if (adjoint_mode == AdjointMode::paper_literal)
            detail::require(sys.name == particle::system_name,
                            "paper-literal costate equations exist only for the nonholonomic particle");
        else
            detail::require(static_cast<bool>(sys.drift_q_jacobian),
                            "derived costate equations need the system's drift_q_jacobian");
    }
};

template <typename Scalar>
Scalar running_cost(const AdaptedState<Scalar>& s,
                    const ReferenceSample<Scalar>& r,
                    const Control<Scalar>& u,
                    Scalar eps)
{
    detail::require(eps > Scalar(0), "running_cost requires epsilon > 0");
    return Scalar(0.5) * ((s.q - r.q).squaredNorm() + (s.v - r.v).squaredNorm() + eps * u.u.squaredNorm());
}

/// Phi = |q - q_r|^2 + |v - v_r|^2 at the final time (no 1/2).
template <typename Scalar>
Scalar terminal_cost(const AdaptedState<Scalar>& sT, const ReferenceSample<Scalar>& rT)
{
    return (sT.q - rT.q).squaredNorm() + (sT.v - rT.v).squaredNorm();
}

template <typename Scalar>
Scalar hamiltonian(const NonholonomicSystem<Scalar>& sys,
                   const AdaptedState<Scalar>& s,
                   const Costate<Scalar>& p,
                   const Control<Scalar>& u,
                   const ReferenceSample<Scalar>& r,
                   Scalar eps)
{
    return running_cost(s, r, u, eps) + p.lambda.dot(admissible_velocity(sys, s)) +
           p.mu.dot(controlled_acceleration(sys, s, u));
}

/// dH/du = eps u + mu.
template <typename Scalar>
Vec<Scalar> hamiltonian_control_gradient(const Costate<Scalar>& p, const Control<Scalar>& u, Scalar eps)
{
    return eps * u.u + p.mu;
}

template <typename Scalar>
Control<Scalar> stationary_control(const Costate<Scalar>& p, Scalar eps)
{
    if (!(eps > Scalar(0)))
        throw singular_problem_error("stationary control undefined for epsilon <= 0 (singular problem)");
    return {-p.mu / eps};
}

/// Alternative particle costate equations with an
/// extra eps factor in lambda2dot and flipped signs on the mu2 terms in mu1dot and
/// mu2dot. They disagree with -dH/d(q, v); see the derived mode.
template <typename Scalar>
Costate<Scalar> literal_particle_adjoint(const AdaptedState<Scalar>& s,
                                         const Costate<Scalar>& p,
                                         const ReferenceSample<Scalar>& r,
                                         Scalar eps)
{
    const Scalar x = s.q(0), y = s.q(1), z = s.q(2), v1 = s.v(0), v2 = s.v(1);
    const Scalar l1 = p.lambda(0), l2 = p.lambda(1), l3 = p.lambda(2), m2 = p.mu(1);
    const Scalar g = particle::coupling(y);
    const Scalar y2p1 = y * y + Scalar(1);
    Costate<Scalar> d{Vec<Scalar>(3), Vec<Scalar>(2)};
    d.lambda << -(x - r.q(0)), l1 * v2 - (y - r.q(1)) + eps * v1 * v2 * m2 * (y * y - Scalar(1)) / (y2p1 * y2p1),
        -(z - r.q(2));
    d.mu << -l2 - (v1 - r.v(0)) - m2 * g * v2, -l3 + l1 * y - (v2 - r.v(1)) - m2 * g * v1;
    return d;
}

/// Costate time derivatives. Derived mode:
///   lambdadot = -[(q - q_r) + J_q^T (lambda; mu)]
///   mudot     = -[(v - v_r) + rho lambda + (dvdot/dv)^T mu]
/// with J_q = d[rho^T v; vdot]/dq from the system. u is held at u*, where dH/du = 0.
template <typename Scalar>
Costate<Scalar> adjoint_field(const NonholonomicSystem<Scalar>& sys,
                              const AdaptedState<Scalar>& s,
                              const Costate<Scalar>& p,
                              const ReferenceSample<Scalar>& r,
                              Scalar eps,
                              AdjointMode mode = AdjointMode::derived)
{
    detail::check_state(sys, s);
    detail::require(p.lambda.size() == sys.n() && p.mu.size() == sys.k(), "costate dimensions do not match the system");
    if (mode == AdjointMode::paper_literal) {
        detail::require(sys.name == particle::system_name,
                        "paper-literal costate equations exist only for the nonholonomic particle");
        return literal_particle_adjoint(s, p, r, eps);
    }
    detail::require(static_cast<bool>(sys.drift_q_jacobian),
                    "derived costate equations need the system's drift_q_jacobian");
    detail::check_domain(sys, s.q);
    Vec<Scalar> multipliers(sys.n() + sys.k());
    multipliers << p.lambda, p.mu;
    const Mat<Scalar> jq = sys.drift_q_jacobian(s.q, s.v);
    Costate<Scalar> d;
    d.lambda = -((s.q - r.q) + jq.transpose() * multipliers);
    d.mu = -((s.v - r.v) + sys.frame.rho(s.q) * p.lambda + acceleration_v_jacobian(sys, s).transpose() * p.mu);
    return d;
}

/// State and costate derivatives with u = u*(mu), on the flat layout [q, v, lambda, mu].
template <typename Scalar>
Vec<Scalar> coupled_field(Scalar t, const Vec<Scalar>& z, const TrackingProblem<Scalar>& prob)
{
    const CoupledState<Scalar> c = unflatten(z, prob.n(), prob.k());
    const Control<Scalar> u = stationary_control(c.p, prob.epsilon);
    const ReferenceSample<Scalar> r = prob.ref(t);
    const Costate<Scalar> dp = adjoint_field(prob.sys, c.s, c.p, r, prob.epsilon, prob.adjoint_mode);
    Vec<Scalar> d(z.size());
    d << admissible_velocity(prob.sys, c.s), controlled_acceleration(prob.sys, c.s, u), dp.lambda, dp.mu;
    return d;
}

template <typename Scalar>
VectorField<Scalar> coupled_vector_field(const TrackingProblem<Scalar>& prob)
{
    return {2 * (prob.n() + prob.k()), [&prob](Scalar t, const Vec<Scalar>& z) { return coupled_field(t, z, prob); }};
}

/// Integrates the coupled system from (s0, alpha) where alpha = (lambda(0), mu(0)).
template <typename Scalar>
Trajectory<Scalar> rollout(const TrackingProblem<Scalar>& prob, const std::type_identity_t<Vec<Scalar>>& alpha)
{
    detail::require(alpha.size() == prob.n() + prob.k(), "initial costate has dimension " +
                                                              std::to_string(alpha.size()) + ", expected " +
                                                              std::to_string(prob.n() + prob.k()));
    Vec<Scalar> z0(2 * (prob.n() + prob.k()));
    z0 << prob.s0.q, prob.s0.v, alpha;
    return integrate(coupled_vector_field(prob), Scalar(0), z0, prob.T, prob.N);
}

/// Terminal mismatch of the costates:
///   rows 0..n-1:  lambda(T) -/+ omega (q(T) - q_r(T))   (consistent / printed)
///   rows n..n+k-1: mu(T), plus -/+ 2 omega (v(T) - v_r(T)) with full transversality
template <typename Scalar>
Vec<Scalar> terminal_residual(const CoupledState<Scalar>& zT,
                              const ReferenceSample<Scalar>& rT,
                              const TrackingProblem<Scalar>& prob)
{
    const Scalar sign = prob.residual_convention == ResidualConvention::printed ? Scalar(1) : Scalar(-1);
    Vec<Scalar> res(prob.n() + prob.k());
    res.head(prob.n()) = zT.p.lambda + sign * prob.omega * (zT.s.q - rT.q);
    res.tail(prob.k()) = zT.p.mu;
    if (prob.full_transversality)
        res.tail(prob.k()) += sign * Scalar(2) * prob.omega * (zT.s.v - rT.v);
    return res;
}

class shooting_domain_error : public model_domain_error {
public:
    shooting_domain_error(const std::string& what, std::vector<double> alpha)
        : model_domain_error(what), alpha_(std::move(alpha))
    {
    }
    const std::vector<double>& alpha() const { return alpha_; }

private:
    std::vector<double> alpha_;
};

template <typename Scalar>
Vec<Scalar> shooting_residual(const std::type_identity_t<Vec<Scalar>>& alpha, const TrackingProblem<Scalar>& prob)
{
    Trajectory<Scalar> traj;
    try {
        traj = rollout(prob, alpha);
    } catch (const model_domain_error& e) {
        std::vector<double> a(static_cast<std::size_t>(alpha.size()));
        for (Index i = 0; i < alpha.size(); ++i)
            a[static_cast<std::size_t>(i)] = static_cast<double>(alpha(i));
        throw shooting_domain_error(std::string("shooting from alpha = ") + detail::format_vector(alpha) +
                                        " failed: " + e.what(),
                                    std::move(a));
    }
    return terminal_residual(unflatten(traj.final_state(), prob.n(), prob.k()), prob.ref(prob.T), prob);
}

/// u*(t) at every grid point of a coupled trajectory, (N + 1) x k.
template <typename Scalar>
Mat<Scalar> controls_along(const Trajectory<Scalar>& traj, const TrackingProblem<Scalar>& prob)
{
    Mat<Scalar> u(traj.states.rows(), prob.k());
    for (Index i = 0; i < u.rows(); ++i)
        u.row(i) = -traj.states.row(i).tail(prob.k()) / prob.epsilon;
    return u;
}

namespace detail {

template <typename Scalar>
Scalar trapezoid(const Vec<Scalar>& times, const std::vector<Scalar>& values)
{
    Scalar sum(0);
    for (Index i = 1; i < times.size(); ++i)
        sum += Scalar(0.5) * (times(i) - times(i - 1)) *
               (values[static_cast<std::size_t>(i)] + values[static_cast<std::size_t>(i - 1)]);
    return sum;
}

} // namespace detail

/// Trapezoid quadrature of the running cost along the grid (u = u*(mu)) plus omega Phi.
template <typename Scalar>
Scalar total_cost(const Trajectory<Scalar>& traj, const TrackingProblem<Scalar>& prob)
{
    const Index n = prob.n(), k = prob.k();
    std::vector<Scalar> running(static_cast<std::size_t>(traj.states.rows()));
    CoupledState<Scalar> last;
    for (Index i = 0; i < traj.states.rows(); ++i) {
        const CoupledState<Scalar> c = unflatten(traj.state(i), n, k);
        running[static_cast<std::size_t>(i)] =
            running_cost(c.s, prob.ref(traj.times(i)), stationary_control(c.p, prob.epsilon), prob.epsilon);
        last = c;
    }
    return detail::trapezoid(traj.times, running) +
           prob.omega * terminal_cost(last.s, prob.ref(traj.times(traj.times.size() - 1)));
}

/// Same functional for the u = 0 rollout from s0, for comparison.
template <typename Scalar>
Scalar uncontrolled_cost(const TrackingProblem<Scalar>& prob)
{
    Vec<Scalar> x0(prob.n() + prob.k());
    x0 << prob.s0.q, prob.s0.v;
    const Trajectory<Scalar> traj = integrate(free_vector_field(prob.sys), Scalar(0), x0, prob.T, prob.N);
    const Control<Scalar> zero{Vec<Scalar>::Zero(prob.k())};
    std::vector<Scalar> running(static_cast<std::size_t>(traj.states.rows()));
    AdaptedState<Scalar> last;
    for (Index i = 0; i < traj.states.rows(); ++i) {
        const Vec<Scalar> x = traj.state(i);
        last = {x.head(prob.n()), x.tail(prob.k())};
        running[static_cast<std::size_t>(i)] = running_cost(last, prob.ref(traj.times(i)), zero, prob.epsilon);
    }
    return detail::trapezoid(traj.times, running) + prob.omega * terminal_cost(last, prob.ref(prob.T));
}

} // namespace nhtrack
