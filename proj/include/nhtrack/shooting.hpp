#pragma once

// Single shooting on the initial costate: damped Newton iteration with a
// central-difference Jacobian and a small dense LU solve.

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "nhtrack/tracking.hpp"

namespace nhtrack {

struct NewtonConfig {
    double tol_residual = 1e-10; // on the max-norm
    int max_iters = 100;
    double fd_step = 1e-6; // scaled by max(1, |alpha_j|) per column
    double backtrack_factor = 0.5;
    int max_halvings = 30;
    double sufficient_decrease = 1e-4;

    void validate() const
    {
        detail::require(tol_residual > 0 && std::isfinite(tol_residual), "newton tolerance must be finite and > 0");
        detail::require(max_iters >= 1, "newton max_iters must be >= 1");
        detail::require(fd_step > 0 && std::isfinite(fd_step), "finite-difference step must be finite and > 0");
        detail::require(backtrack_factor > 0 && backtrack_factor < 1, "backtracking factor must lie in (0, 1)");
        detail::require(max_halvings >= 0, "max_halvings must be >= 0");
    }
};

namespace detail {

inline std::vector<double> to_std(const Vec<double>& x)
{
    return {x.data(), x.data() + x.size()};
}

} // namespace detail

class singular_jacobian_error : public std::runtime_error {
public:
    singular_jacobian_error(const std::string& what, std::vector<double> iterate)
        : std::runtime_error(what), iterate_(std::move(iterate))
    {
    }
    const std::vector<double>& iterate() const { return iterate_; }

private:
    std::vector<double> iterate_;
};

class residual_evaluation_error : public model_domain_error {
public:
    residual_evaluation_error(const std::string& what, Index column)
        : model_domain_error(what), column_(column)
    {
    }
    Index column() const { return column_; }

private:
    Index column_;
};

template <typename Scalar = double>
using ResidualFunction = std::function<Vec<Scalar>(const Vec<Scalar>&)>;

/// Central differences, column j probed at alpha +- h_j e_j with h_j = step max(1, |alpha_j|).
template <typename Scalar>
Mat<Scalar> fd_jacobian(const ResidualFunction<Scalar>& res, const Vec<Scalar>& alpha, Scalar step)
{
    using std::abs;
    using std::max;
    detail::require(step > Scalar(0), "fd_jacobian requires step > 0");
    Mat<Scalar> jac;
    for (Index j = 0; j < alpha.size(); ++j) {
        const Scalar h = step * max(Scalar(1), abs(alpha(j)));
        Vec<Scalar> plus = alpha, minus = alpha;
        plus(j) += h;
        minus(j) -= h;
        const Vec<Scalar> rp = res(plus);
        const Vec<Scalar> rm = res(minus);
        if (!rp.allFinite() || !rm.allFinite())
            throw residual_evaluation_error("non-finite residual while probing Jacobian column " + std::to_string(j),
                                            j);
        if (j == 0)
            jac.resize(rp.size(), alpha.size());
        jac.col(j) = (rp - rm) / ((plus(j) - minus(j)));
    }
    return jac;
}

/// Row-pivoted LU, P A = L U with unit-diagonal L stored below the diagonal.
template <typename Scalar = double>
struct LuFactorization {
    Mat<Scalar> lu;
    std::vector<Index> perm; // row i of P A is row perm[i] of A
};

/// Throws singular_jacobian_error when a pivot falls below 1e-14 times the
/// largest entry of its original row.
template <typename Scalar>
LuFactorization<Scalar> lu_factor(const Mat<Scalar>& a, Scalar rel_pivot_tol = Scalar(1e-14))
{
    using std::abs;
    detail::require(a.rows() == a.cols(), "lu_factor requires a square matrix");
    const Index n = a.rows();
    LuFactorization<Scalar> f{a, std::vector<Index>(static_cast<std::size_t>(n))};
    Vec<Scalar> row_scale = a.cwiseAbs().rowwise().maxCoeff();
    for (Index i = 0; i < n; ++i)
        f.perm[static_cast<std::size_t>(i)] = i;

    for (Index col = 0; col < n; ++col) {
        Index pivot = col;
        for (Index r = col + 1; r < n; ++r)
            if (abs(f.lu(r, col)) > abs(f.lu(pivot, col)))
                pivot = r;
        if (pivot != col) {
            f.lu.row(col).swap(f.lu.row(pivot));
            std::swap(f.perm[static_cast<std::size_t>(col)], f.perm[static_cast<std::size_t>(pivot)]);
            std::swap(row_scale(col), row_scale(pivot));
        }
        const Scalar p = f.lu(col, col);
        if (!(abs(p) > rel_pivot_tol * row_scale(col)) || row_scale(col) == Scalar(0))
            throw singular_jacobian_error("singular matrix: pivot " + std::to_string(static_cast<double>(p)) +
                                              " in column " + std::to_string(col),
                                          {});
        for (Index r = col + 1; r < n; ++r) {
            const Scalar m = f.lu(r, col) / p;
            f.lu(r, col) = m;
            f.lu.row(r).tail(n - col - 1) -= m * f.lu.row(col).tail(n - col - 1);
        }
    }
    return f;
}

template <typename Scalar>
Vec<Scalar> lu_solve(const LuFactorization<Scalar>& f, const Vec<Scalar>& b)
{
    const Index n = f.lu.rows();
    detail::require(b.size() == n, "lu_solve: right-hand side has the wrong dimension");
    Vec<Scalar> x(n);
    for (Index i = 0; i < n; ++i)
        x(i) = b(f.perm[static_cast<std::size_t>(i)]) - f.lu.row(i).head(i).dot(x.head(i));
    for (Index i = n - 1; i >= 0; --i)
        x(i) = (x(i) - f.lu.row(i).tail(n - i - 1).dot(x.tail(n - i - 1))) / f.lu(i, i);
    return x;
}

struct NewtonResult {
    Vec<double> alpha;
    int iterations = 0;
    std::vector<double> residual_norms; // entry 0 is the starting point
    bool converged = false;
    bool stalled = false; // line search exhausted its halvings
};

/// alpha <- alpha + s delta with J delta = -res(alpha); s halves until the
/// max-norm drops below (1 - c s) times the current one. Trial points whose
/// residual cannot be evaluated count as rejected.
inline NewtonResult newton_solve(const ResidualFunction<double>& res, const Vec<double>& alpha0, const NewtonConfig& cfg)
{
    cfg.validate();
    NewtonResult out;
    out.alpha = alpha0;
    Vec<double> r = res(out.alpha);
    double norm = r.cwiseAbs().maxCoeff();
    out.residual_norms.push_back(norm);

    while (true) {
        if (norm <= cfg.tol_residual) {
            out.converged = true;
            break;
        }
        if (out.iterations >= cfg.max_iters)
            break;

        const Mat<double> jac = fd_jacobian(res, out.alpha, cfg.fd_step);
        Vec<double> delta;
        try {
            delta = lu_solve(lu_factor(jac), Vec<double>(-r));
        } catch (const singular_jacobian_error& e) {
            throw singular_jacobian_error(std::string(e.what()) + " at iterate " + detail::format_vector(out.alpha),
                                          detail::to_std(out.alpha));
        }

        double step = 1.0;
        bool accepted = false;
        Vec<double> trial;
        Vec<double> trial_r;
        double trial_norm = norm;
        for (int halving = 0; halving <= cfg.max_halvings; ++halving) {
            trial = out.alpha + step * delta;
            try {
                trial_r = res(trial);
                trial_norm = trial_r.allFinite() ? trial_r.cwiseAbs().maxCoeff() : HUGE_VAL;
            } catch (const model_domain_error&) {
                // A rollout that blows up is an overlong step, not a failure of the solve.
                trial_norm = HUGE_VAL;
            }
            if (trial_norm < (1.0 - cfg.sufficient_decrease * step) * norm) {
                accepted = true;
                break;
            }
            step *= cfg.backtrack_factor;
        }
        if (!accepted) {
            out.stalled = true;
            break;
        }
        out.alpha = trial;
        r = trial_r;
        norm = trial_norm;
        ++out.iterations;
        out.residual_norms.push_back(norm);
    }
    return out;
}

struct ShootingReport {
    Vec<double> alpha_star;
    int iterations = 0;
    std::vector<double> residual_norms;
    bool converged = false;
    bool stalled = false;
    Trajectory<double> trajectory; // coupled [q, v, lambda, mu] on the grid
    Mat<double> controls;          // u* per grid point
    double cost = 0.0;
};

inline ShootingReport solve_tracking(const TrackingProblem<double>& prob,
                                     const Vec<double>& alpha0,
                                     const NewtonConfig& cfg = {})
{
    prob.validate();
    detail::require(alpha0.size() == prob.n() + prob.k(), "initial costate guess has the wrong dimension");
    const NewtonResult nr =
        newton_solve([&prob](const Vec<double>& a) { return shooting_residual(a, prob); }, alpha0, cfg);

    ShootingReport rep;
    rep.alpha_star = nr.alpha;
    rep.iterations = nr.iterations;
    rep.residual_norms = nr.residual_norms;
    rep.converged = nr.converged;
    rep.stalled = nr.stalled;
    rep.trajectory = rollout(prob, nr.alpha);
    rep.controls = controls_along(rep.trajectory, prob);
    rep.cost = total_cost(rep.trajectory, prob);
    return rep;
}

} // namespace nhtrack
