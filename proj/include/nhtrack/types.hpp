#pragma once

#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace nhtrack {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Three-index symbol array stored as one matrix per upper index:
/// `symbols[c](a, b)` holds the coefficient with upper index c and lower a, b.
template <typename Scalar>
using SymbolArray = std::vector<Mat<Scalar>>;

using Index = Eigen::Index;

/// Caller broke a precondition (dimension mismatch, bad symmetry, bad argument).
class contract_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Evaluation left the region where the model is defined or produced non-finite values.
class model_domain_error : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Ambient state does not satisfy the nonholonomic constraint within tolerance.
class constraint_violation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// epsilon <= 0: the control is no longer determined by the stationary condition.
class singular_problem_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

namespace detail {

inline void require(bool ok, const std::string& what)
{
    if (!ok)
        throw contract_error(what);
}

template <typename Derived>
std::string format_vector(const Eigen::MatrixBase<Derived>& x)
{
    std::ostringstream os;
    os.precision(17);
    os << "(";
    for (Index i = 0; i < x.size(); ++i)
        os << (i ? ", " : "") << x(i);
    os << ")";
    return os.str();
}

} // namespace detail
} // namespace nhtrack
