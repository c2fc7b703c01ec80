#ifndef SYSTRAJ_COMMON_HPP
#define SYSTRAJ_COMMON_HPP

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace systraj {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Rejected input (dimension mismatch, out-of-range argument, ...).
struct InvalidInput : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Paired rollouts do not contract; carries the observed growth rate.
struct UnstableSystem : std::runtime_error {
    double growth_estimate;
    explicit UnstableSystem(double growth)
        : std::runtime_error("closed-loop rollouts do not contract (growth ~ " +
                             std::to_string(growth) + ")"),
          growth_estimate(growth) {}
};

/// Riccati iteration diverged or no stabilizing perturbation was found.
struct NotStabilizable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Gradient descent produced a non-finite iterate; carries the last finite one.
struct Diverged : std::runtime_error {
    Matrix last_iterate;
    explicit Diverged(Matrix last)
        : std::runtime_error("gradient descent diverged"), last_iterate(std::move(last)) {}
};

/// No sampling period with at least one sub-sample exists for this T.
struct TrajectoryTooShort : std::runtime_error {
    long minimal_T;
    explicit TrajectoryTooShort(long min_T)
        : std::runtime_error("trajectory too short, need T >= " + std::to_string(min_T)),
          minimal_T(min_T) {}
};

} // namespace systraj

#endif
