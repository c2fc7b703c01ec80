#ifndef SYSTRAJ_LOSSES_HPP
#define SYSTRAJ_LOSSES_HPP

#include "systraj/trajectory.hpp"

namespace systraj {

/// Scalar loss with a Monte Carlo standard error where one applies.
struct LossValue {
    double value = 0.0;
    double std_error = 0.0;
};

/// Gradient shaped like the parameter matrix; rows stack the per-row
/// gradients of the separable form exactly.
struct GradValue {
    Matrix grad;
    Matrix std_error; // empty unless Monte Carlo estimated
};

/// Squared-residual prediction of the next state under parameter `theta`
/// (same shape as sys.theta_star()).
Vector predict_next(const SystemSpec& sys, const PolicySpec& policy, const Matrix& theta,
                    const Vector& h, const Vector& z);

/// Empirical risk over the trajectory with churn period L:
/// (1/(2(T-L))) sum_{t=L}^{T-1} ||h_{t+1} - phi_tilde(h_t, z_t; theta)||^2.
LossValue empirical_loss(const Matrix& theta, const Trajectory& traj, long L);
GradValue empirical_gradient(const Matrix& theta, const Trajectory& traj, long L);

/// Truncated risk: residuals between h_{t+1,L} and the prediction from
/// h_{t,L-1}. Equals the average of the L sub-trajectory losses on the
/// overlapping index range.
LossValue truncated_loss(const Matrix& theta, const Trajectory& traj, long L);
GradValue truncated_gradient(const Matrix& theta, const Trajectory& traj, long L);

/// Loss over the N truncated triplets of one sub-trajectory.
LossValue subtrajectory_loss(const Matrix& theta, const SubTrajectory& sub);
GradValue subtrajectory_gradient(const Matrix& theta, const SubTrajectory& sub);

/// Monte Carlo estimate of the auxiliary loss (expected single-sample loss at
/// timestamp L-1) and its gradient over M fresh seeded trajectories.
/// Standard errors are reported per component.
std::pair<LossValue, GradValue> auxiliary_estimate(const Matrix& theta, const SystemSpec& sys,
                                                   const PolicySpec& policy,
                                                   const NoiseSpec& noise, long L, long M);

} // namespace systraj

#endif
