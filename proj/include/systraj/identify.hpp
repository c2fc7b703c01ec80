#ifndef SYSTRAJ_IDENTIFY_HPP
#define SYSTRAJ_IDENTIFY_HPP

#include "systraj/losses.hpp"

#include <functional>
#include <optional>

namespace systraj {

/// Fixed-step gradient descent settings. theta0 empty means start at zero.
struct GDConfig {
    double eta = 0.0;
    long max_iters = 1;
    Matrix theta0;
    std::optional<Matrix> theta_star; // enables per-iterate error tracking
    double grad_tol = 1e-10;
};

/// Per-iterate history of one descent run. The tracked arrays hold one entry
/// per visited iterate (including the initial point) and share their length.
struct GDReport {
    std::vector<double> param_err; // ||theta_tau - theta_star||_F, empty if unknown
    std::vector<double> loss;      // empty unless a loss function was supplied
    std::vector<double> err_A;     // ||A - A_hat||_F^2 / ||A||_F^2 (identify only)
    std::vector<double> err_B;
    Matrix theta_hat;
    long iterations = 0;
    bool converged = false;
};

/// Sampling period L and effective sample count N = floor((T-L)/L), resolved
/// so that the selection formula is self-consistent at (L, N).
struct MixingPlan {
    long L = 1;
    long N = 1;
    double formula_value = 0.0; // the unrounded right-hand side at the returned N
};

enum class MixingMode { Generic, Linear, Nonlinear };

/// Constants feeding the mixing-time formulas. `C` is the absolute constant
/// the theory leaves unspecified (default 1, config-overridable); only the
/// fields used by the chosen mode are read.
struct MixingConstants {
    MixingMode mode = MixingMode::Linear;
    double C = 1.0;
    double C_rho = 1.0;
    double rho = 0.5;
    long T = 0;
    int n = 0;
    int p = 0;
    double d = 0.0;          // generic: parameter dimension under the sqrt(N/d)
    double K_phi = 0.0;      // generic
    double beta_plus = 0.0;  // linear
    double gamma_plus = 0.0; // linear
    double theta_norm = 0.0; // nonlinear: ||Theta_star||_F
    double sigma = 0.0;      // nonlinear
};

/// The sampling-period formula at a fixed sample count N:
///   generic  : ceil(1 + log(C C_rho K_phi n sqrt(N/d)) / (1-rho))
///   linear   : ceil(1 + log(C C_rho beta_+ N (n+p) / gamma_+) / (1-rho))
///   nonlinear: ceil(1 + log(C C_rho (1 + ||Th*|| C_rho (1+sigma)/(1-rho)) N n) / (1-rho))
/// clamped below at 1.
long mixing_length(const MixingConstants& c, long N);

/// Resolves the circular (L, N) dependence by fixed-point iteration from
/// L = 1; on a cycle, scans upward for the smallest exact fixed point.
/// Throws TrajectoryTooShort when no L with N >= 1 is self-consistent.
MixingPlan mixing_time(const MixingConstants& c);

enum class RateMode { Generic, Linear, Nonlinear };

struct RateConstants {
    double alpha = 0.0;       // generic
    double beta = 0.0;        // generic
    double gamma_minus = 0.0; // linear
    double gamma_plus = 0.0;  // linear
    double gamma = 0.0;       // nonlinear
    double rho = 0.0;         // nonlinear
    double C_rho = 0.0;       // nonlinear
    double sigma = 0.0;       // nonlinear, may be zero
    int n = 0;                // nonlinear
};

/// Theory-driven step size:
///   generic  : alpha / (16 beta^2)
///   linear   : gamma_- / (16 gamma_+^2)
///   nonlinear: gamma^2 (1-rho)^4 / (32 C_rho^4 (1+sigma)^2 n^2)
double theory_learning_rate(RateMode mode, const RateConstants& c);

/// theta_{tau+1} = theta_tau - eta * grad_fn(theta_tau) until the gradient
/// norm drops below tolerance or the cap is hit. Records the loss when
/// `loss_fn` is supplied and calls `observer` on every visited iterate.
/// Throws Diverged (carrying the last finite iterate) on blow-up.
GDReport gradient_descent(const std::function<GradValue(const Matrix&)>& grad_fn,
                          const GDConfig& cfg,
                          const std::function<double(const Matrix&)>& loss_fn = nullptr,
                          const std::function<void(long, const Matrix&)>& observer = nullptr);

/// Runs gradient descent on the empirical gradient of `traj` with churn
/// period plan.L. When cfg.theta_star is set, tracks the normalized errors
/// ||A - A_hat||_F^2 / ||A||_F^2 (and the B analog for systems that have B).
GDReport identify(const Trajectory& traj, const SystemSpec& sys_shape, const GDConfig& cfg,
                  const MixingPlan& plan);

} // namespace systraj

#endif
