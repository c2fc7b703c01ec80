#ifndef SYSTRAJ_STABILITY_HPP
#define SYSTRAJ_STABILITY_HPP

#include "systraj/system.hpp"

namespace systraj {

/// Fitted contraction envelope ||h_t(a) - h_t(0)|| <= C_rho * rho^t * ||a||.
struct StabilityEstimate {
    double C_rho = 1.0;     // >= 1
    double rho = 0.0;       // in (0,1)
    double fit_residual = 0.0; // max |log env_t - log(C_rho rho^t)| over fit data
    int horizon = 0;
    int trials = 0;

    double envelope(long t) const { return C_rho * std::pow(rho, static_cast<double>(t)); }
};

/// Finite-time controllability Gramians and the state covariance
/// Gamma_t = G_t G_t^T + sigma^2 F_t F_t^T.
struct GramianMatrices {
    Matrix GGt;   // sum A^i B B^T (A^i)^T, i < t
    Matrix FFt;   // sum A^i (A^i)^T, i < t
    Matrix Gamma; // GGt + sigma^2 FFt
};

/// Extremal covariance eigenvalues entering the OPC constants for an LDS.
struct GramianBundle {
    double gamma_minus = 0.0; // 1 ^ lambda_min(Gamma_{L-1})
    double gamma_plus = 0.0;  // 1 v lambda_max(Gamma_{L-1})
    double beta_plus = 0.0;   // 1 v max_{1<=t<=T} lambda_max(Gamma_t)
    double kappa = 0.0;       // gamma_plus / gamma_minus
};

/// Largest eigenvalue modulus of a square matrix.
double spectral_radius(const Matrix& M);

/// Largest singular value.
double operator_norm(const Matrix& M);

/// Fits the tightest (C_rho, rho) envelope over `trials` paired rollouts with
/// shared excitation/noise streams and initial offsets of norm `alpha_scale`.
/// Throws UnstableSystem when the paired difference does not contract.
StabilityEstimate estimate_stability(const SystemSpec& sys, const PolicySpec& policy,
                                     const NoiseSpec& noise, int trials, int horizon,
                                     double alpha_scale = 1.0);

/// Gamma_t via the recursion Gamma_{k+1} = A Gamma_k A^T + B B^T + sigma^2 I.
GramianMatrices gramians(const Matrix& A, const Matrix& B, double sigma, long t);

/// (gamma_-, gamma_+, beta_+, kappa) with eigensolves on Gamma_{L-1} and
/// Gamma_t for 1 <= t <= T. Requires L >= 2.
GramianBundle covariance_bounds(const Matrix& A, const Matrix& B, double sigma, long L, long T);

/// Lower-bound estimate of sup_{||x||=1} ||phi(Ax)|| by projected gradient
/// ascent with `samples` random restarts. Deterministic given seed.
double nonlinear_operator_norm(const Matrix& A, const Activation& act, int samples,
                               std::uint64_t seed = 0);

/// LQR gain through the DARE with Q = R = I, solved by fixed-point iteration,
/// plus i.i.d. N(0, noise_var) perturbation redrawn until the closed loop is
/// stable. noise_var = 0 returns the exact gain.
Matrix dare_policy(const Matrix& A, const Matrix& B, double noise_var, std::uint64_t seed);

/// The unperturbed Riccati gain K0 (exposed for oracle tests).
Matrix dare_gain(const Matrix& A, const Matrix& B);

} // namespace systraj

#endif
