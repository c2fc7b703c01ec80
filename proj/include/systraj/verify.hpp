#ifndef SYSTRAJ_VERIFY_HPP
#define SYSTRAJ_VERIFY_HPP

#include "systraj/losses.hpp"
#include "systraj/stability.hpp"

#include <functional>
#include <string>
#include <utility>

namespace systraj {

enum class AssumptionId {
    Stability,
    Boundedness,
    OPC,
    Smoothness,
    LipschitzGrad,
    GradConcentration,
    TruncationGap,
    CovarianceSandwich,
};

const char* assumption_name(AssumptionId id);

/// One tested point: the measured quantity, the envelope it must satisfy,
/// and their ratio.
struct ReportRow {
    std::string label;
    double measured = 0.0;
    double bound = 0.0;
    double ratio = 0.0;
    bool pass = false;
};

/// Outcome of one assumption check. `pass` holds only if every row passed
/// within the stated slack.
struct AssumptionReport {
    AssumptionId id = AssumptionId::Stability;
    bool pass = false;
    long samples = 0;
    std::vector<std::pair<std::string, double>> constants;
    std::vector<ReportRow> rows;
};

/// Central finite differences of a scalar function of the parameter matrix.
GradValue finite_diff_gradient(const std::function<double(const Matrix&)>& loss_fn,
                               const Matrix& theta, double eps);

/// Empirical envelopes, over the trajectory and the supplied parameter
/// probes, of the transition Jacobian norms (triangle-inequality upper
/// bounds at each sample, maximized over samples):
///   B_phi >= ||d phi~ / d h||,  C_phi >= ||d phi~_k / d theta_k||,
///   D_phi >= ||d/dh (d phi~_k / d theta_k)||.
struct SmoothnessConstants {
    double B_phi = 0.0;
    double C_phi = 0.0;
    double D_phi = 0.0;
};
SmoothnessConstants measure_smoothness(const Trajectory& traj,
                                       const std::vector<Matrix>& theta_probes);

/// One-point convexity / smoothness of the auxiliary loss, probed on spheres
/// of radii {r/4, r/2, r} around the true parameter with M Monte Carlo
/// trajectories per gradient estimate.
struct OpcResult {
    double alpha_hat = 0.0;
    double beta_hat = 0.0;
    double alpha_se = 0.0;
    double beta_se = 0.0;
    AssumptionReport report;
};
OpcResult check_opc(const SystemSpec& sys, const PolicySpec& policy, const NoiseSpec& noise,
                    long L, double ball_radius, int probes, long M);

/// Decay of ||grad empirical - grad auxiliary|| across trajectory lengths.
/// Fits the log-log exponent in the effective sample count; passes when the
/// exponent lies in [-0.65, -0.35] (square-root concentration).
AssumptionReport check_gradient_concentration(const SystemSpec& sys, const PolicySpec& policy,
                                              const NoiseSpec& noise, long L,
                                              const std::vector<long>& T_grid, int probes,
                                              long M_ref = 20000);

/// Truncation-gap envelopes |L - Ltr| and ||grad L - grad Ltr|| against
/// 2 n beta_+ C_rho rho^{L-1} {B,D}_phi (sigma + C_phi ||theta - theta*||)
/// at every (theta, L) grid point. Constants B/C/D are measured on `traj`.
struct TruncationConstants {
    double C_rho = 1.0;
    double rho = 0.5;
    double beta_plus = 1.0;
};
AssumptionReport check_truncation_gap(const Trajectory& traj,
                                      const std::vector<Matrix>& theta_probes,
                                      const std::vector<long>& L_grid,
                                      const TruncationConstants& c);

/// Bounded-state check over an ensemble of `reps` >= 100 seeded rollouts:
/// max_t ||h_t|| <= slack * beta_+ sqrt(n) and mean ||h_t||^2 <= beta_+^2 n,
/// with beta_+ = C_rho (sigma + B)/(1 - rho) and B measured as
/// max_t ||phi~(0, z_t; theta*)|| / sqrt(n).
struct BoundedConstants {
    double C_rho = 1.0;
    double rho = 0.5;
    double slack = 1.0;
};
AssumptionReport check_bounded_states(const SystemSpec& sys, const PolicySpec& policy,
                                      const NoiseSpec& noise, long T, int reps,
                                      const BoundedConstants& c);

/// Empirical covariance of h_{L-1} over M rollouts against the eigenvalue
/// range of the Gramian covariance, with multiplicative slack. Linear only.
AssumptionReport check_covariance_sandwich(const SystemSpec& sys, const PolicySpec& policy,
                                           const NoiseSpec& noise, long L, long M,
                                           double slack = 0.2);

/// Two-sample Kolmogorov-Smirnov statistic and the rejection decision at
/// significance `alpha` (asymptotic critical value).
double ks_statistic(std::vector<double> a, std::vector<double> b);
bool ks_reject(std::vector<double> a, std::vector<double> b, double alpha);

} // namespace systraj

#endif
