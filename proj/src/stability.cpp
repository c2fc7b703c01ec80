#include "systraj/stability.hpp"

#include "systraj/rng.hpp"
#include "systraj/trajectory.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

namespace systraj {

double spectral_radius(const Matrix& M) {
    if (M.rows() != M.cols()) throw InvalidInput("spectral_radius needs a square matrix");
    if (!M.allFinite()) throw InvalidInput("matrix has non-finite entries");
    Eigen::EigenSolver<Matrix> es(M, /*computeEigenvectors=*/false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

double operator_norm(const Matrix& M) {
    if (M.size() == 0) return 0.0;
    if (!M.allFinite()) throw InvalidInput("matrix has non-finite entries");
    Eigen::JacobiSVD<Matrix> svd(M);
    return svd.singularValues()(0);
}

StabilityEstimate estimate_stability(const SystemSpec& sys, const PolicySpec& policy,
                                     const NoiseSpec& noise, int trials, int horizon,
                                     double alpha_scale) {
    if (trials < 1) throw InvalidInput("trials must be >= 1");
    if (horizon < 2) throw InvalidInput("horizon must be >= 2");
    if (!(alpha_scale > 0.0)) throw InvalidInput("alpha_scale must be positive");

    const int dim = sys.lifted_dim();
    std::vector<double> env(horizon + 1, 0.0);
    for (int r = 0; r < trials; ++r) {
        NoiseSpec rep = noise;
        rep.seed = derive_seed(noise.seed, 11, static_cast<std::uint64_t>(r));
        Rng arng(derive_seed(noise.seed, 12, static_cast<std::uint64_t>(r)));
        Vector alpha(dim);
        for (int i = 0; i < dim; ++i) alpha[i] = arng.normal();
        alpha *= alpha_scale / alpha.norm();

        Trajectory perturbed = simulate_from(sys, policy, rep, horizon, alpha);
        Trajectory nominal = simulate(sys, policy, rep, horizon);
        for (int t = 0; t <= horizon; ++t) {
            double ratio = (perturbed.states[t] - nominal.states[t]).norm() / alpha_scale;
            env[t] = std::max(env[t], ratio);
        }
    }

    // Samples that have decayed to rounding noise would read as growth ~ 1;
    // fit only the part of the envelope that is meaningfully above the floor.
    const double peak = *std::max_element(env.begin(), env.end());
    const double floor = 1e-10 * peak;

    // Long-baseline geometric-mean slope of the upper envelope. Short
    // baselines see only the transient, which C_rho absorbs instead. The
    // baseline is a quarter of the above-floor window, not of the horizon,
    // so fast decay to the floor still leaves usable pairs.
    int t_lo = horizon, t_hi = 0;
    for (int t = 0; t <= horizon; ++t)
        if (env[t] > floor) {
            t_lo = std::min(t_lo, t);
            t_hi = std::max(t_hi, t);
        }
    const int min_gap = std::max(1, (t_hi - t_lo) / 4);
    double rho = 0.0;
    for (int s = 0; s <= horizon; ++s) {
        if (env[s] <= floor) continue;
        for (int t = s + min_gap; t <= horizon; ++t) {
            if (env[t] <= floor) continue;
            rho = std::max(rho, std::pow(env[t] / env[s], 1.0 / (t - s)));
        }
    }
    if (rho >= 1.0) throw UnstableSystem(rho);
    if (rho <= 0.0) rho = 1e-12; // paired rollouts collapsed to zero difference

    double c = 1.0;
    for (int t = 0; t <= horizon; ++t)
        if (env[t] > floor) c = std::max(c, env[t] / std::pow(rho, t));

    StabilityEstimate est;
    est.C_rho = c;
    est.rho = rho;
    est.horizon = horizon;
    est.trials = trials;
    double dev = 0.0;
    for (int t = 0; t <= horizon; ++t)
        if (env[t] > floor)
            dev = std::max(dev, std::abs(std::log(env[t]) - std::log(c) - t * std::log(rho)));
    est.fit_residual = dev;
    return est;
}

GramianMatrices gramians(const Matrix& A, const Matrix& B, double sigma, long t) {
    if (A.rows() != A.cols()) throw InvalidInput("A must be square");
    if (B.rows() != A.rows()) throw InvalidInput("B row count must match A");
    if (t < 1) throw InvalidInput("t must be >= 1");
    const Eigen::Index n = A.rows();
    GramianMatrices g;
    g.GGt = Matrix::Zero(n, n);
    g.FFt = Matrix::Zero(n, n);
    const Matrix BBt = B * B.transpose();
    for (long k = 0; k < t; ++k) {
        g.GGt = A * g.GGt * A.transpose() + BBt;
        g.FFt = A * g.FFt * A.transpose() + Matrix::Identity(n, n);
    }
    g.Gamma = g.GGt + sigma * sigma * g.FFt;
    return g;
}

GramianBundle covariance_bounds(const Matrix& A, const Matrix& B, double sigma, long L, long T) {
    if (L < 2) throw InvalidInput("L must be >= 2");
    if (T < L - 1) throw InvalidInput("need T >= L-1");
    const Eigen::Index n = A.rows();
    const Matrix BBt = B * B.transpose();
    Matrix GGt = Matrix::Zero(n, n);
    Matrix FFt = Matrix::Zero(n, n);
    GramianBundle out;
    out.beta_plus = 1.0;
    for (long t = 1; t <= T; ++t) {
        GGt = A * GGt * A.transpose() + BBt;
        FFt = A * FFt * A.transpose() + Matrix::Identity(n, n);
        Matrix Gamma = GGt + sigma * sigma * FFt;
        Eigen::SelfAdjointEigenSolver<Matrix> es(Gamma, Eigen::EigenvaluesOnly);
        const auto& ev = es.eigenvalues();
        out.beta_plus = std::max(out.beta_plus, ev.maxCoeff());
        if (t == L - 1) {
            out.gamma_minus = std::min(1.0, ev.minCoeff());
            out.gamma_plus = std::max(1.0, ev.maxCoeff());
        }
    }
    out.kappa = out.gamma_plus / out.gamma_minus;
    return out;
}

double nonlinear_operator_norm(const Matrix& A, const Activation& act, int samples,
                               std::uint64_t seed) {
    if (samples < 1) throw InvalidInput("samples must be >= 1");
    const Eigen::Index n = A.cols();
    const double scale = A.squaredNorm(); // crude smoothness proxy for the step
    double best = 0.0;
    Rng rng(derive_seed(seed, 21));
    for (int s = 0; s < samples; ++s) {
        Vector x(n);
        for (Eigen::Index i = 0; i < n; ++i) x[i] = rng.normal();
        x.normalize();
        double step = 1.0 / std::max(scale, 1e-12);
        double f = 0.5 * act.eval(Vector(A * x)).squaredNorm();
        for (int it = 0; it < 2000; ++it) {
            Vector ax = A * x;
            Vector g = A.transpose() * Vector(act.eval(ax).cwiseProduct(act.deriv(ax)));
            Vector cand = (x + step * g).normalized();
            double fc = 0.5 * act.eval(Vector(A * cand)).squaredNorm();
            if (fc > f) {
                if (fc - f < 1e-15 * std::max(1.0, f) && (cand - x).norm() < 1e-10) {
                    x = cand;
                    f = fc;
                    break;
                }
                x = cand;
                f = fc;
                step *= 1.5;
            } else {
                step *= 0.5;
                if (step < 1e-16) break;
            }
        }
        best = std::max(best, std::sqrt(2.0 * f));
    }
    return best;
}

Matrix dare_gain(const Matrix& A, const Matrix& B) {
    if (A.rows() != A.cols() || B.rows() != A.rows())
        throw InvalidInput("dare_gain dimension mismatch");
    const Eigen::Index n = A.rows();
    const Eigen::Index p = B.cols();
    const Matrix Q = Matrix::Identity(n, n);
    const Matrix R = Matrix::Identity(p, p);
    Matrix P = Q;
    for (long it = 0; it < 100000; ++it) {
        Matrix BtP = B.transpose() * P;
        Matrix gain = (R + BtP * B).ldlt().solve(BtP * A);
        Matrix next = Q + A.transpose() * P * A - A.transpose() * P * B * gain;
        double delta = (next - P).norm();
        P = next;
        if (!P.allFinite() || P.norm() > 1e14)
            throw NotStabilizable("Riccati fixed-point iteration diverged");
        if (delta <= 1e-10 * std::max(1.0, P.norm())) {
            return (R + B.transpose() * P * B).ldlt().solve(B.transpose() * P * A);
        }
    }
    throw NotStabilizable("Riccati fixed-point iteration did not converge");
}

Matrix dare_policy(const Matrix& A, const Matrix& B, double noise_var, std::uint64_t seed) {
    if (noise_var < 0.0) throw InvalidInput("noise_var must be >= 0");
    Matrix K0 = dare_gain(A, B);
    if (noise_var == 0.0) {
        if (spectral_radius(A - B * K0) >= 1.0)
            throw NotStabilizable("Riccati gain does not stabilize the pair");
        return K0;
    }
    const double std = std::sqrt(noise_var);
    Rng rng(derive_seed(seed, 31));
    // Highly non-normal closed loops can lose stability under gain noise far
    // smaller than the nominal margin suggests. Shrink the perturbation until
    // a stabilizing draw appears rather than fail: the gain stays noisy but
    // the closed loop stays usable.
    for (int level = 0; level < 16; ++level) {
        const double scale = std * std::pow(0.5, level);
        for (int attempt = 0; attempt < 20; ++attempt) {
            Matrix K = K0;
            for (Eigen::Index i = 0; i < K.rows(); ++i)
                for (Eigen::Index j = 0; j < K.cols(); ++j) K(i, j) += scale * rng.normal();
            if (spectral_radius(A - B * K) < 1.0) return K;
        }
    }
    throw NotStabilizable("no stabilizing perturbation found");
}

} // namespace systraj
