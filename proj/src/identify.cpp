#include "systraj/identify.hpp"

#include <cmath>
#include <set>

namespace systraj {

namespace {

double formula_rhs(const MixingConstants& c, long N) {
    double arg = 0.0;
    switch (c.mode) {
    case MixingMode::Generic:
        if (c.K_phi <= 0.0 || c.n <= 0 || c.d <= 0.0)
            throw InvalidInput("generic mixing formula needs K_phi, n, d > 0");
        arg = c.C * c.C_rho * c.K_phi * c.n * std::sqrt(static_cast<double>(N) / c.d);
        break;
    case MixingMode::Linear:
        if (c.beta_plus <= 0.0 || c.gamma_plus <= 0.0 || c.n <= 0 || c.p < 0)
            throw InvalidInput("linear mixing formula needs beta_+, gamma_+, n > 0");
        arg = c.C * c.C_rho * c.beta_plus * static_cast<double>(N) * (c.n + c.p) /
              c.gamma_plus;
        break;
    case MixingMode::Nonlinear:
        if (c.theta_norm < 0.0 || c.sigma < 0.0 || c.n <= 0)
            throw InvalidInput("nonlinear mixing formula needs theta_norm, sigma >= 0, n > 0");
        arg = c.C * c.C_rho * (1.0 + c.theta_norm * c.C_rho * (1.0 + c.sigma) / (1.0 - c.rho)) *
              static_cast<double>(N) * c.n;
        break;
    }
    if (!(arg > 0.0)) throw InvalidInput("mixing formula argument must be positive");
    return 1.0 + std::log(arg) / (1.0 - c.rho);
}

void check_mixing_inputs(const MixingConstants& c) {
    if (!(c.rho > 0.0 && c.rho < 1.0)) throw InvalidInput("rho must lie in (0,1)");
    if (c.C <= 0.0 || c.C_rho <= 0.0) throw InvalidInput("C and C_rho must be positive");
}

} // namespace

long mixing_length(const MixingConstants& c, long N) {
    check_mixing_inputs(c);
    if (N < 1) throw InvalidInput("N must be >= 1");
    return std::max<long>(1, static_cast<long>(std::ceil(formula_rhs(c, N))));
}

MixingPlan mixing_time(const MixingConstants& c) {
    check_mixing_inputs(c);
    const long T = c.T;
    const long min_T = 2 * mixing_length(c, 1);
    if (T < 2) throw TrajectoryTooShort(min_T);

    auto sample_count = [T](long L) { return (T - L) / L; };
    auto step = [&](long L) { return mixing_length(c, sample_count(L)); };

    long L = 1;
    std::set<long> seen;
    while (seen.insert(L).second) {
        if (sample_count(L) < 1) break;
        const long next = step(L);
        if (next == L) {
            return {L, sample_count(L), formula_rhs(c, sample_count(L))};
        }
        L = next;
    }

    // The iteration cycled or left the feasible range; take the smallest
    // self-consistent L (exact fixed point, or the crossing where the
    // formula first drops to or below L).
    for (L = 1; 2 * L <= T; ++L) {
        if (step(L) == L) return {L, sample_count(L), formula_rhs(c, sample_count(L))};
    }
    for (L = 1; 2 * L <= T; ++L) {
        if (step(L) <= L) return {L, sample_count(L), formula_rhs(c, sample_count(L))};
    }
    throw TrajectoryTooShort(min_T);
}

double theory_learning_rate(RateMode mode, const RateConstants& c) {
    switch (mode) {
    case RateMode::Generic:
        if (c.alpha <= 0.0 || c.beta <= 0.0) throw InvalidInput("alpha, beta must be positive");
        return c.alpha / (16.0 * c.beta * c.beta);
    case RateMode::Linear:
        if (c.gamma_minus <= 0.0 || c.gamma_plus <= 0.0)
            throw InvalidInput("gamma_-, gamma_+ must be positive");
        return c.gamma_minus / (16.0 * c.gamma_plus * c.gamma_plus);
    case RateMode::Nonlinear: {
        if (c.gamma <= 0.0 || c.C_rho <= 0.0 || c.n <= 0)
            throw InvalidInput("gamma, C_rho, n must be positive");
        if (!(c.rho > 0.0 && c.rho < 1.0)) throw InvalidInput("rho must lie in (0,1)");
        if (c.sigma < 0.0) throw InvalidInput("sigma must be >= 0");
        const double one_minus = 1.0 - c.rho;
        const double c4 = c.C_rho * c.C_rho * c.C_rho * c.C_rho;
        return c.gamma * c.gamma * std::pow(one_minus, 4) /
               (32.0 * c4 * (1.0 + c.sigma) * (1.0 + c.sigma) * c.n * c.n);
    }
    }
    throw InvalidInput("unknown learning-rate mode");
}

GDReport gradient_descent(const std::function<GradValue(const Matrix&)>& grad_fn,
                          const GDConfig& cfg,
                          const std::function<double(const Matrix&)>& loss_fn,
                          const std::function<void(long, const Matrix&)>& observer) {
    if (!(cfg.eta > 0.0)) throw InvalidInput("learning rate must be positive");
    if (cfg.max_iters < 1) throw InvalidInput("iteration cap must be >= 1");
    if (cfg.theta0.size() == 0) throw InvalidInput("theta0 must be set");

    GDReport report;
    Matrix theta = cfg.theta0;
    auto record = [&](long iter) {
        if (cfg.theta_star) report.param_err.push_back((theta - *cfg.theta_star).norm());
        if (loss_fn) report.loss.push_back(loss_fn(theta));
        if (observer) observer(iter, theta);
    };

    for (long iter = 0; iter < cfg.max_iters; ++iter) {
        record(iter);
        GradValue g = grad_fn(theta);
        if (!g.grad.allFinite()) throw Diverged(theta);
        if (g.grad.norm() <= cfg.grad_tol) {
            report.converged = true;
            report.theta_hat = theta;
            report.iterations = iter;
            return report;
        }
        Matrix prev = theta;
        theta -= cfg.eta * g.grad;
        if (!theta.allFinite() || theta.norm() > 1e100) throw Diverged(std::move(prev));
        report.iterations = iter + 1;
    }
    record(report.iterations);
    report.theta_hat = theta;
    return report;
}

GDReport identify(const Trajectory& traj, const SystemSpec& sys_shape, const GDConfig& cfg,
                  const MixingPlan& plan) {
    if (traj.length() <= plan.L) throw InvalidInput("trajectory length must exceed plan.L");
    if (sys_shape.form != traj.sys.form || sys_shape.state_dim() != traj.sys.state_dim())
        throw InvalidInput("sys_shape does not match the recorded trajectory");

    const Matrix shape = sys_shape.theta_star();
    GDConfig run = cfg;
    if (run.theta0.size() == 0) run.theta0 = Matrix::Zero(shape.rows(), shape.cols());

    const bool split = sys_shape.form == SystemForm::Linear || sys_shape.form == SystemForm::PreMix;
    const Eigen::Index na = sys_shape.A.cols();

    GDReport report;
    std::function<void(long, const Matrix&)> observer;
    if (run.theta_star) {
        observer = [&](long, const Matrix& theta) {
            const Matrix& ts = *run.theta_star;
            if (split) {
                const double da = (theta.leftCols(na) - ts.leftCols(na)).squaredNorm();
                const double db = (theta.rightCols(theta.cols() - na) -
                                   ts.rightCols(ts.cols() - na))
                                      .squaredNorm();
                report.err_A.push_back(da / ts.leftCols(na).squaredNorm());
                report.err_B.push_back(db / ts.rightCols(ts.cols() - na).squaredNorm());
            } else {
                report.err_A.push_back((theta - ts).squaredNorm() / ts.squaredNorm());
            }
        };
    }

    GDReport run_report = gradient_descent(
        [&](const Matrix& theta) { return empirical_gradient(theta, traj, plan.L); }, run,
        [&](const Matrix& theta) { return empirical_loss(theta, traj, plan.L).value; },
        observer);
    run_report.err_A = std::move(report.err_A);
    run_report.err_B = std::move(report.err_B);
    return run_report;
}

} // namespace systraj
