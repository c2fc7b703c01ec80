#include "systraj/losses.hpp"

#include "systraj/rng.hpp"

#include <cmath>

namespace systraj {

namespace {

constexpr std::uint64_t kAuxiliaryStream = 41;

void check_theta(const SystemSpec& sys, const Matrix& theta) {
    if (!theta.allFinite()) throw InvalidInput("theta has non-finite entries");
    const Eigen::Index cols = (sys.form == SystemForm::Linear || sys.form == SystemForm::PreMix)
                                  ? sys.A.cols() + sys.B.cols()
                                  : sys.A.cols();
    if (theta.rows() != sys.A.rows() || theta.cols() != cols)
        throw InvalidInput("theta shape does not match the system parameter");
}

// One squared-residual sample: loss contribution and, when `grad` is given,
// the per-row term -residual[k] * phi'(s_k) * x accumulated into it.
double accumulate_sample(const SystemSpec& sys, const PolicySpec& policy, const Matrix& theta,
                         const Vector& h, const Vector& z, const Vector& target,
                         Matrix* grad) {
    const Vector x = sys.regressor(policy, h, z);
    const Vector s = theta * x;
    Vector pred;
    switch (sys.form) {
    case SystemForm::Linear:
        pred = s;
        break;
    case SystemForm::PreMix:
        pred = sys.act.eval(s);
        break;
    case SystemForm::PostAdd:
    case SystemForm::Arx:
        pred = sys.act.eval(s) + policy.input(h, z);
        break;
    }
    const Vector r = target - pred;
    if (grad) {
        if (sys.form == SystemForm::Linear)
            grad->noalias() -= r * x.transpose();
        else
            grad->noalias() -= Vector(r.cwiseProduct(sys.act.deriv(s))) * x.transpose();
    }
    return 0.5 * r.squaredNorm();
}

void check_range(const Trajectory& traj, long L) {
    if (L < 1) throw InvalidInput("churn period L must be >= 1");
    if (traj.length() <= L) throw InvalidInput("need T > L");
}

} // namespace

Vector predict_next(const SystemSpec& sys, const PolicySpec& policy, const Matrix& theta,
                    const Vector& h, const Vector& z) {
    check_theta(sys, theta);
    return sys.with_theta(theta).transition(policy, h, z).head(sys.state_dim());
}

LossValue empirical_loss(const Matrix& theta, const Trajectory& traj, long L) {
    check_theta(traj.sys, theta);
    check_range(traj, L);
    const int n = traj.sys.state_dim();
    const long T = traj.length();
    double sum = 0.0;
    for (long t = L; t < T; ++t)
        sum += accumulate_sample(traj.sys, traj.policy, theta, traj.states[t],
                                 traj.excitations[t], traj.states[t + 1].head(n), nullptr);
    return {sum / static_cast<double>(T - L), 0.0};
}

GradValue empirical_gradient(const Matrix& theta, const Trajectory& traj, long L) {
    check_theta(traj.sys, theta);
    check_range(traj, L);
    const int n = traj.sys.state_dim();
    const long T = traj.length();
    Matrix grad = Matrix::Zero(theta.rows(), theta.cols());
    for (long t = L; t < T; ++t)
        accumulate_sample(traj.sys, traj.policy, theta, traj.states[t], traj.excitations[t],
                          traj.states[t + 1].head(n), &grad);
    grad /= static_cast<double>(T - L);
    return {std::move(grad), Matrix()};
}

namespace {

// Shared truncated-risk loop: residuals between h_{t+1,L} and the prediction
// from h_{t,L-1}. The target is rolled forward from the truncated state with
// the true dynamics and recorded draws, which equals truncated_state(t+1, L).
double truncated_sum(const Matrix& theta, const Trajectory& traj, long L, Matrix* grad) {
    const int n = traj.sys.state_dim();
    const long T = traj.length();
    const Vector zero = Vector::Zero(traj.sys.lifted_dim());
    double sum = 0.0;
    for (long t = L; t < T; ++t) {
        const Vector hbar = L == 1 ? zero : truncated_state(traj, t, L - 1);
        const Vector target =
            step(traj.sys, traj.policy, hbar, traj.excitations[t], traj.noises[t]).head(n);
        sum += accumulate_sample(traj.sys, traj.policy, theta, hbar, traj.excitations[t],
                                 target, grad);
    }
    return sum;
}

} // namespace

LossValue truncated_loss(const Matrix& theta, const Trajectory& traj, long L) {
    check_theta(traj.sys, theta);
    check_range(traj, L);
    return {truncated_sum(theta, traj, L, nullptr) / static_cast<double>(traj.length() - L),
            0.0};
}

GradValue truncated_gradient(const Matrix& theta, const Trajectory& traj, long L) {
    check_theta(traj.sys, theta);
    check_range(traj, L);
    Matrix grad = Matrix::Zero(theta.rows(), theta.cols());
    truncated_sum(theta, traj, L, &grad);
    grad /= static_cast<double>(traj.length() - L);
    return {std::move(grad), Matrix()};
}

LossValue subtrajectory_loss(const Matrix& theta, const SubTrajectory& sub) {
    check_theta(sub.sys, theta);
    const long N = sub.count();
    if (N < 1) throw InvalidInput("sub-trajectory has no triplets");
    const int n = sub.sys.state_dim();
    double sum = 0.0;
    for (long i = 0; i < N; ++i)
        sum += accumulate_sample(sub.sys, sub.policy, theta, sub.hbar[i], sub.z[i],
                                 sub.ybar[i].head(n), nullptr);
    return {sum / static_cast<double>(N), 0.0};
}

GradValue subtrajectory_gradient(const Matrix& theta, const SubTrajectory& sub) {
    check_theta(sub.sys, theta);
    const long N = sub.count();
    if (N < 1) throw InvalidInput("sub-trajectory has no triplets");
    const int n = sub.sys.state_dim();
    Matrix grad = Matrix::Zero(theta.rows(), theta.cols());
    for (long i = 0; i < N; ++i)
        accumulate_sample(sub.sys, sub.policy, theta, sub.hbar[i], sub.z[i],
                          sub.ybar[i].head(n), &grad);
    grad /= static_cast<double>(N);
    return {std::move(grad), Matrix()};
}

std::pair<LossValue, GradValue> auxiliary_estimate(const Matrix& theta, const SystemSpec& sys,
                                                   const PolicySpec& policy,
                                                   const NoiseSpec& noise, long L, long M) {
    check_theta(sys, theta);
    if (L < 1) throw InvalidInput("L must be >= 1");
    if (M < 1) throw InvalidInput("M must be >= 1");
    const int n = sys.state_dim();

    double loss_sum = 0.0, loss_sq = 0.0;
    Matrix grad_sum = Matrix::Zero(theta.rows(), theta.cols());
    Matrix grad_sq = Matrix::Zero(theta.rows(), theta.cols());
    Matrix g(theta.rows(), theta.cols());
    for (long i = 0; i < M; ++i) {
        NoiseSpec rep = noise;
        rep.seed = derive_seed(noise.seed, kAuxiliaryStream, static_cast<std::uint64_t>(i));
        Trajectory traj = simulate(sys, policy, rep, L);
        g.setZero();
        const double li = accumulate_sample(sys, policy, theta, traj.states[L - 1],
                                            traj.excitations[L - 1],
                                            traj.states[L].head(n), &g);
        loss_sum += li;
        loss_sq += li * li;
        grad_sum += g;
        grad_sq += g.cwiseProduct(g);
    }

    const double m = static_cast<double>(M);
    LossValue loss{loss_sum / m, 0.0};
    GradValue grad{grad_sum / m, Matrix::Zero(theta.rows(), theta.cols())};
    if (M > 1) {
        const double var = std::max(0.0, (loss_sq - m * loss.value * loss.value) / (m - 1.0));
        loss.std_error = std::sqrt(var / m);
        Matrix gvar =
            ((grad_sq - m * grad.grad.cwiseProduct(grad.grad)) / (m - 1.0)).cwiseMax(0.0);
        grad.std_error = (gvar / m).cwiseSqrt();
    }
    return {loss, grad};
}

} // namespace systraj
