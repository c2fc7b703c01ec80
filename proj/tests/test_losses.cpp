#include <doctest.h>

#include "systraj/losses.hpp"
#include "systraj/rng.hpp"
#include "systraj/stability.hpp"
#include "systraj/verify.hpp"

#include <cmath>

using namespace systraj;

namespace {

Matrix random_mat(Rng& rng, int r, int c, double scale = 1.0) {
    Matrix m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = scale * rng.normal();
    return m;
}

SystemSpec small_linear(Rng& rng, int n, int p, double scale = 0.3) {
    return SystemSpec::linear(random_mat(rng, n, n, scale), random_mat(rng, n, p));
}

double rel_err(const Matrix& got, const Matrix& want) {
    return (got - want).norm() / std::max(1e-300, want.norm());
}

} // namespace

TEST_CASE("perfect model on noiseless data has zero loss and gradient") {
    Rng rng(1);
    for (int variant = 0; variant < 3; ++variant) {
        SystemSpec sys = variant == 0 ? small_linear(rng, 4, 2)
                         : variant == 1
                             ? SystemSpec::pre_mix(random_mat(rng, 4, 4, 0.3),
                                                   random_mat(rng, 4, 2),
                                                   Activation::leaky_relu(0.3))
                             : SystemSpec::post_add(random_mat(rng, 4, 4, 0.3),
                                                    Activation::softplus());
        NoiseSpec noise{1.0, 0.0, 33};
        Trajectory traj = simulate(sys, PolicySpec::zero(), noise, 60);
        CHECK(empirical_loss(sys.theta_star(), traj, 1).value <= 1e-24);
        CHECK(empirical_gradient(sys.theta_star(), traj, 1).grad.norm() <= 1e-12);
    }
}

TEST_CASE("noise floor of the empirical loss is n sigma^2 / 2") {
    const int n = 4;
    const double sigma = 0.5;
    Rng rng(2);
    SystemSpec sys = small_linear(rng, n, 2);
    NoiseSpec noise{1.0, sigma, 35};
    Trajectory traj = simulate(sys, PolicySpec::zero(), noise, 10001);
    double loss = empirical_loss(sys.theta_star(), traj, 1).value;
    CHECK(loss == doctest::Approx(0.5 * n * sigma * sigma).epsilon(0.10));
}

TEST_CASE("hand-computed scalar trajectory loss") {
    Matrix A(1, 1), B(1, 1);
    A << 0.5;
    B << 1.0;
    SystemSpec sys = SystemSpec::linear(A, B);
    NoiseSpec noise{1.0, 0.3, 37};
    Trajectory traj = simulate(sys, PolicySpec::zero(), noise, 4);
    Matrix theta(1, 2);
    theta << 0.2, 0.7;
    const long L = 1;
    double want = 0.0;
    for (long t = L; t < 4; ++t) {
        double pred = 0.2 * traj.states[t][0] + 0.7 * traj.excitations[t][0];
        double r = traj.states[t + 1][0] - pred;
        want += 0.5 * r * r;
    }
    want /= (4 - L);
    CHECK(empirical_loss(theta, traj, L).value == doctest::Approx(want).epsilon(1e-12));
    CHECK_THROWS_AS(empirical_loss(theta, traj, 4), InvalidInput);
    CHECK_THROWS_AS(empirical_loss(Matrix::Zero(1, 3), traj, 1), InvalidInput);
}

TEST_CASE("analytic gradients match finite differences on every variant") {
    Rng rng(3);
    const int n = 6, p = 4, T = 200;
    std::vector<SystemSpec> systems;
    systems.push_back(small_linear(rng, n, p));
    systems.push_back(SystemSpec::pre_mix(random_mat(rng, n, n, 0.3), random_mat(rng, n, p),
                                          Activation::leaky_relu(0.3)));
    systems.push_back(SystemSpec::pre_mix(random_mat(rng, n, n, 0.3), random_mat(rng, n, p),
                                          Activation::softplus()));
    systems.push_back(
        SystemSpec::post_add(random_mat(rng, n, n, 0.3), Activation::softplus()));
    for (const SystemSpec& sys : systems) {
        NoiseSpec noise{1.0, 0.2, 39};
        Trajectory traj = simulate(sys, PolicySpec::zero(), noise, T);
        Matrix theta = sys.theta_star() + random_mat(rng, sys.theta_star().rows(),
                                                     static_cast<int>(sys.theta_star().cols()),
                                                     0.1);
        const long L = 3;

        Matrix g = empirical_gradient(theta, traj, L).grad;
        Matrix fd = finite_diff_gradient(
            [&](const Matrix& th) { return empirical_loss(th, traj, L).value; }, theta,
            1e-5).grad;
        CHECK(rel_err(g, fd) <= 1e-6);

        Matrix gt = truncated_gradient(theta, traj, L).grad;
        Matrix fdt = finite_diff_gradient(
            [&](const Matrix& th) { return truncated_loss(th, traj, L).value; }, theta,
            1e-5).grad;
        CHECK(rel_err(gt, fdt) <= 1e-6);

        SubTrajectory sub = subsample(traj, 5, 2);
        Matrix gs = subtrajectory_gradient(theta, sub).grad;
        Matrix fds = finite_diff_gradient(
            [&](const Matrix& th) { return subtrajectory_loss(th, sub).value; }, theta,
            1e-5).grad;
        CHECK(rel_err(gs, fds) <= 1e-6);
    }
}

TEST_CASE("linear gradient equals the closed matrix form") {
    Rng rng(4);
    const int n = 3, p = 2;
    SystemSpec sys = small_linear(rng, n, p);
    NoiseSpec noise{1.0, 0.4, 41};
    Trajectory traj = simulate(sys, PolicySpec::zero(), noise, 50);
    Matrix theta = sys.theta_star() + random_mat(rng, n, n + p, 0.2);
    const long L = 2;
    Matrix want = Matrix::Zero(n, n + p);
    for (long t = L; t < traj.length(); ++t) {
        Vector x = sys.regressor(PolicySpec::zero(), traj.states[t], traj.excitations[t]);
        want += (theta - sys.theta_star()) * x * x.transpose() -
                traj.noises[t] * x.transpose();
    }
    want /= static_cast<double>(traj.length() - L);
    CHECK(rel_err(empirical_gradient(theta, traj, L).grad, want) <= 1e-10);
}

TEST_CASE("rows of the gradient are separable") {
    Rng rng(5);
    SystemSpec sys = SystemSpec::pre_mix(random_mat(rng, 4, 4, 0.3), random_mat(rng, 4, 2),
                                         Activation::softplus());
    NoiseSpec noise{1.0, 0.2, 43};
    Trajectory traj = simulate(sys, PolicySpec::zero(), noise, 40);
    Matrix theta = sys.theta_star() + random_mat(rng, 4, 6, 0.1);
    Matrix g = empirical_gradient(theta, traj, 1).grad;
    // perturbing other rows leaves row k's gradient untouched
    Matrix theta2 = theta;
    theta2.row(0) += 0.5 * random_mat(rng, 1, 6);
    Matrix g2 = empirical_gradient(theta2, traj, 1).grad;
    CHECK((g.row(2) - g2.row(2)).norm() == 0.0);
    CHECK((g.row(3) - g2.row(3)).norm() == 0.0);
    CHECK((g.row(0) - g2.row(0)).norm() > 0.0);
}

TEST_CASE("short trajectory makes truncation a no-op") {
    // with z_0 = w_0 = 0 and phi(0,0) = 0 the depth-(L-1) reset reproduces
    // the recorded states, so the truncated and plain risks coincide
    Matrix A(2, 2);
    A << 0.5, 0.1, 0.0, 0.4;
    SystemSpec sys = SystemSpec::linear(A, Matrix::Identity(2, 2));
    NoiseSpec noise{1.0, 0.3, 45};
    Trajectory traj = simulate(sys, PolicySpec::zero(), noise, 6);
    traj.excitations[0].setZero();
    traj.noises[0].setZero();
    Vector h = traj.states[0];
    for (long t = 0; t < traj.length(); ++t) {
        h = step(sys, PolicySpec::zero(), h, traj.excitations[t], traj.noises[t]);
        traj.states[t + 1] = h;
    }
    Matrix theta = sys.theta_star();
    theta(0, 0) += 0.2;
    const long L = 5; // L = t for the single usable t = T - 1
    CHECK(truncated_loss(theta, traj, L).value ==
          doctest::Approx(empirical_loss(theta, traj, L).value).epsilon(1e-12));
}

TEST_CASE("truncation gap decays geometrically in L") {
    Matrix A(3, 3);
    A << 0.6, 0.1, 0.0, 0.0, 0.55, 0.1, 0.0, 0.0, 0.5;
    SystemSpec sys = SystemSpec::linear(A, Matrix::Identity(3, 3));
    NoiseSpec noise{1.0, 0.2, 47};
    Trajectory traj = simulate(sys, PolicySpec::zero(), noise, 400);
    Matrix theta = sys.theta_star();
    theta(0, 1) += 0.3;
    double base = empirical_loss(theta, traj, 12).value;
    std::vector<double> gaps;
    for (long L = 2; L <= 12; ++L) {
        // churn fixed at 12 so every L sees the same time range
        double tr = 0.0;
        const long churn = 12;
        long count = 0;
        for (long t = churn; t < traj.length(); ++t) {
            Vector hbar = truncated_state(traj, t, L - 1);
            Vector ybar = step(sys, PolicySpec::zero(), hbar, traj.excitations[t],
                               traj.noises[t]);
            Vector pred = predict_next(sys, PolicySpec::zero(), theta, hbar,
                                       traj.excitations[t]);
            tr += 0.5 * (ybar - pred).squaredNorm();
            ++count;
        }
        gaps.push_back(std::abs(base - tr / count));
    }
    // slope of log-gap vs L close to log of the dominant eigenvalue 0.6
    double slope = (std::log(gaps.back()) - std::log(gaps.front())) / 10.0;
    CHECK(slope < std::log(0.75));
    CHECK(slope > std::log(0.4));
}

TEST_CASE("truncated risk averages the sub-trajectory losses") {
    Matrix A(2, 2);
    A << 0.5, 0.2, -0.1, 0.4;
    SystemSpec sys = SystemSpec::linear(A, Matrix::Identity(2, 2));
    NoiseSpec noise{1.0, 0.3, 49};
    Trajectory traj = simulate(sys, PolicySpec::zero(), noise, 50);
    Matrix theta = sys.theta_star();
    theta(1, 1) += 0.25;
    const long L = 7;
    const long N = (50 - L) / L;

    double avg = 0.0;
    for (long tau = 0; tau < L; ++tau)
        avg += subtrajectory_loss(theta, subsample(traj, L, tau)).value / L;

    // direct summation over the union of sampled timestamps [L, L(N+1)-1]
    double direct = 0.0;
    for (long t = L; t < L * (N + 1); ++t) {
        Vector hbar = truncated_state(traj, t, L - 1);
        Vector ybar = truncated_state(traj, t + 1, L);
        Vector pred = predict_next(sys, PolicySpec::zero(), theta, hbar,
                                   traj.excitations[t]);
        direct += 0.5 * (ybar - pred).squaredNorm();
    }
    direct /= static_cast<double>(N * L);
    CHECK(avg == doctest::Approx(direct).epsilon(1e-10));
}

TEST_CASE("sub-trajectory losses are statistically identical across offsets") {
    Matrix A(2, 2);
    A << 0.5, 0.1, 0.1, 0.4;
    SystemSpec sys = SystemSpec::linear(A, Matrix::Identity(2, 2));
    Matrix theta = sys.theta_star();
    theta(0, 0) += 0.2;
    const long L = 6;
    std::vector<double> mean_by_tau(L, 0.0), sq_by_tau(L, 0.0);
    const int reps = 400;
    for (int r = 0; r < reps; ++r) {
        NoiseSpec noise{1.0, 0.3, 9000 + static_cast<std::uint64_t>(r)};
        Trajectory traj = simulate(sys, PolicySpec::zero(), noise, 40);
        for (long tau = 0; tau < L; ++tau) {
            double v = subtrajectory_loss(theta, subsample(traj, L, tau)).value;
            mean_by_tau[tau] += v / reps;
            sq_by_tau[tau] += v * v / reps;
        }
    }
    for (long tau = 1; tau < L; ++tau) {
        double se0 = std::sqrt((sq_by_tau[0] - mean_by_tau[0] * mean_by_tau[0]) / reps);
        double se = std::sqrt((sq_by_tau[tau] - mean_by_tau[tau] * mean_by_tau[tau]) / reps);
        double pooled = std::sqrt(se0 * se0 + se * se);
        CHECK(std::abs(mean_by_tau[tau] - mean_by_tau[0]) <= 3.0 * pooled);
    }
}

TEST_CASE("auxiliary estimate is exact for the perfect noiseless model") {
    Rng rng(6);
    SystemSpec sys = small_linear(rng, 3, 2);
    NoiseSpec noise{1.0, 0.0, 51};
    auto [loss, grad] = auxiliary_estimate(sys.theta_star(), sys, PolicySpec::zero(), noise,
                                           3, 50);
    CHECK(loss.value <= 1e-24);
    CHECK(grad.grad.norm() <= 1e-12);
}

TEST_CASE("auxiliary gradient matches the Gramian covariance form") {
    Rng rng(7);
    const int n = 3, p = 2;
    SystemSpec sys = small_linear(rng, n, p);
    const double sigma = 0.3;
    NoiseSpec noise{1.0, sigma, 53};
    const long L = 3;
    Matrix delta = random_mat(rng, n, n + p, 0.2);
    Matrix theta = sys.theta_star() + delta;
    auto [loss, grad] = auxiliary_estimate(theta, sys, PolicySpec::zero(), noise, L, 50000);

    Matrix SigmaX = Matrix::Zero(n + p, n + p);
    SigmaX.topLeftCorner(n, n) = gramians(sys.A, sys.B, sigma, L - 1).Gamma;
    SigmaX.bottomRightCorner(p, p) = Matrix::Identity(p, p);
    Matrix want = delta * SigmaX;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n + p; ++j) {
            double se = grad.std_error(i, j);
            CHECK(std::abs(grad.grad(i, j) - want(i, j)) <= 4.0 * se + 1e-9);
        }
}

TEST_CASE("auxiliary loss matches the sub-trajectory loss in expectation") {
    Matrix A(2, 2);
    A << 0.5, 0.15, 0.0, 0.45;
    SystemSpec sys = SystemSpec::linear(A, Matrix::Identity(2, 2));
    Matrix theta = sys.theta_star();
    theta(0, 0) += 0.2;
    const long L = 8;
    NoiseSpec noise{1.0, 0.3, 55};
    auto [aux, auxg] = auxiliary_estimate(theta, sys, PolicySpec::zero(), noise, L, 20000);

    const int reps = 300;
    double mean = 0.0, sq = 0.0;
    for (int r = 0; r < reps; ++r) {
        NoiseSpec rep{1.0, 0.3, 7000 + static_cast<std::uint64_t>(r)};
        Trajectory traj = simulate(sys, PolicySpec::zero(), rep, 50);
        double v = subtrajectory_loss(theta, subsample(traj, L, 0)).value;
        mean += v / reps;
        sq += v * v / reps;
    }
    double se = std::sqrt((sq - mean * mean) / reps);
    double pooled = std::sqrt(se * se + aux.std_error * aux.std_error);
    CHECK(std::abs(mean - aux.value) <= 3.0 * pooled);
}
