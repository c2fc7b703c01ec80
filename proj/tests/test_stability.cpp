#include <doctest.h>

#include "systraj/rng.hpp"
#include "systraj/stability.hpp"
#include "systraj/trajectory.hpp"

#include <Eigen/Eigenvalues>

using namespace systraj;

namespace {

Matrix random_mat(Rng& rng, int r, int c, double scale = 1.0) {
    Matrix m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = scale * rng.normal();
    return m;
}

} // namespace

TEST_CASE("spectral radius of simple matrices") {
    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 0.3;
    d(1, 1) = -0.9;
    CHECK(spectral_radius(d) == doctest::Approx(0.9).epsilon(1e-12));

    Matrix rot(2, 2); // rotation by 90 degrees scaled by 1.1
    rot << 0.0, -1.1, 1.1, 0.0;
    CHECK(spectral_radius(rot) == doctest::Approx(1.1).epsilon(1e-10));

    CHECK_THROWS_AS(spectral_radius(Matrix::Zero(2, 3)), InvalidInput);
}

TEST_CASE("spectral radius agrees with a dense eigensolve") {
    Rng rng(2);
    Matrix M = random_mat(rng, 20, 20);
    Eigen::EigenSolver<Matrix> es(M, false);
    double want = es.eigenvalues().cwiseAbs().maxCoeff();
    CHECK(spectral_radius(M) == doctest::Approx(want).epsilon(1e-8));
}

TEST_CASE("operator norm equals the largest singular value") {
    Rng rng(3);
    Matrix M = random_mat(rng, 6, 4);
    Eigen::JacobiSVD<Matrix> svd(M);
    CHECK(operator_norm(M) == doctest::Approx(svd.singularValues()(0)).epsilon(1e-12));
    CHECK(operator_norm(Matrix()) == 0.0);
}

TEST_CASE("stability estimate is exact for scalar geometric decay") {
    const double a = 0.6;
    Matrix A(1, 1), B(1, 1);
    A << a;
    B << 1.0;
    SystemSpec sys = SystemSpec::linear(A, B);
    NoiseSpec noise{1.0, 0.1, 4};
    StabilityEstimate est = estimate_stability(sys, PolicySpec::zero(), noise, 5, 20);
    CHECK(est.rho >= a);
    CHECK(est.rho <= a + 1e-9);
    CHECK(est.C_rho >= 1.0);
    CHECK(est.C_rho <= 1.0 + 1e-9);
}

TEST_CASE("leaky relu with leakage 1 matches the linear estimate") {
    Matrix A(2, 2), B(2, 2);
    A << 0.5, 0.2, -0.1, 0.4;
    B = Matrix::Identity(2, 2);
    NoiseSpec noise{1.0, 0.1, 6};
    StabilityEstimate lin = estimate_stability(SystemSpec::linear(A, B), PolicySpec::zero(),
                                               noise, 5, 30);
    StabilityEstimate nl = estimate_stability(
        SystemSpec::pre_mix(A, B, Activation::leaky_relu(1.0)), PolicySpec::zero(), noise, 5,
        30);
    CHECK(std::abs(lin.rho - nl.rho) <= 1e-12);
    CHECK(std::abs(lin.C_rho - nl.C_rho) <= 1e-12);
}

TEST_CASE("fitted rho is not below the closed-loop spectral radius") {
    Rng rng(8);
    for (int trial = 0; trial < 5; ++trial) {
        Matrix A = random_mat(rng, 10, 10, 0.25);
        SystemSpec sys = SystemSpec::linear(A, Matrix::Identity(10, 10));
        NoiseSpec noise{1.0, 0.1, 100 + static_cast<std::uint64_t>(trial)};
        StabilityEstimate est = estimate_stability(sys, PolicySpec::zero(), noise, 10, 60);
        CHECK(est.rho >= spectral_radius(A) - 0.05);
        CHECK(est.rho < 1.0);
    }
}

TEST_CASE("unstable dynamics raise an error carrying the growth") {
    Matrix A(1, 1), B(1, 1);
    A << 1.3;
    B << 1.0;
    SystemSpec sys = SystemSpec::linear(A, B);
    NoiseSpec noise{1.0, 0.0, 10};
    CHECK_THROWS_AS(estimate_stability(sys, PolicySpec::zero(), noise, 3, 30),
                    UnstableSystem);
    try {
        estimate_stability(sys, PolicySpec::zero(), noise, 3, 30);
    } catch (const UnstableSystem& e) {
        CHECK(e.growth_estimate == doctest::Approx(1.3).epsilon(1e-6));
    }
}

TEST_CASE("fitted envelope holds on held-out paired rollouts") {
    Matrix A(3, 3);
    A << 0.4, 0.2, 0.0, -0.1, 0.3, 0.1, 0.0, 0.2, 0.5;
    SystemSpec sys = SystemSpec::linear(A, Matrix::Identity(3, 3));
    NoiseSpec noise{1.0, 0.2, 12};
    StabilityEstimate est = estimate_stability(sys, PolicySpec::zero(), noise, 10, 40);
    Rng dir_rng(99);
    for (int r = 0; r < 100; ++r) {
        NoiseSpec fresh = noise;
        fresh.seed = derive_seed(555, 1, static_cast<std::uint64_t>(r));
        Vector alpha(3);
        for (int i = 0; i < 3; ++i) alpha[i] = dir_rng.normal();
        alpha.normalize();
        Trajectory base = simulate(sys, PolicySpec::zero(), fresh, 40);
        Trajectory pert = simulate_from(sys, PolicySpec::zero(), fresh, 40, alpha);
        // the envelope is a fit, not a worst case: held-out rollouts may
        // exceed it slightly, so allow a constant-factor slack
        for (int t = 0; t <= 40; ++t) {
            double diff = (pert.states[t] - base.states[t]).norm();
            CHECK(diff <= 1.5 * est.envelope(t) + 1e-9);
        }
    }
}

TEST_CASE("gramian base cases and closed form") {
    GramianMatrices g1 = gramians(Matrix::Zero(2, 2), Matrix::Identity(2, 2), 0.0, 1);
    CHECK((g1.Gamma - Matrix::Identity(2, 2)).norm() <= 1e-14);

    const double a = 0.5, sigma = 1.0;
    const long t = 4;
    GramianMatrices g = gramians(a * Matrix::Identity(3, 3), Matrix::Identity(3, 3), sigma, t);
    const double want = 2.0 * (1.0 - std::pow(a * a, t)) / (1.0 - a * a); // 2.65625
    CHECK(want == doctest::Approx(2.65625));
    CHECK((g.Gamma - want * Matrix::Identity(3, 3)).norm() <= 1e-12);

    CHECK_THROWS_AS(gramians(Matrix::Zero(2, 2), Matrix::Identity(2, 2), 0.0, 0),
                    InvalidInput);
    CHECK_THROWS_AS(gramians(Matrix::Zero(2, 3), Matrix::Identity(2, 2), 0.0, 1),
                    InvalidInput);
}

TEST_CASE("gramian recursion equals the explicit power sum") {
    Rng rng(14);
    Matrix A = random_mat(rng, 5, 5, 0.3);
    Matrix B = random_mat(rng, 5, 3);
    const double sigma = 0.7;
    for (long t : {1L, 3L, 20L}) {
        GramianMatrices g = gramians(A, B, sigma, t);
        Matrix ggt = Matrix::Zero(5, 5), fft = Matrix::Zero(5, 5);
        Matrix Ak = Matrix::Identity(5, 5);
        for (long k = 0; k < t; ++k) {
            ggt += Ak * B * B.transpose() * Ak.transpose();
            fft += Ak * Ak.transpose();
            Ak = A * Ak;
        }
        CHECK((g.GGt - ggt).norm() <= 1e-10);
        CHECK((g.FFt - fft).norm() <= 1e-10);
        CHECK((g.Gamma - (ggt + sigma * sigma * fft)).norm() <= 1e-10);
    }
}

TEST_CASE("covariance bounds on canonical systems") {
    GramianBundle triv = covariance_bounds(Matrix::Zero(2, 2), Matrix::Identity(2, 2), 0.0,
                                           2, 5);
    CHECK(triv.gamma_minus == doctest::Approx(1.0));
    CHECK(triv.gamma_plus == doctest::Approx(1.0));
    CHECK(triv.beta_plus == doctest::Approx(1.0));
    CHECK(triv.kappa == doctest::Approx(1.0));

    GramianBundle geo = covariance_bounds(0.5 * Matrix::Identity(2, 2),
                                          Matrix::Identity(2, 2), 0.0, 51, 60);
    CHECK(geo.gamma_plus == doctest::Approx(4.0 / 3.0).epsilon(1e-10));
    CHECK(geo.gamma_minus == doctest::Approx(1.0));
    CHECK(geo.kappa == doctest::Approx(4.0 / 3.0).epsilon(1e-10));

    CHECK_THROWS_AS(covariance_bounds(Matrix::Zero(2, 2), Matrix::Identity(2, 2), 0.0, 1, 5),
                    InvalidInput);
}

TEST_CASE("beta_plus dominates gamma_plus on random stable systems") {
    Rng rng(16);
    for (int trial = 0; trial < 100; ++trial) {
        Matrix A = random_mat(rng, 4, 4, 0.3);
        Matrix B = random_mat(rng, 4, 2);
        GramianBundle b = covariance_bounds(A, B, 0.4, 4, 12);
        CHECK(b.beta_plus >= b.gamma_plus - 1e-12);
        CHECK(b.gamma_plus >= b.gamma_minus);
    }
}

TEST_CASE("nonlinear operator norm reduces to the spectral norm for identity kinds") {
    Rng rng(18);
    Matrix A = random_mat(rng, 5, 5);
    const double norm = operator_norm(A);
    CHECK(nonlinear_operator_norm(A, Activation::identity(), 4, 1) ==
          doctest::Approx(norm).epsilon(1e-6));
    CHECK(nonlinear_operator_norm(A, Activation::leaky_relu(1.0), 4, 1) ==
          doctest::Approx(norm).epsilon(1e-6));
}

TEST_CASE("nonlinear operator norm is monotone in the leakage") {
    Rng rng(20);
    Matrix A = random_mat(rng, 6, 6, 0.5);
    double prev = 0.0;
    for (double lam : {0.0, 0.5, 0.8, 1.0}) {
        double v = nonlinear_operator_norm(A, Activation::leaky_relu(lam), 4, 2);
        CHECK(v >= prev - 1e-9);
        CHECK(v <= operator_norm(A) + 1e-9);
        prev = v;
    }
}

TEST_CASE("dare scalar oracle: golden-ratio cost") {
    Matrix A(1, 1), B(1, 1);
    A << 1.0;
    B << 1.0;
    Matrix K0 = dare_gain(A, B);
    const double p = (1.0 + std::sqrt(5.0)) / 2.0;
    CHECK(K0(0, 0) == doctest::Approx(p / (1.0 + p)).epsilon(1e-8));
    CHECK(K0(0, 0) == doctest::Approx(2.0 / (1.0 + std::sqrt(5.0))).epsilon(1e-8));
}

TEST_CASE("dare gain with no dynamics is zero") {
    Matrix K0 = dare_gain(Matrix::Zero(3, 3), Matrix::Identity(3, 3));
    CHECK(K0.norm() <= 1e-10);
}

TEST_CASE("dare policy stabilizes random systems, with and without perturbation") {
    Rng rng(22);
    for (int trial = 0; trial < 25; ++trial) {
        Matrix A = random_mat(rng, 8, 8, 0.45);
        Matrix B = random_mat(rng, 8, 4);
        Matrix K0 = dare_policy(A, B, 0.0, trial);
        CHECK(spectral_radius(A - B * K0) < 1.0);
        Matrix K = dare_policy(A, B, 0.001, trial);
        CHECK(spectral_radius(A - B * K) < 1.0);
        CHECK((K - K0).norm() > 0.0);
    }
    CHECK_THROWS_AS(dare_policy(Matrix::Identity(2, 2), Matrix::Identity(2, 2), -1.0, 0),
                    InvalidInput);
}
