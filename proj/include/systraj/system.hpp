#ifndef SYSTRAJ_SYSTEM_HPP
#define SYSTRAJ_SYSTEM_HPP

#include "systraj/activation.hpp"
#include "systraj/common.hpp"

#include <vector>

namespace systraj {

/// Which state transition the system follows.
///   Linear  : h+ = A h + B u + w
///   PreMix  : h+ = phi(A h + B u) + w
///   PostAdd : h+ = phi(A h) + u + w            (A plays the role of Theta)
///   Arx     : order-m autoregression on the stacked state x = [h; ...];
///             top block h+ = phi([A_1 ... A_m] x) + u + w, rest shifts down
enum class SystemForm { Linear, PreMix, PostAdd, Arx };

/// Control policy: u_t = -K h_t + z_t. Zero is K = 0.
struct PolicySpec {
    Matrix K; // p x state_dim; empty means zero policy

    static PolicySpec zero() { return {}; }
    static PolicySpec feedback(Matrix k) { return {std::move(k)}; }
    bool is_zero() const { return K.size() == 0 || K.isZero(0.0); }

    Vector input(const Vector& h, const Vector& z) const {
        if (K.size() == 0) return z;
        return z - K * h;
    }
};

/// Excitation z_t ~ N(0, excitation_std^2 I_p), process noise w_t ~ N(0, sigma^2 I_n).
/// Identical seed => bit-identical draw sequences.
struct NoiseSpec {
    double excitation_std = 1.0;
    double sigma = 0.0;
    std::uint64_t seed = 0;
};

/// A parameterized dynamical system. `A`/`B` hold the ground-truth dynamics;
/// the learnable parameter is a single matrix (see theta_star()).
struct SystemSpec {
    SystemForm form = SystemForm::Linear;
    Activation act = Activation::identity();
    Matrix A; // Linear/PreMix/PostAdd: n x n; Arx: n x (m*n)
    Matrix B; // Linear/PreMix: n x p; unused otherwise
    int arx_order = 1;

    static SystemSpec linear(Matrix a, Matrix b);
    static SystemSpec pre_mix(Matrix a, Matrix b, Activation act);
    static SystemSpec post_add(Matrix theta, Activation act);
    static SystemSpec arx(std::vector<Matrix> lags, Activation act);

    int state_dim() const { return static_cast<int>(A.rows()); }
    int input_dim() const;
    /// Dimension of the stored state vector (m*n for Arx, n otherwise).
    int lifted_dim() const {
        return form == SystemForm::Arx ? arx_order * state_dim() : state_dim();
    }
    bool uses_activation() const { return form != SystemForm::Linear; }

    /// The parameter matrix being learned: [A B] (Linear/PreMix) or A itself.
    Matrix theta_star() const;
    /// Copy of this system with the learnable parameter replaced.
    SystemSpec with_theta(const Matrix& theta) const;

    /// Regressor fed to the parameter: [h; u] (Linear/PreMix) or the state.
    Vector regressor(const PolicySpec& policy, const Vector& h, const Vector& z) const;

    /// Noise-free closed-loop map: next state given the current one.
    Vector transition(const PolicySpec& policy, const Vector& h, const Vector& z) const;
};

/// One step of h_{t+1} = phi_tilde(h_t, z_t; theta) + w_t. Pure.
Vector step(const SystemSpec& sys, const PolicySpec& policy, const Vector& h,
            const Vector& z, const Vector& w);

} // namespace systraj

#endif
