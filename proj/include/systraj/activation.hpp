#ifndef SYSTRAJ_ACTIVATION_HPP
#define SYSTRAJ_ACTIVATION_HPP

#include "systraj/common.hpp"

namespace systraj {

enum class ActivationKind { Identity, LeakyRelu, Softplus };

/// Scalar activation applied entrywise by the state transition.
/// LeakyRelu(1) is exactly Identity; LeakyRelu(lambda>0) is gamma-increasing
/// with gamma = lambda.
struct Activation {
    ActivationKind kind = ActivationKind::Identity;
    double leakage = 1.0; // LeakyRelu only, in [0,1]

    static Activation identity() { return {ActivationKind::Identity, 1.0}; }
    static Activation leaky_relu(double lambda);
    static Activation softplus() { return {ActivationKind::Softplus, 1.0}; }

    double eval(double x) const;
    double deriv(double x) const;  // LeakyRelu at 0 uses the right derivative (1)
    double deriv2(double x) const; // 0 for piecewise-linear kinds

    /// Lower bound on the derivative; 0 when the kind is not gamma-increasing.
    double gamma_lower() const;

    Vector eval(const Vector& x) const;
    Vector deriv(const Vector& x) const;
};

} // namespace systraj

#endif
