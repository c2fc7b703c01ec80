#include "systraj/activation.hpp"

#include <cmath>

namespace systraj {

Activation Activation::leaky_relu(double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0))
        throw InvalidInput("leakage must lie in [0,1]");
    return {ActivationKind::LeakyRelu, lambda};
}

double Activation::eval(double x) const {
    switch (kind) {
    case ActivationKind::Identity:
        return x;
    case ActivationKind::LeakyRelu:
        return x >= 0.0 ? x : leakage * x;
    case ActivationKind::Softplus:
        // max(x,0) + log1p(exp(-|x|)) is overflow-safe for large |x|
        return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
    }
    return x;
}

double Activation::deriv(double x) const {
    switch (kind) {
    case ActivationKind::Identity:
        return 1.0;
    case ActivationKind::LeakyRelu:
        return x >= 0.0 ? 1.0 : leakage;
    case ActivationKind::Softplus:
        return 1.0 / (1.0 + std::exp(-x)); // logistic
    }
    return 1.0;
}

double Activation::deriv2(double x) const {
    if (kind != ActivationKind::Softplus) return 0.0;
    double s = 1.0 / (1.0 + std::exp(-x));
    return s * (1.0 - s);
}

double Activation::gamma_lower() const {
    switch (kind) {
    case ActivationKind::Identity:
        return 1.0;
    case ActivationKind::LeakyRelu:
        return leakage;
    case ActivationKind::Softplus:
        return 0.0;
    }
    return 0.0;
}

Vector Activation::eval(const Vector& x) const {
    Vector y(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) y[i] = eval(x[i]);
    return y;
}

Vector Activation::deriv(const Vector& x) const {
    Vector y(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) y[i] = deriv(x[i]);
    return y;
}

} // namespace systraj
