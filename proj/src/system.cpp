#include "systraj/system.hpp"

namespace systraj {

namespace {

void require_finite(const Matrix& m, const char* name) {
    if (!m.allFinite()) throw InvalidInput(std::string(name) + " has non-finite entries");
}

} // namespace

SystemSpec SystemSpec::linear(Matrix a, Matrix b) {
    require_finite(a, "A");
    require_finite(b, "B");
    if (a.rows() != a.cols()) throw InvalidInput("A must be square");
    if (b.rows() != a.rows()) throw InvalidInput("B row count must match A");
    SystemSpec s;
    s.form = SystemForm::Linear;
    s.A = std::move(a);
    s.B = std::move(b);
    return s;
}

SystemSpec SystemSpec::pre_mix(Matrix a, Matrix b, Activation act) {
    SystemSpec s = linear(std::move(a), std::move(b));
    s.form = SystemForm::PreMix;
    s.act = act;
    return s;
}

SystemSpec SystemSpec::post_add(Matrix theta, Activation act) {
    require_finite(theta, "Theta");
    if (theta.rows() != theta.cols()) throw InvalidInput("Theta must be square");
    SystemSpec s;
    s.form = SystemForm::PostAdd;
    s.act = act;
    s.A = std::move(theta);
    return s;
}

SystemSpec SystemSpec::arx(std::vector<Matrix> lags, Activation act) {
    if (lags.empty()) throw InvalidInput("ARX order must be >= 1");
    const Eigen::Index n = lags.front().rows();
    for (const Matrix& m : lags) {
        require_finite(m, "A_i");
        if (m.rows() != n || m.cols() != n) throw InvalidInput("all A_i must be n x n");
    }
    SystemSpec s;
    s.form = SystemForm::Arx;
    s.act = act;
    s.arx_order = static_cast<int>(lags.size());
    s.A.resize(n, n * s.arx_order);
    for (int i = 0; i < s.arx_order; ++i) s.A.middleCols(i * n, n) = lags[i];
    return s;
}

int SystemSpec::input_dim() const {
    switch (form) {
    case SystemForm::Linear:
    case SystemForm::PreMix:
        return static_cast<int>(B.cols());
    case SystemForm::PostAdd:
    case SystemForm::Arx:
        return state_dim(); // excitation enters additively on the state
    }
    return 0;
}

Matrix SystemSpec::theta_star() const {
    if (form == SystemForm::Linear || form == SystemForm::PreMix) {
        Matrix theta(A.rows(), A.cols() + B.cols());
        theta << A, B;
        return theta;
    }
    return A;
}

SystemSpec SystemSpec::with_theta(const Matrix& theta) const {
    SystemSpec s = *this;
    if (form == SystemForm::Linear || form == SystemForm::PreMix) {
        if (theta.rows() != A.rows() || theta.cols() != A.cols() + B.cols())
            throw InvalidInput("theta shape must match [A B]");
        s.A = theta.leftCols(A.cols());
        s.B = theta.rightCols(B.cols());
    } else {
        if (theta.rows() != A.rows() || theta.cols() != A.cols())
            throw InvalidInput("theta shape must match A");
        s.A = theta;
    }
    return s;
}

Vector SystemSpec::regressor(const PolicySpec& policy, const Vector& h, const Vector& z) const {
    if (form == SystemForm::Linear || form == SystemForm::PreMix) {
        Vector x(h.size() + z.size());
        x << h, policy.input(h, z);
        return x;
    }
    return h;
}

Vector SystemSpec::transition(const PolicySpec& policy, const Vector& h, const Vector& z) const {
    if (h.size() != lifted_dim()) throw InvalidInput("state dimension mismatch");
    if (z.size() != input_dim()) throw InvalidInput("excitation dimension mismatch");
    switch (form) {
    case SystemForm::Linear:
        return A * h + B * policy.input(h, z);
    case SystemForm::PreMix:
        return act.eval(Vector(A * h + B * policy.input(h, z)));
    case SystemForm::PostAdd:
        return act.eval(Vector(A * h)) + policy.input(h, z);
    case SystemForm::Arx: {
        const int n = state_dim();
        Vector next(h.size());
        next.head(n) = act.eval(Vector(A * h)) + policy.input(h, z);
        if (arx_order > 1) next.tail(h.size() - n) = h.head(h.size() - n);
        return next;
    }
    }
    throw InvalidInput("unknown system form");
}

Vector step(const SystemSpec& sys, const PolicySpec& policy, const Vector& h,
            const Vector& z, const Vector& w) {
    if (w.size() != sys.state_dim()) throw InvalidInput("noise dimension mismatch");
    Vector next = sys.transition(policy, h, z);
    next.head(sys.state_dim()) += w; // Arx noise drives the top block only
    return next;
}

} // namespace systraj
