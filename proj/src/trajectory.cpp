#include "systraj/trajectory.hpp"

#include "systraj/csv.hpp"
#include "systraj/rng.hpp"

#include <cmath>
#include <ostream>

namespace systraj {

namespace {

// Excitation and noise come from independent streams so that a trajectory's
// draws are reproducible no matter how they are consumed later.
constexpr std::uint64_t kExcitationStream = 1;
constexpr std::uint64_t kNoiseStream = 2;

Vector draw(Rng& rng, int dim, double std) {
    Vector v(dim);
    for (int i = 0; i < dim; ++i) v[i] = std * rng.normal();
    return v;
}

} // namespace

Trajectory simulate_from(const SystemSpec& sys, const PolicySpec& policy,
                         const NoiseSpec& noise, long T, const Vector& h0) {
    if (T < 1) throw InvalidInput("T must be >= 1");
    if (h0.size() != sys.lifted_dim()) throw InvalidInput("h0 dimension mismatch");
    if (noise.sigma < 0.0) throw InvalidInput("sigma must be >= 0");

    Rng zrng(derive_seed(noise.seed, kExcitationStream));
    Rng wrng(derive_seed(noise.seed, kNoiseStream));

    Trajectory traj{sys, policy, noise, {}, {}, {}};
    traj.states.reserve(T + 1);
    traj.excitations.reserve(T);
    traj.noises.reserve(T);
    traj.states.push_back(h0);

    const int p = sys.input_dim();
    const int n = sys.state_dim();
    for (long t = 0; t < T; ++t) {
        traj.excitations.push_back(draw(zrng, p, noise.excitation_std));
        traj.noises.push_back(draw(wrng, n, noise.sigma));
        traj.states.push_back(
            step(sys, policy, traj.states.back(), traj.excitations.back(), traj.noises.back()));
    }
    return traj;
}

Trajectory simulate(const SystemSpec& sys, const PolicySpec& policy, const NoiseSpec& noise,
                    long T) {
    return simulate_from(sys, policy, noise, T, Vector::Zero(sys.lifted_dim()));
}

Vector truncated_state(const Trajectory& traj, long t, long L) {
    if (L <= 0 || L > t) throw InvalidInput("truncation depth must satisfy 0 < L <= t");
    if (t > traj.length()) throw InvalidInput("t beyond trajectory length");
    Vector h = Vector::Zero(traj.sys.lifted_dim());
    for (long tau = t - L; tau < t; ++tau)
        h = step(traj.sys, traj.policy, h, traj.excitations[tau], traj.noises[tau]);
    return h;
}

SubTrajectory subsample(const Trajectory& traj, long L, long offset) {
    if (L < 1) throw InvalidInput("sampling period must be >= 1");
    if (offset < 0 || offset > L - 1) throw InvalidInput("offset must lie in [0, L-1]");
    const long T = traj.length();
    if (T <= 2 * L) throw InvalidInput("need T > 2L to sub-sample");

    const long N = (T - L) / L;
    SubTrajectory sub;
    sub.sys = traj.sys;
    sub.policy = traj.policy;
    sub.offset = static_cast<int>(offset);
    sub.period = static_cast<int>(L);
    for (long i = 1; i <= N; ++i) {
        const long t = offset + i * L;
        sub.timestamps.push_back(t);
        sub.hbar.push_back(L == 1 ? Vector::Zero(traj.sys.lifted_dim())
                                  : truncated_state(traj, t, L - 1));
        sub.ybar.push_back(truncated_state(traj, t + 1, L));
        sub.z.push_back(traj.excitations[t]);
        sub.w.push_back(traj.noises[t]);
    }
    return sub;
}

NormProfile state_norm_profile(const SystemSpec& sys, const PolicySpec& policy,
                               const NoiseSpec& noise, long T, int reps) {
    if (reps < 1) throw InvalidInput("reps must be >= 1");
    NormProfile prof;
    prof.mean.assign(T + 1, 0.0);
    prof.std.assign(T + 1, 0.0);
    std::vector<std::vector<double>> norms(T + 1);
    for (int r = 0; r < reps; ++r) {
        NoiseSpec rep = noise;
        rep.seed = derive_seed(noise.seed, 3, static_cast<std::uint64_t>(r));
        Trajectory traj = simulate(sys, policy, rep, T);
        for (long t = 0; t <= T; ++t) norms[t].push_back(traj.states[t].norm());
    }
    for (long t = 0; t <= T; ++t) {
        double m = 0.0;
        for (double v : norms[t]) m += v;
        m /= reps;
        double s2 = 0.0;
        for (double v : norms[t]) s2 += (v - m) * (v - m);
        prof.mean[t] = m;
        prof.std[t] = reps > 1 ? std::sqrt(s2 / (reps - 1)) : 0.0;
    }
    return prof;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
    const int n = traj.sys.lifted_dim();
    const int nw = traj.sys.state_dim();
    const int p = traj.sys.input_dim();
    out << "t";
    for (int i = 0; i < n; ++i) out << ",h[" << i << "]";
    for (int i = 0; i < p; ++i) out << ",z[" << i << "]";
    for (int i = 0; i < nw; ++i) out << ",w[" << i << "]";
    out << "\n";
    const long T = traj.length();
    for (long t = 0; t <= T; ++t) {
        out << t;
        for (int i = 0; i < n; ++i) csv_cell(out, traj.states[t][i]);
        for (int i = 0; i < p; ++i) csv_cell(out, t < T ? traj.excitations[t][i] : 0.0);
        for (int i = 0; i < nw; ++i) csv_cell(out, t < T ? traj.noises[t][i] : 0.0);
        out << "\n";
    }
}

} // namespace systraj
