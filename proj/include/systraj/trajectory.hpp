#ifndef SYSTRAJ_TRAJECTORY_HPP
#define SYSTRAJ_TRAJECTORY_HPP

#include "systraj/system.hpp"

#include <iosfwd>
#include <vector>

namespace systraj {

/// One seeded rollout: states h_0..h_T plus the excitation and noise draws
/// that produced it. Immutable after construction; replaying step() over
/// (h_0, z, w) reproduces the states exactly.
struct Trajectory {
    SystemSpec sys;
    PolicySpec policy;
    NoiseSpec noise;
    std::vector<Vector> states;      // T+1 vectors, lifted dim
    std::vector<Vector> excitations; // T vectors, input dim
    std::vector<Vector> noises;      // T vectors, state dim

    long length() const { return static_cast<long>(excitations.size()); }
};

/// Sub-sampled truncated triplets (ybar, hbar, z) at times tau + iL.
struct SubTrajectory {
    SystemSpec sys;
    PolicySpec policy;
    int offset = 0; // tau in [0, L-1]
    int period = 1; // L
    std::vector<long> timestamps;
    std::vector<Vector> ybar; // h_{tau+iL+1, L}
    std::vector<Vector> hbar; // h_{tau+iL, L-1}
    std::vector<Vector> z;    // z_{tau+iL}
    std::vector<Vector> w;    // w_{tau+iL}

    long count() const { return static_cast<long>(timestamps.size()); }
};

/// Rolls the system for T steps from h_0 = 0 (or `h0`). Deterministic per seed.
Trajectory simulate(const SystemSpec& sys, const PolicySpec& policy, const NoiseSpec& noise,
                    long T);
Trajectory simulate_from(const SystemSpec& sys, const PolicySpec& policy,
                         const NoiseSpec& noise, long T, const Vector& h0);

/// L-truncation h_{t,L}: re-rolls from a zero state at time t-L using the
/// recorded excitations and noises from t-L onward. Requires 0 < L <= t.
Vector truncated_state(const Trajectory& traj, long t, long L);

/// Sub-samples at times offset + iL, i = 1..N with N = floor((T-L)/L),
/// truncating hbar at depth L-1 and ybar at depth L.
SubTrajectory subsample(const Trajectory& traj, long L, long offset);

/// Mean and sample std of ||h_t|| per timestep across `reps` seeded rollouts.
/// Sub-seeds derive from noise.seed and the repetition index.
struct NormProfile {
    std::vector<double> mean; // length T+1
    std::vector<double> std;  // length T+1
};
NormProfile state_norm_profile(const SystemSpec& sys, const PolicySpec& policy,
                               const NoiseSpec& noise, long T, int reps);

/// CSV with header: t, h[0..], z[0..], w[0..]; 17-significant-digit floats.
/// Rows t = 0..T-1 carry the draws; row T carries the final state only.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);

} // namespace systraj

#endif
