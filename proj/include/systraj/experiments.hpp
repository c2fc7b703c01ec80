#ifndef SYSTRAJ_EXPERIMENTS_HPP
#define SYSTRAJ_EXPERIMENTS_HPP

#include "systraj/config.hpp"
#include "systraj/identify.hpp"
#include "systraj/verify.hpp"

#include <functional>

namespace systraj {

/// Runs fn(i) for i in [0, count) across `workers` threads. Callers store
/// results into slots indexed by i, so output never depends on scheduling.
void parallel_for(long count, int workers, const std::function<void(long)>& fn);

Activation activation_from(const std::string& name, double leakage);

/// The reference random system: A with N(0,1) entries rescaled so its ten
/// largest eigenvalue moduli exceed 1 (factor 1.02 at the tenth), B with
/// N(0,1/n) entries, and a noisily perturbed Riccati feedback gain.
struct GeneratedSystem {
    SystemSpec sys;
    PolicySpec policy;
    Matrix A;
    Matrix B;
    Matrix K; // empty when generated without a policy
};
GeneratedSystem make_experiment_system(const ExperimentConfig& cfg, const Activation& act,
                                       std::uint64_t system_seed, bool with_policy = true);

/// Step size for a length-T run: cfg.eta when set, otherwise the 0.1/T rule
/// applied to the unnormalized (sum-form) loss.
double effective_eta(const ExperimentConfig& cfg, long T);

/// Gradient descent continued in chunks until the chunk-averaged loss stops
/// moving (relative change below 1e-4) or `cap` iterations elapse.
GDReport run_to_plateau(const Trajectory& traj, const GDConfig& cfg, const MixingPlan& plan,
                        long cap, long chunk = 50);

/// Dispatches on cfg.experiment and writes the CSV artifacts plus a config
/// sidecar under cfg.out. Returns the number of repetitions flagged as
/// diverged (always 0 for non-descent experiments).
long run_experiment(const ExperimentConfig& cfg);

} // namespace systraj

#endif
