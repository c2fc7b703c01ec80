#ifndef SYSTRAJ_CONFIG_HPP
#define SYSTRAJ_CONFIG_HPP

#include "systraj/common.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace systraj {

/// Flat key=value experiment settings. Defaults follow the reference
/// experiment scale: n=80, p=50, T=2000, sigma^2=0.01, 20 repetitions,
/// 1000 spectral-statistics trials, 500 norm-profile repetitions over a
/// 100-step horizon, learning rate 0.1/T.
struct ExperimentConfig {
    std::string experiment; // fig1a|fig1b|fig1c|fig2|table1|identify|verify|simulate
    int n = 80;
    int p = 50;
    long T = 2000;
    double sigma2 = 0.01;
    std::string activation = "softplus"; // identity|leaky_relu|softplus
    double leakage = 1.0;
    std::vector<double> leakage_grid = {0.0, 0.5, 0.8, 1.0};
    std::vector<double> sigma2_grid = {0.0001, 0.01, 1.0};
    std::vector<long> T_grid = {500, 1000, 2000, 4000};
    int reps = 20;
    int trials = 1000;
    int fig2_reps = 500;
    long fig2_horizon = 100;
    double dare_noise_var = 0.001;
    double excitation_std = 1.0;
    double eta = 0.0;   // 0 means the 0.1/T rule
    long gd_iters = 0;  // 0 means run to plateau
    long churn = 1;     // loss index offset L
    std::uint64_t seed = 0;
    std::string out = "out";
    int workers = 1;
    std::string form = "premix"; // linear|premix|postadd|arx
};

/// Parses `key = value` lines with `#` comments. Unknown keys and malformed
/// lines are rejected with the line number in the message.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Full key=value dump; parse_config(serialize_config(c)) reproduces c.
std::string serialize_config(const ExperimentConfig& cfg);

/// Field-level validation; throws InvalidInput naming the offending field.
void validate_config(const ExperimentConfig& cfg);

} // namespace systraj

#endif
