#include "systraj/experiments.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>

namespace {

constexpr int kExitConfigError = 2;
constexpr int kExitNumericalError = 3;

struct CommonArgs {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out;
    int workers = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "path to a key=value config file");
    cmd->add_option("--seed", args.seed, "master seed override")
        ->each([&args](const std::string&) { args.seed_set = true; });
    cmd->add_option("--out", args.out, "output directory override");
    cmd->add_option("--workers", args.workers, "worker thread count override")
        ->check(CLI::PositiveNumber);
}

int run(const CommonArgs& args, const std::string& experiment) {
    systraj::ExperimentConfig cfg;
    try {
        if (!args.config_path.empty()) cfg = systraj::load_config(args.config_path);
        if (!experiment.empty()) cfg.experiment = experiment;
        if (args.seed_set) cfg.seed = args.seed;
        if (!args.out.empty()) cfg.out = args.out;
        if (args.workers > 0) cfg.workers = args.workers;
        systraj::validate_config(cfg);
    } catch (const systraj::InvalidInput& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    }
    try {
        const long diverged = systraj::run_experiment(cfg);
        if (diverged > 0)
            std::cerr << "warning: " << diverged
                      << " repetition(s) diverged; flagged in the runs CSV\n";
        std::cout << "wrote " << cfg.out << "/" << cfg.experiment << "*\n";
        return 0;
    } catch (const systraj::InvalidInput& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::runtime_error& e) {
        // UnstableSystem, NotStabilizable, Diverged, TrajectoryTooShort
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumericalError;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"single-trajectory system identification toolkit"};
    app.require_subcommand(1);

    CommonArgs sim_args, id_args, ver_args, exp_args;
    CLI::App* sim = app.add_subcommand("simulate", "roll out one trajectory to CSV");
    add_common(sim, sim_args);
    CLI::App* id = app.add_subcommand("identify", "run gradient descent on one trajectory");
    add_common(id, id_args);
    CLI::App* ver = app.add_subcommand("verify", "check the theory's assumptions numerically");
    add_common(ver, ver_args);
    CLI::App* exp = app.add_subcommand("experiment", "reproduce a reference experiment");
    std::string name;
    exp->add_option("--name", name, "one of fig1a, fig1b, fig1c, fig2, table1")->required();
    add_common(exp, exp_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitConfigError;
    }

    if (sim->parsed()) return run(sim_args, "simulate");
    if (id->parsed()) return run(id_args, "identify");
    if (ver->parsed()) return run(ver_args, "verify");
    return run(exp_args, name);
}
