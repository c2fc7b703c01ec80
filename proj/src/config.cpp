#include "systraj/config.hpp"

#include "systraj/csv.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace systraj {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(long line, const std::string& what) {
    throw InvalidInput("line " + std::to_string(line) + ": " + what);
}

double parse_double(const std::string& v, long line) {
    try {
        size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) fail(line, "trailing characters in number '" + v + "'");
        return d;
    } catch (const InvalidInput&) {
        throw;
    } catch (const std::exception&) {
        fail(line, "not a number: '" + v + "'");
    }
}

long parse_long(const std::string& v, long line) {
    try {
        size_t used = 0;
        const long d = std::stol(v, &used);
        if (used != v.size()) fail(line, "trailing characters in integer '" + v + "'");
        return d;
    } catch (const InvalidInput&) {
        throw;
    } catch (const std::exception&) {
        fail(line, "not an integer: '" + v + "'");
    }
}

std::uint64_t parse_u64(const std::string& v, long line) {
    try {
        size_t used = 0;
        const unsigned long long d = std::stoull(v, &used);
        if (used != v.size()) fail(line, "trailing characters in integer '" + v + "'");
        return d;
    } catch (const InvalidInput&) {
        throw;
    } catch (const std::exception&) {
        fail(line, "not an unsigned integer: '" + v + "'");
    }
}

template <class T, class Parse>
std::vector<T> parse_list(const std::string& v, long line, Parse parse) {
    std::vector<T> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) fail(line, "empty list element");
        out.push_back(parse(item, line));
    }
    if (out.empty()) fail(line, "empty list");
    return out;
}

template <class T>
std::string join(const std::vector<T>& xs) {
    std::string out;
    for (size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ",";
        if constexpr (std::is_same_v<T, double>)
            out += format_double(xs[i]);
        else
            out += std::to_string(xs[i]);
    }
    return out;
}

bool one_of(const std::string& v, std::initializer_list<const char*> opts) {
    return std::any_of(opts.begin(), opts.end(), [&](const char* o) { return v == o; });
}

} // namespace

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    std::stringstream ss(text);
    std::string raw;
    long line = 0;
    while (std::getline(ss, raw)) {
        ++line;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw = raw.substr(0, hash);
        const std::string stripped = trim(raw);
        if (stripped.empty()) continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) fail(line, "expected 'key = value'");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string val = trim(stripped.substr(eq + 1));
        if (key.empty()) fail(line, "missing key");
        if (val.empty()) fail(line, "missing value for key '" + key + "'");

        if (key == "experiment") cfg.experiment = val;
        else if (key == "n") cfg.n = static_cast<int>(parse_long(val, line));
        else if (key == "p") cfg.p = static_cast<int>(parse_long(val, line));
        else if (key == "T") cfg.T = parse_long(val, line);
        else if (key == "sigma2") cfg.sigma2 = parse_double(val, line);
        else if (key == "activation") cfg.activation = val;
        else if (key == "leakage") cfg.leakage = parse_double(val, line);
        else if (key == "leakage_grid")
            cfg.leakage_grid = parse_list<double>(val, line, parse_double);
        else if (key == "sigma2_grid")
            cfg.sigma2_grid = parse_list<double>(val, line, parse_double);
        else if (key == "T_grid") cfg.T_grid = parse_list<long>(val, line, parse_long);
        else if (key == "reps") cfg.reps = static_cast<int>(parse_long(val, line));
        else if (key == "trials") cfg.trials = static_cast<int>(parse_long(val, line));
        else if (key == "fig2_reps") cfg.fig2_reps = static_cast<int>(parse_long(val, line));
        else if (key == "fig2_horizon") cfg.fig2_horizon = parse_long(val, line);
        else if (key == "dare_noise_var") cfg.dare_noise_var = parse_double(val, line);
        else if (key == "excitation_std") cfg.excitation_std = parse_double(val, line);
        else if (key == "eta") cfg.eta = parse_double(val, line);
        else if (key == "gd_iters") cfg.gd_iters = parse_long(val, line);
        else if (key == "churn") cfg.churn = parse_long(val, line);
        else if (key == "seed") cfg.seed = parse_u64(val, line);
        else if (key == "out") cfg.out = val;
        else if (key == "workers") cfg.workers = static_cast<int>(parse_long(val, line));
        else if (key == "form") cfg.form = val;
        else fail(line, "unknown key '" + key + "'");
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
    std::string out;
    auto kv = [&out](const std::string& k, const std::string& v) {
        out += k + " = " + v + "\n";
    };
    if (!cfg.experiment.empty()) kv("experiment", cfg.experiment);
    kv("n", std::to_string(cfg.n));
    kv("p", std::to_string(cfg.p));
    kv("T", std::to_string(cfg.T));
    kv("sigma2", format_double(cfg.sigma2));
    kv("activation", cfg.activation);
    kv("leakage", format_double(cfg.leakage));
    kv("leakage_grid", join(cfg.leakage_grid));
    kv("sigma2_grid", join(cfg.sigma2_grid));
    kv("T_grid", join(cfg.T_grid));
    kv("reps", std::to_string(cfg.reps));
    kv("trials", std::to_string(cfg.trials));
    kv("fig2_reps", std::to_string(cfg.fig2_reps));
    kv("fig2_horizon", std::to_string(cfg.fig2_horizon));
    kv("dare_noise_var", format_double(cfg.dare_noise_var));
    kv("excitation_std", format_double(cfg.excitation_std));
    kv("eta", format_double(cfg.eta));
    kv("gd_iters", std::to_string(cfg.gd_iters));
    kv("churn", std::to_string(cfg.churn));
    kv("seed", std::to_string(cfg.seed));
    kv("out", cfg.out);
    kv("workers", std::to_string(cfg.workers));
    kv("form", cfg.form);
    return out;
}

void validate_config(const ExperimentConfig& cfg) {
    auto bad = [](const std::string& field, const std::string& why) {
        throw InvalidInput("config field '" + field + "': " + why);
    };
    if (!cfg.experiment.empty() &&
        !one_of(cfg.experiment,
                {"fig1a", "fig1b", "fig1c", "fig2", "table1", "identify", "verify",
                 "simulate"}))
        bad("experiment", "unknown experiment '" + cfg.experiment + "'");
    if (cfg.n < 1) bad("n", "must be >= 1");
    if (cfg.p < 1) bad("p", "must be >= 1");
    if (cfg.T < 2) bad("T", "must be >= 2");
    if (cfg.sigma2 < 0.0) bad("sigma2", "must be >= 0");
    if (!one_of(cfg.activation, {"identity", "leaky_relu", "softplus"}))
        bad("activation", "unknown activation '" + cfg.activation + "'");
    if (cfg.leakage < 0.0 || cfg.leakage > 1.0) bad("leakage", "must lie in [0,1]");
    if (cfg.leakage_grid.empty()) bad("leakage_grid", "must be non-empty");
    for (double l : cfg.leakage_grid)
        if (l < 0.0 || l > 1.0) bad("leakage_grid", "entries must lie in [0,1]");
    if (cfg.sigma2_grid.empty()) bad("sigma2_grid", "must be non-empty");
    for (double s : cfg.sigma2_grid)
        if (s < 0.0) bad("sigma2_grid", "entries must be >= 0");
    if (cfg.T_grid.empty()) bad("T_grid", "must be non-empty");
    for (long t : cfg.T_grid)
        if (t < 2) bad("T_grid", "entries must be >= 2");
    if (cfg.reps < 1) bad("reps", "must be >= 1");
    if (cfg.trials < 1) bad("trials", "must be >= 1");
    if (cfg.fig2_reps < 1) bad("fig2_reps", "must be >= 1");
    if (cfg.fig2_horizon < 1) bad("fig2_horizon", "must be >= 1");
    if (cfg.dare_noise_var < 0.0) bad("dare_noise_var", "must be >= 0");
    if (cfg.excitation_std < 0.0) bad("excitation_std", "must be >= 0");
    if (cfg.eta < 0.0) bad("eta", "must be >= 0 (0 selects the 0.1/T rule)");
    if (cfg.gd_iters < 0) bad("gd_iters", "must be >= 0 (0 selects run-to-plateau)");
    if (cfg.churn < 1) bad("churn", "must be >= 1");
    if (cfg.churn >= cfg.T) bad("churn", "must be < T");
    if (cfg.workers < 1) bad("workers", "must be >= 1");
    if (cfg.out.empty()) bad("out", "must be non-empty");
    if (!one_of(cfg.form, {"linear", "premix", "postadd", "arx"}))
        bad("form", "unknown system form '" + cfg.form + "'");
}

} // namespace systraj
